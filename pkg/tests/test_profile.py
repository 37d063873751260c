from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusnuh.profile import (ShearProfile, build_profile,
                              default_delta, slope_bounds_report, two_point_profile)


@pytest.fixture(scope="module")
def p3():
    return build_profile(3, 1.0, 2.2, 0.02, Fraction(1, 2))


def test_tau2_three_layout(p3):
    assert p3.critical_points == tuple(Fraction(j, 4) for j in range(4))
    assert [np.sign(a) for a in p3.slopes] == [-1, 1, -1, 1]
    assert p3.slopes == pytest.approx((-2.2, 2.2, -10.648, 10.648), rel=1e-12)


def test_balance_and_periodicity(p3):
    assert abs(p3.integral_of_derivative) < 1e-12
    assert p3.s(0.0) == pytest.approx(0.5, abs=1e-15)
    assert p3.s(1 - 1e-13) == pytest.approx(0.5, abs=1e-11)


def test_derivative_at_critical_points_and_midpoints(p3):
    for j, c in enumerate(p3.critical_points):
        assert p3.ds(float(c)) == 0.0
        mid = float(c) + 0.125
        assert p3.ds(mid) == p3.slopes[j]


def test_tau2_five_ratio():
    p = build_profile(5, 1.0, 2.2, 0.01, Fraction(1, 3))
    ratio = p.slope_ceil / p.slope_floor
    # same-sign doubling gives kappa^4, not 2^5
    assert ratio == pytest.approx(2.2**4, rel=1e-12)
    mags = [abs(a) for a in p.slopes]
    for sign in (-1, 1):
        cls = [m for m, a in zip(mags, p.slopes) if np.sign(a) == sign]
        assert all(b >= 2 * a for a, b in zip(cls, cls[1:]))


def test_classify_examples(p3):
    assert p3.classify_point((1 / 8, 0.3)) == ("G-", False)
    assert p3.classify_point((1 / 4, 0.9)) == ("C", True)
    assert p3.classify_point((3 / 8, 0.1))[0] == "G+"


def test_slope_report(p3):
    rep = slope_bounds_report(p3)
    assert rep.certificate.proven
    assert rep.a == pytest.approx(2.2, rel=1e-12)
    assert rep.b == pytest.approx(10.648, rel=1e-12)


def test_construction_guards():
    with pytest.raises(ValueError):
        build_profile(2)
    with pytest.raises(ValueError):
        build_profile(3, kappa=2.0)
    with pytest.raises(ValueError):
        build_profile(3, delta=0.1)


def test_default_delta_keeps_preimages_apart():
    for tau2 in range(3, 60):
        d = default_delta(tau2)
        assert d <= 1 / (8 * (tau2 + 1))
        assert 2 * d < 1 / tau2 - 1 / (tau2 + 1) + 1e-15


def test_json_round_trip(p3):
    q = ShearProfile.from_json(p3.to_json())
    x = np.linspace(0, 1, 101)
    assert q == p3
    assert np.array_equal(q.s(x), p3.s(x))


def test_two_point_profile_windows():
    p = two_point_profile(1e4, 1, 41)
    assert p.critical_points == (0, Fraction(1, 2))
    assert p.delta == pytest.approx(2 * 1e4**-0.3)
    assert abs(p.integral_of_derivative) < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 12), st.floats(2.1, 4.0), st.integers(0, 2**31))
def test_derivatives_by_finite_differences(tau2, kappa, seed):
    p = build_profile(tau2, 1.0, kappa)
    h = 1e-6
    x = np.random.default_rng(seed).random(200) * (1 - 4 * h) + 2 * h
    # s''' jumps at the ramp ends, so stay clear of them
    edges = np.concatenate([[float(c) - p.ramp, float(c), float(c) + p.ramp]
                            for c in p.critical_points] + [[1.0, 1 - p.ramp]])
    x = x[np.min(np.abs(x[:, None] - edges[None, :]), axis=1) > 2 * h]
    fd1 = (p.s(x + h) - p.s(x - h)) / (2 * h)
    fd2 = (p.ds(x + h) - p.ds(x - h)) / (2 * h)
    scale = p.slope_ceil
    assert np.max(np.abs(fd1 - p.ds(x))) < 1e-6 * scale
    assert np.max(np.abs(fd2 - p.d2s(x))) < 1e-4 * scale / p.ramp


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 15), st.floats(2.05, 5.0))
def test_profile_invariants(tau2, kappa):
    p = build_profile(tau2, 1.0, kappa)
    assert abs(p.integral_of_derivative) < 1e-12 * p.slope_ceil
    x = np.linspace(0, 1, 5001)
    d = np.abs(p.ds(x))
    assert d.max() <= p.slope_ceil * (1 + 1e-12)
    good = p.region_code(x) != 0
    assert d[good].min() >= p.slope_floor * (1 - 1e-12)
    assert p.size_condition()
