import math

import numpy as np
import pytest

from torusnuh.config import RunConfig
from torusnuh.lattice import IntegerMatrix2
from torusnuh.lyapunov import (PreOrbitSampler, backward_exponent, domination_detector,
                               family_estimates, forward_exponent, nuh_verdict)
from torusnuh.profile import build_profile
from torusnuh.torus_map import MapSpec, apply, family_map, torus_distance

REF = IntegerMatrix2(3, 4, 0, 1)
CAT = IntegerMatrix2(2, 1, 1, 1)


def linear(E):
    return MapSpec(E, build_profile(3), 0.0)


def test_linear_exponents():
    pts = np.random.default_rng(0).random((10, 2))
    est = forward_exponent(linear(REF), pts, 2000)
    assert np.allclose(est.chi_plus, math.log(3), atol=1e-3)
    assert np.allclose(est.chi_minus, 0.0, atol=1e-3)
    est = forward_exponent(linear(CAT), pts, 2000)
    assert np.allclose(est.chi_plus, math.log((3 + 5**0.5) / 2), atol=1e-3)
    assert est.log_d_residual < 1e-12


def test_exponents_sum_to_log_degree():
    est = forward_exponent(RunConfig().spec(1e3), np.random.default_rng(1).random((20, 2)), 2000)
    assert est.log_d_residual < 1e-12
    assert np.all(est.stderr > 0)


def test_sampler_paths_are_pre_orbits():
    s = PreOrbitSampler(RunConfig().spec(1e3), seed=3)
    paths = s.sample_paths((0.3, 0.4), 30, 8)
    err = torus_distance(apply(s.spec, paths[:, 1:]), paths[:, :-1])
    assert err.max() < 1e-9


def test_sampler_independent_of_batch_split():
    s = PreOrbitSampler(RunConfig().spec(1e3), seed=5)
    assert np.array_equal(s.branch_choices(10, 50)[:4], s.branch_choices(4, 50))


def test_branch_weights_uniform():
    rep = backward_exponent(PreOrbitSampler(RunConfig().spec(1e3), 0), (0.1, 0.2), 300, 50)
    frac = rep.branch_counts / rep.branch_counts.sum()
    assert np.allclose(frac, 1 / 3, atol=0.02)


def test_backward_linear_rate_vanishes():
    rep = backward_exponent(PreOrbitSampler(linear(REF), 0), (0.1, 0.2), 2000, 5, u=(0.0, 1.0))
    assert abs(rep.median) < 2e-3


def test_backward_matches_forward():
    spec = RunConfig().spec(1e3)
    rep = backward_exponent(PreOrbitSampler(spec, 0), (0.1, 0.2), 5000, 20)
    est = forward_exponent(spec, np.random.default_rng(2).random((20, 2)), 5000)
    assert rep.median == pytest.approx(-np.median(est.chi_minus), rel=0.05)


def test_nuh_linear_degenerate():
    assert nuh_verdict(linear(REF), 50, 5000)["nuh_fraction"] == 0.0


@pytest.mark.slow
def test_nuh_reference():
    rep = nuh_verdict(RunConfig().spec(1e3), 100, 100_000)
    assert rep["sign_fraction"] >= 0.99
    assert rep["nuh_fraction"] >= 0.99
    assert rep["max_sum_residual"] < 1e-3


def test_nuh_family_report():
    rep = nuh_verdict(family_map(41, 1, 1e4), 200, 10_000, delta0=0.1)
    assert rep["claimed_measure_bound"] == pytest.approx(0.3 / 1.7)
    assert 0 <= rep["strong_fraction"] <= 1
    assert rep["expansion_fraction"] >= 0.9


@pytest.mark.parametrize("m,k,t,proven", [(3, 2, 1e4, True), (3, 1, 1e4, True),
                                          (3, 2, 1.0, False)])
def test_family_estimates(m, k, t, proven):
    assert family_estimates(family_map(m, k, t), n_samples=500).proven is proven


def test_family_estimates_critical_zone_conflict():
    cert = family_estimates(family_map(41, 1, 1e4), n_samples=500)
    assert cert.refuted_
    assert cert.witness is not None


def test_family_estimates_precondition():
    with pytest.raises(ValueError):
        family_estimates(RunConfig().spec(1e3))


def test_domination_anosov():
    out = domination_detector(linear(CAT), M=50, n_critical=0)
    assert out["detected"]
    # singular-value gap per step is log(lambda1 / lambda2) = 4 log(golden ratio)
    gap = 4 * math.log((1 + 5**0.5) / 2)
    assert all(v == pytest.approx(gap, rel=1e-9) for v in out["min_log_gap_per_step"].values())


def test_domination_linear_triangular():
    assert domination_detector(linear(REF), M=50, n_critical=0)["detected"]


@pytest.mark.slow
def test_no_domination_on_shear():
    out = domination_detector(RunConfig().spec(1e4))
    assert not out["detected"]
    assert out["witnesses"]
