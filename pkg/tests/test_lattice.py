from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_min_norm
from torusnuh.lattice import (IntegerMatrix2, SingularMatrixError, admissible_alpha,
                              classify_matrix, cone_norm_constants, elementary_divisors,
                              minimal_admissible_alpha, preimage_lattice, solve_base)

M = IntegerMatrix2.from_rows
REF = M([[3, 4], [0, 1]])


@pytest.mark.parametrize("rows,expected", [
    ([[3, 4], [0, 1]], (1, 3, 3)),
    ([[2, 0], [0, 2]], (2, 2, 4)),
    ([[2, 1], [0, 2]], (1, 4, 4)),
    ([[41, 40], [0, 1]], (1, 41, 41)),
])
def test_elementary_divisors(rows, expected):
    assert elementary_divisors(M(rows)) == expected


def test_singular_rejected():
    with pytest.raises(SingularMatrixError):
        elementary_divisors(M([[1, 2], [2, 4]]))


@pytest.mark.parametrize("rows,expected", [
    ([[3, 4], [0, 1]], ("non_homothety", "has_pm1_eigenvalue")),
    ([[2, 1], [1, 1]], ("non_homothety", "hyperbolic_spectrum")),
    ([[0, 1], [-3, 0]], ("non_homothety", "complex_spectrum")),
    ([[2, 0], [0, 2]], ("homothety", "hyperbolic_spectrum")),
])
def test_classify(rows, expected):
    assert classify_matrix(M(rows)) == expected


def test_preimage_lattice_examples():
    lat = preimage_lattice(REF)
    assert lat.offsets == tuple((Fraction(i, 3), Fraction(0)) for i in range(3))
    assert lat.x_spacing_regular
    lat = preimage_lattice(M([[2, 0], [0, 2]]))
    assert set(lat.offsets) == {(Fraction(i, 2), Fraction(j, 2)) for i in (0, 1) for j in (0, 1)}
    assert lat.x_spacing_regular
    assert preimage_lattice(M([[2, 1], [1, 1]])).offsets == ((0, 0),)


matrices = st.tuples(*[st.integers(-6, 6)] * 4).filter(
    lambda r: 2 <= abs(r[0] * r[3] - r[1] * r[2]) <= 12)


@settings(max_examples=80, deadline=None)
@given(matrices)
def test_lattice_invariants(r):
    E = M([[r[0], r[1]], [r[2], r[3]]])
    tau1, tau2, d = elementary_divisors(E)
    assert tau1 * tau2 == d and tau2 % tau1 == 0
    lat = preimage_lattice(E)
    assert len(lat.offsets) == d
    # E maps every offset to an integer vector
    for x, y in lat.offsets:
        assert (r[0] * x + r[1] * y).denominator == 1
        assert (r[2] * x + r[3] * y).denominator == 1


def test_solve_base_exact():
    y = solve_base(REF, (Fraction(1, 2), Fraction(1, 5)))
    assert 3 * y[0] + 4 * y[1] == Fraction(1, 2) and y[1] == Fraction(1, 5)


def test_admissible_alpha():
    assert admissible_alpha(REF, 1.5).proven
    assert admissible_alpha(REF, 0.9).refuted_
    E = M([[1, 1], [-1, 2]])
    verdicts = {a: admissible_alpha(E, a).proven for a in (1.1, 1.5, 2, 4)}
    assert verdicts == {1.1: False, 1.5: False, 2: False, 4: True}
    a_min = minimal_admissible_alpha(E)
    assert a_min == pytest.approx((3 + 13**0.5) / 2, abs=1e-6)


def test_cone_constants_examples():
    cc = cone_norm_constants(REF, 1.5)
    assert cc.e_v == Fraction(10, 9)
    assert cc.e_h == Fraction(1, 7)
    assert cone_norm_constants(M([[1, 1], [0, 1]]), 2).e_v <= 1


@pytest.mark.parametrize("rows,alpha", [([[3, 4], [0, 1]], 1.5), ([[3, 4], [0, 1]], 3),
                                        ([[2, 1], [1, 1]], 2), ([[5, 8], [0, 1]], 1.25),
                                        ([[1, 1], [-1, 2]], 4)])
def test_cone_constants_match_grid(rows, alpha):
    E = M(rows)
    cc = cone_norm_constants(E, alpha)
    Minv = E.inverse()
    assert float(cc.e_v) == pytest.approx(grid_min_norm(Minv, alpha, "vertical"), abs=1e-4)
    assert float(cc.e_h) == pytest.approx(grid_min_norm(Minv, alpha, "horizontal"), abs=1e-4)
    assert float(cc.e_v) <= grid_min_norm(Minv, alpha, "vertical") + 1e-12
    assert float(cc.e_h) <= grid_min_norm(Minv, alpha, "horizontal") + 1e-12
