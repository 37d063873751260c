from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import affine_fixed_point, branching_counts, expanded_I
from torusnuh.combinatorics import (a_n_bound, certify_J_positive, certify_p_bounds,
                                    coefficient_table, contraction_c, counting_floors,
                                    family_thresholds, offset_e, proof_terms, ratio_p, table_rows)

F = Fraction


def test_counting_floor_values():
    assert counting_floors(1, 3) == (15, 14)
    assert counting_floors(1, 5) == (88, 80)
    v1, v2 = counting_floors(1, 4)
    assert counting_floors(2, 4) == (8 * v1, 8 * v2)


@pytest.mark.parametrize("tau1,tau2", [(1, t) for t in range(3, 40)] + [(2, 4), (3, 9), (2, 10)])
def test_counting_floors_match_branching_model(tau1, tau2):
    assert counting_floors(tau1, tau2) == (branching_counts(tau1, tau2, 3, "V"),
                                           branching_counts(tau1, tau2, 3, "H0"))


def test_p_spot_values():
    assert ratio_p(3) == F(7, 13)
    assert ratio_p(5) == F(80, 117)
    assert ratio_p(5) > F(2, 3)
    assert ratio_p(3) < F(2, 3)
    p4 = ratio_p(4)
    assert p4 == F(15, 28) and F(1, 2) < p4 < F(2, 3)


def test_c_and_e_for_three():
    assert contraction_c(3) == F(1, 27)
    assert offset_e(3) == F(14, 27)
    assert [a_n_bound(3, n) for n in range(3)] == [0, F(7, 13) * F(26, 27),
                                                   F(7, 13) * (1 - F(1, 27) ** 2)]


@pytest.mark.parametrize("tau2", range(3, 1001))
def test_p_identity(tau2):
    v1, v2 = counting_floors(1, tau2)
    p = ratio_p(tau2)
    assert p == offset_e(tau2) / (1 - contraction_c(tau2))
    assert p == affine_fixed_point(v1, v2, tau2)


def test_table_spot_values():
    tab = coefficient_table(1, 3)
    assert (tab.c1, tab.c2) == (F(2, 3), F(-2, 3))
    assert tab.I1 == 1 and tab.I2 == F(-7, 9)
    assert tab.J == F(7, 39)
    assert tab.S == F(50, 351)
    assert tab.J - tab.S == F(1, 27)
    # the literal second-order display gives a different S
    assert tab.E1 + tab.E2 + tab.E3_literal + 3 * tab.c2 == F(2, 27)


@pytest.mark.parametrize("tau1,tau2", [(1, 3), (1, 4), (1, 5), (1, 12), (2, 4), (3, 6), (5, 25)])
def test_table_matches_expansion_oracle(tau1, tau2):
    tab = coefficient_table(tau1, tau2)
    assert tab.I1 == expanded_I(tau1, tau2, True)
    assert tab.I2 == expanded_I(tau1, tau2, False)
    d = tab.d
    assert tab.J == tab.S - F(1, d * d) * (tab.c2 + F(1, tau2))
    assert tab.I1 - tab.I2 == (tab.c1 - tab.c2) * (
        1 + F(tab.vv_d - tab.vh_d, d) + F(tab.vv_d2 - tab.vh_d2, d * d))


def test_first_level_counts_match_model():
    for tau2 in range(3, 30):
        tab = coefficient_table(1, tau2)
        assert tab.vv_d == branching_counts(1, tau2, 1, "V")
        assert tab.vh_d == branching_counts(1, tau2, 1, "H0")
        assert tab.vv_d2 == branching_counts(1, tau2, 2, "V")
        # the displayed horizontal second-level count exceeds the model by h
        h = (tau2 - 1) // 2
        assert tab.vh_d2 == branching_counts(1, tau2, 2, "H0") + h


def test_table_requires_divisibility():
    with pytest.raises(ValueError):
        coefficient_table(2, 5)
    with pytest.raises(ValueError):
        coefficient_table(1, 2)


def test_certificates_small():
    assert certify_p_bounds(200).proven
    log = []
    cert = certify_J_positive(200, log)
    assert cert.proven
    assert {row[0] for row in log} >= {3, 4, 5}
    assert log[0] == (3, F(50, 351), F(7, 39))


def test_proof_bounds():
    for tau2 in range(3, 1001):
        N, D = proof_terms(tau2)
        assert 0 > N > -2 * tau2**2
        p = ratio_p(tau2)
        assert p == 1 + F(N, D)
        if tau2 >= 5:
            assert D >= 4 * (tau2**2 + 2)
    # the D bound fails for the two smallest cases
    assert proof_terms(3)[1] == 26 < 44
    assert proof_terms(4)[1] == 56 < 72


def test_thresholds():
    r = family_thresholds(41, 0.1)
    assert r.lhs == F(19, 21) and r.rhs == F(9, 10) and r.qualifies
    assert family_thresholds(41, 0.001).T == 35
    r5 = family_thresholds(5, 0.1)
    assert r5.lhs == F(1, 3) and not r5.qualifies
    with pytest.raises(ValueError):
        family_thresholds(2, 0.1)
    with pytest.raises(ValueError):
        family_thresholds(41, 1.5)


def test_table_rows_render_exact():
    rows = list(table_rows(6))
    assert [r["tau2"] for r in rows] == ["3", "4", "5", "6"]
    assert rows[0]["p"] == "7/13" and rows[0]["S"] == "50/351"


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 400), st.integers(1, 6))
def test_outputs_are_exact_rationals(tau2, n):
    tab = coefficient_table(1, tau2)
    for name in ("c", "e", "p", "c1", "c2", "I1", "I2", "J", "S", "E1", "E2", "E3"):
        assert isinstance(getattr(tab, name), Fraction)
    assert 0 < tab.c < 1
    b = a_n_bound(tau2, n)
    assert isinstance(b, Fraction) and 0 < b < tab.p
