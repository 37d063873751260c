"""Exact rational bookkeeping for the vertical-vector counting argument.

Everything here is integer or Fraction arithmetic; no floats leak in.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from fractions import Fraction

from .certificate import Certificate, Verdict


def _half(tau2: int) -> int:
    return (tau2 - 1) // 2


def _check_tau2(tau2: int) -> None:
    if tau2 < 3:
        raise ValueError(f"tau2 must be >= 3, got {tau2}")


def counting_floors(tau1: int, tau2: int) -> tuple[int, int]:
    """Lower bounds on the number of depth-3 pullbacks landing in the
    vertical cone, starting from a vertical (v1) or horizontal (v2) vector."""
    _check_tau2(tau2)
    if tau1 < 1:
        raise ValueError("tau1 must be positive")
    h = _half(tau2)
    T = tau2 - 1
    r = T - h
    v1 = T**3 + T * (3 * h + 1) - h * h
    v2 = T**3 - r**3 + T * (3 * h + 1) - h * h
    k = tau1**3
    return k * v1, k * v2


def contraction_c(tau2: int) -> Fraction:
    _check_tau2(tau2)
    return Fraction(tau2 - 1 - _half(tau2), tau2) ** 3


def offset_e(tau2: int) -> Fraction:
    _check_tau2(tau2)
    return Fraction(counting_floors(1, tau2)[1], tau2**3)


def ratio_p(tau2: int) -> Fraction:
    """Limit proportion of vertical pullbacks: v2 / (tau2^3 - (v1 - v2))."""
    v1, v2 = counting_floors(1, tau2)
    return Fraction(v2, tau2**3 - (v1 - v2))


def proof_terms(tau2: int) -> tuple[int, int]:
    """N and D with p = 1 + N/D."""
    _check_tau2(tau2)
    h = _half(tau2)
    T = tau2 - 1
    N = -3 * tau2**2 + 3 * tau2 - 1 + T * (3 * h + 1) - h * h
    D = tau2**3 - (T - h) ** 3
    return N, D


def a_n_bound(tau2: int, n: int) -> Fraction:
    """p(1 - c^n), the floor for the vertical fraction after n blocks."""
    return ratio_p(tau2) * (1 - contraction_c(tau2) ** n)


def certify_p_bounds(tau2_max: int) -> Certificate:
    if tau2_max < 3:
        raise ValueError("tau2_max must be >= 3")
    half, two_thirds = Fraction(1, 2), Fraction(2, 3)
    worst_half = worst_23 = None
    for tau2 in range(3, tau2_max + 1):
        p = ratio_p(tau2)
        if not p > half:
            return Certificate.refuted(
                "p(tau2) > 1/2", {"tau2": tau2, "p": str(p)})
        if tau2 >= 5 and not p > two_thirds:
            return Certificate.refuted(
                "p(tau2) > 2/3 for tau2 >= 5", {"tau2": tau2, "p": str(p)})
        m = p - half
        if worst_half is None or m < worst_half[1]:
            worst_half = (tau2, m)
        if tau2 >= 5:
            m = p - two_thirds
            if worst_23 is None or m < worst_23[1]:
                worst_23 = (tau2, m)
    margins = {"p_minus_half": {"tau2": worst_half[0], "value": str(worst_half[1])}}
    if worst_23:
        margins["p_minus_two_thirds"] = {"tau2": worst_23[0], "value": str(worst_23[1])}
    return Certificate(Verdict.PROVEN, "p(tau2) > 1/2 and > 2/3 from tau2 = 5",
                       margins=margins, provenance={"tau2_max": tau2_max})


@dataclass(frozen=True)
class CombinatoricsTable:
    tau1: int
    tau2: int
    v1: int
    v2: int
    vv_d: int
    vh_d: int
    vv_d2: int
    vh_d2: int
    c: Fraction
    e: Fraction
    p: Fraction
    c1: Fraction
    c2: Fraction
    I1: Fraction
    I2: Fraction
    J: Fraction
    S: Fraction
    E1: Fraction
    E2: Fraction
    E3: Fraction
    E3_literal: Fraction

    @property
    def d(self) -> int:
        return self.tau1 * self.tau2

    def as_row(self) -> dict[str, str]:
        return {f.name: _render(getattr(self, f.name)) for f in fields(self)}


def _render(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return str(v)


def coefficient_table(tau1: int, tau2: int) -> CombinatoricsTable:
    _check_tau2(tau2)
    if tau1 < 1 or tau2 % tau1:
        raise ValueError("tau1 must divide tau2")
    h = _half(tau2)
    T = tau2 - 1
    d = tau1 * tau2
    v1, v2 = counting_floors(tau1, tau2)
    c, e, p = contraction_c(tau2), offset_e(tau2), ratio_p(tau2)
    c1 = 1 - Fraction(1, tau2)
    c2 = -(1 - Fraction(h, tau2))
    vv_d, vh_d = tau1 * T, tau1 * h
    vv_d2 = tau1**2 * (T * T + h)
    vh_d2 = tau1**2 * (h * (2 * tau2 - 1 - h) + h)
    tail = Fraction(2 * d * d - 1, d * d) * c2 - Fraction(1, d * d * tau2)
    gap = c1 - c2
    I1 = c1 + gap * (Fraction(vv_d, d) + Fraction(vv_d2, d * d)) + tail
    I2 = c2 + gap * (Fraction(vh_d, d) + Fraction(vh_d2, d * d)) + tail
    J = p * I1 + (1 - p) * I2
    E1 = p * gap
    E2 = gap * (p * Fraction(vv_d, d) + (1 - p) * Fraction(vh_d, d))
    # second-order term taken straight from the counts; see E3_literal
    E3 = gap * (p * Fraction(vv_d2, d * d) + (1 - p) * Fraction(vh_d2, d * d))
    E3_literal = gap * Fraction(1, tau2**2) * (
        p * (T * T - h * (2 * T - h)) + h * (2 * tau2 - 1 - h))
    S = E1 + E2 + E3 + 3 * c2
    return CombinatoricsTable(tau1, tau2, v1, v2, vv_d, vh_d, vv_d2, vh_d2,
                              c, e, p, c1, c2, I1, I2, J, S, E1, E2, E3, E3_literal)


def certify_J_positive(tau2_max: int, log: list | None = None) -> Certificate:
    """Exact check of S > 0 and J > 0 for every 3 <= tau2 <= tau2_max.

    If ``log`` is a list, one (tau2, S, J) tuple per row is appended.
    """
    if tau2_max < 3:
        raise ValueError("tau2_max must be >= 3")
    worst = None
    for tau2 in range(3, tau2_max + 1):
        row = coefficient_table(1, tau2)
        if log is not None:
            log.append((tau2, row.S, row.J))
        if not (row.S > 0 and row.J > 0):
            return Certificate.refuted(
                "S(tau2) > 0 and J(tau2) > 0",
                {"tau2": tau2, "S": _render(row.S), "J": _render(row.J)})
        if worst is None or row.J < worst[1]:
            worst = (tau2, row.J)
    return Certificate(Verdict.PROVEN, "S(tau2) > 0 and J(tau2) > 0",
                       margins={"min_J": {"tau2": worst[0], "value": _render(worst[1])}},
                       provenance={"tau2_max": tau2_max})


@dataclass(frozen=True)
class ThresholdReport:
    m: int
    delta0: Fraction
    lhs: Fraction
    rhs: Fraction
    qualifies: bool
    T: int
    # exponents of t in delta(t) = 2 t^a, r = t^b, theta1 = t^c, theta2 = t^e
    t_powers: dict


def family_thresholds(m: int, delta0) -> ThresholdReport:
    if m < 3:
        raise ValueError("m must be >= 3")
    d0 = Fraction(str(delta0)) if isinstance(delta0, float) else Fraction(delta0)
    if not 0 < d0 < 1:
        raise ValueError("delta0 must lie in (0, 1)")
    h = (m - 1) // 2
    lhs = Fraction(h - 1, h + 1)
    rhs = 1 - d0
    T = (1 + 7 * d0) // (28 * d0)
    powers = {"delta": ("2", "-3/10"), "r": ("1", "-7"),
              "theta1": ("1", "-2/5"), "theta2": ("1", "-3/5")}
    return ThresholdReport(m, d0, lhs, rhs, lhs > rhs, int(T), powers)


def table_rows(tau2_max: int, tau1: int = 1):
    for tau2 in range(max(3, tau1), tau2_max + 1):
        if tau2 % tau1 == 0:
            yield coefficient_table(tau1, tau2).as_row()
