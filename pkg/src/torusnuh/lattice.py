"""Integer 2x2 matrices: divisors, spectrum type, preimage cosets, cones."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from numbers import Rational

import numpy as np

from .certificate import Certificate, Verdict


class SingularMatrixError(ValueError):
    code = "singular"


def as_fraction(v) -> Fraction:
    """Exact value of a user-supplied number; floats go through their repr
    so that 1.1 means 11/10 rather than the nearest binary double."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, (float, np.floating)):
        return Fraction(repr(float(v)))
    return Fraction(v)


@dataclass(frozen=True)
class IntegerMatrix2:
    e11: int
    e12: int
    e21: int
    e22: int

    def __post_init__(self):
        for name in ("e11", "e12", "e21", "e22"):
            v = getattr(self, name)
            if int(v) != v:
                raise ValueError(f"{name} must be an integer")
            object.__setattr__(self, name, int(v))

    @classmethod
    def from_rows(cls, rows) -> "IntegerMatrix2":
        (a, b), (c, d) = rows
        return cls(a, b, c, d)

    @property
    def det(self) -> int:
        return self.e11 * self.e22 - self.e12 * self.e21

    @property
    def tau1(self) -> int:
        return math.gcd(self.e11, self.e12, self.e21, self.e22)

    @property
    def tau2(self) -> int:
        return abs(self.det) // self.tau1

    @property
    def degree(self) -> int:
        return abs(self.det)

    @property
    def trace(self) -> int:
        return self.e11 + self.e22

    @property
    def is_homothety(self) -> bool:
        return self.e12 == 0 and self.e21 == 0 and self.e11 == self.e22

    def rows(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.e11, self.e12), (self.e21, self.e22))

    def array(self) -> np.ndarray:
        return np.array(self.rows(), dtype=float)

    def inverse_exact(self) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
        D = self.det
        if D == 0:
            raise SingularMatrixError("matrix is singular")
        return ((Fraction(self.e22, D), Fraction(-self.e12, D)),
                (Fraction(-self.e21, D), Fraction(self.e11, D)))

    def inverse(self) -> np.ndarray:
        D = self.det
        if D == 0:
            raise SingularMatrixError("matrix is singular")
        return np.array([[self.e22, -self.e12], [-self.e21, self.e11]], dtype=float) / D

    def __str__(self) -> str:
        return f"[[{self.e11},{self.e12}],[{self.e21},{self.e22}]]"


def _require_nonsingular(E: IntegerMatrix2) -> None:
    if E.det == 0:
        raise SingularMatrixError(f"singular matrix {E}: det = 0")


def elementary_divisors(E: IntegerMatrix2) -> tuple[int, int, int]:
    _require_nonsingular(E)
    return E.tau1, E.tau2, E.degree


def classify_matrix(E: IntegerMatrix2) -> tuple[str, str]:
    _require_nonsingular(E)
    kind = "homothety" if E.is_homothety else "non_homothety"
    tr, det = E.trace, E.det
    if 1 - tr + det == 0 or 1 + tr + det == 0:
        spectrum = "has_pm1_eigenvalue"
    elif tr * tr - 4 * det < 0:
        spectrum = "complex_spectrum"
    else:
        spectrum = "hyperbolic_spectrum"
    return kind, spectrum


@dataclass(frozen=True)
class PreimageLattice:
    offsets: tuple[tuple[Fraction, Fraction], ...]
    x_spacing_regular: bool

    def array(self) -> np.ndarray:
        return np.array([[float(a), float(b)] for a, b in self.offsets])


def preimage_lattice(E: IntegerMatrix2) -> PreimageLattice:
    """The |det| elements of E^{-1}Z^2 / Z^2, sorted lexicographically."""
    _require_nonsingular(E)
    (a, b), (c, d) = E.inverse_exact()
    n = E.degree
    seen = set()
    for k1, k2 in product(range(n), repeat=2):
        seen.add(((a * k1 + b * k2) % 1, (c * k1 + d * k2) % 1))
    offsets = tuple(sorted(seen))
    assert len(offsets) == n
    # tau2 equally spaced x-columns holding tau1 points each
    cols: dict[Fraction, int] = {}
    for x, _ in offsets:
        cols[x] = cols.get(x, 0) + 1
    regular = (set(cols) == {Fraction(i, E.tau2) for i in range(E.tau2)}
               and all(v == E.tau1 for v in cols.values()))
    return PreimageLattice(offsets, regular)


def solve_base(E: IntegerMatrix2, p):
    """One solution of E y = p; exact when p is rational, float otherwise."""
    if all(isinstance(v, (int, Fraction)) for v in p):
        (a, b), (c, d) = E.inverse_exact()
        x, y = Fraction(p[0]), Fraction(p[1])
        return (a * x + b * y, c * x + d * y)
    return E.inverse() @ np.asarray(p, dtype=float)


def _horizontal_strict(u1: Fraction, u2: Fraction, alpha: Fraction) -> bool:
    return abs(u2) < alpha * abs(u1)


def admissible_alpha(E: IntegerMatrix2, alpha) -> Certificate:
    """Check E^{-1} maps the closed vertical cone into the open horizontal one."""
    _require_nonsingular(E)
    if E.is_homothety or E.e12 == 0:
        raise ValueError("admissibility needs a non-homothety with e12 != 0")
    a = as_fraction(alpha)
    claim = f"E^-1 (vertical cone) inside Int(horizontal cone), alpha={a}"
    if a <= 1:
        return Certificate.refuted(claim, {"reason": "alpha must exceed 1", "alpha": a})
    (i11, i12), (i21, i22) = E.inverse_exact()
    margins = {}
    for ray in ((Fraction(1), a), (Fraction(1), -a), (Fraction(0), Fraction(1))):
        w1 = i11 * ray[0] + i12 * ray[1]
        w2 = i21 * ray[0] + i22 * ray[1]
        if not _horizontal_strict(w1, w2, a):
            return Certificate.refuted(claim, {"ray": ray, "image": (w1, w2)})
        margins[f"ray{ray}"] = a * abs(w1) - abs(w2)
    return Certificate(Verdict.PROVEN, claim, margins=margins)


def minimal_admissible_alpha(E: IntegerMatrix2, hi=1e6, tol=1e-9) -> float | None:
    """Bisection for the smallest admissible alpha below ``hi``."""
    if not admissible_alpha(E, hi).proven:
        return None
    lo = 1.0
    if admissible_alpha(E, lo + tol).proven:
        return lo + tol
    hi = float(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if admissible_alpha(E, Fraction(mid)).proven:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ConeConstants:
    alpha: Fraction
    e_v: Fraction
    e_h: Fraction

    @property
    def alpha_f(self) -> float:
        return float(self.alpha)


def _segments(alpha: Fraction, which: str):
    """Pieces of the max-norm unit square inside the closed cone, up to sign
    (alpha > 1 assumed)."""
    one = Fraction(1)
    inv = 1 / alpha
    if which == "vertical":
        return [((-inv, one), (inv, one))]
    if which == "horizontal":
        return [((one, -one), (one, one)),
                ((inv, one), (one, one)), ((-one, one), (-inv, one))]
    raise ValueError(which)


def _min_norm_on_segment(M, P, Q) -> Fraction:
    """min over s in [0,1] of |M(P + s(Q-P))|_max, all exact."""
    L0 = [M[i][0] * P[0] + M[i][1] * P[1] for i in range(2)]
    L1 = [M[i][0] * Q[0] + M[i][1] * Q[1] for i in range(2)]
    D = [L1[i] - L0[i] for i in range(2)]
    cands = {Fraction(0), Fraction(1)}
    for i in range(2):
        if D[i] != 0:
            cands.add(-L0[i] / D[i])
    for sgn in (1, -1):
        den = D[0] - sgn * D[1]
        if den != 0:
            cands.add((sgn * L0[1] - L0[0]) / den)
    best = None
    for s in cands:
        if 0 <= s <= 1:
            v = max(abs(L0[0] + s * D[0]), abs(L0[1] + s * D[1]))
            best = v if best is None or v < best else best
    return best


def cone_norm_constants(E: IntegerMatrix2, alpha) -> ConeConstants:
    """e_v, e_h: smallest max-norm of E^{-1}u over unit u in each closed cone."""
    _require_nonsingular(E)
    a = as_fraction(alpha)
    if a <= 1:
        raise ValueError("cone constants need alpha > 1")
    M = E.inverse_exact()
    ev = min(_min_norm_on_segment(M, P, Q) for P, Q in _segments(a, "vertical"))
    eh = min(_min_norm_on_segment(M, P, Q) for P, Q in _segments(a, "horizontal"))
    return ConeConstants(a, ev, eh)
