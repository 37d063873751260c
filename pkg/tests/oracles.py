"""Independent reference computations used by the tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def branching_counts(tau1: int, tau2: int, depth: int, start: str) -> int:
    """Vertical descendants at a given depth in the typed pullback model.

    Types: V (vertical), H0 (horizontal, generic), H1 (horizontal after one
    critical step), H2 (after two).  Each row lists child counts per type.
    """
    h = (tau2 - 1) // 2
    T = tau2 - 1
    rules = {
        "V": {"V": T, "H1": 1},
        "H0": {"V": h, "H0": T - h, "H1": 1},
        "H1": {"V": h, "H0": T - h, "H2": 1},
        "H2": {"V": T, "H0": 1},
    }
    pop = {start: 1}
    for _ in range(depth):
        nxt: dict[str, int] = {}
        for typ, n in pop.items():
            for child, k in rules[typ].items():
                nxt[child] = nxt.get(child, 0) + n * k * tau1
        pop = nxt
    return pop.get("V", 0)


def affine_fixed_point(v1: int, v2: int, tau2: int) -> Fraction:
    """Fixed point of a -> a v1/tau2^3 + (1 - a) v2/tau2^3."""
    n = Fraction(tau2**3)
    A, B = Fraction(v1) / n, Fraction(v2) / n
    return B / (1 - A + B)


def expanded_I(tau1: int, tau2: int, vertical: bool) -> Fraction:
    """Three-level expansion: one term per level of the depth-3 tree."""
    h = (tau2 - 1) // 2
    d = tau1 * tau2
    c1 = 1 - Fraction(1, tau2)
    c2 = -(1 - Fraction(h, tau2))
    if vertical:
        v_d, v_d2, first = tau1 * (tau2 - 1), tau1**2 * ((tau2 - 1) ** 2 + h), c1
    else:
        v_d, v_d2, first = tau1 * h, tau1**2 * (h * (2 * tau2 - 1 - h) + h), c2
    lvl1 = Fraction(v_d * c1 + (d - v_d) * c2, d)
    lvl2 = (v_d2 * c1 + (d * d - 1 - v_d2) * c2 - Fraction(1, tau2)) / (d * d)
    return first + lvl1 + lvl2


def grid_min_norm(Minv: np.ndarray, alpha: float, which: str, n: int = 100_000) -> float:
    """Brute-force min of |E^{-1} u|_max over unit-max-norm u in a cone."""
    s = np.linspace(-1.0, 1.0, n)
    if which == "vertical":
        u = np.concatenate([np.stack([s / alpha, np.ones(n)], -1),
                            np.stack([s / alpha, -np.ones(n)], -1)])
    else:
        u = np.concatenate([np.stack([np.ones(n), s], -1), np.stack([-np.ones(n), s], -1),
                            np.stack([s, np.ones(n)], -1)[np.abs(s) >= 1 / alpha]])
    w = u @ Minv.T
    return float(np.abs(w).max(axis=1).min())


def dense_crossing(lift: np.ndarray, per_segment: int = 50, bins: int = 2000) -> bool:
    """Does the projection to the x-circle cover every bin?"""
    a, b = lift[:-1], lift[1:]
    s = np.linspace(0, 1, per_segment)[None, :, None]
    pts = (a[:, None, :] + s * (b - a)[:, None, :]).reshape(-1, 2)
    hit = np.zeros(bins, bool)
    hit[(np.mod(pts[:, 0], 1.0) * bins).astype(int) % bins] = True
    return bool(hit.all())
