"""Cone fields, the backward-expansion functional I and vertical counts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, Verdict
from .combinatorics import a_n_bound, counting_floors
from .lattice import IntegerMatrix2, cone_norm_constants
from .torus_map import BudgetExceeded, MapSpec, preimage_tree, preimages, pull_vectors


def max_norm(w) -> np.ndarray:
    return np.abs(np.asarray(w, dtype=float)).max(axis=-1)


def normalize(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w / max_norm(w)[..., None]


def in_cone(u, alpha: float, which: str = "horizontal"):
    """Horizontal: |u2| <= alpha |u1| (boundary included); vertical is the rest."""
    u = np.asarray(u, dtype=float)
    if np.any(np.all(u == 0, axis=-1)):
        raise ValueError("zero vector has no cone")
    horiz = np.abs(u[..., 1]) <= alpha * np.abs(u[..., 0])
    if which == "horizontal":
        return horiz
    if which == "vertical":
        return ~horiz
    raise ValueError(which)


def star_sign(u, E: IntegerMatrix2) -> str:
    """Sign of -w1/w2 for w = E^{-1}u; zero and infinity count as both."""
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("zero vector")
    w1, w2 = E.inverse() @ u
    if abs(w1) < 1e-15 * abs(w2) or abs(w2) < 1e-15 * abs(w1):
        return "both"
    return "plus" if -w1 / w2 > 0 else "minus"


def _sample_x(profile, rng, n: int, region: int) -> np.ndarray:
    """Uniform x in the critical region (region=0) or in G- / G+ (-1 / +1)."""
    if region == 0:
        pieces = [(a, b) for a, b in profile.windows()]
    else:
        pieces = [(a, b) for a, b, sg in profile.good_intervals() if sg == region and b > a]
    lens = np.array([b - a for a, b in pieces])
    k = rng.choice(len(pieces), size=n, p=lens / lens.sum())
    lo = np.array([pieces[i][0] for i in k])
    return np.mod(lo + rng.random(n) * lens[k], 1.0)


def _vertical_dirs(alpha: float, rng, n: int) -> np.ndarray:
    u1 = np.concatenate([[0.0, 1 / alpha, -1 / alpha], rng.uniform(-1 / alpha, 1 / alpha, n)])
    return np.stack([u1, np.ones_like(u1)], axis=-1)


def _horizontal_dirs(alpha: float, rng, n: int) -> np.ndarray:
    side = np.stack([np.ones(n), rng.uniform(-1, 1, n)], axis=-1)
    top = rng.uniform(1 / alpha, 1, n) * rng.choice([-1, 1], n)
    cap = np.stack([top, np.ones(n)], axis=-1)
    fixed = np.array([[1, 0], [1, 1], [1, -1], [1 / alpha, 1], [-1 / alpha, 1]])
    return np.concatenate([fixed, side, cap])


def check_cone_estimates(spec: MapSpec, alpha: float, n_samples: int = 10_000, seed: int = 0,
                         n_dirs: int = 16) -> Certificate:
    """Sampled check of the four backward cone estimates on the good and critical regions."""
    prof, t, E = spec.profile, spec.t, spec.E
    a, b = prof.slope_floor, prof.slope_ceil
    alpha = float(alpha)
    if not t > 2 * alpha / a:
        raise ValueError(f"need t > 2 alpha / a = {2 * alpha / a}")
    cc = cone_norm_constants(E, alpha)
    ev, eh = float(cc.e_v), float(cc.e_h)
    rng = np.random.default_rng(seed)
    per = max(n_samples // 3, 1)
    pts = {r: np.stack([_sample_x(prof, rng, per, r), rng.random(per)], axis=-1)
           for r in (-1, 0, 1)}
    V = _vertical_dirs(alpha, rng, n_dirs)
    H = _horizontal_dirs(alpha, rng, n_dirs)
    claim = f"backward cone estimates at t={t}, alpha={alpha}"
    margins: dict = {}
    rtol = 1e-12

    def pull(P, U):
        # all pairs (point, vector)
        PP = np.repeat(P, len(U), axis=0)
        UU = np.tile(U, (len(P), 1))
        return PP, UU, pull_vectors(spec, PP, UU)

    def fail(tag, PP, UU, W, mask):
        i = int(np.argmax(mask))
        return Certificate.refuted(claim, {"property": tag, "point": PP[i], "u": UU[i],
                                           "pulled": W[i]}, margins=margins)

    bound_G = ev * (a - alpha / t) * t / alpha
    bound_C = ev / alpha
    for r in (-1, 1, 0):
        PP, UU, W = pull(pts[r], V)
        nw = max_norm(W)
        if r:
            cone_m = (np.abs(W[:, 1]) - alpha * np.abs(W[:, 0])) / nw
            margins.setdefault("vertical_cone_margin", math.inf)
            margins["vertical_cone_margin"] = min(margins["vertical_cone_margin"], float(cone_m.min()))
            if (cone_m <= 0).any():
                return fail("vertical_stays_vertical", PP, UU, W, cone_m <= 0)
            ratio = nw / bound_G
            key = "vertical_growth_good_ratio"
        else:
            ratio = nw / bound_C
            key = "vertical_growth_critical_ratio"
        margins[key] = min(margins.get(key, math.inf), float(ratio.min()))
        if (ratio < 1 - rtol).any():
            return fail("vertical_growth", PP, UU, W, ratio < 1 - rtol)

    stars = np.array([star_sign(u, E) for u in H])
    low = eh / ((b + 1 / t) * t)
    for r in (-1, 1, 0):
        PP, UU, W = pull(pts[r], H)
        S = np.tile(stars, len(pts[r]))
        nw = max_norm(W)
        if r:
            match = (S == "both") | (S == ("plus" if r == 1 else "minus"))
            vm = (np.abs(W[:, 1]) - alpha * np.abs(W[:, 0])) / nw
            if match.any():
                margins["turned_vertical_margin"] = min(margins.get("turned_vertical_margin", math.inf),
                                                float(vm[match].min()))
                bad = match & (vm <= 0)
                if bad.any():
                    return fail("horizontal_turns_vertical", PP, UU, W, bad)
                ratio = nw[match] / eh
                margins["horizontal_growth_matching_ratio"] = min(margins.get("horizontal_growth_matching_ratio", math.inf),
                                                float(ratio.min()))
                bad = np.zeros_like(match)
                bad[match] = ratio < 1 - rtol
                if bad.any():
                    return fail("horizontal_growth", PP, UU, W, bad)
        ratio = nw / low
        margins["horizontal_growth_ratio"] = min(margins.get("horizontal_growth_ratio", math.inf),
                                         float(ratio.min()))
        if (ratio < 1 - rtol).any():
            return fail("horizontal_growth", PP, UU, W, ratio < 1 - rtol)
    margins.update(e_v=ev, e_h=eh, a=a, b=b, vertical_growth_good_bound=bound_G)
    return Certificate(Verdict.PROVEN, claim, margins=margins,
                       provenance={"samples": 3 * per, "directions": len(V) + len(H)})


# ---------------------------------------------------------------------------
# backward expansion functional

def _pull_path(spec: MapSpec, paths: np.ndarray, u) -> tuple[np.ndarray, np.ndarray]:
    """Pull u back along each path; returns (log norm, final unit vector)."""
    m, n1 = paths.shape[:2]
    w = np.broadcast_to(np.asarray(u, dtype=float), (m, 2)).copy()
    logs = np.zeros(m)
    for i in range(1, n1):
        w = pull_vectors(spec, paths[:, i], w)
        nw = max_norm(w)
        logs += np.log(nw)
        w /= nw[:, None]
    return logs, w


def _check_unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if abs(max_norm(u) - 1) > 1e-12:
        raise ValueError("u must have unit max norm")
    return u


def I_value(spec: MapSpec, p, u, n: int, budget: int = 10**7) -> float:
    """Average over the d^n backward branches of log |(Df^n)^{-1} u|."""
    u = _check_unit(u)
    if n == 0:
        return 0.0
    tree = preimage_tree(spec, p, n, budget)
    total, count = 0.0, 0
    for paths in tree.chunks():
        logs, _ = _pull_path(spec, paths, u)
        total += logs.sum()
        count += len(paths)
    # each branch carries weight 1/|det Df^n| = d^-n
    assert count == spec.d**n
    return total / count


def backward_batch(spec: MapSpec, pts, vecs, depth: int, budget: int = 10**7):
    """Breadth-first pullback of many (point, vector) roots at once.

    Returns leaf points, unit leaf vectors, accumulated logs and the root
    index of each leaf (leaves of one root are contiguous, in tree order).
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    vecs = np.asarray(vecs, dtype=float).reshape(-1, 2)
    need = len(pts) * spec.d**depth
    if need > budget:
        raise BudgetExceeded(f"needs {need} leaves, budget is {budget}")
    root = np.arange(len(pts))
    logs = np.log(max_norm(vecs))
    w = vecs / max_norm(vecs)[:, None]
    P = pts
    for _ in range(depth):
        pre = preimages(spec, P)
        m, d = pre.shape[:2]
        P = pre.reshape(m * d, 2)
        w = np.repeat(w, d, axis=0)
        logs = np.repeat(logs, d)
        root = np.repeat(root, d)
        w = pull_vectors(spec, P, w)
        nw = max_norm(w)
        logs += np.log(nw)
        w /= nw[:, None]
    return P, w, logs, root


def I_values_batch(spec: MapSpec, pts, vecs, n: int, budget: int = 10**7) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if n == 0:
        return np.zeros(len(pts))
    _, _, logs, root = backward_batch(spec, pts, normalize(vecs), n, budget)
    return np.bincount(root, weights=logs, minlength=len(pts)) / spec.d**n


def convexity_check(spec: MapSpec, p, u, n: int, k: int, budget: int = 10**7,
                    tol: float = 1e-9) -> Certificate:
    """Compare I(p,u;f^{kn}) with the sum over blocks of averaged I(., ., f^k)."""
    u = _check_unit(u)
    if spec.d ** (n * k) > budget:
        raise BudgetExceeded("convexity check exceeds budget")
    lhs = I_value(spec, p, u, n * k, budget)
    rhs = 0.0
    for i in range(n):
        P, W, _, _ = backward_batch(spec, [p], [u], k * i, budget)
        rhs += I_values_batch(spec, P, W, k, budget).sum() / spec.d ** (k * i)
    claim = f"block decomposition of I at n={n}, k={k}"
    diff = abs(lhs - rhs)
    if diff > tol * max(1.0, abs(lhs)):
        return Certificate.refuted(claim, {"lhs": lhs, "rhs": rhs, "diff": diff})
    return Certificate(Verdict.PROVEN, claim, margins={"lhs": lhs, "rhs": rhs, "diff": diff})


@dataclass
class BackwardStats:
    n: int
    leaves: int
    g_n: int
    b_n: int
    a_n: float
    I_value: float
    certificate: Certificate | None = None


def _vertical_count(spec, p, u, alpha, depth):
    P, W, logs, _ = backward_batch(spec, [p], [u], depth)
    vert = np.abs(W[:, 1]) > alpha * np.abs(W[:, 0])
    return int(vert.sum()), len(W), float(logs.mean())


def count_vertical(spec: MapSpec, p, u, alpha: float) -> BackwardStats:
    """Depth-3 pullbacks of u landing in the vertical cone, against the floor."""
    u = _check_unit(u)
    alpha = float(alpha)
    g, total, I = _vertical_count(spec, p, u, alpha, 3)
    v1, v2 = counting_floors(spec.E.tau1, spec.E.tau2)
    vertical = bool(in_cone(u, alpha, "vertical"))
    floor = v1 if vertical else v2
    claim = f"depth-3 vertical pullbacks >= {floor} ({'vertical' if vertical else 'horizontal'} u)"
    if g < floor:
        cert = Certificate.refuted(claim, {"point": p, "u": u, "g": g, "floor": floor})
    else:
        cert = Certificate(Verdict.PROVEN, claim, margins={"g": g, "floor": floor})
    return BackwardStats(1, total, g, total - g, g / total, I, cert)


def a_n_sequence(spec: MapSpec, p, u, n_max: int, alpha: float, budget: int = 10**7):
    """Fractions a_n of vertical pullbacks at depth 3n, with the floor p(1-c^n)."""
    u = _check_unit(u)
    if spec.d ** (3 * n_max) > budget:
        raise BudgetExceeded("a_n sequence exceeds budget")
    rows = []
    for n in range(n_max + 1):
        if n == 0:
            g, total = int(bool(in_cone(u, alpha, "vertical"))), 1
        else:
            g, total, _ = _vertical_count(spec, p, u, float(alpha), 3 * n)
        bound = a_n_bound(spec.E.tau2, n)
        rows.append({"n": n, "g_n": g, "leaves": total, "a_n": g / total,
                     "bound": bound, "ok": g / total >= float(bound)})
    return rows


def r2_points(n: int) -> np.ndarray:
    """Additive-recurrence low-discrepancy points in the unit square."""
    g = 1.32471795724474602596  # plastic number
    i = np.arange(1, n + 1)[:, None]
    return np.mod(0.5 + i * np.array([1 / g, 1 / g**2]), 1.0)


def sample_directions(alpha: float, n_dirs: int = 16) -> np.ndarray:
    """Axis and cone-boundary directions plus evenly spread angles."""
    base = np.arange(n_dirs - 2) * np.pi / (n_dirs - 2)
    ang = np.concatenate([base, [math.atan(alpha), math.pi - math.atan(alpha)]])
    return normalize(np.stack([np.cos(ang), np.sin(ang)], axis=-1))


@dataclass
class CChiReport:
    value: float
    n: int
    n_samples: int
    argmin_point: np.ndarray
    argmin_u: np.ndarray


def c_chi_lower(spec: MapSpec, n: int, n_points: int = 512, n_dirs: int = 16,
                alpha: float = 1.5, budget: int = 10**8) -> CChiReport:
    """Smallest (1/n) I(p, u; f^n) over a fixed low-discrepancy sample."""
    P = r2_points(n_points)
    U = sample_directions(alpha, n_dirs)
    PP = np.repeat(P, len(U), axis=0)
    UU = np.tile(U, (len(P), 1))
    vals = I_values_batch(spec, PP, UU, n, budget) / n
    i = int(np.argmin(vals))
    return CChiReport(float(vals[i]), n, len(PP), PP[i], UU[i])
