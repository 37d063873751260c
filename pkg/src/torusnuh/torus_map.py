"""The endomorphism f_t = E o h_t of the 2-torus and its inverse branches."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .certificate import Certificate, Verdict
from .lattice import IntegerMatrix2, preimage_lattice
from .profile import ShearProfile, two_point_profile


@dataclass(frozen=True)
class MapSpec:
    E: IntegerMatrix2
    profile: ShearProfile
    t: float
    _c: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.E.det == 0:
            raise ValueError("E must be invertible")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        lat = preimage_lattice(self.E)
        self._c.update(A=self.E.array(), Ainv=self.E.inverse(),
                       offsets=lat.array(), lattice=lat)

    @property
    def d(self) -> int:
        return self.E.degree

    @property
    def lattice(self):
        return self._c["lattice"]

    def to_dict(self) -> dict:
        return {"E": [list(r) for r in self.E.rows()], "t": self.t,
                "profile": self.profile.to_dict()}


def family_map(m: int, k: int, t: float, **profile_kw) -> MapSpec:
    """E = [[m, k(m-1)], [0, 1]] with the two-critical-point profile."""
    E = IntegerMatrix2(m, k * (m - 1), 0, 1)
    return MapSpec(E, two_point_profile(t, k, m, **profile_kw), t)


def _pts(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def lift_apply(spec: MapSpec, p) -> np.ndarray:
    """f on R^2 (no reduction); a lift of f_t since s has period 1."""
    p = _pts(p)
    x, y = p[..., 0], p[..., 1]
    z = y + spec.t * spec.profile.s(x)
    A = spec._c["A"]
    return np.stack([A[0, 0] * x + A[0, 1] * z, A[1, 0] * x + A[1, 1] * z], axis=-1)


def apply(spec: MapSpec, p) -> np.ndarray:
    return np.mod(lift_apply(spec, p), 1.0)


def jacobian(spec: MapSpec, p) -> np.ndarray:
    """Df = E [[1, 0], [t s'(x), 1]], shape (..., 2, 2)."""
    p = _pts(p)
    g = spec.t * spec.profile.ds(p[..., 0])
    A = spec._c["A"]
    J = np.empty(np.shape(g) + (2, 2))
    J[..., 0, 0] = A[0, 0] + A[0, 1] * g
    J[..., 0, 1] = A[0, 1]
    J[..., 1, 0] = A[1, 0] + A[1, 1] * g
    J[..., 1, 1] = A[1, 1]
    return J


def pull_vectors(spec: MapSpec, y, w) -> np.ndarray:
    """(Df(y))^{-1} w = [[1, 0], [-t s'(y), 1]] E^{-1} w, vectorized."""
    Ai = spec._c["Ainv"]
    w = np.asarray(w, dtype=float)
    v1 = Ai[0, 0] * w[..., 0] + Ai[0, 1] * w[..., 1]
    v2 = Ai[1, 0] * w[..., 0] + Ai[1, 1] * w[..., 1]
    g = spec.t * spec.profile.ds(_pts(y)[..., 0])
    return np.stack([v1, v2 - g * v1], axis=-1)


def push_vectors(spec: MapSpec, p, w) -> np.ndarray:
    J = jacobian(spec, p)
    return np.einsum("...ij,...j->...i", J, np.asarray(w, dtype=float))


def preimages(spec: MapSpec, p) -> np.ndarray:
    """All d preimages, shape (..., d, 2), ordered by lattice offset."""
    p = _pts(p)
    base = p @ spec._c["Ainv"].T
    cand = np.mod(base[..., None, :] + spec._c["offsets"], 1.0)
    x = cand[..., 0]
    y = np.mod(cand[..., 1] - spec.t * spec.profile.s(x), 1.0)
    return np.stack([x, y], axis=-1)


def torus_distance(p, q) -> np.ndarray:
    """Max-norm distance on the torus."""
    d = np.abs(np.mod(_pts(p) - _pts(q) + 0.5, 1.0) - 0.5)
    return d.max(axis=-1)


def far_preimage(spec: MapSpec, p) -> tuple[np.ndarray, float]:
    """Preimage of p farthest from the critical region, with that distance."""
    pre = preimages(spec, p)
    dist = spec.profile.distance_to_C(pre[..., 0])
    i = int(np.argmax(dist))
    return pre[i], float(dist[i])


def preimage_distribution_check(spec: MapSpec, points) -> Certificate:
    """Region counts of preimages and the far-preimage distance at each point."""
    E, prof = spec.E, spec.profile
    if prof.tau2 is None:
        raise ValueError("needs a profile with tau2 + 1 critical points")
    h = (E.tau2 - 1) // 2
    need_good = E.tau1 * h
    far_bound = 1.0 / (8 * (spec.d + 1))
    points = _pts(points).reshape(-1, 2)
    pre = preimages(spec, points)
    code = prof.region_code(pre[..., 0])
    n_minus = (code == -1).sum(axis=1)
    n_plus = (code == 1).sum(axis=1)
    n_crit = (code == 0).sum(axis=1)
    far = prof.distance_to_C(pre[..., 0]).max(axis=1)
    bad = (n_minus < need_good) | (n_plus < need_good) | (n_crit > E.tau1) | (far <= far_bound)
    claim = "preimage region counts and far-preimage distance"
    margins = {"min_G-": int(n_minus.min()), "min_G+": int(n_plus.min()),
               "max_C": int(n_crit.max()), "min_far_distance": float(far.min()),
               "far_bound": far_bound, "required_good": need_good, "n_points": len(points)}
    if bad.any():
        i = int(np.argmax(bad))
        return Certificate.refuted(claim, {"point": points[i], "G-": int(n_minus[i]),
                                           "G+": int(n_plus[i]), "C": int(n_crit[i]),
                                           "far": float(far[i])}, margins=margins)
    return Certificate(Verdict.PROVEN, claim, margins=margins)


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class PreimageTree:
    """Depth-n backward tree rooted at ``root``; leaves come out as chunks of
    pre-orbits with shape (m, n + 1, 2), index 0 being the root."""
    spec: MapSpec
    root: np.ndarray
    depth: int
    chunk: int = 1 << 16

    @property
    def branching(self) -> int:
        return self.spec.d

    @property
    def n_leaves(self) -> int:
        return self.spec.d ** self.depth

    def _expand(self, paths: np.ndarray, levels: int) -> np.ndarray:
        for _ in range(levels):
            pre = preimages(self.spec, paths[:, -1])
            m, d = pre.shape[:2]
            head = np.repeat(paths, d, axis=0)
            paths = np.concatenate([head, pre.reshape(m * d, 1, 2)], axis=1)
        return paths

    def chunks(self) -> Iterator[np.ndarray]:
        d, n = self.spec.d, self.depth
        low = 0
        while low < n and d ** (low + 1) <= self.chunk:
            low += 1
        top = n - low
        start = self.root.reshape(1, 1, 2)
        if top == 0:
            yield self._expand(start, n)
            return
        # depth-first over the top levels, breadth-first below
        stack = [start]
        while stack:
            path = stack.pop()
            if path.shape[1] - 1 == top:
                yield self._expand(path, low)
                continue
            kids = self._expand(path, 1)
            stack.extend(kids[i:i + 1] for i in range(d - 1, -1, -1))

    def leaves(self) -> Iterator[np.ndarray]:
        for c in self.chunks():
            yield from c


def preimage_tree(spec: MapSpec, p, n: int, budget: int = 10**7) -> PreimageTree:
    need = spec.d ** n
    if need > budget:
        raise BudgetExceeded(f"tree needs {need} leaves, budget is {budget}")
    return PreimageTree(spec, _pts(p).reshape(2).copy(), n)


# ---------------------------------------------------------------------------
# critical-region avoidance certificate

def _dn(v: float) -> float:
    return math.nextafter(v, -math.inf)


def _up(v: float) -> float:
    return math.nextafter(v, math.inf)


def _s_range(profile: ShearProfile, lo: float, hi: float) -> tuple[float, float]:
    """Enclosure of s over [lo, hi] (lift coordinates, hi - lo < 1).

    s is monotone between consecutive critical points, so the extremes sit
    at the ends or at interior critical points.  Float evaluation error is
    covered by an explicit absolute pad.
    """
    xs = [lo, hi]
    base = math.floor(lo)
    for c in profile._cache["cp"]:
        for shift in (base, base + 1):
            v = c + shift
            if lo < v < hi:
                xs.append(v)
    vals = profile.s(np.array(xs))
    pad = 8e-15 * (1.0 + float(np.abs(profile._cache["knots"]).max()) + profile.slope_ceil)
    return _dn(float(vals.min()) - pad), _up(float(vals.max()) + pad)


def _affine(c1: float, X: tuple, c2: float, Z: tuple) -> tuple[float, float]:
    """Enclosure of c1*X + c2*Z for integer coefficients."""
    def term(c, I):
        a, b = c * I[0], c * I[1]
        return (_dn(min(a, b)), _up(max(a, b)))
    A, B = term(c1, X), term(c2, Z)
    return _dn(A[0] + B[0]), _up(A[1] + B[1])


def _image_box(spec: MapSpec, X: tuple, Y: tuple) -> tuple[tuple, tuple]:
    sl, sh = _s_range(spec.profile, *X)
    t = spec.t
    Z = (_dn(Y[0] + _dn(t * sl)), _up(Y[1] + _up(t * sh)))
    E = spec.E
    return _affine(E.e11, X, E.e12, Z), _affine(E.e21, X, E.e22, Z)


def _clip_to_C(profile: ShearProfile, lo: float, hi: float) -> list[tuple[float, float]]:
    """Pieces of the critical region meeting the circle arc [lo, hi] (lift)."""
    if hi - lo >= 1.0:
        return [w for w in profile.windows()]
    out = []
    k0 = math.floor(lo) - 1
    for a, b in profile.windows():
        for k in range(k0, k0 + 3):
            A, B = max(a + k, lo), min(b + k, hi)
            if A <= B:
                out.append((A, B))
    return out


def _witness_search(spec: MapSpec, box) -> np.ndarray | None:
    (xl, xh), (yl, yh) = box
    prof = spec.profile

    def score(p):
        p = np.atleast_2d(p)
        q1 = apply(spec, p)
        q2 = apply(spec, q1)
        return (prof.distance_to_C(p[:, 0]) + prof.distance_to_C(q1[:, 0])
                + prof.distance_to_C(q2[:, 0]))

    xs = np.concatenate([np.linspace(xl, xh, 9),
                         [float(c) + k for c in prof._cache["cp"] for k in (-1, 0)
                          if xl <= float(c) + k <= xh]])
    ys = np.linspace(yl, yh, 17)
    grid = np.array([(x, y) for x in xs for y in ys])
    vals = score(grid)
    best = grid[np.argmin(vals)]
    if vals.min() > 0:
        # pattern search inside the box
        step = np.array([xh - xl, yh - yl]) / 8
        cur, cv = best, float(vals.min())
        for _ in range(200):
            moves = cur + step * np.array([[1, 0], [-1, 0], [0, 1], [0, -1],
                                           [1, 1], [-1, -1], [1, -1], [-1, 1]])
            moves[:, 0] = np.clip(moves[:, 0], xl, xh)
            moves[:, 1] = np.clip(moves[:, 1], yl, yh)
            mv = score(moves)
            if mv.min() < cv:
                cur, cv = moves[np.argmin(mv)], float(mv.min())
            else:
                step = step / 2
            if cv == 0 or step.max() < 1e-15:
                break
        best = cur
    if float(score(best)[0]) == 0.0:
        return np.mod(best, 1.0)
    return None


def _refute(spec, claim, boxes, margins) -> Certificate | None:
    """Look for a verified point of C whose two images are in C."""
    for box in boxes:
        w = _witness_search(spec, box)
        if w is not None:
            f1 = apply(spec, w)
            return Certificate.refuted(claim, {"point": w, "f": f1, "f2": apply(spec, f1)},
                                       margins=margins)
    return None


def triple_critical_check(spec: MapSpec, max_depth: int = 18, time_budget: float = 120.0,
                          max_boxes: int = 2_000_000) -> Certificate:
    """Certify that no point of C has its first two images in C as well.

    Boxes covering C are pushed forward with interval arithmetic; the first
    image is clipped to C before the second push so that only the relevant
    part of f(B) is carried along.
    """
    prof = spec.profile
    if prof.delta <= 0:
        raise ValueError("empty critical region")
    claim = f"C, f^-1 C, f^-2 C have no common point (t={spec.t})"
    lip = abs(spec.E.e11) + abs(spec.E.e12) * spec.t * prof.slope_ceil
    stack = [((a, b), (0.0, 1.0), 0) for a, b in prof.windows()]
    t0 = time.perf_counter()
    n_boxes = 0
    deepest = 0
    stuck = []
    while stack:
        X, Y, depth = stack.pop()
        n_boxes += 1
        deepest = max(deepest, depth)
        if n_boxes > max_boxes or time.perf_counter() - t0 > time_budget:
            pending = stuck + [(X, Y)] + [(b[0], b[1]) for b in stack]
            margins = {"boxes": n_boxes, "pending": len(pending)}
            found = _refute(spec, claim, pending[:200], margins)
            return found or Certificate.unknown(claim, "budget exhausted", margins=margins,
                                                provenance={"max_depth": max_depth})
        FX, FY = _image_box(spec, X, Y)
        pieces = _clip_to_C(prof, *FX)
        cleared = True
        for K in pieces:
            GX, _ = _image_box(spec, K, FY)
            if _clip_to_C(prof, *GX):
                cleared = False
                break
        if cleared:
            continue
        if depth >= max_depth:
            stuck.append((X, Y))
            continue
        # bisect the side contributing more to the image width
        if (X[1] - X[0]) * lip >= (Y[1] - Y[0]) * abs(spec.E.e12):
            m = 0.5 * (X[0] + X[1])
            stack += [((X[0], m), Y, depth + 1), ((m, X[1]), Y, depth + 1)]
        else:
            m = 0.5 * (Y[0] + Y[1])
            stack += [(X, (Y[0], m), depth + 1), (X, (m, Y[1]), depth + 1)]
    margins = {"boxes": n_boxes, "deepest": deepest,
               "seconds": round(time.perf_counter() - t0, 3)}
    if not stuck:
        return Certificate(Verdict.PROVEN, claim, margins=margins,
                           provenance={"max_depth": max_depth})
    found = _refute(spec, claim, stuck[:2000], margins)
    if found:
        return found
    margins["undecided_boxes"] = len(stuck)
    return Certificate.unknown(claim, "undecided boxes at max depth", margins=margins,
                               provenance={"max_depth": max_depth})
