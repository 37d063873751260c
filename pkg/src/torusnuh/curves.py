"""Polyline curves on the torus: length, iteration, v-segments and crossings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .certificate import Certificate, Verdict
from .lattice import IntegerMatrix2, cone_norm_constants
from .torus_map import MapSpec, jacobian, lift_apply, preimages, torus_distance

MAX_STEP = 0.25


class CurveBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class TorusCurve:
    """Polyline stored on the lift; consecutive vertices closer than 0.25."""

    lift: np.ndarray
    refine_tol: float = 1e-9
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.lift, dtype=float).reshape(-1, 2)
        if len(v) < 2:
            raise ValueError("a curve needs at least two vertices")
        if np.abs(np.diff(v, axis=0)).max(initial=0.0) >= MAX_STEP:
            raise ValueError("consecutive vertices must be closer than 0.25")
        object.__setattr__(self, "lift", v)

    @classmethod
    def from_torus_points(cls, pts, refine_tol: float = 1e-9) -> "TorusCurve":
        """Unwrap torus points, taking the nearest representative each step."""
        p = np.mod(np.asarray(pts, dtype=float), 1.0)
        steps = np.diff(p, axis=0)
        steps -= np.round(steps)
        return cls(np.vstack([p[:1], p[:1] + np.cumsum(steps, axis=0)]), refine_tol)

    @classmethod
    def segment(cls, a, b, refine_tol: float = 1e-9) -> "TorusCurve":
        a, b = np.asarray(a, float), np.asarray(b, float)
        n = max(1, math.ceil(np.abs(b - a).max() / (0.8 * MAX_STEP)))
        s = np.linspace(0.0, 1.0, n + 1)[:, None]
        return cls(a + s * (b - a), refine_tol)

    @property
    def points(self) -> np.ndarray:
        return np.mod(self.lift, 1.0)

    def normalized(self) -> "TorusCurve":
        """Same curve translated by an integer vector so it starts in [0,1)^2."""
        return TorusCurve(self.lift - np.floor(self.lift[0]), self.refine_tol, dict(self.meta))

    def __len__(self) -> int:
        return len(self.lift)


def length_max_norm(curve: TorusCurve) -> float:
    return float(np.abs(np.diff(curve.lift, axis=0)).max(axis=1).sum())


def length_euclid(curve: TorusCurve) -> float:
    return float(np.hypot(*np.diff(curve.lift, axis=0).T).sum())


@dataclass(frozen=True)
class CrossingReport:
    direction: str
    extent: float
    crossed: bool


def crossing(curve: TorusCurve, direction: str = "horizontal", threshold: float = 1.0) -> CrossingReport:
    """Projected extent of the lift on one axis; crossing when it exceeds the threshold."""
    axis = {"horizontal": 0, "vertical": 1}[direction]
    c = curve.lift[:, axis]
    ext = float(c.max() - c.min())
    return CrossingReport(direction, ext, ext > threshold)


def tangent_in_cone(curve: TorusCurve, theta: float, which: str = "h") -> bool:
    """Segment-wise membership of the tangent in the closed cone of aperture theta."""
    d = np.diff(curve.lift, axis=0)
    if which == "h":
        return bool(np.all(np.abs(d[:, 1]) <= theta * np.abs(d[:, 0]) * (1 + 1e-12)))
    return bool(np.all(np.abs(d[:, 1]) * (1 + 1e-12) >= theta * np.abs(d[:, 0])))


def v_segment(E: IntegerMatrix2, base, direction, alpha) -> TorusCurve:
    """Straight curve tangent to the vertical cone with max-norm length alpha/(5 e_v)."""
    const = cone_norm_constants(E, alpha)
    ell = Fraction(const.alpha) / (5 * const.e_v)
    if ell <= 1:
        raise ValueError(f"alpha={float(const.alpha)} gives length {float(ell):.6g} <= 1")
    u = np.asarray(direction, dtype=float)
    a = float(const.alpha)
    if abs(u[1]) * (1 + 1e-12) < a * abs(u[0]):
        raise ValueError("direction is outside the vertical cone")
    u = u / np.abs(u).max()
    base = np.asarray(base, dtype=float)
    curve = TorusCurve.segment(base, base + float(ell) * u)
    curve.meta["ell"] = ell
    return curve


def _refine(spec: MapSpec, src: np.ndarray, img: np.ndarray, tol: float, budget: int):
    """Insert midpoints until every image chord is short and flat."""
    while True:
        mid = 0.5 * (src[:-1] + src[1:])
        mimg = lift_apply(spec, mid)
        sag = np.abs(mimg - 0.5 * (img[:-1] + img[1:])).max(axis=1)
        span = np.abs(img[1:] - img[:-1]).max(axis=1)
        bad = (sag > tol) | (span >= 0.5 * MAX_STEP)
        # segments that can no longer be split in floating point are accepted
        bad &= np.abs(src[1:] - src[:-1]).max(axis=1) > 4e-16 * (1 + np.abs(src[1:]).max(axis=1))
        if not bad.any():
            return src, img
        if len(src) + int(bad.sum()) > budget:
            raise CurveBudgetExceeded(f"curve refinement needs more than {budget} vertices")
        idx = np.flatnonzero(bad) + 1
        src = np.insert(src, idx, mid[bad], axis=0)
        img = np.insert(img, idx, mimg[bad], axis=0)


def iterate_curve(spec: MapSpec, curve: TorusCurve, refine_tol: float | None = None,
                  budget: int = 200_000, return_source: bool = False):
    """Image of a polyline under the lifted map with adaptive refinement.

    The image is re-anchored by an integer translation so its first vertex
    lies in the unit square.  With return_source the refined source polyline
    (the preimage vertices actually used) is returned as well.
    """
    tol = curve.refine_tol if refine_tol is None else refine_tol
    src = curve.lift - np.floor(curve.lift[0])
    src, img = _refine(spec, src, lift_apply(spec, src), tol, budget)
    out = TorusCurve(img - np.floor(img[0]), tol)
    return (out, TorusCurve(src, tol)) if return_source else out


def pull_back(spec: MapSpec, image: TorusCurve, source: TorusCurve) -> float:
    """Pull every image vertex back through the branch closest to its source vertex.

    Returns the largest torus distance between recovered and original vertices.
    """
    pre = preimages(spec, image.points)
    dist = torus_distance(pre, source.points[:, None, :])
    k = np.argmin(dist, axis=1)
    return float(dist[np.arange(len(k)), k].max())


# ---------------------------------------------------------------------------
# experiments on the [[m, k(m-1)], [0, 1]] family

def _family(spec: MapSpec) -> tuple[int, int]:
    E = spec.E
    m = E.e11
    if not (E.e21 == 0 and E.e22 == 1 and m >= 3 and E.e12 % (m - 1) == 0 and E.e12 > 0
            and spec.profile.kind == "two-point"):
        raise ValueError("needs E = [[m, k(m-1)], [0, 1]] with the two-point profile")
    return m, E.e12 // (m - 1)


def inner_window_distance(profile, x) -> np.ndarray:
    """Distance from x to the half-size critical windows (0 inside them)."""
    return np.maximum(profile.distance_to_critical(x) - profile.delta / 2, 0.0)


def in_G_prime(profile, x) -> np.ndarray:
    return profile.distance_to_critical(x) > profile.delta / 2


def _sample_G_prime(profile, rng, n):
    out = np.empty(0)
    while len(out) < n:
        x = rng.random(2 * n)
        out = np.concatenate([out, x[in_G_prime(profile, x)]])
    return out[:n]


def family_cone_check(spec: MapSpec, n_samples: int = 1000, n_curves: int = 100,
                       seed: int = 0) -> Certificate:
    """Sampled check of the cone mapping, the expansion bound and the curve
    length consequence on the set away from the half-size critical windows."""
    m, k = _family(spec)
    t, prof = spec.t, spec.profile
    th1, th2 = t ** -0.4, t ** -0.6
    rng = np.random.default_rng(seed)
    margins = {"theta1": th1, "theta2": th2, "window_gap": prof.delta / 2,
               "r": t ** -7.0, "gap_exceeds_r": prof.delta / 2 > t ** -7.0}
    claim = f"cone mapping, expansion and curve growth off the inner windows (m={m}, k={k}, t={t})"
    if t <= 0:
        return Certificate.unknown(claim, "t must be positive")
    # the good set is empty when the half windows cover the circle
    gp_len = 1.0 - min(1.0, 2 * prof.delta)
    margins["G_prime_measure"] = gp_len
    if gp_len <= 0:
        return Certificate.unknown(claim, "inner windows cover the circle; nothing to sample",
                                   margins=margins)
    x = _sample_G_prime(prof, rng, n_samples)
    pts = np.stack([x, rng.random(n_samples)], axis=-1)
    J = jacobian(spec, pts)
    children = []
    # cone mapping: edges and interior of the cone of aperture 4/theta1
    sig = np.concatenate([[-4 / th1, 4 / th1, 0.0], rng.uniform(-4 / th1, 4 / th1, 13)])
    u = np.stack([np.ones_like(sig), sig], -1)
    img = np.einsum("nij,kj->nki", J, u)
    ratio = np.abs(img[..., 1]) / np.abs(img[..., 0])
    worst = np.unravel_index(np.argmax(ratio), ratio.shape)
    margins["cone_image_slope_max"] = float(ratio.max())
    if ratio.max() > th2:
        children.append(Certificate.refuted(
            "image of the wide horizontal cone lies in the thin one",
            {"point": pts[worst[0]].tolist(), "u": u[worst[1]].tolist(),
             "image_slope": float(ratio[worst]), "theta2": th2}))
    else:
        children.append(Certificate(Verdict.PROVEN, "image of the wide horizontal cone lies in the thin one"))
    # expansion on the thin cone, vectors of unit max norm
    sig2 = np.concatenate([[-th2, th2, 0.0], rng.uniform(-th2, th2, 13)])
    u2 = np.stack([np.ones_like(sig2), sig2], -1)
    g = np.abs(np.einsum("nij,kj->nki", J, u2)).max(axis=-1)
    margins["expansion_min"] = float(g.min())
    margins["expansion_target"] = math.sqrt(t)
    w = np.unravel_index(np.argmin(g), g.shape)
    if g.min() < math.sqrt(t):
        children.append(Certificate.refuted("expansion >= t^(1/2) on the thin cone",
                                            {"point": pts[w[0]].tolist(), "u": u2[w[1]].tolist(),
                                             "norm": float(g[w])}))
    else:
        children.append(Certificate(Verdict.PROVEN, "expansion >= t^(1/2) on the thin cone"))
    # curve growth: short polylines inside one good component
    ell0 = t ** -0.3
    worst_len = math.inf
    wit = None
    comps = [(c + prof.delta / 2, c + 0.5 - prof.delta / 2) for c in (0.0, 0.5)]
    for i in range(n_curves):
        lo, hi = comps[i % 2]
        if hi - lo <= ell0:
            return Certificate.unknown(claim, "good components shorter than the test length",
                                       margins=margins)
        x0 = rng.uniform(lo, hi - ell0)
        n_v = 8
        xs = np.linspace(x0, x0 + ell0, n_v + 1)
        slopes = rng.uniform(-th2, th2, n_v)
        ys = rng.random() + np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
        curve = TorusCurve(np.stack([xs, ys], -1))
        L = length_max_norm(iterate_curve(spec, curve, refine_tol=1e-9))
        if L < worst_len:
            worst_len, wit = L, curve.lift.tolist()
    margins["image_length_min"] = worst_len
    if worst_len <= 4:
        children.append(Certificate.refuted("image length > 4 for curves of length t^(-3/10)",
                                            {"curve": wit, "image_length": worst_len}))
    else:
        children.append(Certificate(Verdict.PROVEN, "image length > 4 for curves of length t^(-3/10)"))
    verdict = max(c.verdict for c in children)
    witness = next((c.witness for c in children if c.verdict == Verdict.REFUTED), None)
    return Certificate(verdict, claim, witness, margins, {"samples": n_samples, "curves": n_curves,
                                                           "seed": seed}, children)


def _clip_component(profile, lift: np.ndarray, anchor: int) -> tuple[int, int]:
    """Index range of the maximal run of vertices around the anchor that
    stays off the inner windows."""
    ok = in_G_prime(profile, np.mod(lift[:, 0], 1.0))
    lo = anchor
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = anchor
    while hi < len(lift) - 1 and ok[hi + 1]:
        hi += 1
    return lo, hi


def _window(lift: np.ndarray, weights: np.ndarray, anchor: int, cap: float):
    """Sub-polyline around the anchor vertex whose total weight is about cap.

    weights[i] is the weight of segment i (source length or image chord
    length); cut points inside a segment are placed by linear interpolation.
    The anchor vertex itself is always kept.
    """
    cum = np.concatenate([[0.0], np.cumsum(weights)])
    total = cum[-1]
    if total <= cap:
        return lift, anchor
    c = cum[anchor]
    lo_c = min(max(c - cap / 2, 0.0), total - cap)
    hi_c = lo_c + cap

    def point_at(i, w):
        f = 0.0 if weights[i] == 0 else (w - cum[i]) / weights[i]
        return lift[i] + min(max(f, 0.0), 1.0) * (lift[i + 1] - lift[i])

    left, right = [], []
    if lo_c < c:
        i0 = min(int(np.searchsorted(cum, lo_c, side="right") - 1), anchor - 1)
        left = [point_at(i0, lo_c)[None], lift[i0 + 1:anchor]]
    if hi_c > c:
        i1 = max(int(np.searchsorted(cum, hi_c, side="left") - 1), anchor)
        right = [lift[anchor + 1:i1 + 1], point_at(i1, hi_c)[None]]
    parts = left + [lift[anchor][None]] + right
    out = np.vstack(parts)
    new_anchor = sum(len(q) for q in left)
    keep = np.concatenate([[True], np.abs(np.diff(out, axis=0)).max(axis=1) > 0])
    new_anchor = int(keep[:new_anchor + 1].sum() - 1)
    out = out[keep]
    if len(out) < 2:
        return lift, anchor
    return out, new_anchor


def _chords(lift: np.ndarray) -> np.ndarray:
    return np.abs(np.diff(lift, axis=0)).max(axis=1)


def _grow_once(spec, start, max_steps, r, cap, budget, tol):
    """One crossing trial; returns a per-trial record."""
    prof = spec.profile
    p = np.asarray(start, dtype=float)
    v = np.array([r, 0.0])
    growth = []
    rec = {"start": p.tolist(), "start_region": prof.classify_point(p)[0], "first_cross": None,
           "first_length_gt4": None}
    lift = None
    anchor = 0
    for n in range(1, max_steps + 1):
        in_gp = bool(in_G_prime(prof, p[0]))
        if lift is None:
            # linear phase: the curve is far below float resolution
            old = np.abs(v).max()
            v = jacobian(spec, p[None])[0] @ v
            p = np.mod(lift_apply(spec, p[None])[0], 1.0)
            new = np.abs(v).max()
            if in_gp:
                growth.append(float(new / old))
            if new >= 1e-6:
                seg = TorusCurve.segment(p - v / 2, p + v / 2, tol)
                lift, anchor = seg.lift, len(seg.lift) // 2
                if new > 4:
                    rec["first_length_gt4"] = n
                if crossing(seg).crossed:
                    rec["first_cross"] = n
                    break
            continue
        src = lift - np.floor(lift[anchor])
        # only the part whose image stays short matters for crossing
        img_chords = _chords(lift_apply(spec, src))
        full = float(img_chords.sum())
        src, anchor = _window(src, img_chords, anchor, 2 * cap)
        old = float(_chords(src).sum())
        # keep the anchor vertex so the orbit point stays on the curve
        a_pt = src[anchor].copy()
        src2, img = _refine(spec, src, lift_apply(spec, src), tol, budget)
        anchor = int(np.flatnonzero((src2 == a_pt).all(axis=1))[0])
        img = img - np.floor(img[anchor])
        p = np.mod(img[anchor], 1.0)
        curve = TorusCurve(img, tol)
        new = length_max_norm(curve)
        if in_gp:
            growth.append(float(new / old))
        if rec["first_length_gt4"] is None and max(new, full) > 4:
            rec["first_length_gt4"] = n
        if crossing(curve).crossed:
            rec["first_cross"] = n
            break
        lo, hi = 0, len(img) - 1
        if in_G_prime(prof, p[0]):
            lo, hi = _clip_component(prof, img, anchor)
        if hi == lo:
            lo, hi = max(anchor - 1, 0), min(anchor + 1, len(img) - 1)
        comp = img[lo:hi + 1]
        anchor -= lo
        lift, anchor = _window(comp, _chords(comp), anchor, cap)
    rec["min_growth_in_G_prime"] = min(growth) if growth else None
    return rec


def crossing_experiment(spec: MapSpec, n_seeds: int = 100, seed: int = 0, max_steps: int = 20,
                        initial_length: float | None = None, cap: float = 2.0,
                        budget: int = 200_000, refine_tol: float = 1e-9) -> dict:
    """Grow tiny horizontal curves from random points until an image crosses.

    Uniform random start points stand in for the measure-theoretic set of
    good points.  Each step keeps the piece of the image that contains the
    orbit point and avoids the inner critical windows.
    """
    if initial_length is None:
        if spec.t <= 0:
            raise ValueError("t = 0 needs an explicit initial_length")
        initial_length = spec.t ** -7.0
    rng = np.random.default_rng(seed)
    starts = rng.random((n_seeds, 2))
    trials = [_grow_once(spec, s, max_steps, initial_length, cap, budget, refine_tol)
              for s in starts]
    firsts = [r["first_cross"] for r in trials]
    hist = {}
    for f in firsts:
        if f is not None:
            hist[f] = hist.get(f, 0) + 1
    growth = [r["min_growth_in_G_prime"] for r in trials if r["min_growth_in_G_prime"] is not None]
    return {
        "n_seeds": n_seeds, "t": spec.t, "initial_length": initial_length,
        "success_fraction": sum(f is not None for f in firsts) / n_seeds,
        "first_cross_histogram": dict(sorted(hist.items())),
        "length_gt4_fraction": sum(r["first_length_gt4"] is not None for r in trials) / n_seeds,
        "min_growth_in_G_prime": min(growth) if growth else None,
        "sqrt_t": math.sqrt(spec.t) if spec.t > 0 else 0.0,
        "trials": trials,
    }
