"""Lyapunov exponents, pre-orbit sampling and finite-time hyperbolicity tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, Verdict
from .torus_map import MapSpec, apply, jacobian, preimages, pull_vectors


@dataclass
class ExponentEstimate:
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    n_steps: int
    stderr: np.ndarray
    renormalization_period: int = 1

    @property
    def log_d_residual(self) -> float:
        return float(np.max(np.abs(self.chi_plus + self.chi_minus - self._log_d)))

    _log_d: float = 0.0


def _generic_vector(m: int) -> np.ndarray:
    v = np.array([math.cos(1.0), math.sin(1.0)])
    return np.tile(v, (m, 1))


def forward_exponent(spec: MapSpec, p, N: int, u0=None, n_batches: int = 20) -> ExponentEstimate:
    """Top exponent from per-step renormalized growth of a generic vector.

    Works on a batch of points at once; the lower exponent follows from
    chi+ + chi- = log d.
    """
    if N < 1:
        raise ValueError("N must be positive")
    x = np.atleast_2d(np.asarray(p, dtype=float)).copy()
    m = len(x)
    v = _generic_vector(m) if u0 is None else np.tile(np.asarray(u0, float), (m, 1))
    v /= np.hypot(v[:, 0], v[:, 1])[:, None]
    n_batches = max(1, min(n_batches, N))
    edges = np.linspace(0, N, n_batches + 1).astype(int)
    batch = np.zeros((n_batches, m))
    b = 0
    for i in range(N):
        while i >= edges[b + 1]:
            b += 1
        v = np.einsum("nij,nj->ni", jacobian(spec, x), v)
        nv = np.hypot(v[:, 0], v[:, 1])
        batch[b] += np.log(nv)
        v /= nv[:, None]
        x = apply(spec, x)
    chi = batch.sum(axis=0) / N
    rates = batch / np.diff(edges)[:, None]
    se = rates.std(axis=0, ddof=1) / math.sqrt(n_batches) if n_batches > 1 else np.zeros(m)
    log_d = math.log(spec.d)
    est = ExponentEstimate(chi, log_d - chi, N, se)
    est._log_d = log_d
    return est


class PreOrbitSampler:
    """Uniform random choice among the d inverse branches at each step.

    Row i of a batch draws from its own stream seeded by (seed, i), so
    results do not depend on how the batch is split.
    """

    def __init__(self, spec: MapSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed

    def rngs(self, n: int):
        return [np.random.default_rng([self.seed, i]) for i in range(n)]

    def branch_choices(self, n_paths: int, N: int) -> np.ndarray:
        return np.stack([r.integers(0, self.spec.d, N) for r in self.rngs(n_paths)])

    def sample_paths(self, p, N: int, n_paths: int) -> np.ndarray:
        """Pre-orbits (x_0 = p, x_1, ..., x_N), shape (n_paths, N + 1, 2)."""
        ch = self.branch_choices(n_paths, N)
        x = np.tile(np.asarray(p, dtype=float), (n_paths, 1))
        out = [x]
        rows = np.arange(n_paths)
        for i in range(N):
            x = preimages(self.spec, x)[rows, ch[:, i]]
            out.append(x)
        return np.stack(out, axis=1)


@dataclass
class BackwardReport:
    rates: np.ndarray
    branch_counts: np.ndarray

    @property
    def median(self) -> float:
        return float(np.median(self.rates))


def backward_exponent(sampler: PreOrbitSampler, p, N: int, n_seeds: int, u=None) -> BackwardReport:
    """Growth rate of |(Df^N)^{-1} u| along randomly sampled pre-orbits."""
    spec = sampler.spec
    ch = sampler.branch_choices(n_seeds, N)
    x = np.tile(np.asarray(p, dtype=float), (n_seeds, 1))
    w = _generic_vector(n_seeds) if u is None else np.tile(np.asarray(u, float), (n_seeds, 1))
    rows = np.arange(n_seeds)
    logs = np.zeros(n_seeds)
    for i in range(N):
        x = preimages(spec, x)[rows, ch[:, i]]
        w = pull_vectors(spec, x, w)
        nw = np.hypot(w[:, 0], w[:, 1])
        logs += np.log(nw)
        w /= nw[:, None]
    counts = np.bincount(ch.ravel(), minlength=spec.d)
    return BackwardReport(logs / N, counts)


def _is_family(spec: MapSpec) -> bool:
    E = spec.E
    m = E.e11
    return (E.e21 == 0 and E.e22 == 1 and m >= 3 and E.e12 % (m - 1) == 0
            and E.e12 != 0 and spec.profile.kind == "two-point")


def nuh_verdict(spec: MapSpec, n_points: int, N: int, seed: int = 0,
                delta0: float | None = None) -> dict:
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 2))
    est = forward_exponent(spec, pts, N)
    eps = 3 * est.stderr
    nuh = (est.chi_minus < -eps) & (est.chi_plus > eps)
    report = {"n_points": n_points, "N": N, "nuh_fraction": float(nuh.mean()),
              "sign_fraction": float(((est.chi_minus < 0) & (est.chi_plus > 0)).mean()),
              "chi_plus_median": float(np.median(est.chi_plus)),
              "chi_minus_median": float(np.median(est.chi_minus)),
              "max_sum_residual": est.log_d_residual}
    if delta0 is not None and _is_family(spec) and spec.t > 1:
        lt = math.log(spec.t)
        strong = np.minimum(est.chi_plus, -est.chi_minus) > (1 - delta0) * lt
        report["strong_fraction"] = float(strong.mean())
        report["strong_threshold"] = (1 - delta0) * lt
        # finite-N stand-in for the expansion set, next to the claimed measure bound
        report["expansion_fraction"] = float((est.chi_plus > 0.8 * lt).mean())
        report["claimed_measure_bound"] = (1 - 7 * delta0) / (1 + 7 * delta0)
    return report


def _op_norm(A: np.ndarray) -> np.ndarray:
    """Operator norm induced by the max norm: largest absolute row sum."""
    return np.abs(A).sum(axis=-1).max(axis=-1)


def _inv2(A: np.ndarray) -> np.ndarray:
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    inv = np.empty_like(A)
    inv[..., 0, 0] = A[..., 1, 1]
    inv[..., 1, 1] = A[..., 0, 0]
    inv[..., 0, 1] = -A[..., 0, 1]
    inv[..., 1, 0] = -A[..., 1, 0]
    return inv / det[..., None, None]


def family_estimates(spec: MapSpec, n_samples: int = 1000, seed: int = 0,
                       fd_step: float = 1e-7) -> Certificate:
    """Fit C for (Ct)^-1 <= m(Df) <= |Df| <= Ct, |D^2 f| <= C^2 t and test
    the two derivative bounds near the critical points."""
    if not _is_family(spec):
        raise ValueError("needs E = [[m, k(m-1)], [0, 1]] with the two-point profile")
    t, prof = spec.t, spec.profile
    m = spec.E.e11
    k = spec.E.e12 // (m - 1)
    rng = np.random.default_rng(seed)
    pts = rng.random((n_samples, 2))
    J = jacobian(spec, pts)
    norm = _op_norm(J)
    conorm = 1.0 / _op_norm(_inv2(J))
    h = fd_step
    H = (jacobian(spec, pts + [h, 0]) - jacobian(spec, pts - [h, 0])) / (2 * h)
    hess = np.abs(H).max(axis=(-1, -2))
    C = max(1.0 + 1e-12, float(norm.max()) / t, 1.0 / (t * float(conorm.min())),
            math.sqrt(float(hess.max()) / t))
    margins = {"C": C, "max_norm_over_t": float(norm.max()) / t,
               "min_conorm_times_t": float(conorm.min()) * t,
               "max_hessian_over_t": float(hess.max()) / t}
    claim = f"derivative sandwich and critical-zone bounds (m={m}, k={k}, t={t})"
    # critical-zone bounds, checked densely on each window
    tp = t ** -0.3
    witness = None
    for c in prof._cache["cp"]:
        r = np.concatenate([np.linspace(-prof.delta, prof.delta, 20001),
                            rng.uniform(-prof.delta, prof.delta, 1000)])
        x = np.mod(c + r, 1.0)
        ds = np.abs(prof.ds(x))
        upper = k * (m - 1) * ds
        outer = np.abs(r) >= prof.delta / 2
        margins["critical_upper_ratio"] = max(margins.get("critical_upper_ratio", 0.0),
                                              float(upper.max() / (4 * tp)))
        margins["outer_lower_ratio"] = min(margins.get("outer_lower_ratio", math.inf),
                                           float(ds[outer].min() / (tp / 2)))
        if witness is None and upper.max() >= 4 * tp:
            witness = {"bound": "k(m-1)|s'| < 4 t^-0.3 on C", "x": float(x[np.argmax(upper)])}
        if witness is None and ds[outer].min() < tp / 2:
            i = np.argmin(ds[outer])
            witness = {"bound": "|s'| >= t^-0.3 / 2 on C minus C_delta", "x": float(x[outer][i])}
    if witness:
        return Certificate.refuted(claim, witness, margins=margins)
    return Certificate(Verdict.PROVEN, claim, margins=margins,
                       provenance={"samples": n_samples})


def _angle(v: np.ndarray) -> np.ndarray:
    return np.mod(np.arctan2(v[..., 1], v[..., 0]), np.pi)


def _offset(ang, phi):
    """Signed projective angle from phi to ang, in [-pi/2, pi/2)."""
    return np.mod(ang - phi + np.pi / 2, np.pi) - np.pi / 2


def _push_arcs(J_steps, u, v, checkpoints):
    """Push arcs (u -> v counterclockwise) through successive Jacobians.

    Yields (step, lower edge, width) at each checkpoint.  The cross product is
    carried multiplicatively so an image arc close to a half turn is never
    confused with a nearly degenerate one.
    """
    c = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    shape = (-1,) + (1,) * (c.ndim - 1)
    for step, Jm in enumerate(J_steps, start=1):
        det = Jm[:, 0, 0] * Jm[:, 1, 1] - Jm[:, 0, 1] * Jm[:, 1, 0]
        u = np.einsum("nij,n...j->n...i", Jm, u)
        v = np.einsum("nij,n...j->n...i", Jm, v)
        nu = np.hypot(u[..., 0], u[..., 1])
        nv = np.hypot(v[..., 0], v[..., 1])
        u = u / nu[..., None]
        v = v / nv[..., None]
        c = c * det.reshape(shape) / (nu * nv)
        if step in checkpoints:
            dot = (u * v).sum(axis=-1)
            yield step, np.where((c >= 0)[..., None], u, v), np.arctan2(np.abs(c), dot)


def _orbit_jacobians(spec, x, N):
    for _ in range(N):
        yield jacobian(spec, x)
        x = apply(spec, x)


def domination_detector(spec: MapSpec, N_list=(8, 16, 32), theta_grid=None, M: int = 200,
                        n_phi: int = 64, seed: int = 0, n_critical: int = 240) -> dict:
    """Search for a constant cone family mapped into itself by Df^N.

    Starting points are M uniform points plus n_critical points on each side
    of every critical point of s, log-spaced in distance so that every small
    shear value is hit to within a factor of about 1.1.  A cone
    passes for a given N when, from every start, the whole image arc lies
    strictly inside it.
    """
    theta_grid = [2.0**-k for k in range(7)] if theta_grid is None else list(theta_grid)
    theta_grid = [th for th in theta_grid if th < np.pi / 2]
    rng = np.random.default_rng(seed)
    starts = [rng.random((M, 2))]
    prof = spec.profile
    if n_critical and spec.t > 0:
        per = n_critical
        r = prof.delta * np.logspace(-12, 0, per)
        for c in prof._cache["cp"]:
            for sgn in (-1, 1):
                x = np.mod(c + sgn * r, 1.0)
                starts.append(np.stack([x, rng.random(per)], axis=-1))
        starts.append(np.stack([prof._cache["cp"], rng.random(len(prof._cache["cp"]))], -1))
    P = np.concatenate(starts)
    n = len(P)
    phis = np.arange(n_phi) * np.pi / n_phi
    th = np.asarray(theta_grid)
    lo_ang = phis[:, None] - th[None, :]
    hi_ang = phis[:, None] + th[None, :]
    u0 = np.broadcast_to(np.stack([np.cos(lo_ang), np.sin(lo_ang)], -1), (n,) + lo_ang.shape + (2,))
    v0 = np.broadcast_to(np.stack([np.cos(hi_ang), np.sin(hi_ang)], -1), (n,) + hi_ang.shape + (2,))
    report = {"n_starts": n, "detected": False, "passing": [], "witnesses": []}
    gaps = {}
    for N, lo, width in _push_arcs(_orbit_jacobians(spec, P, max(N_list)), u0, v0,
                                   set(N_list)):
        off = _offset(_angle(lo), phis[None, :, None])
        ok = (off > -th) & (off + width < th)
        for k, theta in enumerate(theta_grid):
            okk = ok[:, :, k]
            good_phi = okk.all(axis=0)
            if good_phi.any():
                j = int(np.argmax(good_phi))
                report["passing"].append({"N": N, "theta": theta, "phi": float(phis[j])})
                report["detected"] = True
            else:
                j = int(np.argmax(okk.sum(axis=0)))
                i = int(np.argmin(okk[:, j]))
                report["witnesses"].append({"N": N, "theta": theta, "phi": float(phis[j]),
                                            "start": P[i].tolist(),
                                            "image_width": float(width[i, j, k])})
    # singular value gap via log s1 - log s2 = 2 log s1 - step * log|det E|
    prod = np.tile(np.eye(2), (n, 1, 1))
    log_scale = np.zeros(n)
    log_det = math.log(abs(spec.E.det))
    for step, Jm in enumerate(_orbit_jacobians(spec, P, max(N_list)), start=1):
        prod = np.einsum("nij,njk->nik", Jm, prod)
        sc = np.abs(prod).max(axis=(1, 2))
        prod /= sc[:, None, None]
        log_scale += np.log(sc)
        if step in N_list:
            s1 = np.linalg.norm(prod, ord=2, axis=(1, 2))
            gap = 2 * (np.log(s1) + log_scale) - step * log_det
            gaps[step] = float(gap.min()) / step
    report["min_log_gap_per_step"] = gaps
    return report
