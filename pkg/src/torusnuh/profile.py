"""The circle profile s driving the vertical shear h_t(x, y) = (x, y + t s(x)).

s is defined through its derivative: constant signed slopes between
consecutive critical points, blended to zero at each critical point by a
cubic smoothstep, so s is C^2 and s'(critical point) = 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .certificate import Certificate, Verdict


def _q(u):
    return u * u * (3.0 - 2.0 * u)


def _dq(u):
    return 6.0 * u * (1.0 - u)


def _Q(u):
    # antiderivative of q with Q(0) = 0, Q(1) = 1/2
    return u**3 - 0.5 * u**4


@dataclass(frozen=True)
class ShearProfile:
    critical_points: tuple[Fraction, ...]
    slopes: tuple[float, ...]
    s0: Fraction
    delta: float
    ramp: float | None = None
    tau2: int | None = None
    kappa: float | None = None
    kind: str = "main"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        cps = tuple(Fraction(c) for c in self.critical_points)
        object.__setattr__(self, "critical_points", cps)
        object.__setattr__(self, "slopes", tuple(float(a) for a in self.slopes))
        object.__setattr__(self, "s0", Fraction(self.s0))
        if self.ramp is None:
            object.__setattr__(self, "ramp", float(self.delta))
        if len(cps) != len(self.slopes) or not cps or cps[0] != 0:
            raise ValueError("need one slope per critical point and x_0 = 0")
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[-1] >= 1:
            raise ValueError("critical points must increase inside [0, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if any(a == 0 for a in self.slopes):
            raise ValueError("slopes must be nonzero")
        cp = np.array([float(c) for c in cps])
        lengths = np.diff(np.append(cp, 1.0))
        if self.ramp > lengths.min() / 2:
            raise ValueError("smoothing ramps overlap")
        a = np.array(self.slopes)
        knots = np.empty(len(cp) + 1)
        knots[0] = float(self.s0)
        knots[1:] = float(self.s0) + np.cumsum(a * (lengths - self.ramp))
        self._cache.update(cp=cp, len=lengths, a=a, knots=knots)

    # basic data -----------------------------------------------------------
    @property
    def n_intervals(self) -> int:
        return len(self.slopes)

    @property
    def slope_floor(self) -> float:
        return min(abs(a) for a in self.slopes)

    @property
    def slope_ceil(self) -> float:
        return max(abs(a) for a in self.slopes)

    @property
    def integral_of_derivative(self) -> float:
        c = self._cache
        return float(np.sum(c["a"] * (c["len"] - self.ramp)))

    def _locate(self, x):
        c = self._cache
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        j = np.searchsorted(c["cp"], x, side="right") - 1
        j = np.clip(j, 0, len(c["cp"]) - 1)
        return j, x - c["cp"][j], c["len"][j]

    # evaluation -----------------------------------------------------------
    def s(self, x):
        c = self._cache
        j, r, L = self._locate(x)
        w = self.ramp
        with np.errstate(invalid="ignore"):
            F = np.where(r < w, w * _Q(r / w),
                         np.where(r > L - w, (L - w) - w * _Q((L - r) / w),
                                  0.5 * w + (r - w)))
        out = c["knots"][j] + c["a"][j] * F
        return out if out.ndim else float(out)

    def ds(self, x):
        c = self._cache
        j, r, L = self._locate(x)
        w = self.ramp
        g = np.where(r < w, _q(np.minimum(r / w, 1.0)),
                     np.where(r > L - w, _q(np.clip((L - r) / w, 0.0, 1.0)), 1.0))
        out = c["a"][j] * g
        return out if out.ndim else float(out)

    def d2s(self, x):
        c = self._cache
        j, r, L = self._locate(x)
        w = self.ramp
        g = np.where(r < w, _dq(np.minimum(r / w, 1.0)) / w,
                     np.where(r > L - w, -_dq(np.clip((L - r) / w, 0.0, 1.0)) / w, 0.0))
        out = c["a"][j] * g
        return out if out.ndim else float(out)

    def slope_index(self, x):
        return self._locate(x)[0]

    # regions --------------------------------------------------------------
    def distance_to_critical(self, x):
        """Circle distance from x to the nearest critical point."""
        _, r, L = self._locate(x)
        return np.minimum(r, L - r)

    def distance_to_C(self, x):
        return np.maximum(self.distance_to_critical(x) - self.delta, 0.0)

    def region_code(self, x):
        """0 on the critical region, otherwise the sign of s' (-1 or +1)."""
        j, r, L = self._locate(x)
        crit = np.minimum(r, L - r) <= self.delta
        sign = np.sign(self._cache["a"][j]).astype(int)
        return np.where(crit, 0, sign)

    def in_inner_critical(self, x):
        return self.distance_to_critical(x) <= self.delta / 2

    def classify_point(self, p) -> tuple[str, bool]:
        x = float(np.asarray(p, dtype=float).reshape(-1)[0])
        code = int(self.region_code(x))
        name = {0: "C", -1: "G-", 1: "G+"}[code]
        return name, bool(self.in_inner_critical(x))

    def windows(self, half_width: float | None = None) -> list[tuple[float, float]]:
        """Critical windows as (lo, hi) on the lift; the one at 0 straddles it."""
        h = self.delta if half_width is None else half_width
        return [(float(c) - h, float(c) + h) for c in self.critical_points]

    def good_intervals(self) -> list[tuple[float, float, int]]:
        cp = self._cache["cp"]
        ends = np.append(cp, 1.0)
        return [(ends[j] + self.delta, ends[j + 1] - self.delta, int(np.sign(self.slopes[j])))
                for j in range(len(cp))]

    def size_condition(self) -> bool:
        """Good components are longer than half of each partition interval."""
        L = self._cache["len"]
        return bool(np.all(L - 2 * self.delta > L / 2))

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau2": self.tau2, "kappa": self.kappa,
                "critical_points": [str(c) for c in self.critical_points],
                "slopes": list(self.slopes), "s0": str(self.s0),
                "delta": self.delta, "ramp": self.ramp,
                "slope_floor": self.slope_floor, "slope_ceil": self.slope_ceil}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ShearProfile":
        return cls(tuple(Fraction(c) for c in d["critical_points"]), tuple(d["slopes"]),
                   Fraction(d["s0"]), d["delta"], d.get("ramp"), d.get("tau2"),
                   d.get("kappa"), d.get("kind", "main"))

    @classmethod
    def from_json(cls, text: str) -> "ShearProfile":
        return cls.from_dict(json.loads(text))


class ProfileConstructionError(ValueError):
    pass


def default_delta(tau2: int) -> float:
    # the second term keeps two preimages (spaced 1/tau2 apart) out of
    # the critical region simultaneously
    return min(1.0 / (8 * (tau2 + 1)), 1.0 / (4 * tau2 * (tau2 + 1)))


def _same_sign_growth(slopes) -> bool:
    for sign in (-1, 1):
        mags = [abs(a) for a in slopes if np.sign(a) == sign]
        if any(b < 2 * a for a, b in zip(mags, mags[1:])):
            return False
    return True


def build_profile(tau2: int, a0: float = 1.0, kappa: float = 2.2, delta: float | None = None,
                  s0=Fraction(1, 2), max_retries: int = 8) -> ShearProfile:
    """Profile with tau2 + 1 critical points j/(tau2+1), slope negative on
    even intervals and positive on odd ones, magnitudes a0*kappa^j with one
    sign class rescaled so that s' integrates to zero."""
    if tau2 < 3:
        raise ValueError("tau2 must be >= 3")
    if a0 <= 0 or kappa <= 2:
        raise ValueError("need a0 > 0 and kappa > 2")
    s0 = Fraction(s0) if not isinstance(s0, float) else Fraction(repr(s0))
    if not 0 < s0 < 1:
        raise ValueError("s0 must lie in (0, 1)")
    delta = default_delta(tau2) if delta is None else float(delta)
    n = tau2 + 1
    if not 1.0 / n - 2 * delta > 1.0 / (2 * n):
        raise ValueError(f"delta={delta} too large for tau2={tau2}")
    k = Fraction(repr(float(kappa)))
    for _ in range(max_retries):
        mags = [Fraction(repr(float(a0))) * k**j for j in range(n)]
        even = sum(mags[0::2])
        odd = sum(mags[1::2])
        # rescale the lighter class up to the heavier one
        if even < odd:
            lam, cls = odd / even, 0
        else:
            lam, cls = even / odd, 1
        slopes = []
        for j, m in enumerate(mags):
            v = m * lam if j % 2 == cls else m
            slopes.append(float(v) if j % 2 else -float(v))
        if _same_sign_growth(slopes):
            cps = tuple(Fraction(j, n) for j in range(n))
            return ShearProfile(cps, tuple(slopes), s0, delta, None, tau2, float(k))
        k *= Fraction(3, 2)
    raise ProfileConstructionError(
        f"growth condition failed after {max_retries} retries (last kappa={float(k)})")


def two_point_profile(t: float, k: int, m: int, slope: float | None = None,
                     ramp_fraction: float = 0.6, s0=Fraction(1, 3)) -> ShearProfile:
    """Two-critical-point profile (critical points 0 and 1/2) with
    critical windows of half-width 2 t^(-3/10).

    The ramp is narrower than the window so that |s'| is almost flat on the
    outer half of each window.  When ``slope`` is omitted it is chosen
    inside the range where both critical-zone estimates can hold, or just
    above the lower one when that range is empty.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    delta = 2.0 * t ** -0.3
    ramp = min(ramp_fraction * delta, 0.24)
    u = min(1.0, 0.5 * delta / ramp)
    lo = 0.5 * t ** -0.3 / _q(u)
    hi = 4.0 * t ** -0.3 / (k * (m - 1))
    if slope is None:
        slope = math.sqrt(lo * hi) if lo < hi else 2.0 * lo
    return ShearProfile((Fraction(0), Fraction(1, 2)), (-slope, slope), Fraction(s0),
                        delta, ramp, None, None, "two-point")


@dataclass
class SlopeReport:
    a: float
    b: float
    per_region: dict
    certificate: Certificate


def slope_bounds_report(profile: ShearProfile, per_interval: int = 10_000) -> SlopeReport:
    """Dense check that |s'| <= b everywhere and |s'| >= a on the good region."""
    a, b = profile.slope_floor, profile.slope_ceil
    cp = profile._cache["cp"]
    ends = np.append(cp, 1.0)
    per_region = {}
    tol = 1e-12 * b
    witness = None
    for j in range(len(cp)):
        x = np.linspace(ends[j], ends[j + 1], per_interval, endpoint=False)
        # make sure the window edges are sampled
        x = np.concatenate([x, ends[j] + np.array([profile.delta, profile.ramp]),
                            ends[j + 1] - np.array([profile.delta, profile.ramp])])
        d = np.abs(profile.ds(x))
        code = profile.region_code(x)
        good = code != 0
        per_region[j] = {"max": float(d.max()),
                         "good_min": float(d[good].min()) if good.any() else None}
        if d.max() > b + tol:
            witness = {"x": float(x[np.argmax(d)]), "bound": "upper"}
        elif good.any() and d[good].min() < a - tol:
            witness = {"x": float(x[good][np.argmin(d[good])]), "bound": "lower"}
        if witness:
            break
    claim = "a <= |s'| on the good region and |s'| <= b everywhere"
    if witness:
        cert = Certificate.refuted(claim, witness)
    else:
        cert = Certificate(Verdict.PROVEN, claim, margins={"a": a, "b": b})
    return SlopeReport(a, b, per_region, cert)
