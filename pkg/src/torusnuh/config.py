"""Flat key = value run configuration."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .lattice import IntegerMatrix2
from .profile import build_profile, default_delta
from .torus_map import MapSpec


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass(frozen=True)
class RunConfig:
    """All run parameters; every default is written into the provenance block."""

    matrix: tuple[int, int, int, int] = (3, 4, 0, 1)
    a0: float = 1.0
    kappa: float = 2.2
    delta_mode: str = "auto"          # auto | default | fixed
    delta: float = 0.0                # used when delta_mode = fixed
    s0: str = "1/3"
    alpha: float = 1.5
    t: float = 1000.0
    t_grid: tuple[float, ...] = (100.0, 1000.0, 10000.0)
    seed: int = 0
    budget: int = 10_000_000
    n_samples: int = 10_000
    n_points: int = 100
    n_steps: int = 100_000
    n_dirs: int = 16
    max_depth: int = 18
    time_budget: float = 120.0
    chi_depth: int = 3
    chi_points: int = 512
    tau2_max: int = 100
    family_m: int = 41
    family_k: int = 1
    family_t: float = 10000.0
    delta0: float = 0.1
    n_curves: int = 100
    n_seeds: int = 100
    profile: str = "shear"            # shear | none

    def __post_init__(self):
        if self.delta_mode not in ("auto", "default", "fixed"):
            raise ConfigError(f"delta_mode must be auto, default or fixed, not {self.delta_mode!r}")
        if self.delta_mode == "fixed" and not 0 < self.delta < 0.5:
            raise ConfigError("fixed delta must lie in (0, 1/2)")
        if self.profile not in ("shear", "none"):
            raise ConfigError("profile must be 'shear' or 'none'")
        if self.seed < 0 or self.budget < 1:
            raise ConfigError("seed must be >= 0 and budget >= 1")
        if not self.t_grid:
            raise ConfigError("t_grid is empty")

    @property
    def E(self) -> IntegerMatrix2:
        return IntegerMatrix2(*self.matrix)

    def delta_for(self, t: float) -> float:
        tau2 = self.E.tau2
        if self.delta_mode == "fixed":
            return self.delta
        if self.delta_mode == "default" or t <= 0:
            return default_delta(tau2)
        # shrink with t so two consecutive images of a window stay small
        return min(default_delta(tau2), 1e-4 / t)

    def spec(self, t: float | None = None) -> MapSpec:
        if self.profile == "none":
            raise ConfigError("this command needs a shear profile (profile = shear)")
        t = self.t if t is None else t
        prof = build_profile(self.E.tau2, self.a0, self.kappa, self.delta_for(t), Fraction(self.s0))
        return MapSpec(self.E, prof, t)

    def items(self) -> list[tuple[str, str]]:
        return [(f.name, _render(getattr(self, f.name))) for f in fields(self)]

    def text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()[:16]

    def provenance(self) -> dict:
        from . import __version__
        return {"config_hash": self.hash(), "seed": self.seed, "version": __version__,
                "config": dict(self.items())}

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _render(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_render(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


_PARSERS = {
    "matrix": lambda s: tuple(int(v) for v in s.replace(",", " ").split()),
    "t_grid": _floats,
}


def parse_config(text: str) -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        typ = known[key].type
        try:
            if key in _PARSERS:
                values[key] = _PARSERS[key](val)
            elif typ == "int":
                values[key] = int(val)
            elif typ == "float":
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {exc}") from None
    if "matrix" in values and len(values["matrix"]) != 4:
        raise ConfigError("matrix needs four integers e11 e12 e21 e22")
    return RunConfig(**values)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())
