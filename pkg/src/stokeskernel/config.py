"""Configuration objects and the flat ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma as _gamma

HEAT_NORMS = ("standard", "paper")


class ConfigError(ValueError):
    pass


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 points' worth for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / _gamma(n / 2.0)


@dataclass(frozen=True)
class KernelConfig:
    """Read-only parameters shared by every kernel and experiment.

    ``heat_norm='standard'`` uses the heat kernel of u_t = Δu; ``'paper'`` uses
    the variance-t Gaussian, which is the standard kernel at time t/2.
    """

    n: int = 2
    heat_norm: str = "standard"
    tol_space: float = 1e-8
    tol_time: float = 1e-8
    trunc_radius: float = 4.0
    M: float = 1.0
    r0: float = 0.5
    r_min: float = 1e-4
    xn_grid: tuple[float, ...] = (0.1, 0.01, 0.001)
    t_cap: float = 50.0
    horizon: float = 2.0
    mollify_tau: tuple[float, ...] = (0.1, 0.03, 0.01)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if self.heat_norm not in HEAT_NORMS:
            raise ConfigError(f"heat_norm must be one of {HEAT_NORMS}, got {self.heat_norm!r}")
        for name in ("tol_space", "tol_time", "trunc_radius", "M", "r0", "r_min", "t_cap", "horizon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.trunc_radius < 4 * self.M:
            raise ConfigError("trunc_radius must be at least 4*M")
        if not self.r_min < self.r0 <= 1:
            raise ConfigError("need r_min < r0 <= 1")
        if any(v <= 0 for v in self.xn_grid) or any(v <= 0 for v in self.mollify_tau):
            raise ConfigError("xn_grid and mollify_tau entries must be positive")

    @property
    def omega_n(self) -> float:
        return sphere_area(self.n)

    def time_scale(self) -> float:
        """Factor mapping physical time to standard-kernel time."""
        return 1.0 if self.heat_norm == "standard" else 0.5

    def replace(self, **changes) -> "KernelConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> dict:
        """Flat key/value view, stable ordering, suitable for reports."""
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            out[f.name] = v
        return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(KernelConfig)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "n":
        return int(raw)
    if key == "heat_norm":
        return raw
    if key in ("xn_grid", "mollify_tau"):
        items = [s for s in (p.strip() for p in raw.split(",")) if s]
        if not items:
            raise ConfigError(f"{key}: empty list")
        return tuple(float(s) for s in items)
    return float(raw)


def parse_config_text(text: str) -> KernelConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return KernelConfig(**values)


def load_config(path: str | Path) -> KernelConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class HalfSpacePoint:
    """x = (x', x_n) with x_n > 0."""

    x_prime: tuple[float, ...]
    x_n: float

    def __post_init__(self):
        object.__setattr__(self, "x_prime", tuple(float(v) for v in np.atleast_1d(self.x_prime)))
        if not self.x_n > 0:
            raise ValueError(f"x_n must be positive, got {self.x_n}")

    @property
    def n(self) -> int:
        return len(self.x_prime) + 1

    def check(self, cfg: KernelConfig) -> "HalfSpacePoint":
        if self.n != cfg.n:
            raise ValueError(f"point has dimension {self.n}, config has n={cfg.n}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array(self.x_prime + (self.x_n,))


@dataclass
class KernelValueWithDelta:
    """Regular part plus coefficients of the instantaneous terms.

    The kernel acts on data g as ``regular ⊛ g + delta_coeff ⊛' g(., t)
    + delta_prime_coeff ⊛' ∂_t g(., t)``.
    """

    regular: float
    delta_coeff: float = 0.0
    delta_prime_coeff: float = 0.0
    error_estimate: float = field(default=0.0, compare=False)
