"""Moduli of continuity and the Dini / logDini functionals on declared sample grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .representation import BoundaryField

# ω counts as "not decaying" at r_min if it drops by less than this many decades
# over one decade of r
_FLAT_DECADES = 0.1


@dataclass(frozen=True)
class ModulusGrid:
    """Sample grids behind every norm: log-spaced radii and a uniform sample spacing."""

    r_min: float = 1e-4
    r0: float = 0.5
    n_r: int = 160
    spacing: float | None = None  # default r_min / 4

    def __post_init__(self):
        if not 0 < self.r_min < self.r0 <= 1:
            raise ValueError("need 0 < r_min < r0 <= 1")
        if self.n_r < 8:
            raise ValueError("n_r must be at least 8")

    @property
    def h(self) -> float:
        return self.spacing if self.spacing is not None else self.r_min / 4

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r0, self.n_r)


@dataclass
class ModulusProfile:
    """Sampled sup-modulus ω(r) with its Dini and logDini integrals.

    ``dini`` and ``logdini`` include the head estimates on (0, r_min);
    ``possibly_infinite`` flags a modulus that does not decay at r_min, in
    which case the head estimates are not valid bounds.
    """

    r_grid: np.ndarray
    omega: np.ndarray
    dini: float
    logdini: float
    r_min: float
    r0: float
    spacing: float
    dini_head: float = 0.0
    logdini_head: float = 0.0
    possibly_infinite: bool = False
    meta: dict = field(default_factory=dict)

    def value(self, kind: str) -> float:
        if kind not in ("dini", "logdini"):
            raise ValueError("kind must be 'dini' or 'logdini'")
        return self.dini if kind == "dini" else self.logdini


def _log_trapezoid(r: np.ndarray, vals: np.ndarray) -> float:
    """∫ vals dr on a log-spaced grid, trapezoid rule in ln r."""
    lr = np.log(r)
    y = vals * r
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(lr)))


def _profile(r: np.ndarray, omega: np.ndarray, grid: ModulusGrid, meta=None) -> ModulusProfile:
    omega = np.maximum.accumulate(omega)  # guard: ω is nondecreasing by construction
    body_dini = _log_trapezoid(r, omega / r)
    body_log = _log_trapezoid(r, omega * np.abs(np.log(r)) / r)
    w0 = float(omega[0])
    k10 = int(np.searchsorted(r, 10 * r[0]))
    w10 = float(omega[min(k10, len(r) - 1)])
    flat = w0 > 0 and math.log10(max(w10, w0) / w0) < _FLAT_DECADES
    # head on (0, r_min) assuming ω(r) <= ω(r_min) r / r_min
    lr = abs(math.log(grid.r_min))
    head_d = w0
    head_l = w0 * (1 + lr)
    if flat:
        head_d = head_l = math.inf
    return ModulusProfile(r, omega, body_dini + head_d, body_log + head_l, grid.r_min, grid.r0, grid.h,
                          head_d, head_l, flat, dict(meta or {}))


def _samples(f: Callable, horizon: float, h: float, pad: float):
    """f on the uniform grid k·h covering [-pad, horizon], zero for s <= 0."""
    k0 = -int(math.ceil(pad / h))
    k1 = int(math.floor(horizon / h))
    s = h * np.arange(k0, k1 + 1)
    vals = np.zeros(s.size)
    pos = s > 0
    vals[pos] = np.asarray(f(s[pos]), dtype=float)
    return s, vals


def _window_modulus(vals: np.ndarray, m: int, valid: np.ndarray) -> float:
    """max over valid centres of max |f(s) - f(centre)| with |s - centre| <= m samples."""
    if m <= 0:
        return 0.0
    size = 2 * m + 1
    hi = ndimage.maximum_filter1d(vals, size, mode="nearest")
    lo = ndimage.minimum_filter1d(vals, size, mode="nearest")
    d = np.maximum(hi - vals, vals - lo)
    return float(np.max(d[valid])) if np.any(valid) else 0.0


def modulus_of_continuity_time(f: Callable, r: float, t: float, horizon: float,
                               h: float | None = None) -> float:
    """ω(f)(r, t) = sup |f(s) - f(t)| over grid points s in (t - r, t + r), s <= horizon.

    Values at s <= 0 come from the zero-past extension.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if not 0 < t <= horizon:
        raise ValueError("need 0 < t <= horizon")
    if h is None:
        h = r / 64
    k = np.arange(-int(math.ceil(r / h)) + 1, int(math.ceil(r / h)))
    s = t + h * k
    s = s[(s < t + r) & (s > t - r) & (s <= horizon)]
    fs = np.zeros(s.size)
    pos = s > 0
    fs[pos] = np.asarray(f(s[pos]), dtype=float)
    ft = float(np.asarray(f(np.array([t])), dtype=float)[0])
    return float(np.max(np.abs(fs - ft))) if fs.size else 0.0


def time_modulus_profile(f: Callable, horizon: float, grid: ModulusGrid | None = None) -> ModulusProfile:
    """sup_t ω(f)(r, t) on the radii of ``grid`` with centres t in (0, horizon]."""
    grid = grid or ModulusGrid()
    h = grid.h
    s, vals = _samples(f, horizon, h, grid.r0)
    valid = s > 0
    r = grid.radii()
    # open window (t - r, t + r): samples strictly closer than r
    omega = np.array([_window_modulus(vals, int(math.ceil(rk / h)) - 1, valid) for rk in r])
    return _profile(r, omega, grid, {"horizon": horizon, "samples": int(s.size)})


def logdini_norm_time(f: Callable, r0: float = 0.5, grid: ModulusGrid | None = None,
                      horizon: float = 2.0) -> ModulusProfile:
    """∫_0^{r0} sup_t ω(f)(r, t) |ln r| / r dr; read ``.logdini`` and ``.possibly_infinite``."""
    grid = grid or ModulusGrid(r0=r0)
    if grid.r0 != r0:
        grid = ModulusGrid(grid.r_min, r0, grid.n_r, grid.spacing)
    return time_modulus_profile(f, horizon, grid)


def dini_norm_space(f: Callable, r0: float = 0.5, grid: ModulusGrid | None = None, *,
                    extent: float = 2.0, dim: int = 1) -> ModulusProfile:
    """∫_0^{r0} sup_x ω(f)(r, x) dr / r for f on [-extent, extent]^dim; read ``.dini``.

    For dim = 2 the window is the disc footprint, so keep r0 / spacing moderate.
    """
    grid = grid or ModulusGrid(r0=r0)
    if grid.r0 != r0:
        grid = ModulusGrid(grid.r_min, r0, grid.n_r, grid.spacing)
    h = grid.h
    ax = h * np.arange(-int(math.ceil((extent + r0) / h)), int(math.ceil((extent + r0) / h)) + 1)
    r = grid.radii()
    if dim == 1:
        vals = np.asarray(f(ax[:, None]), dtype=float)
        valid = np.abs(ax) <= extent
        omega = np.array([_window_modulus(vals, int(math.ceil(rk / h)) - 1, valid) for rk in r])
    elif dim == 2:
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        vals = np.asarray(f(np.column_stack([X.ravel(), Y.ravel()])), dtype=float).reshape(X.shape)
        valid = (np.abs(X) <= extent) & (np.abs(Y) <= extent)
        omega = []
        for rk in r:
            m = int(math.ceil(rk / h)) - 1
            if m <= 0:
                omega.append(0.0)
                continue
            u = np.arange(-m, m + 1)
            fp = (u[:, None] ** 2 + u[None, :] ** 2) * h * h < rk * rk
            hi = ndimage.maximum_filter(vals, footprint=fp, mode="nearest")
            lo = ndimage.minimum_filter(vals, footprint=fp, mode="nearest")
            omega.append(float(np.max(np.maximum(hi - vals, vals - lo)[valid])))
        omega = np.array(omega)
    else:
        raise ValueError("dim must be 1 or 2")
    return _profile(r, omega, grid, {"extent": extent, "dim": dim})


def zero_past_extension(g: BoundaryField) -> BoundaryField:
    """The same field with every component explicitly zero for s <= 0."""

    def wrap(c):
        if getattr(c, "is_zero", False):
            return c
        return lambda y, s: np.where(np.asarray(s) > 0, np.asarray(c(y, s), dtype=float), 0.0)

    return BoundaryField(tuple(wrap(c) for c in g.components), g.support_radius, g.horizon,
                         g.time_breaks, g.space_breaks, g.label)
