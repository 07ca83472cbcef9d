"""Solution operators of the half-space problem built from the kernels.

Conventions: boundary data g = (g_1, ..., g_n) in coordinates, so g_n is the
component along +e_n (the outward normal is -e_n, hence g_N = -g_n). The
velocity is

    u_i = Σ_j K_ij^reg ⊛ g_j + 2 D_iE ⊛' g_n(·, t),

with ⊛ the space-time convolution over R^{n-1} × (0, t) and ⊛' the plane
convolution at the evaluation time.  The tangential part of u is compared
with the combined operator

    TO_i f = 2 ∂_i S(f(·, t)) - 4 B_in ⊛ f = 2 ∂_i S(f(·, t)) - ∂_i T(f).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import dawsn

from .config import HalfSpacePoint, KernelConfig
from .kernels.batch import B_batch, laplace_grad_batch, normal_gamma_batch, raw_L_batch
from .kernels.fundamental import gauss1, gauss1_dz, laplace_derivative
from .kernels.poisson import L_SCALE, smoothed_E_2d, smoothed_E_std
from .quadrature import (QuadratureError, QuadratureResult, composite_rule, disk_polar_rule,
                         fsum_dot, gauss_legendre, graded_rule)

# upper bound on kernel evaluations held in memory at once
_CHUNK = 200_000


@dataclass(frozen=True)
class BoundaryField:
    """Boundary data g: R^{n-1} × R → R^n, supported in |y'| <= M and s > 0.

    Each component is a vectorised callable ``g_j(y, s)`` with ``y`` of shape
    (m, n-1) and ``s`` of shape (m,). ``time_breaks`` and ``space_breaks``
    list known discontinuities (time instants; coordinates for n = 2, radii
    for n = 3) so quadrature panels can end on them.
    """

    components: tuple[Callable, ...]
    support_radius: float
    horizon: float
    time_breaks: tuple[float, ...] = ()
    space_breaks: tuple[float, ...] = ()
    label: str = field(default="g", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 2:
            raise ValueError("need n >= 2 components")
        if not (self.support_radius > 0 and self.horizon > 0):
            raise ValueError("support_radius and horizon must be positive")

    @property
    def n(self) -> int:
        return len(self.components)

    def value(self, j: int, y, s):
        """g_j(y, s) with the support and zero-past conditions enforced."""
        y = np.asarray(y, dtype=float).reshape(-1, self.n - 1)
        s = np.broadcast_to(np.asarray(s, dtype=float), (y.shape[0],))
        inside = (np.sum(y * y, axis=1) <= self.support_radius ** 2) & (s > 0)
        out = np.zeros(y.shape[0])
        if np.any(inside):
            out[inside] = np.asarray(self.components[j - 1](y[inside], s[inside]), dtype=float)
        return out

    def time_derivative(self, j: int, y, s, h: float | None = None):
        """Central difference in s; only meaningful for time-smooth data."""
        if h is None:
            h = 1e-5 * max(1.0, self.horizon)
        return (self.value(j, y, np.asarray(s) + h) - self.value(j, y, np.asarray(s) - h)) / (2 * h)

    def scaled(self, alpha: float) -> "BoundaryField":
        comps = tuple((lambda c: (lambda y, s: alpha * np.asarray(c(y, s), dtype=float)))(c)
                      for c in self.components)
        return BoundaryField(comps, self.support_radius, self.horizon, self.time_breaks,
                             self.space_breaks, f"{alpha}*{self.label}")

    def is_zero_component(self, j: int) -> bool:
        return getattr(self.components[j - 1], "is_zero", False)

    @classmethod
    def zero(cls, n: int, M: float = 1.0, horizon: float = 2.0) -> "BoundaryField":
        return cls(tuple(ZERO for _ in range(n)), M, horizon, label="0")

    @classmethod
    def normal_only(cls, f: Callable, n: int, M: float, horizon: float, time_breaks=(),
                    space_breaks=(), label: str = "g") -> "BoundaryField":
        """Field whose only nonzero component is g_n = f."""
        return cls(tuple(ZERO for _ in range(n - 1)) + (f,), M, horizon, tuple(time_breaks),
                   tuple(space_breaks), label)


def _zero(y, s):
    return np.zeros(np.asarray(y).shape[0])


_zero.is_zero = True
ZERO = _zero


@dataclass
class VelocityPressureSample:
    u: np.ndarray
    p: float
    x: HalfSpacePoint
    t: float
    u_N: np.ndarray
    u_T: np.ndarray
    error_estimate: float = 0.0


def normal_tangential_split(u, x: HalfSpacePoint) -> tuple[np.ndarray, np.ndarray]:
    """(u_N, u_T) for the flat boundary: u_N keeps only the n-th coordinate."""
    u = np.asarray(u, dtype=float)
    if u.size != x.n:
        raise ValueError("vector length must equal the point dimension")
    normal = np.zeros(x.n)
    normal[-1] = -1.0
    u_N = (u @ normal) * normal
    return u_N, u - u_N


# ---------------------------------------------------------------------------
# quadrature rules on the data support

def _space_rule(xp: np.ndarray, M: float, scale: float, level: int, breaks: Sequence[float]):
    """Nodes (m, n-1) and weights on |y'| <= M, refined toward x'."""
    order = 10 + 4 * level
    h_min = 0.05 * scale * 0.3 ** level
    if xp.size == 1:
        focus = (float(np.clip(xp[0], -M, M)),)
        y, w = graded_rule(-M, M, focus=focus, h_min=h_min, order=order, extra=breaks)
        return y[:, None], w
    if xp.size == 2:
        r = float(np.sqrt(xp @ xp))
        focus = xp if r < M else xp * (M / r) * (1 - 1e-9)
        return disk_polar_rule(np.zeros(2), M, focus, h_min, order, 32 * 2 ** level)
    raise NotImplementedError("n = 2, 3 only")


def _time_rule(t: float, xn: float, level: int, breaks: Sequence[float]):
    h_min = min(t, xn * xn) * 0.05 * 0.3 ** level
    extra = [b for b in breaks if 0 < b < t]
    return graded_rule(0.0, t, focus=(t,), h_min=h_min, order=10 + 4 * level, extra=extra)


def _converge(compute: Callable[[int], tuple[float, int]], tol: float, max_level: int,
              what: str) -> QuadratureResult:
    prev, evals = None, 0
    for level in range(max_level):
        cur, ne = compute(level)
        evals += ne
        if prev is not None:
            err = abs(cur - prev)
            if err <= tol * max(1.0, abs(cur)):
                return QuadratureResult(cur, err, evals)
        prev = cur
    err = abs(cur - prev) if max_level > 1 else float("inf")
    return QuadratureResult(cur, err, evals, converged=False)


def spacetime_convolution(kernel: Callable, data: Callable, x: HalfSpacePoint, t: float,
                          g: BoundaryField, tol: float = 1e-6, max_level: int = 4) -> QuadratureResult:
    """∫_0^t ∫_{|y'|<=M} kernel(x' - y', t - s) data(y', s) dy' ds.

    ``kernel(dx, tau)`` and ``data(y, s)`` are vectorised over node arrays.
    """
    xp = np.asarray(x.x_prime)

    def compute(level):
        s, ws = _time_rule(t, x.x_n, level, g.time_breaks)
        y, wy = _space_rule(xp, g.support_radius, x.x_n, level, g.space_breaks)
        ny = len(wy)
        step = max(1, _CHUNK // max(ny, 1))
        partial = np.empty(len(s))
        dx = xp[None, :] - y
        for a in range(0, len(s), step):
            sb = s[a:a + step]
            k = len(sb)
            dxg = np.tile(dx, (k, 1))
            tau = np.repeat(t - sb, ny)
            vals = kernel(dxg, tau) * data(np.tile(y, (k, 1)), np.repeat(sb, ny))
            partial[a:a + k] = vals.reshape(k, ny) @ wy
        return fsum_dot(ws, partial), len(s) * ny

    return _converge(compute, tol, max_level, "space-time convolution")


def plane_convolution(kernel: Callable, data: Callable, x: HalfSpacePoint, g: BoundaryField,
                      tol: float = 1e-8, max_level: int = 5) -> QuadratureResult:
    """∫_{|y'|<=M} kernel(x' - y') data(y') dy'."""
    xp = np.asarray(x.x_prime)

    def compute(level):
        y, wy = _space_rule(xp, g.support_radius, x.x_n, level + 1, g.space_breaks)
        return fsum_dot(wy, kernel(xp[None, :] - y) * data(y)), len(wy)

    return _converge(compute, tol, max_level, "plane convolution")


# ---------------------------------------------------------------------------
# velocity and pressure

def velocity_parts(g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
                   tol: float = 1e-6) -> dict:
    """Per-(i, j) regular convolutions and per-i instantaneous terms."""
    n = cfg.n
    x.check(cfg)
    if g.n != n:
        raise ValueError("field dimension does not match config")
    if not 0 < t <= g.horizon:
        raise ValueError("need 0 < t <= horizon")
    sc = cfg.time_scale()
    xn = x.x_n
    parts = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if g.is_zero_component(j):
                parts[(i, j)] = QuadratureResult(0.0)
                continue

            def kern(dx, tau, i=i, j=j):
                te = tau * sc
                val = -L_SCALE * raw_L_batch(i, j, dx, xn, te, n)
                if i == j:
                    val = val - 2 * normal_gamma_batch(dx, xn, te, n)
                return val

            parts[(i, j)] = spacetime_convolution(kern, lambda y, s, j=j: g.value(j, y, s), x, t, g, tol)
        if g.is_zero_component(n):
            parts[(i, "delta")] = QuadratureResult(0.0)
        else:
            parts[(i, "delta")] = plane_convolution(
                lambda dx, i=i: 2 * laplace_grad_batch(i, dx, xn, n),
                lambda y: g.value(n, y, np.full(len(y), t)), x, g, tol)
    return parts


def velocity(g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
             tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """u(x, t) and the summed error estimate of its quadratures."""
    parts = velocity_parts(g, x, t, cfg, tol)
    n = cfg.n
    u = np.zeros(n)
    err = 0.0
    for (i, _), res in parts.items():
        u[i - 1] += res.value
        err += res.total_error
    return u, err


def pressure(g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
             tol: float = 1e-6) -> tuple[float, float]:
    """p(x, t); the time derivative in the A-term is moved onto the data."""
    n = cfg.n
    x.check(cfg)
    if not 0 < t <= g.horizon:
        raise ValueError("need 0 < t <= horizon")
    sc = cfg.time_scale()
    xn = x.x_n
    total, err = 0.0, 0.0

    def smoothed(alpha, dx, te):
        if n == 2:
            k = sum(1 for a in alpha if a == 1)
            return smoothed_E_2d(k, len(alpha) - k, dx[:, 0], xn, te)
        return np.array([smoothed_E_std(alpha, d, xn, s_, n) for d, s_ in zip(dx, te)])

    for j in range(1, n + 1):
        if g.is_zero_component(j):
            continue

        def k_main(dx, tau, j=j):
            te = tau * sc
            return 4 * gauss1(0.0, te) * smoothed((j, n, n), dx, te)

        def k_dt(dx, tau, j=j):
            te = tau * sc
            return 4 * gauss1(0.0, te) * smoothed((j,), dx, te)

        for kern, dat in ((k_main, lambda y, s, j=j: g.value(j, y, s)),
                          (k_dt, lambda y, s, j=j: g.time_derivative(j, y, s))):
            res = spacetime_convolution(kern, dat, x, t, g, tol)
            total += res.value
            err += res.total_error
        res = plane_convolution(
            lambda dx, j=j: -2 * laplace_derivative(np.column_stack([dx, np.full(len(dx), xn)]), (j, n), n),
            lambda y, j=j: g.value(j, y, np.full(len(y), t)), x, g, tol)
        total += res.value
        err += res.total_error
    if not g.is_zero_component(n):
        res = plane_convolution(
            lambda dx: -2 * laplace_derivative(np.column_stack([dx, np.full(len(dx), xn)]), (), n),
            lambda y: g.time_derivative(n, y, np.full(len(y), t)), x, g, tol)
        total += res.value
        err += res.total_error
    return total, err


def sample(g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
           tol: float = 1e-6) -> VelocityPressureSample:
    u, eu = velocity(g, x, t, cfg, tol)
    p, ep = pressure(g, x, t, cfg, tol)
    u_N, u_T = normal_tangential_split(u, x)
    return VelocityPressureSample(u, p, x, t, u_N, u_T, eu + ep)


# ---------------------------------------------------------------------------
# layer potentials and the tangential operator

def single_layer_S(f: Callable, x: HalfSpacePoint, cfg: KernelConfig, support_radius: float | None = None,
                   tol: float = 1e-8) -> float:
    """S(f)(x) = ∫ E(x' - y', x_n) f(y') dy' for f supported in |y'| <= support_radius."""
    n = cfg.n
    x.check(cfg)
    M = cfg.M if support_radius is None else support_radius
    holder = BoundaryField.zero(n, M)
    xn = x.x_n

    def kern(dx):
        return laplace_derivative(np.column_stack([dx, np.full(len(dx), xn)]), (), n)

    res = plane_convolution(kern, lambda y: np.asarray(f(y), dtype=float), x, holder, tol)
    if not res.converged:
        raise QuadratureError(f"single layer quadrature did not converge (error {res.error_estimate:.2e})")
    return res.value


def _log_potential_2d(dx, te):
    """(Γ'(·, t) * ln|·|/(2π))(dx): value at 0 plus the integral of R_1."""
    s = np.sqrt(te)
    X = np.abs(dx) / (2 * s)
    sigma = np.sqrt(2 * te)
    base = (np.log(sigma) - 0.5 * (np.euler_gamma + math.log(2))) / (2 * math.pi)
    u, w = gauss_legendre(64)
    top = np.minimum(X, 10.0)
    nodes = 0.5 * top[:, None] * (u[None, :] + 1)
    head = 0.5 * top * (dawsn(nodes) @ w)
    tailx = np.maximum(X, 10.0)
    tail = (0.5 * np.log(tailx / 10.0) - (tailx ** -2 - 1e-2) / 8 - 3 * (tailx ** -4 - 1e-4) / 32
            - 15 * (tailx ** -6 - 1e-6) / 96)
    return base + (head + tail) / math.pi


def kappa_batch(dx, xn: float, te, n: int):
    """κ at standard times; closed forms for n = 2 (Dawson integral) and n = 3 (Bessel)."""
    dx = np.asarray(dx, dtype=float)
    te = np.asarray(te, dtype=float)
    if n == 2:
        pot = _log_potential_2d(dx[:, 0], te)
    elif n == 3:
        from scipy.special import i0e
        q = np.sum(dx * dx, axis=1) / (8 * te)
        pot = -math.sqrt(math.pi) / (2 * np.sqrt(te)) * i0e(q) / (4 * math.pi)
    else:
        raise NotImplementedError("n = 2, 3 only")
    return -gauss1_dz(xn, te) * pot


def surface_potential_T(f: Callable, x: HalfSpacePoint, t: float, cfg: KernelConfig,
                        support_radius: float | None = None, time_breaks=(), space_breaks=(),
                        tol: float = 1e-6) -> float:
    """T(f)(x, t) = 4 ∫_0^t ∫ κ(x' - y', x_n, t - s) f(y', s) dy' ds."""
    n = cfg.n
    x.check(cfg)
    M = cfg.M if support_radius is None else support_radius
    holder = BoundaryField(tuple([ZERO] * n), M, max(t, 1e-300), tuple(time_breaks), tuple(space_breaks))
    sc = cfg.time_scale()
    res = spacetime_convolution(lambda dx, tau: 4 * kappa_batch(dx, x.x_n, tau * sc, n),
                                lambda y, s: np.where(s > 0, np.asarray(f(y, s), dtype=float), 0.0),
                                x, t, holder, tol)
    return res.value


def _as_normal_field(f, n, M, horizon, time_breaks, space_breaks):
    if isinstance(f, BoundaryField):
        return f
    return BoundaryField.normal_only(f, n, M, horizon, time_breaks, space_breaks)


def b_convolution(i: int, g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
                  tol: float = 1e-7) -> QuadratureResult:
    """B_in ⊛ g_n over (0, t) × plane."""
    n = cfg.n
    sc = cfg.time_scale()
    return spacetime_convolution(lambda dx, tau: B_batch(i, dx, x.x_n, tau * sc, n),
                                 lambda y, s: g.value(n, y, s), x, t, g, tol)


def trace_gradient(i: int, g: BoundaryField, x: HalfSpacePoint, t: float, cfg: KernelConfig,
                   tol: float = 1e-9) -> QuadratureResult:
    """∂_i S(g_n(·, t))(x) = ∫ D_iE(x' - y', x_n) g_n(y', t) dy'."""
    return plane_convolution(lambda dx: laplace_grad_batch(i, dx, x.x_n, cfg.n),
                             lambda y: g.value(cfg.n, y, np.full(len(y), t)), x, g, tol)


def combined_tangential_operator(f, x: HalfSpacePoint, t: float, cfg: KernelConfig, *,
                                 tol: float = 1e-7) -> np.ndarray:
    """TO f with components TO_i f = 2 ∂_iS(f(·, t)) - 4 B_in ⊛ f for i < n, and 0 for i = n.

    ``f`` is the normal component g_n, given as a BoundaryField or a callable
    f(y, s) supported in |y'| <= cfg.M.
    """
    n = cfg.n
    x.check(cfg)
    g = _as_normal_field(f, n, cfg.M, cfg.horizon, (), ())
    out = np.zeros(n)
    if g.is_zero_component(n):
        return out
    for i in range(1, n):
        out[i - 1] = (2 * trace_gradient(i, g, x, t, cfg, tol).value
                      - 4 * b_convolution(i, g, x, t, cfg, tol).value)
    return out


def _b_time_tail(i: int, dx, xn: float, t: float, cfg: KernelConfig):
    """∫_t^∞ B_in(dx, x_n, σ) dσ for each row of dx (log panels; B = O(σ^{-(n+3)/2}))."""
    sc = cfg.time_scale()
    v, w = composite_rule(np.linspace(math.log(t), math.log(t) + 30.0, 61), 16)
    sig = np.exp(v)
    out = np.zeros(len(dx))
    for k in range(0, len(sig), 64):
        sb = sig[k:k + 64]
        m = len(sb)
        vals = B_batch(i, np.repeat(dx, m, axis=0), xn, np.tile(sb * sc, len(dx)), cfg.n)
        out += vals.reshape(len(dx), m) @ (w[k:k + 64] * sb)
    return out


def cancellation_form(f, x: HalfSpacePoint, t: float, i: int, cfg: KernelConfig, *,
                      tol: float = 1e-7) -> float:
    """TO_i f in difference form:

    -4 ∫_0^t ∫ B_in(x'-y', x_n, t-s)(f(y', s) - f(y', t)) + 4 ∫ (∫_t^∞ B_in dσ) f(y', t) dy'.
    """
    n = cfg.n
    x.check(cfg)
    if not 1 <= i <= n:
        raise ValueError("index out of range")
    if i == n:
        return 0.0
    g = _as_normal_field(f, n, cfg.M, cfg.horizon, (), ())
    if g.is_zero_component(n):
        return 0.0
    sc = cfg.time_scale()
    first = spacetime_convolution(
        lambda dx, tau: B_batch(i, dx, x.x_n, tau * sc, n),
        lambda y, s: g.value(n, y, s) - g.value(n, y, np.full(len(y), t)), x, t, g, tol)
    second = plane_convolution(lambda dx: _b_time_tail(i, dx, x.x_n, t, cfg),
                               lambda y: g.value(n, y, np.full(len(y), t)), x, g, tol)
    return -4 * first.value + 4 * second.value
