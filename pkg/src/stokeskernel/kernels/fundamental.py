"""Laplace and heat fundamental solutions with closed-form derivatives.

Points are arrays whose last axis holds the n coordinates; all functions
broadcast over leading axes. Indices in the public API are 1-based, so the
normal direction is index n.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import exp1, gammainc
from scipy.special import gamma as gamma_fn

from ..config import KernelConfig, sphere_area
from ..quadrature import composite_rule, fsum_dot


def _as_points(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"points must have last axis of length n={n}, got shape {x.shape}")
    return x


def _check_nonzero(r2):
    if np.any(r2 == 0):
        raise ValueError("Laplace fundamental solution is singular at x = 0")


# ---------------------------------------------------------------------------
# Laplace

def laplace_fundamental(x, cfg: KernelConfig):
    """E(x) with ΔE = δ: -|x|^{2-n}/((n-2)ω_n) for n >= 3 and ln|x|/(2π) for n = 2."""
    n = cfg.n
    x = _as_points(x, n)
    r2 = np.sum(x * x, axis=-1)
    _check_nonzero(r2)
    if n == 2:
        return 0.5 * np.log(r2) / (2 * math.pi)
    return -(r2 ** ((2 - n) / 2.0)) / ((n - 2) * sphere_area(n))


def laplace_fundamental_gradient(x, cfg: KernelConfig):
    """(D_1 E, ..., D_n E); component i is x_i / (ω_n |x|^n)."""
    n = cfg.n
    x = _as_points(x, n)
    r2 = np.sum(x * x, axis=-1)
    _check_nonzero(r2)
    return x / (sphere_area(n) * r2[..., None] ** (n / 2.0))


def laplace_derivative(x, index: tuple[int, ...], n: int):
    """Partial derivative D_{index[0]} D_{index[1]} ... E(x), order 0 to 3.

    Indices are 1-based coordinate numbers.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    _check_nonzero(r2)
    om = sphere_area(n)
    k = len(index)
    if k == 0:
        if n == 2:
            return 0.25 * np.log(r2) / math.pi
        return -(r2 ** ((2 - n) / 2.0)) / ((n - 2) * om)
    idx = [i - 1 for i in index]
    if any(not 0 <= i < n for i in idx):
        raise ValueError(f"derivative index out of range for n={n}: {index}")
    xs = [x[..., i] for i in idx]
    if k == 1:
        return xs[0] / (om * r2 ** (n / 2.0))
    d = lambda a, b: 1.0 if idx[a] == idx[b] else 0.0
    if k == 2:
        return (d(0, 1) * r2 - n * xs[0] * xs[1]) / (om * r2 ** (n / 2.0 + 1))
    if k == 3:
        i, j, l = xs
        t1 = (2 * d(0, 1) * l - n * (d(0, 2) * j + d(1, 2) * i)) / r2 ** (n / 2.0 + 1)
        t2 = -(n + 2) * (d(0, 1) * r2 - n * i * j) * l / r2 ** (n / 2.0 + 2)
        return (t1 + t2) / om
    raise ValueError("derivatives of E are implemented up to order 3")


def laplace_hessian(x, cfg: KernelConfig):
    n = cfg.n
    x = _as_points(x, n)
    out = np.empty(x.shape + (n,))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            out[..., i - 1, j - 1] = laplace_derivative(x, (i, j), n)
    return out


# ---------------------------------------------------------------------------
# heat kernel (standard normalisation, time already mapped)

def gauss1(z, t):
    """One-dimensional heat kernel (4πt)^{-1/2} exp(-z²/4t), t > 0."""
    t = np.asarray(t, dtype=float)
    return np.exp(-np.square(z) / (4 * t)) / np.sqrt(4 * math.pi * t)


def gauss1_dz(z, t):
    return -np.asarray(z) / (2 * np.asarray(t)) * gauss1(z, t)


def gauss_plane(y, t, d: int):
    """Heat kernel on R^d at points y (last axis length d)."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    t = np.asarray(t, dtype=float)
    return np.exp(-r2 / (4 * t)) / (4 * math.pi * t) ** (d / 2.0)


def heat_kernel(x, t, cfg: KernelConfig):
    """Γ(x, t); zero for t < 0.

    ``heat_norm='paper'`` gives (2πt)^{-n/2} exp(-|x|²/2t), ``'standard'``
    gives (4πt)^{-n/2} exp(-|x|²/4t).
    """
    n = cfg.n
    x = _as_points(x, n)
    t = np.asarray(t, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any((t == 0) & (r2 == 0)):
        raise ValueError("heat kernel is singular at (x, t) = (0, 0)")
    te = t * cfg.time_scale()
    pos = te > 0
    safe = np.where(pos, te, 1.0)
    val = np.exp(-r2 / (4 * safe)) / (4 * math.pi * safe) ** (n / 2.0)
    return np.where(pos, val, 0.0)


def heat_kernel_derivative(x, t, which, cfg: KernelConfig):
    """Closed-form derivative of Γ.

    ``which`` counts derivatives per variable (x_1, ..., x_n, t), total order
    at most 2; e.g. (0, 0, 1, 0) is D_{x_3}Γ for n = 3.
    """
    n = cfg.n
    which = tuple(int(w) for w in which)
    if len(which) != n + 1 or any(w < 0 for w in which):
        raise ValueError(f"multi-index must have n+1={n + 1} nonnegative entries")
    order = sum(which)
    if order > 2:
        raise ValueError("derivatives of total order > 2 are not supported")
    x = _as_points(x, n)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("heat kernel derivatives require t > 0")
    sc = cfg.time_scale()
    te = t * sc
    g = np.exp(-np.sum(x * x, axis=-1) / (4 * te)) / (4 * math.pi * te) ** (n / 2.0)
    r2 = np.sum(x * x, axis=-1)
    kt = which[n]
    sp = [i for i in range(n) for _ in range(which[i])]
    if kt == 0:
        if not sp:
            return g
        if len(sp) == 1:
            return -x[..., sp[0]] / (2 * te) * g
        i, j = sp
        return (x[..., i] * x[..., j] / (4 * te * te) - (i == j) / (2 * te)) * g
    dt1 = r2 / (4 * te * te) - n / (2 * te)
    if kt == 1 and not sp:
        return sc * dt1 * g
    if kt == 1:
        i = sp[0]
        return sc * (x[..., i] / (2 * te * te) - dt1 * x[..., i] / (2 * te)) * g
    # kt == 2
    return sc * sc * (-r2 / (2 * te ** 3) + n / (2 * te * te) + dt1 * dt1) * g


def normal_heat_derivative(x, t, cfg: KernelConfig):
    """D_{x_n}Γ(x, t)."""
    which = [0] * (cfg.n + 1)
    which[cfg.n - 1] = 1
    return heat_kernel_derivative(x, t, which, cfg)


def heat_time_tail(r: float, S: float, n: int) -> float:
    """∫_S^∞ (4πs)^{-n/2} e^{-r²/4s} ds (standard time), n >= 3.

    With u = r²/4s this is (4π)^{-n/2} (r²/4)^{1-n/2} γ(n/2 - 1, r²/4S).
    """
    a = n / 2.0 - 1
    q = r * r / (4 * S)
    return (4 * math.pi) ** (-n / 2.0) * (r * r / 4) ** (-a) * gamma_fn(a) * gammainc(a, q)


def heat_time_integral(x, cfg: KernelConfig, S: float | None = None) -> tuple[float, float]:
    """∫_0^∞ Γ(x, s) ds as (quadrature on (0, S]) + (closed-form tail past S).

    Returns ``(value, tail)``. Requires n >= 3 (the integral diverges for n = 2).
    """
    n = cfg.n
    if n < 3:
        raise ValueError("the time integral of Γ diverges for n = 2")
    x = _as_points(x, n)
    r = float(np.sqrt(np.sum(x * x)))
    if r == 0:
        raise ValueError("x must be nonzero")
    sc = cfg.time_scale()
    if S is None:
        S = 100.0 * r * r
    # in log time the integrand is a smooth bump around s ≈ r²/2n
    v, w = composite_rule(np.linspace(math.log(S) - 40.0, math.log(S), 81), 16)
    s = np.exp(v)
    vals = heat_kernel(x, s, cfg) * s
    head = fsum_dot(w, vals)
    tail = heat_time_tail(r, S * sc, n) / sc
    return head + tail, tail


# ---------------------------------------------------------------------------
# small closed forms used by the counterexample and the region estimates

def hilbert_of_indicator(a: float, b: float, x):
    """Hilbert transform (1/π) p.v.∫_a^b dy/(x - y) of the indicator of (a, b)."""
    if not a < b:
        raise ValueError("need a < b")
    x = np.asarray(x, dtype=float)
    if np.any((x == a) | (x == b)):
        raise ValueError("Hilbert transform of an indicator is singular at the endpoints")
    return (np.log(np.abs(x - a)) - np.log(np.abs(x - b))) / math.pi


def a_factor(M: float, s: float) -> float:
    """ln M - ln min(√s, M); the logarithmic loss of the Riesz-Gauss aggregate."""
    if not (M > 0 and s > 0):
        raise ValueError("M and s must be positive")
    return math.log(M) - math.log(min(math.sqrt(s), M))


REGIONS = ("near_origin", "annulus", "near_singularity", "far")


def _ball_moment2(rho: float, d: int) -> float:
    """∫_{|y| <= rho} |y|² e^{-|y|²} dy over R^d."""
    return sphere_area(d) * 0.5 * gamma_fn((d + 2) / 2.0) * gammainc((d + 2) / 2.0, rho * rho)


def _tail_inverse_power(rho: float, d: int) -> float:
    """∫_{|y| >= rho} |y|^{-d} e^{-|y|²} dy over R^d."""
    return sphere_area(d) * 0.5 * float(exp1(rho * rho))


def region_bound(region: str, x_prime, t: float, cfg: KernelConfig, c: float = 1.0,
                 C: float = 1.0) -> float:
    """Right-hand side of the four Gaussian-Riesz region estimates.

    ``c`` is the Gaussian exponent constant and ``C`` the prefactor; both are
    left to the caller to fit.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    n = cfg.n
    d = n - 1
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    r = float(np.sqrt(xp @ xp))
    g = math.exp(-c * r * r / t)
    if region == "near_origin":
        if r == 0:
            return C * t ** (-d / 2.0)
        rho = 0.5 * r / math.sqrt(t)
        # rescale y to move c out of the moment integral
        return C * (t ** (-d / 2.0) * g + r ** (-d) * _ball_moment2(rho * math.sqrt(c), d) / c ** ((d + 2) / 2.0))
    if region == "annulus":
        return C * t ** (-n / 2.0 + 0.5) * g
    if region == "near_singularity":
        return C * t ** (-(n + 1) / 2.0) * r * r * g
    if region == "far":
        if r == 0:
            return float("inf")
        rho = 2 * r / math.sqrt(t)
        return C * t ** ((1 - n) / 2.0) * _tail_inverse_power(rho * math.sqrt(c), d)
    raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")
