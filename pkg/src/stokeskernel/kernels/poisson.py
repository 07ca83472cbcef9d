"""The Poisson kernel K_ij of the half-space, its L_ij part, and the pressure kernel.

Everything here is built from Gaussian-smoothed derivatives of E,

    G[D^α E](x', a, t) = ∫ Γ'(x' - y', t) D^α E(y', a) dy',   a > 0,

evaluated in closed form for n = 2 (Faddeeva function) and through Hankel
transforms for n = 3. Times in the ``_std`` helpers are standard-kernel times.

Normalisation of L: the iterated integral

    raw_ij = D_{x_j} ∫_0^{x_n} ∫ D_{z_n}Γ(z, t) D_{x_i}E(x - z) dz

satisfies Σ raw_ii = D_nΓ / 2; the kernel returned as L_ij is -4 raw_ij, for
which Σ L_ii = -2 D_nΓ and K_ij below is the velocity kernel of the Stokes
system with the instantaneous term 2 δ_jn δ(t) D_iE.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx, j0, j1, jv, wofz

from ..config import HalfSpacePoint, KernelConfig, KernelValueWithDelta
from ..quadrature import QuadratureError, composite_rule, fsum_dot
from .fundamental import gauss1, gauss1_dz, laplace_derivative, normal_heat_derivative
from .riesz import riesz_closed_std

L_SCALE = -4.0
# beyond this ratio |x'|/√t the plane smoothing changes values by O(t/|x'|²) ~ 1e-6
_UNSMOOTHED_RATIO = 1000.0
SQPI = math.sqrt(math.pi)


def _check_index(i, n):
    if not 1 <= i <= n:
        raise ValueError(f"index {i} out of range 1..{n}")


# ---------------------------------------------------------------------------
# n = 2: Faddeeva closed forms

def _w_derivatives(Z, k):
    """w, w', ..., w^{(k)} at Z (upper half plane)."""
    ws = [wofz(Z)]
    if k >= 1:
        ws.append(-2 * Z * ws[0] + 2j / SQPI)
    for m in range(2, k + 1):
        # w^{(m)} = -2 Z w^{(m-1)} - 2 (m-1) w^{(m-2)}
        ws.append(-2 * Z * ws[m - 1] - 2 * (m - 1) * ws[m - 2])
    return ws


def smoothed_E_2d(k: int, m: int, x1, a, t):
    """G[D_1^k D_2^m E](x1, a, t) for n = 2, k + m in 1..3, a >= 0.

    At a = 0 the value is the boundary limit from above.
    """
    p = k + m
    if not 1 <= p <= 3:
        raise ValueError("order must be 1, 2 or 3")
    s2 = 2 * np.sqrt(t)
    Z = (np.asarray(x1, dtype=float) + 1j * np.asarray(a, dtype=float)) / s2
    wk = _w_derivatives(Z, p - 1)[p - 1]
    # d^{p-1}/dx^{p-1} of G[1/z]
    c = -1j * SQPI / s2 * wk / s2 ** (p - 1)
    return np.real((1j) ** m * c) / (2 * math.pi)


def _raw_L_2d(i: int, j: int, x1: float, xn: float, t: float) -> float:
    # ζ = z / (2√t); Γ_1'(z) dz = -ζ e^{-ζ²} / √(π t) dζ
    s = math.sqrt(t)
    Y = xn / (2 * s)
    top = min(Y, 9.0)
    zeta, w = composite_rule(np.linspace(0.0, top, 13), 12)
    a = 2 * s * (Y - zeta)
    k = (i == 1) + (j == 1)
    m = (i == 2) + (j == 2)
    vals = -zeta * np.exp(-zeta * zeta) / math.sqrt(math.pi * t) * smoothed_E_2d(k, m, x1, a, t)
    out = fsum_dot(w, vals)
    if j == 2:
        if i == 1:
            trace = riesz_closed_std(1, np.array([x1]), t, 2)
        else:
            trace = 0.5 * float(gauss1(x1, t))
        out += float(gauss1_dz(xn, t)) * trace
    return out


# ---------------------------------------------------------------------------
# n = 3: Hankel transforms

def _h_factor(rho, xn, t):
    """e^{-tρ²} ∫_0^{x_n} Γ_1'(z, t) e^{-ρ(x_n - z)} dz in overflow-free form."""
    b = rho * math.sqrt(t)
    c = xn / (2 * math.sqrt(t))
    g0 = 1.0 / math.sqrt(4 * math.pi * t)
    u = b - c
    # e^{-tρ²-c²} erfcx(b-c) = e^{-ρ x_n} erfc(b-c); use erfc directly when b < c
    with np.errstate(over="ignore", invalid="ignore"):
        first_erf = np.where(u >= 0, np.exp(-b * b - c * c) * erfcx(np.maximum(u, 0.0)),
                             np.exp(-rho * xn) * erfc(u))
    first = np.exp(-b * b - c * c) * g0 - 0.5 * rho * first_erf
    second = np.exp(-b * b - rho * xn) * (g0 - 0.5 * rho * erfcx(b))
    return first - second


def _hankel_rule(r: float, t: float, extra_decay: float = 0.0):
    rho_max = 9.0 / math.sqrt(t)
    if extra_decay > 0:
        rho_max = min(rho_max, 40.0 / extra_decay)
    width = rho_max / 24
    if r > 0:
        width = min(width, math.pi / r)
    npan = int(math.ceil(rho_max / width))
    return composite_rule(np.linspace(0.0, rho_max, npan + 1), 16)


def _raw_L_3d(i: int, j: int, xp: np.ndarray, xn: float, t: float) -> float:
    r = float(np.sqrt(xp @ xp))
    if r > _UNSMOOTHED_RATIO * math.sqrt(t):
        return _raw_L_unsmoothed(i, j, xp, xn, t, 3)
    rho, w = _hankel_rule(r, t)
    H = _h_factor(rho, xn, t)
    Q = np.exp(-t * rho * rho) * float(gauss1_dz(xn, t)) - rho * H
    xh = xp / r if r > 0 else np.zeros(2)
    u = rho * r
    if i < 3 and j < 3:
        # -∂_i∂_j J0(ρr) = ρ²[δ_ij J1(ρr)/(ρr) - x̂_i x̂_j J2(ρr)]
        j1_over = np.where(u > 0, j1(u) / np.where(u > 0, u, 1.0), 0.5)
        vals = H * rho * rho * ((i == j) * j1_over - xh[i - 1] * xh[j - 1] * jv(2, u))
        return fsum_dot(w, vals) / (4 * math.pi)
    if i < 3 and j == 3:
        return xh[i - 1] / (4 * math.pi) * fsum_dot(w, Q * rho * j1(u))
    if i == 3 and j < 3:
        return -xh[j - 1] / (4 * math.pi) * fsum_dot(w, H * rho * rho * j1(u))
    return fsum_dot(w, Q * rho * j0(u)) / (4 * math.pi)


def _raw_L_unsmoothed(i, j, xp, xn, t, n):
    """Far from the origin on the scale √t the plane Gaussian acts as a delta."""
    s = math.sqrt(t)
    Y = xn / (2 * s)
    zeta, w = composite_rule(np.linspace(0.0, min(Y, 9.0), 13), 12)
    a = 2 * s * (Y - zeta)
    pts = np.concatenate([np.broadcast_to(xp, (a.size, n - 1)), a[:, None]], axis=1)
    vals = -zeta * np.exp(-zeta * zeta) / math.sqrt(math.pi * t) * laplace_derivative(pts, (i, j), n)
    out = fsum_dot(w, vals)
    if j == n and i < n:
        out += float(gauss1_dz(xn, t)) * float(laplace_derivative(np.append(xp, 0.0), (i,), n))
    return out


def raw_L_std(i: int, j: int, xp, xn: float, t: float, n: int) -> float:
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if n == 2:
        return _raw_L_2d(i, j, float(xp[0]), xn, t)
    if n == 3:
        return _raw_L_3d(i, j, xp, xn, t)
    raise NotImplementedError("L is implemented for n = 2, 3")


def kernel_L(i: int, j: int, x: HalfSpacePoint, t: float, cfg: KernelConfig) -> float:
    """L_ij(x, t), normalised so that Σ_i L_ii = -2 D_{x_n}Γ."""
    n = cfg.n
    x.check(cfg)
    _check_index(i, n)
    _check_index(j, n)
    if not t > 0:
        raise ValueError("t must be positive")
    sc = cfg.time_scale()
    val = L_SCALE * raw_L_std(i, j, x.x_prime, x.x_n, t * sc, n)
    if not math.isfinite(val):
        raise QuadratureError(f"L_{i}{j} evaluation produced {val}")
    return val


def kernel_K(i: int, j: int, x: HalfSpacePoint, t: float, cfg: KernelConfig) -> KernelValueWithDelta:
    """K_ij = -2 δ_ij D_nΓ - L_ij + 2 δ_jn δ(t) D_iE."""
    n = cfg.n
    _check_index(i, n)
    _check_index(j, n)
    reg = -kernel_L(i, j, x, t, cfg)
    if i == j:
        reg -= 2 * float(normal_heat_derivative(x.as_array(), t, cfg))
    delta = 2 * float(laplace_derivative(x.as_array(), (i,), n)) if j == n else 0.0
    return KernelValueWithDelta(reg, delta)


# ---------------------------------------------------------------------------
# pressure

def smoothed_E_3d(tan: int, m: int, xp, a: float, t: float) -> float:
    """G[D_tan D_3^m E](x', a, t) for n = 3 with at most one tangential derivative.

    ``tan`` is 0 for none, else the tangential index 1 or 2.
    """
    xp = np.asarray(xp, dtype=float)
    r = float(np.sqrt(xp @ xp))
    if r > _UNSMOOTHED_RATIO * math.sqrt(t) and a > 0:
        idx = ((tan,) if tan else ()) + (3,) * m
        return float(laplace_derivative(np.append(xp, a), idx, 3))
    rho, w = _hankel_rule(r, t, a)
    e = np.exp(-t * rho * rho - rho * a) * (-rho) ** m
    if tan == 0:
        return -fsum_dot(w, e * j0(rho * r)) / (4 * math.pi)
    if r == 0:
        return 0.0
    return xp[tan - 1] / r / (4 * math.pi) * fsum_dot(w, e * rho * j1(rho * r))


def smoothed_E_std(alpha: tuple[int, ...], xp, a: float, t: float, n: int) -> float:
    """G[D^α E](x', a, t); α lists 1-based derivative indices."""
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    m = sum(1 for k in alpha if k == n)
    tans = [k for k in alpha if k != n]
    if n == 2:
        if not alpha:
            return _smoothed_log_2d(float(xp[0]), a, t)
        return float(smoothed_E_2d(len(tans), m, xp[0], a, t))
    if n == 3:
        if len(tans) > 1:
            raise NotImplementedError("at most one tangential derivative for n = 3")
        return smoothed_E_3d(tans[0] if tans else 0, m, xp, a, t)
    raise NotImplementedError("implemented for n = 2, 3")


def _smoothed_log_2d(x1: float, a: float, t: float) -> float:
    # smooth integrand for a > 0; panels follow the Gaussian and the scale a
    s = math.sqrt(t)
    edges = np.unique(np.concatenate([x1 + s * np.linspace(-12, 12, 49),
                                      np.clip([-a, 0.0, a], x1 - 12 * s, x1 + 12 * s)]))
    y, w = composite_rule(edges, 16)
    vals = gauss1(x1 - y, t) * np.log(y * y + a * a) / (4 * math.pi)
    return fsum_dot(w, vals)


def pressure_harmonic_A(x: HalfSpacePoint, t: float, cfg: KernelConfig,
                        alpha: tuple[int, ...] = ()) -> float:
    """D^α A(x, t) with A = ∫ Γ(z', 0, t) E(x' - z', x_n) dz' (spatial derivatives only)."""
    x.check(cfg)
    if not t > 0:
        raise ValueError("t must be positive")
    te = t * cfg.time_scale()
    g0 = 1.0 / math.sqrt(4 * math.pi * te)
    val = g0 * smoothed_E_std(tuple(alpha), x.x_prime, x.x_n, te, cfg.n)
    if not math.isfinite(val):
        raise QuadratureError("A evaluation produced a non-finite value")
    return val


def pressure_A_dt(j: int, x: HalfSpacePoint, t: float, cfg: KernelConfig) -> float:
    """D_t D_{x_j} A in closed form: the plane heat flow of D_jE, Δ' = -D_n² on harmonics."""
    n = cfg.n
    sc = cfg.time_scale()
    te = t * sc
    g0 = 1.0 / math.sqrt(4 * math.pi * te)
    dg0 = -0.5 * g0 / te
    inner = smoothed_E_std((j,), x.x_prime, x.x_n, te, n)
    lap = -smoothed_E_std((j, n, n), x.x_prime, x.x_n, te, n)
    return sc * (dg0 * inner + g0 * lap)


def kernel_pressure(j: int, x: HalfSpacePoint, t: float, cfg: KernelConfig) -> KernelValueWithDelta:
    """π_j = 4 D_t D_jA + 4 D_j D_n D_n A + δ(t)(-2 D_jD_nE) + δ'(t)(-2 δ_jn E).

    ``delta_prime_coeff`` multiplies the time derivative of the data trace.
    The D_t D_jA part is not integrable at t = 0; ``pressure`` in the
    representation module moves that derivative onto the data.
    """
    n = cfg.n
    x.check(cfg)
    _check_index(j, n)
    reg = 4 * pressure_A_dt(j, x, t, cfg) + 4 * pressure_harmonic_A(x, t, cfg, (j, n, n))
    pt = x.as_array()
    delta = -2 * float(laplace_derivative(pt, (j, n), n))
    dprime = -2 * float(laplace_derivative(pt, (), n)) if j == n else 0.0
    return KernelValueWithDelta(reg, delta, dprime)
