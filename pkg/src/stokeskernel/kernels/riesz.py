"""Plane Gaussian convolved with the boundary trace of ∇E, and kernels built on it.

R_i(x', t) = ∫ Γ'(y', t) D_i E(x' - y', 0) dy' is a principal-value
integral; it is the plane factor of the commutator kernel

    B_in(x, t) = -D_{x_n}Γ_1(x_n, t) R_i(x', t).

Times passed to the ``_std`` helpers are already mapped to the standard
heat normalisation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import dawsn, i0e, i1e, j1

from ..config import HalfSpacePoint, KernelConfig, sphere_area
from ..quadrature import QuadratureError, composite_rule, fsum_dot, graded_rule
from .fundamental import gauss1, gauss1_dz, gauss_plane, laplace_derivative

METHODS = ("closed", "direct", "spectral")


def _xprime(x_prime, n):
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if xp.size != n - 1:
        raise ValueError(f"x' must have length n-1={n - 1}")
    return xp


# ---------------------------------------------------------------------------
# closed forms

def riesz_closed_std(i: int, xp: np.ndarray, t: float, n: int) -> float:
    if n == 2:
        s = math.sqrt(t)
        return float(dawsn(xp[0] / (2 * s)) / (2 * math.pi * s))
    if n == 3:
        r2 = float(xp @ xp)
        q = r2 / (8 * t)
        return float(xp[i - 1] / (4 * math.pi) * math.sqrt(math.pi) / (2 * math.sqrt(t))
                     / (4 * t) * (i0e(q) - i1e(q)))
    raise NotImplementedError("closed-form Riesz-Gauss convolution exists for n = 2, 3")


# ---------------------------------------------------------------------------
# spectral: inverse Fourier transform of the multiplier -iξ_i e^{-t|ξ|²}/(2|ξ|)

def _oscillatory_rule(r: float, t: float, order: int = 16):
    rho_max = 9.0 / math.sqrt(t)
    width = rho_max / 16
    if r > 0:
        width = min(width, math.pi / r)
    npan = int(math.ceil(rho_max / width))
    return composite_rule(np.linspace(0.0, rho_max, npan + 1), order)


def riesz_spectral_std(i: int, xp: np.ndarray, t: float, n: int) -> float:
    r = float(np.sqrt(xp @ xp))
    if r == 0:
        return 0.0
    rho, w = _oscillatory_rule(r, t)
    if n == 2:
        vals = np.exp(-t * rho * rho) * np.sin(rho * xp[0])
        return fsum_dot(w, vals) / (2 * math.pi)
    if n == 3:
        vals = rho * np.exp(-t * rho * rho) * j1(rho * r)
        return xp[i - 1] / r / (4 * math.pi) * fsum_dot(w, vals)
    raise NotImplementedError("spectral evaluation exists for n = 2, 3")


# ---------------------------------------------------------------------------
# direct: four-region splitting around the origin and the singular point

def _smooth_panels(a: float, b: float, scale: float, order: int = 16, ratio: float = 1.3):
    """Panels of width <= scale, starting at a quarter of a and growing geometrically."""
    if b <= a:
        return np.empty(0), np.empty(0)
    edges = [a]
    h = min(scale, a / 4) if a > 0 else scale
    while edges[-1] < b:
        edges.append(min(b, edges[-1] + h))
        h = min(scale, h * ratio)
    return composite_rule(np.asarray(edges), order)


def _direct_1d(x: float, t: float, absolute: bool = False) -> dict:
    """Four regions for n = 2 with x > 0; signed region integrals, or integrals of |·|.

    With ``absolute`` the singular disc integrates the modulus of the folded
    (principal value) integrand, since |Γ'·D_iE| itself is not integrable there.
    """
    A = np.abs if absolute else (lambda v: v)
    s = math.sqrt(t)
    cut = 14 * s  # Gaussian is below e^{-49} past this radius
    scale = 0.5 * s
    k = lambda y: 1.0 / (2 * math.pi * (x - y))
    out = {}
    # |y| <= x/2
    # pair y with -y so the odd part cancels analytically
    pair = lambda y: gauss1(y, t) * 2 * x / (2 * math.pi * (x * x - y * y))
    y, w = _smooth_panels(0.0, min(x / 2, cut), scale)
    out["near_origin"] = fsum_dot(w, pair(y)) if y.size else 0.0
    # |x - y| <= x/2, principal value by folding
    h = min(x / 2, max(0.0, cut + x / 2))
    u, w = _smooth_panels(0.0, h, scale)
    if u.size:
        vals = (gauss1(x - u, t) - gauss1(x + u, t)) / (2 * math.pi * u)
        out["near_singularity"] = fsum_dot(w, A(vals))
    else:
        out["near_singularity"] = 0.0
    # x/2 <= |y| <= 2x minus the singular disc: [-2x, -x/2] and [3x/2, 2x]
    tot = 0.0
    for a, b in ((-2 * x, -x / 2), (1.5 * x, 2 * x)):
        a, b = max(a, -cut), min(b, cut)
        y, w = _smooth_panels(a, b, scale)
        if y.size:
            tot += fsum_dot(w, A(gauss1(y, t) * k(y)))
    out["annulus"] = tot
    y, w = _smooth_panels(2 * x, cut, scale)
    # for |y| > 2x the two mirrored terms have opposite signs
    far = (lambda y: gauss1(y, t) * 2 * y / (2 * math.pi * (y * y - x * x))) if absolute else pair
    out["far"] = fsum_dot(w, far(y)) if y.size else 0.0
    return out


def _direct_2d(i: int, xp: np.ndarray, t: float, n_theta: int = 96, absolute: bool = False) -> dict:
    A = np.abs if absolute else (lambda v: v)
    s = math.sqrt(t)
    r = float(np.sqrt(xp @ xp))
    cut = 14 * s
    scale = 0.5 * s
    om = sphere_area(3)

    def kern(y):  # D_i E(x' - y', 0) in n = 3
        d = xp[None, :] - y
        return d[:, i - 1] / (om * np.sum(d * d, axis=1) ** 1.5)

    th = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
    wth = 2 * math.pi / n_theta
    out = {}

    def polar_origin(r_lo, r_hi):
        r_hi = min(r_hi, cut)
        if r_hi <= r_lo:
            return 0.0
        rr, wr = _smooth_panels(r_lo, r_hi, scale)
        R, T = np.meshgrid(rr, th, indexing="ij")
        y = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
        W = (wr[:, None] * rr[:, None] * wth * np.ones_like(th)[None, :]).ravel()
        return fsum_dot(W, A(gauss_plane(y, t, 2) * kern(y)))

    out["near_origin"] = polar_origin(0.0, r / 2)
    out["far"] = polar_origin(2 * r, np.inf)
    # singular disc |y - x| <= r/2: fold antipodal points, kernel is odd
    h = min(r / 2, cut + r / 2)
    rr, wr = _smooth_panels(0.0, h, scale)
    half = th[: n_theta // 2]
    R, T = np.meshgrid(rr, half, indexing="ij")
    e = np.stack([np.cos(T), np.sin(T)], axis=-1)
    wv = R[..., None] * e
    gp = gauss_plane(xp + wv, t, 2) - gauss_plane(xp - wv, t, 2)
    # D_iE(-w) = -w_i/(ω|w|³); ∫ ρ dρ dθ
    vals = gp * (-e[..., i - 1]) / (om * R * R) * R
    out["near_singularity"] = float(fsum_dot((wr[:, None] * wth * np.ones_like(half)[None, :]).ravel(),
                                             A(vals).ravel()))
    # annulus r/2 <= |y| <= 2r outside the singular disc
    lo, hi = r / 2, min(2 * r, cut)
    tot = 0.0
    if hi > lo:
        # the excluded arc opens like a square root at r/2 and 3r/2; a cosine map
        # of [r/2, 3r/2] removes that endpoint behaviour
        hi1 = min(1.5 * r, hi)
        phi1 = math.acos(max(-1.0, 1.0 - 2 * (hi1 - lo) / r))
        ph, wph = composite_rule(np.linspace(0.0, phi1, 9), 16)
        rr = r - 0.5 * r * np.cos(ph)
        wr = wph * 0.5 * r * np.sin(ph)
        if hi > hi1:
            r2_, w2_ = _smooth_panels(hi1, hi, scale)
            rr, wr = np.concatenate([rr, r2_]), np.concatenate([wr, w2_])
        thx = math.atan2(xp[1], xp[0])
        for rho, wrho in zip(rr, wr):
            c0 = (rho * rho + 0.75 * r * r) / (2 * rho * r)
            alpha = math.acos(min(1.0, c0))
            a_, b_ = thx + alpha, thx + 2 * math.pi - alpha
            tt, wt = composite_rule(np.linspace(a_, b_, 9), 16)
            y = np.column_stack([rho * np.cos(tt), rho * np.sin(tt)])
            tot += wrho * rho * fsum_dot(wt, A(gauss_plane(y, t, 2) * kern(y)))
    out["annulus"] = tot
    return out


def riesz_regions_std(i: int, xp: np.ndarray, t: float, n: int, absolute: bool = False) -> dict:
    """Integrals of Γ'·D_iE(x'-·,0) over the four regions of the splitting (signed, or of |·|)."""
    r = float(np.sqrt(xp @ xp))
    if r == 0:
        return dict.fromkeys(("near_origin", "annulus", "near_singularity", "far"), 0.0)
    if n == 2:
        sign = 1.0 if xp[0] > 0 else -1.0
        if absolute:
            sign = 1.0
        return {k: sign * v for k, v in _direct_1d(abs(float(xp[0])), t, absolute).items()}
    if n == 3:
        return _direct_2d(i, xp, t, absolute=absolute)
    raise NotImplementedError("direct evaluation exists for n = 2, 3")


def riesz_direct_std(i: int, xp: np.ndarray, t: float, n: int) -> float:
    parts = riesz_regions_std(i, xp, t, n)
    return math.fsum(parts[k] for k in ("near_origin", "near_singularity", "annulus", "far"))


_DISPATCH = {"closed": riesz_closed_std, "direct": riesz_direct_std, "spectral": riesz_spectral_std}


def riesz_gauss_convolution(i: int, x_prime, t: float, cfg: KernelConfig, method: str = "direct") -> float:
    """R_i(x', t) = ∫ Γ'(y', t) D_iE(x' - y', 0) dy' for tangential i (1-based)."""
    n = cfg.n
    if not 1 <= i <= n - 1:
        raise ValueError(f"tangential index must satisfy 1 <= i <= {n - 1}")
    if not t > 0:
        raise ValueError("t must be positive")
    if method not in _DISPATCH:
        raise ValueError(f"method must be one of {METHODS}")
    xp = _xprime(x_prime, n)
    return _DISPATCH[method](i, xp, t * cfg.time_scale(), n)


def riesz_method_check(i: int, x_prime, t: float, cfg: KernelConfig, rtol: float | None = None) -> float:
    """Direct and spectral values; raises QuadratureError if they disagree."""
    rtol = max(cfg.tol_space, 1e-5) if rtol is None else rtol
    a = riesz_gauss_convolution(i, x_prime, t, cfg, "direct")
    b = riesz_gauss_convolution(i, x_prime, t, cfg, "spectral")
    scale = max(abs(a), abs(b))
    if scale > 0 and abs(a - b) > rtol * scale:
        raise QuadratureError(f"direct/spectral disagreement {abs(a - b) / scale:.2e} > {rtol:.1e}")
    return a


# ---------------------------------------------------------------------------
# commutator kernel and composite kernel

def kernel_B(i: int, x: HalfSpacePoint, t: float, cfg: KernelConfig, method: str = "closed") -> float:
    """B_in(x, t) = -D_{x_n}Γ_1(x_n, t) R_i(x', t); zero for i = n."""
    n = cfg.n
    x.check(cfg)
    if not 1 <= i <= n:
        raise ValueError("index out of range")
    if not t > 0:
        raise ValueError("t must be positive")
    if i == n:
        return 0.0
    te = t * cfg.time_scale()
    return float(-gauss1_dz(x.x_n, te) * _DISPATCH[method](i, np.asarray(x.x_prime), te, n))


def kernel_B_std(i: int, x1, x_n, te, n: int = 2):
    """Vectorised B_in for n = 2 (i = 1) in standard time; used by the convolutions."""
    s = np.sqrt(te)
    return -gauss1_dz(x_n, te) * dawsn(x1 / (2 * s)) / (2 * math.pi * s)


def gauss_log_potential_std(xp: np.ndarray, t: float, n: int, tol: float = 1e-10) -> float:
    """(Γ'(·,t) * E(·,0))(x') by quadrature (log or 1/r singularity at y' = x')."""
    s = math.sqrt(t)
    cut = 14 * s
    if n == 2:
        x = float(xp[0])
        a, b = -cut, cut
        focus = (min(max(x, a), b),)
        y, w = graded_rule(min(a, x - 1e-12), max(b, x + 1e-12), focus=focus, h_min=1e-6 * s, order=20)
        d = np.abs(x - y)
        vals = gauss1(y, t) * np.log(np.where(d > 0, d, 1.0)) / (2 * math.pi)
        return fsum_dot(w, vals)
    if n == 3:
        # polar around x': the 1/ρ singularity cancels the Jacobian
        r = math.sqrt(float(xp @ xp))
        if r >= 2 * cut:
            # kernel is smooth on the Gaussian's support: polar about the origin
            n_theta = 96
            th = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
            rr, wr = composite_rule(np.linspace(0, cut, 29), 16)
            R, T = np.meshgrid(rr, th, indexing="ij")
            y = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1)
            d = np.sqrt(np.sum((xp - y) ** 2, axis=-1))
            vals = gauss_plane(y, t, 2) * (-1.0 / (sphere_area(3) * d)) * R
            return fsum_dot(wr[:, None] * (2 * math.pi / n_theta) * np.ones_like(T), vals)
        # the Gaussian subtends an angle of order √t/|x'| seen from x'
        n_theta = int(max(96, 16 * math.ceil(r / s)))
        th = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
        reach = cut + float(np.sqrt(xp @ xp))
        rr, wr = composite_rule(np.linspace(0, reach, int(math.ceil(reach / (0.5 * s))) + 1), 16)
        R, T = np.meshgrid(rr, th, indexing="ij")
        y = np.stack([xp[0] + R * np.cos(T), xp[1] + R * np.sin(T)], axis=-1)
        vals = gauss_plane(y, t, 2) * (-1.0 / sphere_area(3))
        W = wr[:, None] * (2 * math.pi / n_theta)
        return fsum_dot(W * np.ones_like(T), vals)
    raise NotImplementedError("implemented for n = 2, 3")


def gauss_log_potential_closed_std(xp: np.ndarray, t: float) -> float:
    """n = 3 closed form: -(1/4π) √π/(2√t) e^{-q} I_0(q), q = |x'|²/8t."""
    q = float(xp @ xp) / (8 * t)
    return -math.sqrt(math.pi) / (2 * math.sqrt(t)) * float(i0e(q)) / (4 * math.pi)


def composite_kappa_halfspace(x: HalfSpacePoint, t: float, cfg: KernelConfig) -> float:
    """κ(x, t) = -∫ D_{x_n}Γ(x' - y', x_n, t) E(y', 0) dy' on the flat boundary."""
    x.check(cfg)
    if not t > 0:
        raise ValueError("t must be positive")
    te = t * cfg.time_scale()
    xp = np.asarray(x.x_prime)
    pot = gauss_log_potential_std(xp, te, cfg.n)
    if not np.isfinite(pot):
        raise QuadratureError("composite kernel quadrature produced a non-finite value")
    return float(-gauss1_dz(x.x_n, te) * pot)


def riesz_poisson_convolution(i: int, x: HalfSpacePoint, cfg: KernelConfig) -> float:
    """(D_nE(·, x_n) *' D_iE(·, 0))(x') for tangential i, by principal-value quadrature.

    Antipodal points about y' = 0 are paired so the 1/|y'|^{n-1} singularity
    of the boundary trace cancels.
    """
    n = cfg.n
    x.check(cfg)
    if not 1 <= i <= n - 1:
        raise ValueError("tangential index required")
    xp = np.asarray(x.x_prime)
    xn = x.x_n
    r = float(np.sqrt(xp @ xp))
    L = max(r, xn)
    # geometric radial panels; the far tail decays like ρ^{-n-1}
    edges = np.concatenate([[0.0], np.geomspace(1e-6 * xn, 1e7 * L, 241)])
    if r > 0:
        edges = np.unique(np.concatenate([edges, r + xn * np.linspace(-8, 8, 33)]))
        edges = edges[edges >= 0]
    rho, wr = composite_rule(edges, 16)
    poisson = lambda p: laplace_derivative(np.concatenate([p, np.full(p.shape[:-1] + (1,), xn)], -1), (n,), n)
    if n == 2:
        y = rho[:, None]
        diff = poisson(xp - y) - poisson(xp + y)
        return fsum_dot(wr, diff / (2 * math.pi * rho))
    if n == 3:
        n_theta = int(max(64, 16 * math.ceil(r / xn)))
        th = (np.arange(n_theta) + 0.5) * (math.pi / n_theta)
        e = np.stack([np.cos(th), np.sin(th)], -1)
        Y = rho[:, None, None] * e[None, :, :]
        diff = poisson(xp - Y) - poisson(xp + Y)
        # D_iE(y', 0) = y_i / (4π ρ³); Jacobian ρ
        vals = diff * e[None, :, i - 1] / (4 * math.pi * rho[:, None])
        W = wr[:, None] * (math.pi / n_theta)
        return fsum_dot(W * np.ones_like(vals), vals)
    raise NotImplementedError("implemented for n = 2, 3")
