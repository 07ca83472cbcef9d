"""Vectorised kernel evaluation over node arrays, used by the space-time convolutions.

All functions take standard-kernel times ``tau`` (already scaled) and
tangential offsets ``dx`` of shape (m, n-1); they return arrays of shape (m,).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import dawsn, i0e, i1e

from ..config import sphere_area
from ..quadrature import composite_rule
from .fundamental import gauss1, gauss1_dz, gauss_plane
from .poisson import raw_L_std, smoothed_E_2d

# ζ rule on [0, 1], rescaled to [0, min(Y, 9)] per node
_ZETA_U, _ZETA_W = composite_rule(np.linspace(0.0, 1.0, 9), 10)


def riesz_batch(i: int, dx, tau, n: int):
    dx = np.asarray(dx, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if n == 2:
        s = np.sqrt(tau)
        return dawsn(dx[:, 0] / (2 * s)) / (2 * math.pi * s)
    if n == 3:
        q = np.sum(dx * dx, axis=1) / (8 * tau)
        return (dx[:, i - 1] / (4 * math.pi) * math.sqrt(math.pi) / (2 * np.sqrt(tau)) / (4 * tau)
                * (i0e(q) - i1e(q)))
    raise NotImplementedError("n = 2, 3 only")


def B_batch(i: int, dx, xn: float, tau, n: int):
    """B_in at (dx, x_n, τ); zero for i = n."""
    if i == n:
        return np.zeros(len(tau))
    return -gauss1_dz(xn, tau) * riesz_batch(i, dx, tau, n)


def normal_gamma_batch(dx, xn: float, tau, n: int):
    """D_{x_n}Γ(dx, x_n, τ)."""
    return gauss1_dz(xn, tau) * gauss_plane(dx, tau, n - 1)


def laplace_grad_batch(i: int, dx, xn: float, n: int):
    dx = np.asarray(dx, dtype=float)
    r2 = np.sum(dx * dx, axis=1) + xn * xn
    comp = dx[:, i - 1] if i < n else np.full(len(dx), xn)
    return comp / (sphere_area(n) * r2 ** (n / 2.0))


def raw_L_batch(i: int, j: int, dx, xn: float, tau, n: int):
    """raw_ij of the poisson module over arrays; vectorised for n = 2."""
    dx = np.asarray(dx, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if n == 3:
        return np.array([raw_L_std(i, j, d, xn, t, 3) for d, t in zip(dx, tau)])
    if n != 2:
        raise NotImplementedError("n = 2, 3 only")
    x1 = dx[:, 0]
    s = np.sqrt(tau)
    Y = xn / (2 * s)
    top = np.minimum(Y, 9.0)
    zeta = top[:, None] * _ZETA_U[None, :]
    w = top[:, None] * _ZETA_W[None, :]
    a = 2 * s[:, None] * (Y[:, None] - zeta)
    k = (i == 1) + (j == 1)
    m = (i == 2) + (j == 2)
    g = smoothed_E_2d(k, m, x1[:, None], a, tau[:, None])
    vals = -zeta * np.exp(-zeta * zeta) / np.sqrt(math.pi * tau[:, None]) * g
    out = np.sum(w * vals, axis=1)
    if j == 2:
        trace = dawsn(x1 / (2 * s)) / (2 * math.pi * s) if i == 1 else 0.5 * gauss1(x1, tau)
        out = out + gauss1_dz(xn, tau) * trace
    return out
