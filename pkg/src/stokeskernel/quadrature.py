"""Integration engine for the singular space-time convolutions.

Everything here is deterministic: node sets, traversal order and summation
order depend only on the inputs.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class QuadratureError(RuntimeError):
    pass


@dataclass
class QuadratureResult:
    value: float
    error_estimate: float = 0.0
    evaluations: int = 0
    tail_bound: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if self.error_estimate < 0 or self.tail_bound < 0:
            raise ValueError("error_estimate and tail_bound must be nonnegative")

    @property
    def total_error(self) -> float:
        return self.error_estimate + self.tail_bound

    def __float__(self):
        return float(self.value)


def neumaier_sum(values) -> float:
    """Compensated sum in the given (fixed) order."""
    total = 0.0
    comp = 0.0
    for v in np.asarray(values, dtype=float).ravel():
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def fsum_dot(weights, values) -> float:
    return math.fsum(np.asarray(weights, dtype=float).ravel() * np.asarray(values, dtype=float).ravel())


# --------------------------------------------------------------------------
# 1-D rules

@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


# Gauss-Kronrod 7-15 on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# positions of the 7 Gauss nodes inside the 15 Kronrod nodes
GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
GAUSS_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])


def composite_rule(breaks: Sequence[float], order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on every panel [breaks[k], breaks[k+1]]."""
    b = np.asarray(breaks, dtype=float)
    if b.size < 2:
        return np.empty(0), np.empty(0)
    x, w = gauss_legendre(order)
    lo, hi = b[:-1], b[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def graded_breaks(a: float, b: float, focus: Sequence[float] = (), h_min: float | None = None,
                  ratio: float = 0.5, extra: Sequence[float] = ()) -> np.ndarray:
    """Panel edges on [a, b] refined geometrically toward each focus point.

    Panel widths grow by ``1/ratio`` away from a focus point, starting at
    ``h_min``. ``extra`` points are inserted as plain edges (data jumps).
    """
    if not b > a:
        raise ValueError("need b > a")
    length = b - a
    if h_min is None:
        h_min = 1e-6 * length
    h_min = min(h_min, length)
    grow = 1.0 / ratio
    pts = {a, b}
    for p in extra:
        if a < p < b:
            pts.add(float(p))
    for c in focus:
        if not a <= c <= b:
            continue
        pts.add(float(c))
        for sign in (-1.0, 1.0):
            d = h_min
            while True:
                q = c + sign * d
                if not a < q < b:
                    break
                pts.add(q)
                d *= grow
    edges = np.array(sorted(pts))
    # split panels that are much wider than their distance to a focus point
    if len(focus):
        fo = np.array([c for c in focus if a <= c <= b] or [a])
        out = [edges[0]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            dist = np.min(np.minimum(np.abs(fo - lo), np.abs(fo - hi)))
            dist = max(dist, h_min)
            k = int(min(64, max(1, math.ceil((hi - lo) / (grow * dist)))))
            out.extend(np.linspace(lo, hi, k + 1)[1:])
        edges = np.array(out)
    return edges


def graded_rule(a, b, focus=(), h_min=None, order=16, extra=(), ratio=0.5):
    return composite_rule(graded_breaks(a, b, focus, h_min, ratio, extra), order)


# --------------------------------------------------------------------------
# adaptive tensor Gauss-Kronrod cubature

def _gk_box(f, lo, hi):
    d = lo.size
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    axes = [mid[k] + half[k] * GK_NODES for k in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = np.asarray(f(grid), dtype=float).reshape((15,) * d)
    jac = float(np.prod(half))
    wk = GK_WEIGHTS
    # full Kronrod tensor value
    v = vals
    for _ in range(d):
        v = np.tensordot(v, wk, axes=([0], [0]))
    kron = float(v) * jac
    # per-axis error: Gauss along axis k, Kronrod elsewhere
    errs = np.empty(d)
    wg_full = np.zeros(15)
    wg_full[GAUSS_IDX] = GAUSS_WEIGHTS
    for k in range(d):
        v = vals
        for ax in range(d):
            v = np.tensordot(v, wg_full if ax == k else wk, axes=([0], [0]))
        errs[k] = abs(kron - float(v) * jac)
    if not np.isfinite(kron):
        raise QuadratureError("integrand is not finite on the box")
    return kron, errs, vals.size


def adaptive_integral(f: Callable[[np.ndarray], np.ndarray], box, tol: float, *,
                      rtol: float = 0.0, max_evals: int = 2_000_000,
                      raise_on_failure: bool = False) -> QuadratureResult:
    """Globally adaptive tensor Gauss-Kronrod (7-15) cubature on a box in R^d.

    ``f`` takes an array of shape (m, d) and returns m values. The box is a
    sequence of (lo, hi) pairs. Subdivision bisects the box along the axis
    with the largest Gauss/Kronrod discrepancy.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    lo0, hi0 = box[:, 0].copy(), box[:, 1].copy()
    if np.any(hi0 < lo0):
        raise ValueError("box bounds must satisfy lo <= hi")
    if np.any(hi0 == lo0):
        return QuadratureResult(0.0, 0.0, 0)
    counter = itertools.count()
    val, errs, nev = _gk_box(f, lo0, hi0)
    evals = nev
    heap = [(-errs.sum(), next(counter), lo0, hi0, val, errs)]
    total_err = errs.sum()
    converged = True
    while heap:
        target = max(tol, rtol * abs(sum(item[4] for item in heap)))
        if total_err <= target:
            break
        if evals >= max_evals:
            converged = False
            break
        negerr, idx, lo, hi, v, e = heapq.heappop(heap)
        total_err += negerr
        k = int(np.argmax(e))
        midk = 0.5 * (lo[k] + hi[k])
        for a_, b_ in ((lo[k], midk), (midk, hi[k])):
            nlo, nhi = lo.copy(), hi.copy()
            nlo[k], nhi[k] = a_, b_
            cv, ce, cn = _gk_box(f, nlo, nhi)
            evals += cn
            total_err += ce.sum()
            heapq.heappush(heap, (-ce.sum(), next(counter), nlo, nhi, cv, ce))
    items = sorted(heap, key=lambda it: it[1])
    value = neumaier_sum([it[4] for it in items])
    err = float(sum(it[0] for it in items) * -1.0)
    if not converged and raise_on_failure:
        raise QuadratureError(f"no convergence: error {err:.3e} > tol {tol:.3e} after {evals} evaluations")
    return QuadratureResult(value, max(err, 0.0), evals, 0.0, converged)


# --------------------------------------------------------------------------
# time convolution

def graded_time_convolution(kernel: Callable[[np.ndarray], np.ndarray],
                            data: Callable[[np.ndarray], np.ndarray], t: float, tol: float, *,
                            breakpoints: Sequence[float] = (), h_min: float | None = None,
                            max_refine: int = 12) -> QuadratureResult:
    """∫_0^t kernel(t - s) data(s) ds on a mesh graded toward s = t.

    Panels shrink by the ratio 0.5 toward the singular endpoint; the depth
    (smallest panel) and the Gauss order are increased until two successive
    rules agree to ``tol``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if h_min is None:
        h_min = t * 1e-3
    evals = 0
    prev = None
    order = 8
    for it in range(max_refine):
        s, w = graded_rule(0.0, t, focus=(t,), h_min=h_min, order=order, extra=breakpoints)
        tau = t - s
        vals = np.asarray(kernel(tau), dtype=float) * np.asarray(data(s), dtype=float)
        evals += s.size
        cur = fsum_dot(w, vals)
        if prev is not None:
            err = abs(cur - prev)
            if err <= tol:
                return QuadratureResult(cur, err, evals)
        prev = cur
        h_min *= 0.25
        order = min(2 * order, 48) if it % 2 == 0 else order
    return QuadratureResult(prev, abs(cur - prev) if prev is not None else float("inf"), evals,
                            converged=False)


# --------------------------------------------------------------------------
# plane rules

def disk_polar_rule(center: np.ndarray, radius: float, focus: np.ndarray, h_min: float,
                    order: int = 16, n_theta: int = 64, extra_r: Sequence[float] = (),
                    circles: Sequence[float] = ()):
    """Nodes/weights on the disk |y| <= radius, polar around ``focus``.

    Radial panels are graded toward the focus point; the angular rule is the
    periodic trapezoid rule. Each ray is cut where it crosses a circle
    |y - center| = c for c in ``circles`` (data jumps).
    """
    center = np.asarray(center, dtype=float)
    focus = np.asarray(focus, dtype=float)
    theta = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
    ux, uy = np.cos(theta), np.sin(theta)
    d = focus - center
    # distance from the focus to the circle along each ray
    b = d[0] * ux + d[1] * uy
    c = d @ d - radius * radius
    disc = b * b - c
    if c > 0:
        raise ValueError("focus must lie inside the disk")
    rmax = -b + np.sqrt(np.maximum(disc, 0.0))
    cuts = []
    for cr in circles:
        dc = b * b - (d @ d - cr * cr)
        root = np.sqrt(np.maximum(dc, 0.0))
        cuts.append(np.where(dc > 0, -b - root, -1.0))
        cuts.append(np.where(dc > 0, -b + root, -1.0))
    nodes, weights = [], []
    for k in range(n_theta):
        ek = list(extra_r) + [float(q[k]) for q in cuts if 0 < q[k] < rmax[k]]
        r, wr = graded_rule(0.0, rmax[k], focus=(0.0,), h_min=min(h_min, rmax[k]), order=order,
                            extra=ek)
        nodes.append(np.column_stack([focus[0] + r * ux[k], focus[1] + r * uy[k]]))
        weights.append(wr * r * (2 * math.pi / n_theta))
    return np.concatenate(nodes), np.concatenate(weights)


def plane_rule(n: int, radius: float, focus, h_min: float, order: int = 16, n_theta: int = 64,
               extra: Sequence[float] = ()):
    """Quadrature for ∫_{|y'| <= radius} over R^{n-1}, refined toward ``focus``.

    ``extra`` are jump positions: edges for n = 2, circle radii |y'| for n = 3.
    """
    focus = np.atleast_1d(np.asarray(focus, dtype=float))
    if n == 2:
        f0 = float(focus[0])
        foc = (f0,) if -radius <= f0 <= radius else ()
        y, w = graded_rule(-radius, radius, focus=foc + (-radius, radius) if not foc else foc,
                           h_min=h_min, order=order, extra=extra)
        return y[:, None], w
    if n == 3:
        if focus @ focus > radius * radius:
            focus = focus * (radius / math.sqrt(focus @ focus)) * (1 - 1e-12)
        circles = sorted({abs(float(e)) for e in extra if 0 < abs(float(e)) < radius})
        return disk_polar_rule(np.zeros(2), radius, focus, h_min, order, n_theta, circles=circles)
    raise NotImplementedError("plane quadrature is implemented for n = 2, 3")


def truncated_plane_convolution(kernel: Callable[[np.ndarray], np.ndarray],
                                data: Callable[[np.ndarray], np.ndarray], x_prime, radius: float,
                                tol: float, *, n: int | None = None, support_radius: float | None = None,
                                data_sup: float | None = None,
                                tail: Callable[[float], float] | None = None,
                                scale: float | None = None, breakpoints: Sequence[float] = (),
                                max_refine: int = 8) -> QuadratureResult:
    """∫_{|y'| <= radius} kernel(x' - y') data(y') dy'.

    ``kernel`` and ``data`` take arrays of shape (m, n-1). ``scale`` is the
    length scale of the kernel's peak at y' = x'. When the data support
    extends past ``radius``, ``tail(radius)`` (a bound for ∫_{|z|>radius}|k|)
    times ``data_sup`` is reported as ``tail_bound``.
    """
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if n is None:
        n = x_prime.size + 1
    if scale is None:
        scale = 1e-3 * radius
    h_min = 0.05 * scale
    order, n_theta = 12, 32
    prev, evals = None, 0
    for it in range(max_refine):
        y, w = plane_rule(n, radius, x_prime, h_min, order=order, n_theta=n_theta, extra=breakpoints)
        vals = np.asarray(kernel(x_prime[None, :] - y), dtype=float) * np.asarray(data(y), dtype=float)
        evals += w.size
        cur = fsum_dot(w, vals)
        if prev is not None and abs(cur - prev) <= tol:
            break
        prev = cur
        h_min *= 0.25
        order = min(order + 8, 40)
        n_theta = min(2 * n_theta, 512)
    err = abs(cur - prev) if prev is not None else float("inf")
    tail_bound = 0.0
    if support_radius is not None and support_radius > radius:
        if tail is None or data_sup is None:
            tail_bound = float("inf")
        else:
            tail_bound = abs(data_sup) * tail(radius)
    return QuadratureResult(cur, err, evals, tail_bound, converged=err <= tol)


# --------------------------------------------------------------------------
# grid convolution

@dataclass
class PlaneGrid:
    """Uniform cell-centred samples on [-extent, extent)^{n-1}.

    Node k sits at -extent + k*h with h = 2*extent/points_per_side, so the
    origin is node points_per_side // 2.
    """

    extent: float
    points_per_side: int
    values: np.ndarray

    def __post_init__(self):
        N = self.points_per_side
        if N < 8 or N & (N - 1):
            raise ValueError("points_per_side must be a power of two >= 8")
        if not self.extent > 0:
            raise ValueError("extent must be positive")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size not in (N, N * N) or any(s != N for s in self.values.shape):
            raise ValueError("values must have shape (N,) or (N, N)")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def spacing(self) -> float:
        return 2 * self.extent / self.points_per_side

    def axis(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.points_per_side)

    @classmethod
    def sample(cls, fn, extent: float, points_per_side: int, dim: int) -> "PlaneGrid":
        h = 2 * extent / points_per_side
        ax = -extent + h * np.arange(points_per_side)
        if dim == 1:
            pts = ax[:, None]
        else:
            X, Y = np.meshgrid(ax, ax, indexing="ij")
            pts = np.column_stack([X.ravel(), Y.ravel()])
        vals = np.asarray(fn(pts), dtype=float).reshape((points_per_side,) * dim)
        return cls(extent, points_per_side, vals)


def grid_spectral_convolve(a: PlaneGrid, b: PlaneGrid) -> PlaneGrid:
    """Discrete plane convolution h^d Σ_j a[j] b[k-j], zero padded by a factor 2."""
    if a.points_per_side != b.points_per_side or a.extent != b.extent or a.dim != b.dim:
        raise ValueError("grids must share extent, resolution and dimension")
    N, d = a.points_per_side, a.dim
    shape = (2 * N,) * d
    fa = np.fft.rfftn(a.values, s=shape, axes=tuple(range(d)))
    fb = np.fft.rfftn(b.values, s=shape, axes=tuple(range(d)))
    full = np.fft.irfftn(fa * fb, s=shape, axes=tuple(range(d)))
    sl = tuple(slice(N // 2, N // 2 + N) for _ in range(d))
    return PlaneGrid(a.extent, N, full[sl] * a.spacing ** d)
