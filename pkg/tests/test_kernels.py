import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stokeskernel.config import KernelConfig
from stokeskernel.kernels import (REGIONS, a_factor, heat_kernel, heat_kernel_derivative, heat_time_integral,
                                  hilbert_of_indicator, laplace_derivative, laplace_fundamental,
                                  laplace_fundamental_gradient, laplace_hessian, normal_heat_derivative,
                                  region_bound)
from stokeskernel.quadrature import composite_rule

import oracles

C2, C3 = KernelConfig(n=2), KernelConfig(n=3)
P3 = KernelConfig(n=3, heat_norm="paper")


# Laplace

def test_laplace_values():
    assert laplace_fundamental([1.0, 0.0, 0.0], C3) == pytest.approx(-1 / (4 * math.pi))
    assert laplace_fundamental([0.0, 2.0, 0.0], C3) == pytest.approx(-1 / (8 * math.pi))
    assert laplace_fundamental([0.6, 0.8], C2) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(ValueError):
        laplace_fundamental([0.0, 0.0], C2)


def test_laplace_gradient_values():
    assert np.allclose(laplace_fundamental_gradient([1.0, 0.0, 0.0], C3), [1 / (4 * math.pi), 0, 0])
    assert np.allclose(laplace_fundamental_gradient([1.0, 0.0], C2), [1 / (2 * math.pi), 0])


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: sum(a * a for a in v) > 1e-2))
def test_laplace_gradient_odd(v):
    x = np.array(v)
    assert np.allclose(laplace_fundamental_gradient(-x, C3), -laplace_fundamental_gradient(x, C3))


@pytest.mark.parametrize("cfg", [C2, C3])
def test_laplace_derivatives_by_fd(cfg):
    n = cfg.n
    x = np.array([0.7, -0.4, 0.9][:n])
    h = 1e-5
    grad = laplace_fundamental_gradient(x, cfg)
    hess = laplace_hessian(x, cfg)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (laplace_fundamental(x + e, cfg) - laplace_fundamental(x - e, cfg)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-7)
        assert laplace_derivative(x, (i + 1,), n) == pytest.approx(grad[i], rel=1e-12)
        fdg = (laplace_fundamental_gradient(x + e, cfg) - laplace_fundamental_gradient(x - e, cfg)) / (2 * h)
        assert np.allclose(hess[:, i], fdg, rtol=1e-6)
    # harmonic
    assert abs(np.trace(hess)) <= 1e-12 * np.max(np.abs(hess))
    # third derivative by FD of the second
    e = np.zeros(n)
    e[n - 1] = h
    fd3 = (laplace_derivative(x + e, (1, n), n) - laplace_derivative(x - e, (1, n), n)) / (2 * h)
    assert laplace_derivative(x, (1, n, n), n) == pytest.approx(fd3, rel=1e-6)


# heat

def test_heat_values():
    assert heat_kernel(np.zeros(3), 1.0, P3) == pytest.approx((2 * math.pi) ** -1.5)
    assert heat_kernel(np.zeros(3), 1.0, C3) == pytest.approx((4 * math.pi) ** -1.5)
    assert heat_kernel(np.ones(3), -1.0, C3) == 0.0
    assert heat_kernel(np.ones(3), -1.0, P3) == 0.0
    with pytest.raises(ValueError):
        heat_kernel(np.zeros(2), 0.0, C2)


def test_half_time_normalisation_is_standard_at_half_time():
    x = np.array([0.3, -0.2, 0.5])
    assert heat_kernel(x, 0.8, P3) == pytest.approx(heat_kernel(x, 0.4, C3), rel=1e-14)


@pytest.mark.parametrize("cfg", [C2, C3, P3])
def test_heat_unit_mass(cfg):
    t = 0.7
    z, w = composite_rule(np.linspace(-10, 10, 9), 12)
    axes = np.meshgrid(*([z] * cfg.n), indexing="ij")
    pts = np.stack(axes, axis=-1)
    W = w
    for _ in range(cfg.n - 1):
        W = np.multiply.outer(W, w)
    assert float(np.sum(W * heat_kernel(pts, t, cfg))) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("cfg", [C2, C3, P3])
def test_heat_derivatives_by_fd(cfg):
    n = cfg.n
    x = np.ones(n)
    t, h = 0.7, 1e-5
    for k in range(n + 1):
        which = [0] * (n + 1)
        which[k] = 1
        e = np.zeros(n)
        if k < n:
            e[k] = h
            fd = (heat_kernel(x + e, t, cfg) - heat_kernel(x - e, t, cfg)) / (2 * h)
        else:
            fd = (heat_kernel(x, t + h, cfg) - heat_kernel(x, t - h, cfg)) / (2 * h)
        assert heat_kernel_derivative(x, t, which, cfg) == pytest.approx(fd, rel=1e-6)
    # a mixed second order derivative: D_t D_{x_1}
    which = [0] * (n + 1)
    which[0] = which[n] = 1
    d1 = lambda tt: heat_kernel_derivative(x, tt, [1] + [0] * n, cfg)
    assert heat_kernel_derivative(x, t, which, cfg) == pytest.approx((d1(t + h) - d1(t - h)) / (2 * h), rel=1e-6)
    # heat equation: ∂_t Γ = sc·ΔΓ with sc the time scale
    lap = sum(heat_kernel_derivative(x, t, [2 if m == k else 0 for m in range(n)] + [0], cfg) for k in range(n))
    dt = heat_kernel_derivative(x, t, [0] * n + [1], cfg)
    assert dt == pytest.approx(cfg.time_scale() * lap, rel=1e-12)


def test_heat_derivative_symmetries():
    for t in (0.01, 1.0, 50.0):
        assert heat_kernel_derivative(np.zeros(3), t, (1, 0, 0, 0), C3) == 0.0
    x = np.array([0.2, 0.3, 0.4])
    xr = x * np.array([1, 1, -1])
    assert normal_heat_derivative(xr, 0.5, C3) == pytest.approx(-normal_heat_derivative(x, 0.5, C3))
    with pytest.raises(ValueError):
        heat_kernel_derivative(x, 0.0, (1, 0, 0, 0), C3)
    with pytest.raises(ValueError):
        heat_kernel_derivative(x, 1.0, (2, 1, 0, 0), C3)


def test_time_integral_recovers_minus_E():
    x = np.array([0.3, -0.4, 0.5])
    val, tail = heat_time_integral(x, C3)
    assert val == pytest.approx(-laplace_fundamental(x, C3), rel=1e-12)
    assert val == pytest.approx(oracles.heat_time_integral(float(np.linalg.norm(x)), 3), rel=1e-9)
    assert 0 < tail < val
    with pytest.raises(ValueError):
        heat_time_integral(np.array([1.0, 1.0]), C2)


# counterexample and region helpers

def test_hilbert_of_indicator():
    assert hilbert_of_indicator(-1, 1, 0.0) == 0.0
    assert hilbert_of_indicator(-1, 1, 2.0) == pytest.approx(math.log(3) / math.pi)
    assert hilbert_of_indicator(-1, 1, 0.9) == pytest.approx((math.log(1.9) - math.log(0.1)) / math.pi)
    for x in (-3.0, 0.3, 1.5):
        assert hilbert_of_indicator(-1, 1, x) == pytest.approx(oracles.hilbert_indicator_pv(-1, 1, x), rel=1e-9)
    with pytest.raises(ValueError):
        hilbert_of_indicator(-1, 1, 1.0)


def test_a_factor():
    assert a_factor(2.0, 4.0) == 0.0
    assert a_factor(2.0, 9.0) == 0.0
    assert a_factor(2.0, 1.0) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        a_factor(0.0, 1.0)


@given(st.floats(0.1, 10), st.floats(1e-4, 100), st.floats(1e-4, 100))
def test_a_factor_monotone(M, s1, s2):
    lo, hi = sorted((s1, s2))
    assert a_factor(M, hi) <= a_factor(M, lo) + 1e-15
    assert a_factor(M, lo) >= 0


def test_region_bound_examples():
    for n, cfg in ((2, C2), (3, C3)):
        assert region_bound("annulus", [1.0] + [0.0] * (n - 2), 1.0, cfg) == pytest.approx(math.exp(-1))
    far = [region_bound("far", [1.0], t, C2) for t in (1.0, 0.1, 0.01, 1e-3)]
    assert all(a > b for a, b in zip(far, far[1:])) and far[-1] < 1e-100
    ns = [region_bound("near_singularity", [r, 0.0], 1.0, C3) for r in (1e-2, 1e-3)]
    assert ns[0] / ns[1] == pytest.approx(100.0, rel=1e-4)
    with pytest.raises(ValueError):
        region_bound("nowhere", [1.0], 1.0, C2)
    for r in REGIONS:
        assert region_bound(r, [0.5], 0.3, C2) >= 0
