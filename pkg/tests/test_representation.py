import numpy as np
import pytest
from hypothesis import given, strategies as st

from stokeskernel.config import HalfSpacePoint, KernelConfig
from stokeskernel.experiments import cosine_bump_cdf, counterexample_field
from stokeskernel.representation import (BoundaryField, b_convolution, cancellation_form,
                                         combined_tangential_operator, normal_tangential_split, pressure,
                                         single_layer_S, surface_potential_T, velocity)

C2, C3 = KernelConfig(n=2), KernelConfig(n=3)

phi = lambda y: np.clip(1 - np.sum(y * y, axis=1), 0, None) ** 4
psi = lambda s: cosine_bump_cdf(s - 0.4, 0.4) - cosine_bump_cdf(s - 1.2, 0.4)


def smooth_field(a=0.5, b=1.0):
    return BoundaryField((lambda y, s: a * phi(y) * psi(s), lambda y, s: b * phi(y) * psi(s)), 1.0, 2.0,
                         (0.2, 0.6, 1.0, 1.4), (-1.0, 1.0), "smooth")


# split

def test_split_examples():
    x = HalfSpacePoint([0.0, 0.0], 1.0)
    uN, uT = normal_tangential_split([1.0, 0.0, 0.0], x)
    assert list(uT) == [1.0, 0.0, 0.0] and list(uN) == [0.0, 0.0, 0.0]
    uN, uT = normal_tangential_split([0.0, 0.0, 1.0], x)
    assert list(uN) == [0.0, 0.0, 1.0] and list(uT) == [0.0, 0.0, 0.0]


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
def test_split_sums_exactly(u):
    uN, uT = normal_tangential_split(u, HalfSpacePoint([0.0, 0.0], 1.0))
    assert np.array_equal(uN + uT, np.asarray(u))
    assert uN[0] == uN[1] == 0.0 and uT[2] == 0.0


# zero data

@pytest.mark.parametrize("cfg", [C2, C3])
def test_zero_data(cfg):
    n = cfg.n
    g = BoundaryField.zero(n)
    x = HalfSpacePoint([0.2, 0.1][: n - 1], 0.3)
    u, err = velocity(g, x, 1.0, cfg)
    assert np.all(u == 0) and err == 0
    assert pressure(g, x, 1.0, cfg)[0] == 0.0
    assert np.all(combined_tangential_operator(g, x, 1.0, cfg) == 0)
    assert cancellation_form(g, x, 1.0, 1, cfg) == 0.0
    zf = lambda y: np.zeros(len(y))
    assert single_layer_S(zf, x, cfg) == 0.0
    assert surface_potential_T(lambda y, s: zf(y), x, 1.0, cfg) == 0.0


# layer potentials

def test_single_layer_radial_and_harmonic():
    f = lambda y: phi(y)
    a = single_layer_S(f, HalfSpacePoint([0.3, 0.4], 0.2), C3)
    b = single_layer_S(f, HalfSpacePoint([0.5, 0.0], 0.2), C3)
    assert a == pytest.approx(b, rel=1e-6)
    S = lambda p, q: single_layer_S(f, HalfSpacePoint([p], q), C2, tol=1e-12)
    x1, xn, h = 0.4, 0.5, 1e-2
    c = S(x1, xn)
    lap = (S(x1 + h, xn) + S(x1 - h, xn) + S(x1, xn + h) + S(x1, xn - h) - 4 * c) / h ** 2
    d2 = abs((S(x1, xn + h) + S(x1, xn - h) - 2 * c) / h ** 2)
    assert abs(lap) <= 1e-3 * d2


def test_surface_potential_gradient_is_B_convolution():
    f = lambda y, s: phi(y) * psi(s)
    g = BoundaryField.normal_only(f, 2, 1.0, 2.0, (0.2, 0.6, 1.0, 1.4), (-1.0, 1.0))
    t, xn, h = 1.0, 0.2, 1e-4
    T = lambda p: surface_potential_T(f, HalfSpacePoint([p], xn), t, C2, time_breaks=g.time_breaks,
                                      space_breaks=g.space_breaks, tol=1e-10)
    fd = (T(0.5 + h) - T(0.5 - h)) / (2 * h)
    ref = 4 * b_convolution(1, g, HalfSpacePoint([0.5], xn), t, C2, 1e-10).value
    assert fd == pytest.approx(ref, rel=1e-3)


def test_surface_potential_time_shift():
    f = lambda y, s: phi(y) * psi(s)
    shifted = lambda y, s: f(y, s - 0.3)
    x = HalfSpacePoint([0.2], 0.3)
    a = surface_potential_T(f, x, 1.0, C2, time_breaks=(0.2, 0.6, 1.0, 1.4), tol=1e-9)
    b = surface_potential_T(shifted, x, 1.3, C2, time_breaks=(0.5, 0.9, 1.3, 1.7), tol=1e-9)
    assert b == pytest.approx(a, rel=1e-6)


# tangential operator

def test_tangential_operator_matches_cancellation_form():
    g = counterexample_field(2, tau=0.1)
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = HalfSpacePoint([rng.uniform(-1.5, 1.5)], 10 ** rng.uniform(-2, 0))
        t = rng.uniform(0.3, 1.8)
        direct = combined_tangential_operator(g, x, t, C2, tol=1e-9)
        assert direct[1] == 0.0
        canc = cancellation_form(g, x, t, 1, C2, tol=1e-9)
        scale = max(1.0, abs(direct[0]))
        assert abs(canc - direct[0]) <= 1e-3 * scale


def test_tangential_operator_constant_in_time():
    # f(y', s) = φ(y') for s > 0: the difference term vanishes identically
    f = lambda y, s: phi(y) * (s > 0)
    x = HalfSpacePoint([0.4], 0.2)
    direct = combined_tangential_operator(f, x, 1.0, C2, tol=1e-10)[0]
    assert cancellation_form(f, x, 1.0, 1, C2, tol=1e-10) == pytest.approx(direct, rel=1e-6)


def test_tangential_operator_bounded_for_lipschitz_data():
    # Lipschitz-in-time data: no growth as x_n decreases
    f = lambda y, s: phi(y) * np.clip(s, 0, 1)
    vals = [abs(combined_tangential_operator(f, HalfSpacePoint([0.5], xn), 1.2, C2, tol=1e-9)[0])
            for xn in (0.1, 0.01, 0.001)]
    assert all(b <= 2 * a for a, b in zip(vals, vals[1:]))


def test_normal_index_is_zero():
    assert cancellation_form(counterexample_field(2, 0.1), HalfSpacePoint([0.1], 0.1), 1.0, 2, C2) == 0.0


# velocity and pressure

def test_velocity_pressure_linear():
    x = HalfSpacePoint([0.3], 0.5)
    g, g2 = smooth_field(), smooth_field(-1.5, -3.0)
    u, eu = velocity(g, x, 1.0, C2, 1e-6)
    u2, eu2 = velocity(g2, x, 1.0, C2, 1e-6)
    assert np.allclose(u2, -3.0 * u, atol=10 * (eu + eu2) + 1e-6)
    p, _ = pressure(g, x, 1.0, C2, 1e-6)
    p2, _ = pressure(g2, x, 1.0, C2, 1e-6)
    assert p2 == pytest.approx(-3.0 * p, rel=1e-6)


@pytest.mark.slow
def test_velocity_attains_boundary_data():
    g = smooth_field()
    y = np.array([[0.3]])
    target = np.array([0.5 * phi(y)[0], phi(y)[0]]) * psi(np.array([1.0]))[0]
    u, _ = velocity(g, HalfSpacePoint([0.3], 0.005), 1.0, C2, 1e-6)
    assert np.allclose(u, target, rtol=2e-2)


@pytest.mark.slow
def test_stokes_residual():
    # u_t - Δu + ∇p = 0 and div u = 0 by central differences at an interior point
    g = smooth_field()
    x0, t0, h, tol = np.array([0.3, 0.5]), 1.0, 0.02, 1e-10

    def U(dx=0.0, dy=0.0, dt=0.0):
        return velocity(g, HalfSpacePoint([x0[0] + dx], x0[1] + dy), t0 + dt, C2, tol)[0]

    def P(dx=0.0, dy=0.0):
        return pressure(g, HalfSpacePoint([x0[0] + dx], x0[1] + dy), t0, C2, tol)[0]

    u0, ux1, ux0, uy1, uy0 = U(), U(h), U(-h), U(0, h), U(0, -h)
    lap = (ux1 + ux0 + uy1 + uy0 - 4 * u0) / h ** 2
    ut = (U(0, 0, h) - U(0, 0, -h)) / (2 * h)
    gp = np.array([(P(h) - P(-h)) / (2 * h), (P(0, h) - P(0, -h)) / (2 * h)])
    scale = np.max(np.abs(lap))
    assert np.max(np.abs(ut - lap + gp)) <= 1e-2 * scale
    div = (ux1[0] - ux0[0]) / (2 * h) + (uy1[1] - uy0[1]) / (2 * h)
    assert abs(div) <= 1e-2 * np.max(np.abs(ux1 - ux0)) / (2 * h) + 1e-3


def test_field_validation():
    with pytest.raises(ValueError):
        BoundaryField((lambda y, s: y[:, 0],), 1.0, 1.0)
    g = smooth_field()
    with pytest.raises(ValueError):
        velocity(g, HalfSpacePoint([0.0], 0.5), 3.0, C2)
    with pytest.raises(ValueError):
        velocity(g, HalfSpacePoint([0.0, 0.0], 0.5), 1.0, C2)
