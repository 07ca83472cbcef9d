import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokeskernel.moduli import (ModulusGrid, dini_norm_space, logdini_norm_time, modulus_of_continuity_time,
                                 time_modulus_profile, zero_past_extension)
from stokeskernel.representation import BoundaryField

import oracles

indicator = lambda s: ((s > 0.5) & (s < 1.0)).astype(float)
GRID = ModulusGrid(r_min=1e-4, r0=0.5, n_r=160)


def test_pointwise_modulus():
    const = lambda s: np.full(np.shape(s), 3.0)
    assert modulus_of_continuity_time(const, 0.1, 1.0, 2.0) == 0.0
    # closed window (t - r, t + r) on the sample grid: just below r
    w = modulus_of_continuity_time(lambda s: s, 0.1, 1.0, 2.0, h=1e-4)
    assert 0.1 - 1e-4 - 1e-12 <= w < 0.1
    # zero-past extension counts: near t = 0 the window reaches s <= 0
    assert modulus_of_continuity_time(const, 0.5, 0.1, 2.0) == 3.0
    with pytest.raises(ValueError):
        modulus_of_continuity_time(const, 0.0, 1.0, 2.0)


def test_indicator_sup_modulus_is_one():
    prof = time_modulus_profile(indicator, 2.0, GRID)
    assert np.all(prof.omega == 1.0)
    assert prof.possibly_infinite


def test_logdini_linear_closed_form():
    prof = logdini_norm_time(lambda s: s, r0=0.5, horizon=2.0)
    assert not prof.possibly_infinite
    exact = oracles.logdini_linear(0.5)
    assert exact == pytest.approx(0.5 * (1 - math.log(0.5)))
    assert prof.logdini == pytest.approx(exact, rel=1e-2)


def test_logdini_constant_and_indicator():
    const = logdini_norm_time(lambda s: np.ones_like(s), r0=0.5, horizon=2.0)
    # the zero-past extension makes a constant jump at s = 0; away from it ω is zero
    assert logdini_norm_time(lambda s: np.where(s > 0, 1.0, 0.0) * 0.0, r0=0.5).logdini == 0.0
    assert const.possibly_infinite
    assert logdini_norm_time(indicator, r0=0.5).possibly_infinite
    assert math.isinf(logdini_norm_time(indicator, r0=0.5).logdini)


def test_dini_space():
    assert dini_norm_space(lambda y: np.full(len(y), 2.0), r0=0.5).dini == 0.0
    L = 3.0
    prof = dini_norm_space(lambda y: L * np.sin(y[:, 0]), r0=0.5, extent=2.0)
    assert not prof.possibly_infinite
    assert prof.dini <= L * 0.5 * (1 + 1e-9)
    jump = dini_norm_space(lambda y: (np.abs(y[:, 0]) < 1).astype(float), r0=0.5)
    assert jump.possibly_infinite


def test_dini_space_2d_lipschitz():
    g = ModulusGrid(r_min=1e-2, r0=0.05, n_r=8, spacing=2.5e-3)
    prof = dini_norm_space(lambda y: y[:, 0] + 0.5 * y[:, 1], r0=0.05, grid=g, extent=0.2, dim=2)
    assert 0 < prof.dini <= math.hypot(1, 0.5) * 0.05 * (1 + 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), st.floats(0.05, 0.4))
def test_homogeneity(alpha, tau):
    f = lambda s: np.clip((s - 0.5) / tau, 0, 1)
    g = ModulusGrid(r_min=1e-3, r0=0.5, n_r=40)
    a = logdini_norm_time(f, grid=g, r0=0.5)
    b = logdini_norm_time(lambda s: alpha * f(s), grid=g, r0=0.5)
    assert b.logdini == pytest.approx(abs(alpha) * a.logdini, rel=1e-12)
    assert b.dini == pytest.approx(abs(alpha) * a.dini, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_omega_nondecreasing(c):
    f = lambda s: c[0] * np.sin(7 * s) + c[1] * (s > 0.7) + c[2] * s * s + c[3] * np.abs(s - 1.1)
    prof = time_modulus_profile(f, 2.0, ModulusGrid(r_min=1e-3, r0=0.5, n_r=40))
    assert np.all(np.diff(prof.omega) >= 0)


def test_mollification_reduces_logdini():
    def ramp(tau):
        return lambda s: np.clip((s - 0.5) / tau + 0.5, 0, 1)
    g = ModulusGrid(r_min=1e-4, r0=0.5, n_r=80)
    vals = [logdini_norm_time(ramp(tau), grid=g, r0=0.5, horizon=2.0) for tau in (0.01, 0.05, 0.2)]
    assert not any(v.possibly_infinite for v in vals)
    assert vals[0].logdini > vals[1].logdini > vals[2].logdini


def test_zero_past_extension():
    raw = BoundaryField((lambda y, s: np.ones(len(y)), lambda y, s: 2.0 * np.ones(len(y))), 1.0, 2.0)
    ext = zero_past_extension(raw)
    y = np.zeros((3, 1))
    s = np.array([-1.0, 0.0, 0.5])
    assert list(ext.components[1](y, s)) == [0.0, 0.0, 2.0]
    assert list(ext.components[0](y, s)) == [0.0, 0.0, 1.0]


def test_grid_validation():
    with pytest.raises(ValueError):
        ModulusGrid(r_min=0.6, r0=0.5)
    with pytest.raises(ValueError):
        ModulusGrid(n_r=4)
