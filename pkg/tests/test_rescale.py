import math

import numpy as np
import pytest

from torusflow.errors import ValidationError
from torusflow.flow import FlowParams, rhs
from torusflow.rescale import RescaleParams, from_rescaled, t_of_tau, tau_of_t, to_rescaled

from conftest import stationary_state


def test_tau_closed_form():
    p = RescaleParams(s=1.0, t0=0.0, sigma0=1.0)
    assert tau_of_t(p, math.e - 1.0) == pytest.approx(1.0, abs=1e-14)


def test_tau_linear_when_s_zero():
    p = RescaleParams(s=0.0, t0=2.0, sigma0=4.0)
    assert tau_of_t(p, 6.0) == pytest.approx(1.0, abs=1e-15)
    assert tau_of_t(p, 2.0) == 0.0


def test_time_map_roundtrip():
    for s in (0.0, 1.3, -0.2):
        p = RescaleParams(s=s, t0=0.5, sigma0=2.0)
        for t in (0.5, 1.0, 2.5):
            tau = tau_of_t(p, t)
            assert t_of_tau(p, tau) == pytest.approx(t, abs=1e-13)
            assert tau_of_t(p, t_of_tau(p, tau)) == pytest.approx(tau, abs=1e-13)


def test_state_roundtrip(sol_hol):
    rng = np.random.default_rng(1)
    state, s, _ = stationary_state(sol_hol, 32)
    state.u.values[:] = 1.0 + 0.1 * rng.uniform(size=32)
    state.A.values[:] = 0.1 * rng.standard_normal((32, 2))
    p = RescaleParams(s=0.8, c=0.4, t0=0.0, sigma0=1.0)
    t = 1.7
    back = from_rescaled(p, to_rescaled(p, state, t), t)
    assert np.abs(back.u.values - state.u.values).max() <= 1e-13
    assert np.abs(back.A.values - state.A.values).max() <= 1e-13
    assert np.abs(back.G.values - state.G.values).max() <= 1e-13 * np.abs(state.G.values).max()


def test_linear_in_time_unscaled_family_maps_to_unit_u(sol_hol):
    # unscaled family u_bar = 1 + s t with A = 0 and G fixed: the rescaled u
    # is identically 1 at every time
    n = 64
    state, s, _ = stationary_state(sol_hol, n)
    p = RescaleParams(s=s, c=0.0, t0=0.0, sigma0=1.0)
    for t in (0.0, 0.5, 3.0):
        unscaled = state.copy()
        unscaled.u.values[:] = 1.0 + s * t
        res = to_rescaled(p, unscaled, t)
        assert np.abs(res.u.values - 1.0).max() == 0.0
        assert np.array_equal(res.G.values, state.G.values)  # c = 0: untouched


def test_stationarity_transport(sol_hol):
    # rescaling the unscaled family at any t yields a state whose flow
    # residual is at the discretization level
    n = 128
    state, s, _ = stationary_state(sol_hol, n)
    p = RescaleParams(s=s, c=0.0, t0=0.0, sigma0=1.0)
    t = 2.0
    unscaled = state.copy()
    unscaled.u.values[:] = 1.0 + s * t
    res = to_rescaled(p, unscaled, t)
    r = rhs(res, FlowParams(s=s, t_end=1.0))
    assert max(np.abs(r.du.values).max(), np.abs(r.dA.values).max(),
               np.abs(r.dG.values).max()) <= 1e-3


def test_sigma_domain_validation():
    p = RescaleParams(s=-1.0, t0=0.0, sigma0=1.0)
    with pytest.raises(ValidationError):
        tau_of_t(p, 2.0)  # sigma(2) = -1
    with pytest.raises(ValidationError):
        RescaleParams(s=1.0, sigma0=0.0)
