import math

import numpy as np
import pytest

from torusflow.errors import ValidationError
from torusflow.grid import (
    FiberField,
    PeriodicScalarField,
    TwistedGrid,
    canonical_frame,
    d0,
    d0sq,
    discrete_inner,
    discrete_rescaling_constant,
    drift_generator,
    harmonic_einstein,
    holonomy_residual,
)
from torusflow.spd import Holonomy

from conftest import SOL, random_admissible_holonomy


def _analytic_dG(hol, n, order=1):
    s, si = hol.similarity, hol.similarity_inv
    xi = np.arange(n) / n
    lnd = np.log(hol.eigvals)
    core = (hol.eigvals[None, :] ** (2 * xi[:, None])) * (2 * lnd[None, :]) ** order
    return np.einsum("ij,mj,kj->mik", si.T, core, si.T)


def test_d0_constant_scalar_is_zero(sol_hol):
    grid = TwistedGrid(64, sol_hol)
    f = PeriodicScalarField(np.full(64, 3.7), grid)
    assert np.abs(d0(f)).max() == 0.0


def test_d0_sine_second_order(sol_hol):
    n = 256
    grid = TwistedGrid(n, sol_hol)
    xi = grid.nodes
    f = PeriodicScalarField(np.sin(2 * np.pi * xi), grid)
    err = np.abs(d0(f) - 2 * np.pi * np.cos(2 * np.pi * xi)).max()
    assert err <= 1e-3  # Taylor bound (2 pi)^3 dxi^2 / 6


def test_d0_canonical_fiber_matches_analytic(sol_hol):
    errs = []
    for n in (128, 256):
        g, _, _ = harmonic_einstein(sol_hol, n)
        errs.append(np.abs(d0(g) - _analytic_dG(sol_hol, n)).max())
    assert errs[1] <= 1e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5  # O(dxi^2)


def test_d0sq_linear_interior(sol_hol):
    n = 64
    grid = TwistedGrid(n, sol_hol)
    f = PeriodicScalarField(0.3 + 1.7 * grid.nodes, grid)
    interior = d0sq(f)[1:-1]
    assert np.abs(interior).max() <= 1e-9


def test_d0sq_sine(sol_hol):
    n = 256
    grid = TwistedGrid(n, sol_hol)
    xi = grid.nodes
    f = PeriodicScalarField(np.sin(2 * np.pi * xi), grid)
    expected = -4 * np.pi**2 * np.sin(2 * np.pi * xi)
    err = np.abs(d0sq(f) - expected).max()
    assert err <= 0.01 * 4 * np.pi**2


def test_d0sq_canonical_fiber(sol_hol):
    errs = []
    for n in (128, 256):
        g, _, _ = harmonic_einstein(sol_hol, n)
        errs.append(np.abs(d0sq(g) - _analytic_dG(sol_hol, n, order=2)).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_harmonic_einstein_trivial():
    hol = Holonomy.from_matrix(np.eye(2))
    g, s, w = harmonic_einstein(hol, 16)
    assert s == 0.0
    assert np.abs(g.values - np.eye(2)).max() == 0.0
    assert np.abs(w).max() == 0.0


def test_harmonic_einstein_sol_closed_form(sol_hol):
    n = 64
    g, s, w = harmonic_einstein(sol_hol, n)
    assert s == pytest.approx(4 * math.log(2.0) ** 2, abs=1e-15)
    xi = np.arange(n) / n
    expected = np.zeros((n, 2, 2))
    expected[:, 0, 0] = 4.0**xi
    expected[:, 1, 1] = 4.0**-xi
    assert np.abs(g.values - expected).max() <= 1e-13 * 4.0
    assert np.allclose(w, np.diag([2 * math.log(2.0), -2 * math.log(2.0)]), atol=1e-14)


def test_harmonic_einstein_cat_map(cat_hol):
    _, s, _ = harmonic_einstein(cat_hol, 32)
    lam = (3 + math.sqrt(5.0)) / 2
    assert s == pytest.approx((2 * math.log(lam)) ** 2, rel=1e-13)


def test_harmonic_einstein_symmetric_power_form(cat_hol):
    # for symmetric holonomy the family is (Lambda^T Lambda)^xi
    n = 32
    g, _, _ = harmonic_einstein(cat_hol, n)
    from torusflow.spd import spd_log, sym_exp
    log_ll = spd_log(cat_hol.lam.T @ cat_hol.lam)
    for m in (0, 7, 19):
        expected = sym_exp((m / n) * log_ll)
        assert np.abs(g.values[m] - expected).max() <= 1e-12 * np.abs(expected).max()


def test_velocity_constant_and_norm(sol_hol):
    n = 256
    g, s, _ = harmonic_einstein(sol_hol, n)
    dg = d0(g)
    ginv = np.linalg.inv(g.values)
    w_disc = np.einsum("mij,mjk->mik", ginv, dg)
    assert np.abs(w_disc - w_disc[0]).max() <= 1e-12
    normsq = np.einsum("mij,mji->m", w_disc, w_disc)
    # |d0 G|^2 = 2s up to O(dxi^2), and exactly twice the discrete constant
    assert np.abs(normsq - 2 * s).max() <= 1e-2
    s_disc = discrete_rescaling_constant(sol_hol, n)
    assert np.abs(normsq - 2 * s_disc).max() <= 1e-12
    err_256 = abs(0.5 * normsq[0] - s)
    g128, _, _ = harmonic_einstein(sol_hol, 128)
    dg128 = d0(g128)
    n128 = np.einsum("mij,mjk,mkl,mli->m", np.linalg.inv(g128.values), dg128,
                     np.linalg.inv(g128.values), dg128)
    err_128 = abs(0.5 * n128[0] - s)
    assert 3.5 <= err_128 / err_256 <= 4.5


def test_discrete_harmonic_einstein_residual_second_order(sol_hol):
    errs = []
    for n in (128, 256):
        g, _, _ = harmonic_einstein(sol_hol, n)
        dg, dsq = d0(g), d0sq(g)
        ginv = np.linalg.inv(g.values)
        resid = dsq - np.einsum("mij,mjk,mkl->mil", dg, ginv, dg)
        errs.append(np.abs(resid).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_drift_generator_matches_residual(sol_hol):
    n = 64
    g, _, _ = harmonic_einstein(sol_hol, n)
    dg, dsq = d0(g), d0sq(g)
    ginv = np.linalg.inv(g.values)
    resid = dsq - np.einsum("mij,mjk,mkl->mil", dg, ginv, dg)
    xi_mat = drift_generator(sol_hol, n)
    predicted = -np.einsum("mij,jk->mik", g.values, xi_mat)
    assert np.abs(resid - predicted).max() <= 1e-10


def test_holonomy_residual_canonical(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 64)
    assert holonomy_residual(g) <= 1e-12


def test_holonomy_residual_incompatible(sol_hol):
    n = 32
    grid = TwistedGrid(n, sol_hol)
    g = FiberField(np.tile(np.eye(2), (n, 1, 1)), grid)
    lam = sol_hol.lam
    expected = np.linalg.norm(np.eye(2) - lam.T @ lam) / np.linalg.norm(np.eye(2))
    r = holonomy_residual(g)
    assert r > 1.0
    assert r == pytest.approx(expected, rel=1e-12)


def test_holonomy_residual_scale_invariant(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 64)
    scaled = FiberField(7.3 * g.values, g.grid)
    assert holonomy_residual(scaled) == pytest.approx(holonomy_residual(g), abs=1e-13)


def test_holonomy_residual_random_admissible():
    rng = np.random.default_rng(23)
    for _ in range(20):
        hol = random_admissible_holonomy(rng)
        g, _, _ = harmonic_einstein(hol, 32)
        assert holonomy_residual(g) <= 1e-12


def test_discrete_inner_unit_measure(sol_hol):
    grid = TwistedGrid(32, sol_hol)
    g, _, _ = harmonic_einstein(sol_hol, 32)
    ones = np.ones(32)
    assert discrete_inner("scalar", g, ones, ones) == pytest.approx(1.0, abs=1e-14)


def test_discrete_inner_tensor_trace(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 32)
    assert discrete_inner("tensor", g, g.values, g.values) == pytest.approx(2.0, rel=1e-13)


def test_discrete_inner_bilinear(sol_hol):
    rng = np.random.default_rng(2)
    g, _, _ = harmonic_einstein(sol_hol, 32)
    a, b, c = (rng.standard_normal((32, 2, 2)) for _ in range(3))
    lhs = discrete_inner("tensor", g, a, b + c)
    rhs = discrete_inner("tensor", g, a, b) + discrete_inner("tensor", g, a, c)
    assert lhs == pytest.approx(rhs, abs=1e-13 * max(abs(lhs), 1.0))


def test_discrete_inner_bad_kind(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 32)
    with pytest.raises(ValidationError):
        discrete_inner("matrix", g, g.values, g.values)


def test_twisted_extension_rule(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 32)
    ext = g.extended(1)
    lam = sol_hol.lam
    assert np.allclose(ext[-1], lam.T @ g.values[0] @ lam, atol=1e-14)
    assert np.allclose(ext[0], np.linalg.inv(lam.T) @ g.values[-1] @ np.linalg.inv(lam), atol=1e-14)


def test_grid_rejects_tiny(sol_hol):
    with pytest.raises(ValidationError):
        TwistedGrid(4, sol_hol)


def test_fiber_field_validation_rejects_non_spd(sol_hol):
    grid = TwistedGrid(16, sol_hol)
    vals = np.tile(np.eye(2), (16, 1, 1))
    vals[3] = np.diag([1.0, -0.5])
    with pytest.raises(ValidationError, match="node 3"):
        FiberField(vals, grid).validate()


def test_canonical_frame_factors_metric(sol_hol):
    g, _, _ = harmonic_einstein(sol_hol, 32)
    r = canonical_frame(g.grid)
    assert np.abs(np.einsum("mij,mkj->mik", r, r) - g.values).max() <= 1e-13 * np.abs(g.values).max()
