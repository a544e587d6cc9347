import numpy as np
import pytest

from torusflow.grid import (
    BundleState,
    PeriodicScalarField,
    PeriodicVectorField,
    harmonic_einstein,
)
from torusflow.spd import Holonomy

SOL = np.diag([2.0, 0.5])
CAT = np.array([[2.0, 1.0], [1.0, 1.0]])


@pytest.fixture(scope="session")
def sol_hol():
    return Holonomy.from_matrix(SOL)


@pytest.fixture(scope="session")
def cat_hol():
    return Holonomy.from_matrix(CAT)


def stationary_state(hol, n):
    """(1, 0, G_stationary) bundle state for a holonomy."""
    g, s, w = harmonic_einstein(hol, n)
    grid = g.grid
    state = BundleState(
        u=PeriodicScalarField(np.ones(n), grid),
        A=PeriodicVectorField(np.zeros((n, grid.fiber_dim)), grid),
        G=g,
    )
    return state, s, w


def random_admissible_holonomy(rng, n=2, cond_max=4.0):
    """Random diagonalizable matrix with positive real spectrum."""
    while True:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        shear = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        s = q @ shear
        if np.linalg.cond(s) > cond_max:
            continue
        d = rng.uniform(0.4, 2.5, size=n)
        lam = s @ np.diag(d) @ np.linalg.inv(s)
        try:
            return Holonomy.from_matrix(lam)
        except Exception:
            continue


def random_twisted_sym(rng, gfield):
    """Random twist-compatible symmetric field built through the frame."""
    from torusflow.grid import canonical_frame

    grid = gfield.grid
    r = gfield.frame if gfield.frame is not None else canonical_frame(grid)
    c = rng.standard_normal((grid.n_nodes, grid.fiber_dim, grid.fiber_dim))
    c = 0.5 * (c + np.swapaxes(c, 1, 2))
    return np.einsum("mij,mjk,mlk->mil", r, c, r)
