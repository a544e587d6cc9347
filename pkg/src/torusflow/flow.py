"""Right-hand side and time integration of the holonomy-rescaled flow.

The evolution of (u, A, G) on the twisted circle is

    du/dtau = |d0 G|^2 / 2 - s u + (Lie_X g)_00
    dA^i/dtau = -(1+c)/2 s A^i + G^ij (Lie_X g)_j0
    dG_ij/dtau = u^{-1} (nabla0^2 G - d0 G G^{-1} d0 G)_ij + c s G_ij + (Lie_X g)_ij

with nabla0^2 = d0^2 - Gamma^0_00 d0 and X the raising of the gauge-fixing
one-form V = (C/2)(d0 u) dx^0 + (G_ij d0 A^j) dx^i; disabling the gauge term
drops every Lie-derivative block.

Discretization contract: only u, A, G are differenced (second-order central,
wrap-aware); derived quantities are differentiated by the Leibniz rule.  Time
integration is classical RK4 with the parabolic step rule
dt = cfl * dxi^2 / (2 max(1/min u, C, 1)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .grid import (
    BundleState,
    PeriodicScalarField,
    PeriodicVectorField,
    TwistedSymField,
)

__all__ = [
    "FlowParams",
    "FlowRhs",
    "ChristoffelData",
    "full_metric_inverse",
    "christoffels",
    "lie_deturck",
    "lie_deturck_christoffel",
    "rhs",
    "step",
    "evolve",
    "EvolveResult",
]

_STATUS_MSG = {
    _kernels.BAD_U: "u <= 0",
    _kernels.BAD_G: "fiber metric not positive definite",
    _kernels.BAD_W: "degenerate base metric (u - A.G.A <= 0)",
}


@dataclass(frozen=True)
class FlowParams:
    """Constants of one flow run."""

    s: float
    c: float = 0.0
    C_deturck: float = 0.0
    deturck_enabled: bool = False
    cfl_safety: float = 0.25
    t_end: float = 1.0

    def __post_init__(self):
        if self.s < 0.0:
            raise ValidationError(f"rescaling constant s must be >= 0, got {self.s}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValidationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.t_end <= 0.0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if self.C_deturck < 0.0:
            raise ValidationError(f"C_deturck must be >= 0, got {self.C_deturck}")
        if self.deturck_enabled and self.C_deturck <= 0.0:
            raise ValidationError("deturck_enabled requires C_deturck > 0")


@dataclass
class FlowRhs:
    du: PeriodicScalarField
    dA: PeriodicVectorField
    dG: TwistedSymField


@dataclass
class ChristoffelData:
    """The six Christoffel families of the bundle metric, nodewise.

    Index 0 is the circle direction; i, j, k run over the fiber.  Lower-index
    symmetry holds by construction (g000 etc. are stored once).
    """

    g000: np.ndarray      # (n,)        Gamma^0_00
    gk00: np.ndarray      # (n, N)      Gamma^k_00
    g0i0: np.ndarray      # (n, N)      Gamma^0_i0
    g0ij: np.ndarray      # (n, N, N)   Gamma^0_ij
    gk0j: np.ndarray      # (n, N, N)   Gamma^k_0j  (index order [k, j])
    gkij: np.ndarray      # (n, N, N, N) Gamma^k_ij (index order [k, i, j])


def _twist_mats(state: BundleState):
    hol = state.grid.holonomy
    lt, l = hol.twist_power(1)
    lti, li = hol.twist_power(-1)
    return lt, l, lti, li


def _primitives(state: BundleState):
    """Core-node primitive derivatives under the Leibniz discipline."""
    n = state.grid.n_nodes
    dxi = state.grid.dxi
    ue = state.u.extended(2)
    ae = state.A.extended(2)
    ge = state.G.extended(2)
    d0u_e = (ue[2:] - ue[:-2]) / (2 * dxi)          # nodes -1 .. n
    d0A_e = (ae[2:] - ae[:-2]) / (2 * dxi)
    sl = slice(2, n + 2)
    d0u = d0u_e[1:-1]
    d2u = (d0u_e[2:] - d0u_e[:-2]) / (2 * dxi)
    d0A = d0A_e[1:-1]
    d2A = (d0A_e[2:] - d0A_e[:-2]) / (2 * dxi)
    d0G = (ge[3:-1] - ge[1:-3]) / (2 * dxi)
    d0sqG = (ge[3:-1] - 2 * ge[sl] + ge[1:-3]) / dxi**2
    u, A, G = state.u.values, state.A.values, state.G.values
    a = np.einsum("mij,mj->mi", G, A)
    d0a = np.einsum("mij,mj->mi", d0G, A) + np.einsum("mij,mj->mi", G, d0A)
    w = u - np.einsum("mi,mi->m", A, a)
    return dict(u=u, A=A, G=G, d0u=d0u, d2u=d2u, d0A=d0A, d2A=d2A,
                d0G=d0G, d0sqG=d0sqG, a=a, d0a=d0a, w=w)


def full_metric_inverse(state: BundleState, m: int | None = None) -> np.ndarray:
    """Inverse of the (N+1)x(N+1) bundle metric at every node (or one node).

    Assembled by the block formula from G^{-1} and the Schur complement
    w = u - A.G.A; the product with the forward metric is the identity to
    rounding.  Degenerate metrics raise with the offending node.
    """
    state.validate()
    u, A, G = state.u.values, state.A.values, state.G.values
    n, nf = A.shape
    a = np.einsum("mij,mj->mi", G, A)
    w = u - np.einsum("mi,mi->m", A, a)
    if w.min() <= 0.0:
        bad = int(np.argmin(w))
        raise NumericalError(f"degenerate base metric at node {bad}: u - A.G.A = {w[bad]:.6g}")
    ginv = np.linalg.inv(G)
    out = np.empty((n, nf + 1, nf + 1))
    out[:, 0, 0] = 1.0 / w
    out[:, 0, 1:] = -A / w[:, None]
    out[:, 1:, 0] = -A / w[:, None]
    out[:, 1:, 1:] = ginv + np.einsum("mi,mj->mij", A, A) / w[:, None, None]
    return out if m is None else out[m]


def christoffels(state: BundleState) -> ChristoffelData:
    """All six Christoffel families of the bundle metric, nodewise."""
    pr = _primitives(state)
    gi = full_metric_inverse(state)
    g00, g0i, gij = gi[:, 0, 0], gi[:, 0, 1:], gi[:, 1:, 1:]
    d0u, d0a, d0G = pr["d0u"], pr["d0a"], pr["d0G"]
    g000 = 0.5 * g00 * d0u + np.einsum("mi,mi->m", g0i, d0a)
    gk00 = 0.5 * g0i * d0u[:, None] + np.einsum("mki,mi->mk", gij, d0a)
    g0i0 = 0.5 * np.einsum("mj,mij->mi", g0i, d0G)
    g0ij = -0.5 * g00[:, None, None] * d0G
    gk0j = 0.5 * np.einsum("mkl,mjl->mkj", gij, d0G)
    gkij = -0.5 * np.einsum("mk,mij->mkij", g0i, d0G)
    return ChristoffelData(g000=g000, gk00=gk00, g0i0=g0i0, g0ij=g0ij, gk0j=gk0j, gkij=gkij)


def _deturck_form(state: BundleState, C: float, pr: dict):
    """V, X = g^{-1}V and their Leibniz xi-derivatives, nodewise."""
    n, nf = state.A.values.shape
    gi = full_metric_inverse(state)
    v = np.zeros((n, nf + 1))
    dv = np.zeros((n, nf + 1))
    v[:, 0] = 0.5 * C * pr["d0u"]
    v[:, 1:] = np.einsum("mij,mj->mi", pr["G"], pr["d0A"])
    dv[:, 0] = 0.5 * C * pr["d2u"]
    dv[:, 1:] = np.einsum("mij,mj->mi", pr["d0G"], pr["d0A"]) + np.einsum(
        "mij,mj->mi", pr["G"], pr["d2A"])
    dg = np.empty((n, nf + 1, nf + 1))
    dg[:, 0, 0] = pr["d0u"]
    dg[:, 0, 1:] = pr["d0a"]
    dg[:, 1:, 0] = pr["d0a"]
    dg[:, 1:, 1:] = pr["d0G"]
    dgi = -np.einsum("mab,mbc,mcd->mad", gi, dg, gi)
    x = np.einsum("mab,mb->ma", gi, v)
    dx = np.einsum("mab,mb->ma", dgi, v) + np.einsum("mab,mb->ma", gi, dv)
    return v, x, dx


def lie_deturck(state: BundleState, C: float):
    """Lie derivative of the metric along the raised gauge one-form.

    Returns the (00), (0i) and (ij) blocks of Lie_X g with
    X = g^{-1} V, via the coordinate formula
    (Lie_X g)_ab = X^0 d0 g_ab + g_cb d0 X^c [a=0] + g_ac d0 X^c [b=0].
    """
    state.validate()
    pr = _primitives(state)
    _, x, dx = _deturck_form(state, C, pr)
    u, a, G = pr["u"], pr["a"], pr["G"]
    x0, dx0, dxf = x[:, 0], dx[:, 0], dx[:, 1:]
    l00 = x0 * pr["d0u"] + 2.0 * (u * dx0 + np.einsum("mi,mi->m", a, dxf))
    l0j = x0[:, None] * pr["d0a"] + a * dx0[:, None] + np.einsum("mji,mi->mj", G, dxf)
    lij = x0[:, None, None] * pr["d0G"]
    return l00, l0j, lij


def lie_deturck_christoffel(state: BundleState, C: float):
    """Same blocks through nabla_a V_b + nabla_b V_a with ChristoffelData.

    The one-form derivative d0 V_b is expanded by the Leibniz rule in the
    same primitives as :func:`christoffels`, so agreement with
    :func:`lie_deturck` is an algebraic identity (metric compatibility of the
    Christoffel formulas), exact to rounding.
    """
    state.validate()
    pr = _primitives(state)
    v, _, _ = _deturck_form(state, C, pr)
    ch = christoffels(state)
    n, nf = state.A.values.shape
    dv0 = 0.5 * C * pr["d2u"]
    dvf = np.einsum("mij,mj->mi", pr["d0G"], pr["d0A"]) + np.einsum(
        "mij,mj->mi", pr["G"], pr["d2A"])
    v0, vf = v[:, 0], v[:, 1:]
    # nabla_0 V_0 = d0 V_0 - Gamma^c_00 V_c
    n00 = dv0 - ch.g000 * v0 - np.einsum("mk,mk->m", ch.gk00, vf)
    l00 = 2.0 * n00
    # nabla_j V_0 + nabla_0 V_j = d0 V_j - 2 (Gamma^0_j0 V_0 + Gamma^k_0j V_k)
    l0j = dvf - 2.0 * (ch.g0i0 * v0[:, None] + np.einsum("mkj,mk->mj", ch.gk0j, vf))
    # nabla_i V_j + nabla_j V_i = -2 (Gamma^0_ij V_0 + Gamma^k_ij V_k)
    lij = -2.0 * (ch.g0ij * v0[:, None, None] + np.einsum("mkij,mk->mij", ch.gkij, vf))
    return l00, l0j, lij


def _chunk_kernel(state: BundleState):
    return _kernels.rk4_chunk_n2 if state.grid.fiber_dim == 2 else _kernels.rk4_chunk


def _kernel_args(state: BundleState, params: FlowParams):
    lt, l, lti, li = _twist_mats(state)
    return (
        state.u.values, state.A.values, state.G.values,
        state.grid.dxi, params.c, params.s,
        params.C_deturck, params.deturck_enabled,
        lt, l, lti, li,
    )


def rhs(state: BundleState, params: FlowParams) -> FlowRhs:
    """Flow right-hand side at every node."""
    state.validate()
    kernel = _kernels.rhs_alloc_n2 if state.grid.fiber_dim == 2 else _kernels.rhs_alloc
    status, node, du, dA, dG = kernel(*_kernel_args(state, params))
    if status != _kernels.OK:
        raise NumericalError(f"flow right-hand side failed at node {node}: {_STATUS_MSG[status]}")
    grid = state.grid
    return FlowRhs(
        du=PeriodicScalarField(du, grid),
        dA=PeriodicVectorField(dA, grid),
        dG=TwistedSymField(dG, grid),
    )


def step(state: BundleState, params: FlowParams, dt: float) -> BundleState:
    """One classical RK4 step of size dt; returns a new state."""
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    out = state.copy()
    lt, l, lti, li = _twist_mats(state)
    status, node, _, _ = _chunk_kernel(state)(
        out.u.values, out.A.values, out.G.values,
        state.grid.dxi, params.c, params.s, params.C_deturck, params.deturck_enabled,
        1.0, lt, l, lti, li, 0.0, dt, 1, dt,
    )
    if status != _kernels.OK:
        raise NumericalError(f"RK4 step failed at node {node}: {_STATUS_MSG[status]}")
    out.validate()
    return out


@dataclass
class EvolveResult:
    state: BundleState
    tau: float
    steps: int


def evolve(state: BundleState, params: FlowParams, *,
           sample_dtau: float | None = None,
           callback=None,
           max_steps: int = 2_000_000_000) -> EvolveResult:
    """Integrate to params.t_end, re-evaluating dt every step.

    If ``sample_dtau`` is set, integration lands exactly on each multiple of
    it and ``callback(tau, state)`` is invoked there (and at t_end).  The
    state passed to the callback is live; copy it if you keep it.  Blow-up
    (u <= 0 or a non-SPD fiber metric) aborts with the time and node.
    """
    state.validate()
    out = state.copy()
    lt, l, lti, li = _twist_mats(state)
    tau = 0.0
    total_steps = 0
    if callback is not None:
        callback(0.0, out)
    targets: list[float]
    if sample_dtau is None:
        targets = [params.t_end]
    else:
        if sample_dtau <= 0:
            raise ValidationError("sample_dtau must be positive")
        k = int(np.ceil(params.t_end / sample_dtau - 1e-12))
        targets = [min((j + 1) * sample_dtau, params.t_end) for j in range(k)]
    chunk = _chunk_kernel(state)
    for tau_stop in targets:
        status, node, tau, steps = chunk(
            out.u.values, out.A.values, out.G.values,
            state.grid.dxi, params.c, params.s, params.C_deturck, params.deturck_enabled,
            params.cfl_safety, lt, l, lti, li, tau, tau_stop, max_steps,
        )
        total_steps += steps
        if status != _kernels.OK:
            raise NumericalError(
                f"flow blew up at tau = {tau:.6g}, node {node}: {_STATUS_MSG[status]}")
        if total_steps >= max_steps:
            raise NumericalError(f"step budget exhausted at tau = {tau:.6g}")
        if callback is not None:
            callback(tau, out)
    return EvolveResult(state=out, tau=tau, steps=total_steps)


def evolve_stride(state: BundleState, params: FlowParams, stride_steps: int,
                  callback=None, max_steps: int = 2_000_000_000) -> EvolveResult:
    """Like :func:`evolve` but invoking ``callback(tau, steps, state)`` every
    ``stride_steps`` integration steps (and at t_end)."""
    if stride_steps <= 0:
        raise ValidationError("stride_steps must be positive")
    state.validate()
    out = state.copy()
    lt, l, lti, li = _twist_mats(state)
    tau = 0.0
    total_steps = 0
    if callback is not None:
        callback(0.0, 0, out)
    chunk = _chunk_kernel(state)
    while tau < params.t_end - 1e-15:
        status, node, tau, steps = chunk(
            out.u.values, out.A.values, out.G.values,
            state.grid.dxi, params.c, params.s, params.C_deturck, params.deturck_enabled,
            params.cfl_safety, lt, l, lti, li, tau, params.t_end, stride_steps,
        )
        total_steps += steps
        if status != _kernels.OK:
            raise NumericalError(
                f"flow blew up at tau = {tau:.6g}, node {node}: {_STATUS_MSG[status]}")
        if total_steps >= max_steps:
            raise NumericalError(f"step budget exhausted at tau = {tau:.6g}")
        if callback is not None:
            callback(tau, total_steps, out)
    return EvolveResult(state=out, tau=tau, steps=total_steps)
