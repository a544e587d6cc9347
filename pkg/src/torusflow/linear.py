"""Discrete linearized operators at the stationary datum, and their spectra.

The linearization about (u, A, G) = (1, 0, G_stationary) acts on
perturbations (v, B, h) as

    dv = L0 v + F h,   L0 = C d0^2 - s
    dB = L1 B,         (L1 B)^i = d0^2 B^i - s/2 B^i
    dh = L2 h,         (L2 h)_ij = d0^2 h_ij - G^kl (d0h_ik d0G_lj + d0G_ik d0h_lj)
                                    + d0G_ik h^kl d0G_lj
    F h = <d0G, d0h>_G - <d0G G^{-1} d0G, h>_G

Two discrete realizations are provided where they matter:

* ``stencil``: literally the operators above with the flow's central
  differences (the v-diffusion and B-blocks use the composed first
  difference, matching the nonlinear gauge term).  The full stencil
  assembly is the exact Jacobian of :func:`torusflow.flow.rhs` at the
  stationary datum, including two O(dxi^2)-size couplings from the v-block
  into the h-block that vanish in the continuum (and at C = 1 up to the
  discrete stationarity defect).

* ``geometric`` (fiber block only): the same operator conjugated through
  the canonical frame R_m (G = R R^T), in which the twisted wrap becomes
  periodic, the weighted inner product becomes flat, and the operator is a
  flat Laplacian minus an exact commutator potential.  This realization is
  exactly self-adjoint, annihilates the commutant fields exactly, and is
  the one used to verify the stability lemmas.

Both agree to O(dxi^2); each is second-order consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NumericalError, ValidationError
from .grid import FiberField, TwistedGrid, canonical_frame, d0 as grid_d0, discrete_inner
from .spd import commutant_basis

__all__ = [
    "DofLayout",
    "OperatorMatrix",
    "SpectrumReport",
    "d0_matrix",
    "assemble_L0",
    "assemble_L1",
    "assemble_L2",
    "assemble_F",
    "assemble_L_full",
    "h_block_weight",
    "weighted_symmetrize",
    "spectrum",
    "kappa_bound",
    "choose_deturck_C",
    "null_fields",
    "principal_angles",
    "write_spectrum_csv",
]


@dataclass(frozen=True)
class DofLayout:
    """Stacked degree-of-freedom layout for (v, B, h) on one grid.

    v block first (n values), then B node-major (n*N), then h node-major
    with each node's symmetric matrix packed as the upper triangle in
    row-major order (N(N+1)/2 values).
    """

    n_nodes: int
    fiber_dim: int

    @property
    def pack_dim(self) -> int:
        return self.fiber_dim * (self.fiber_dim + 1) // 2

    @property
    def pairs(self) -> list[tuple[int, int]]:
        nf = self.fiber_dim
        return [(i, j) for i in range(nf) for j in range(i, nf)]

    @property
    def v_size(self) -> int:
        return self.n_nodes

    @property
    def b_size(self) -> int:
        return self.n_nodes * self.fiber_dim

    @property
    def h_size(self) -> int:
        return self.n_nodes * self.pack_dim

    @property
    def total(self) -> int:
        return self.v_size + self.b_size + self.h_size

    @property
    def v_slice(self) -> slice:
        return slice(0, self.v_size)

    @property
    def b_slice(self) -> slice:
        return slice(self.v_size, self.v_size + self.b_size)

    @property
    def h_slice(self) -> slice:
        return slice(self.v_size + self.b_size, self.total)

    def pack_sym(self, h: np.ndarray) -> np.ndarray:
        """(n, N, N) symmetric field -> (h_size,) packed block vector."""
        out = np.empty(self.h_size)
        for p, (i, j) in enumerate(self.pairs):
            out[p::self.pack_dim] = h[:, i, j]
        return out

    def unpack_sym(self, vec: np.ndarray) -> np.ndarray:
        h = np.empty((self.n_nodes, self.fiber_dim, self.fiber_dim))
        for p, (i, j) in enumerate(self.pairs):
            h[:, i, j] = vec[p::self.pack_dim]
            h[:, j, i] = vec[p::self.pack_dim]
        return h

    def pack_vec(self, b: np.ndarray) -> np.ndarray:
        return b.reshape(self.b_size).copy()

    def unpack_vec(self, vec: np.ndarray) -> np.ndarray:
        return vec.reshape(self.n_nodes, self.fiber_dim).copy()


@dataclass
class OperatorMatrix:
    """A dense operator over (part of) a DofLayout."""

    label: str  # L0 | F | L1 | L2 | L2_geometric | L_full
    matrix: np.ndarray
    layout: DofLayout
    grid: TwistedGrid
    G: FiberField | None = None
    components: dict = dc_field(default_factory=dict)


def d0_matrix(n: int, dxi: float) -> np.ndarray:
    """Periodic central first-difference matrix."""
    m = np.zeros((n, n))
    idx = np.arange(n)
    m[idx, (idx + 1) % n] = 0.5 / dxi
    m[idx, (idx - 1) % n] = -0.5 / dxi
    return m


def assemble_L0(grid: TwistedGrid, C: float, s: float) -> OperatorMatrix:
    """v-block operator C d0^2 - s with the composed central difference."""
    if C <= 0.0:
        raise ValidationError(f"L0 requires C > 0, got {C}")
    n = grid.n_nodes
    dmat = d0_matrix(n, grid.dxi)
    mat = C * (dmat @ dmat) - s * np.eye(n)
    return OperatorMatrix("L0", mat, DofLayout(n, grid.fiber_dim), grid)


def assemble_L1(grid: TwistedGrid, s: float) -> OperatorMatrix:
    """B-block operator d0^2 - s/2 on each of the N periodic components."""
    n, nf = grid.n_nodes, grid.fiber_dim
    dmat = d0_matrix(n, grid.dxi)
    mat = np.kron(dmat @ dmat, np.eye(nf)) - 0.5 * s * np.eye(n * nf)
    return OperatorMatrix("L1", mat, DofLayout(n, nf), grid)


def _h_basis(layout: DofLayout) -> np.ndarray:
    """All h-block unit basis fields, shape (h_size, n, N, N)."""
    n, nf, pd = layout.n_nodes, layout.fiber_dim, layout.pack_dim
    basis = np.zeros((layout.h_size, n, nf, nf))
    for m in range(n):
        for p, (i, j) in enumerate(layout.pairs):
            b = m * pd + p
            basis[b, m, i, j] = 1.0
            basis[b, m, j, i] = 1.0
    return basis


def _ext_batch(H: np.ndarray, grid: TwistedGrid) -> np.ndarray:
    lt, lm = grid.holonomy.twist_power(1)
    lti, lmi = grid.holonomy.twist_power(-1)
    left = np.einsum("ij,bjk,kl->bil", lti, H[:, -1], lmi)[:, None]
    right = np.einsum("ij,bjk,kl->bil", lt, H[:, 0], lm)[:, None]
    return np.concatenate([left, H, right], axis=1)


def _apply_L2_stencil(G: FiberField, H: np.ndarray) -> np.ndarray:
    grid = G.grid
    dxi = grid.dxi
    He = _ext_batch(H, grid)
    dH = (He[:, 2:] - He[:, :-2]) / (2 * dxi)
    dsqH = (He[:, 2:] - 2 * He[:, 1:-1] + He[:, :-2]) / dxi**2
    dG = grid_d0(G)
    ginv = np.linalg.inv(G.values)
    t2 = np.einsum("bmij,mjk,mkl->bmil", dH, ginv, dG)
    t2 += np.einsum("mij,mjk,bmkl->bmil", dG, ginv, dH)
    t3 = np.einsum("mij,mjk,bmkl,mlp,mpq->bmiq", dG, ginv, H, ginv, dG)
    return dsqH - t2 + t3


def _frame_of(G: FiberField) -> np.ndarray:
    if G.frame is not None:
        return G.frame
    return canonical_frame(G.grid)


def _apply_L2_geometric(G: FiberField, H: np.ndarray) -> np.ndarray:
    grid = G.grid
    r = _frame_of(G)
    rinv = np.linalg.inv(r)
    theta = np.log(grid.holonomy.eigvals)
    ad2 = (theta[:, None] - theta[None, :]) ** 2
    ph = np.einsum("mij,bmjk,mlk->bmil", rinv, H, rinv)
    lap = (np.roll(ph, -1, axis=1) - 2 * ph + np.roll(ph, 1, axis=1)) / grid.dxi**2
    out_t = lap - ad2[None, None] * ph
    return np.einsum("mij,bmjk,mlk->bmil", r, out_t, r)


def assemble_L2(G: FiberField, form: str = "geometric") -> OperatorMatrix:
    """Fiber-block operator; ``form`` selects the discrete realization.

    'geometric' requires the canonical stationary family (frame data or a
    holonomy to rebuild it); 'stencil' applies to any twisted fiber metric
    and matches the nonlinear flow's differences exactly.
    """
    grid = G.grid
    layout = DofLayout(grid.n_nodes, grid.fiber_dim)
    basis = _h_basis(layout)
    if form == "stencil":
        out = _apply_L2_stencil(G, basis)
        label = "L2"
    elif form == "geometric":
        out = _apply_L2_geometric(G, basis)
        label = "L2_geometric"
    else:
        raise ValidationError(f"unknown L2 form {form!r}")
    mat = np.stack([layout.pack_sym(out[b]) for b in range(layout.h_size)], axis=1)
    return OperatorMatrix(label, mat, layout, grid, G=G)


def _apply_F(G: FiberField, H: np.ndarray, form: str) -> np.ndarray:
    grid = G.grid
    dxi = grid.dxi
    dG = grid_d0(G)
    ginv = np.linalg.inv(G.values)
    if form == "jacobian":
        He = _ext_batch(H, grid)
        dH = (He[:, 2:] - He[:, :-2]) / (2 * dxi)
        term1 = np.einsum("mij,mjk,mkl,bmli->bm", ginv, dG, ginv, dH)
        x = np.einsum("mij,mjk,mkl->mil", dG, ginv, dG)
        term2 = np.einsum("mij,mjk,mkl,bmli->bm", ginv, x, ginv, H)
        return term1 - term2
    if form == "conservative":
        psi = np.einsum("mij,mjk,mkl,bmli->bm", ginv, dG, ginv, H)
        return (np.roll(psi, -1, axis=1) - np.roll(psi, 1, axis=1)) / (2 * dxi)
    raise ValidationError(f"unknown F form {form!r}")


def assemble_F(G: FiberField, form: str = "jacobian") -> OperatorMatrix:
    """h-to-v coupling block.

    'jacobian' is the nodewise form <d0G, d0h> - <d0G G^{-1} d0G, h> that the
    nonlinear right-hand side linearizes to; it annihilates the commutant
    fields exactly.  'conservative' is the divergence form
    d0<d0G, h>, for which the summation-by-parts pairing
    (F h, v) = -sum <d0G, h> d0v dxi is exact.
    """
    grid = G.grid
    layout = DofLayout(grid.n_nodes, grid.fiber_dim)
    basis = _h_basis(layout)
    out = _apply_F(G, basis, form)
    return OperatorMatrix("F", out.T.copy(), layout, grid, G=G)


def assemble_L_full(G: FiberField, C: float, s: float, c: float = 0.0,
                    exact_jacobian: bool = True) -> OperatorMatrix:
    """Full linearization on the stacked (v, B, h) space.

    With ``exact_jacobian`` the matrix is the derivative of the discrete
    nonlinear right-hand side at (1, 0, G) to rounding error: besides the
    triangular blocks above it carries the v-to-h couplings
    ((C-1)/2) (d0 v)(d0 G) + v (d0G G^{-1} d0G - d0^2 G), both of size
    O(dxi^2) at C = 1.  Without it the matrix is exactly block triangular
    and its spectrum is the union of the block spectra.
    """
    grid = G.grid
    layout = DofLayout(grid.n_nodes, grid.fiber_dim)
    n = grid.n_nodes
    l0 = assemble_L0(grid, C, s)
    l1mat = np.kron(d0_matrix(n, grid.dxi) @ d0_matrix(n, grid.dxi), np.eye(grid.fiber_dim))
    l1mat -= 0.5 * (1.0 + c) * s * np.eye(layout.b_size)
    l1 = OperatorMatrix("L1", l1mat, layout, grid)
    l2 = assemble_L2(G, form="stencil")
    if c != 0.0:
        l2 = OperatorMatrix("L2", l2.matrix + c * s * np.eye(layout.h_size), layout, grid, G=G)
    f = assemble_F(G, form="jacobian")
    mat = np.zeros((layout.total, layout.total))
    mat[layout.v_slice, layout.v_slice] = l0.matrix
    mat[layout.v_slice, layout.h_slice] = f.matrix
    mat[layout.b_slice, layout.b_slice] = l1.matrix
    mat[layout.h_slice, layout.h_slice] = l2.matrix
    if exact_jacobian:
        dG = grid_d0(G)
        ginv = np.linalg.inv(G.values)
        dxi = grid.dxi
        ge = G.extended(1)
        dsqG = (ge[2:] - 2 * ge[1:-1] + ge[:-2]) / dxi**2
        rres = np.einsum("mij,mjk,mkl->mil", dG, ginv, dG) - dsqG
        dmat = d0_matrix(n, dxi)
        j_hv = np.zeros((layout.h_size, n))
        pd = layout.pack_dim
        for p, (i, j) in enumerate(layout.pairs):
            # ((C-1)/2) d0v(k) d0G(k) spread over the v columns, plus the
            # diagonal residual coupling
            j_hv[p::pd, :] += 0.5 * (C - 1.0) * dG[:, i, j][:, None] * dmat
            j_hv[p::pd, :] += np.diag(rres[:, i, j])
        mat[layout.h_slice, layout.v_slice] = j_hv
    op = OperatorMatrix("L_full", mat, layout, grid, G=G)
    op.components = {"L0": l0, "L1": l1, "L2": l2, "F": f}
    return op


def h_block_weight(G: FiberField) -> np.ndarray:
    """Per-node Gram matrices of the G-weighted pairing on packed symmetric
    matrices, including the dxi quadrature factor.  Shape (n, P, P)."""
    grid = G.grid
    layout = DofLayout(grid.n_nodes, grid.fiber_dim)
    nf, pd = grid.fiber_dim, layout.pack_dim
    basis = np.zeros((pd, nf, nf))
    for p, (i, j) in enumerate(layout.pairs):
        basis[p, i, j] = 1.0
        basis[p, j, i] = 1.0
    ginv = np.linalg.inv(G.values)
    return np.einsum("mij,pjk,mkl,qli->mpq", ginv, basis, ginv, basis) * grid.dxi


def _weight_sqrt(op: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal W^{1/2}, W^{-1/2} for the inner product of op's block."""
    layout = op.layout
    dxi = op.grid.dxi
    dim = op.matrix.shape[0]
    if op.label in ("L0", "L1"):
        root = np.sqrt(dxi)
        return np.full(dim, root), np.full(dim, 1.0 / root)  # diagonal
    if op.label in ("L2", "L2_geometric"):
        if op.G is None:
            raise ValidationError("h-block operator lacks its fiber metric")
        gram = h_block_weight(op.G)
        pd = layout.pack_dim
        w12 = np.zeros((dim, dim))
        w12i = np.zeros((dim, dim))
        for m in range(layout.n_nodes):
            w, e = np.linalg.eigh(gram[m])
            if w.min() <= 0:
                raise NumericalError(f"weight Gram not positive definite at node {m}")
            sl = slice(m * pd, (m + 1) * pd)
            w12[sl, sl] = (e * np.sqrt(w)) @ e.T
            w12i[sl, sl] = (e / np.sqrt(w)) @ e.T
        return w12, w12i
    raise ValidationError(f"no inner product defined for operator label {op.label!r}")


def weighted_symmetrize(op: OperatorMatrix) -> OperatorMatrix:
    """W^{1/2} op W^{-1/2} in the block's discrete inner product."""
    w12, w12i = _weight_sqrt(op)
    if w12.ndim == 1:
        mat = (w12[:, None] * op.matrix) * w12i[None, :]
    else:
        mat = w12 @ op.matrix @ w12i
    return OperatorMatrix(op.label + "_sym", mat, op.layout, op.grid, G=op.G)


@dataclass
class SpectrumReport:
    """Eigen-data of one operator block (or the assembled full operator)."""

    label: str
    eigenvalues: np.ndarray          # complex, sorted by descending real part
    null_dim: int
    null_basis: np.ndarray           # (null_dim, dim) rows, original coordinates
    gap: float                       # -max of the nonzero real parts
    verdict: str                     # strictly_stable | weakly_stable | unstable
    null_threshold: float

    @property
    def max_real(self) -> float:
        return float(self.eigenvalues.real.max()) if self.eigenvalues.size else 0.0


def _classify(eigs_real: np.ndarray, vectors: np.ndarray | None,
              label: str, null_threshold_rel: float) -> SpectrumReport:
    scale = np.abs(eigs_real).max() if eigs_real.size else 0.0
    thresh = null_threshold_rel * scale
    null_mask = np.abs(eigs_real) <= thresh
    pos_mask = eigs_real > thresh
    nonzero = eigs_real[~null_mask]
    gap = float(-nonzero.max()) if nonzero.size else np.inf
    if pos_mask.any():
        verdict = "unstable"
    elif null_mask.any():
        verdict = "weakly_stable"
    else:
        verdict = "strictly_stable"
    order = np.argsort(eigs_real)[::-1]
    eigs_sorted = eigs_real[order].astype(complex)
    if vectors is not None:
        null_basis = vectors[:, order][:, null_mask[order]].T.copy()
    else:
        null_basis = np.zeros((0, eigs_real.size))
    return SpectrumReport(label=label, eigenvalues=eigs_sorted,
                          null_dim=int(null_mask.sum()), null_basis=null_basis,
                          gap=gap, verdict=verdict, null_threshold=thresh)


def spectrum(op: OperatorMatrix, null_threshold_rel: float = 1e-8) -> SpectrumReport:
    """Spectrum of one operator.

    Symmetric blocks go through the weighted symmetrization and a dense
    symmetric eigendecomposition; the full operator's spectrum is the union
    of its block spectra (exact for the triangular assembly).
    """
    if op.label == "L_full":
        if not op.components:
            raise ValidationError("L_full operator carries no component blocks")
        reports = {k: spectrum(v, null_threshold_rel) for k, v in op.components.items()
                   if k in ("L0", "L1", "L2")}
        eigs = np.concatenate([r.eigenvalues.real for r in reports.values()])
        layout = op.layout
        null_rows = []
        for vec in reports["L2"].null_basis:
            full = np.zeros(layout.total)
            full[layout.h_slice] = vec
            null_rows.append(full)
        rep = _classify(eigs, None, "L_full", null_threshold_rel)
        rep.null_basis = np.array(null_rows) if null_rows else np.zeros((0, layout.total))
        rep.null_dim = reports["L2"].null_dim
        return rep
    sym = weighted_symmetrize(op)
    mat = 0.5 * (sym.matrix + sym.matrix.T)
    try:
        eigs, vecs = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {op.label} failed: {exc}") from exc
    w12, w12i = _weight_sqrt(op)
    vecs_orig = (w12i[:, None] * vecs) if w12.ndim == 1 else (w12i @ vecs)
    return _classify(eigs, vecs_orig, op.label, null_threshold_rel)


def kappa_bound(G: FiberField) -> float:
    """Sharp pointwise constant max_m |d0 G|_G.

    For the canonical stationary family this is sqrt(2 s) up to O(dxi^2) and
    constant across nodes.
    """
    dG = grid_d0(G)
    ginv = np.linalg.inv(G.values)
    sq = np.einsum("mij,mjk,mkl,mli->m", ginv, dG, ginv, dG)
    return float(np.sqrt(sq.max()))


def choose_deturck_C(G: FiberField, null_threshold_rel: float = 1e-8) -> float:
    """Gauge constant kappa^2 / (2 lambda) from the fiber-block gap.

    With no twist (kappa = 0) any positive value works; 1.0 is returned.
    Raises if the fiber block has no spectral gap.
    """
    kappa = kappa_bound(G)
    if kappa < 1e-12:
        return 1.0
    form = "geometric" if (G.frame is not None) else "stencil"
    rep = spectrum(assemble_L2(G, form=form), null_threshold_rel)
    if not np.isfinite(rep.gap) or rep.gap <= 0.0:
        raise NumericalError(f"fiber block has no spectral gap (gap = {rep.gap})")
    return kappa**2 / (2.0 * rep.gap)


def null_fields(G: FiberField) -> np.ndarray:
    """Commutant null fields h = G K, orthonormal in the discrete tensor
    inner product.  Shape (dim_null, n, N, N).

    K runs over S k S^{-1} with k a symmetric matrix commuting with
    diag(2 log d); for distinct holonomy eigenvalues these are the N fields
    G times the spectral projectors.
    """
    hol = G.grid.holonomy
    ks = commutant_basis(np.diag(2.0 * hol.log_eigvals))
    fields = []
    for k in ks:
        kk = hol.similarity @ k @ hol.similarity_inv
        fields.append(np.einsum("mij,jk->mik", G.values, kk))
    fields = np.array(fields)
    # Gram-orthonormalize in the weighted inner product
    gram = np.empty((len(fields), len(fields)))
    for a in range(len(fields)):
        for b in range(len(fields)):
            gram[a, b] = discrete_inner("tensor", G, fields[a], fields[b])
    w, e = np.linalg.eigh(gram)
    if w.min() <= 1e-12 * w.max():
        raise NumericalError("commutant null fields are numerically dependent")
    coeff = e / np.sqrt(w) @ e.T
    return np.einsum("ab,bmij->amij", coeff.T, fields)


def principal_angles(basis_a: np.ndarray, basis_b: np.ndarray,
                     w12: np.ndarray | None = None) -> np.ndarray:
    """Principal angles between two subspaces given as rows of coordinates.

    ``w12`` (dense or diagonal W^{1/2}) maps into the geometry where the
    angles are measured; omitted means Euclidean.
    """
    def prep(rows):
        x = rows.T
        if w12 is not None:
            x = (w12[:, None] * x) if w12.ndim == 1 else (w12 @ x)
        q, _ = np.linalg.qr(x)
        return q
    qa, qb = prep(basis_a), prep(basis_b)
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))


def write_spectrum_csv(path, reports: list[tuple[str, SpectrumReport]]) -> None:
    """CSV rows block,index,re,im,is_null for each report."""
    lines = ["block,index,re,im,is_null"]
    for block, rep in reports:
        for idx, ev in enumerate(rep.eigenvalues):
            is_null = int(abs(ev.real) <= rep.null_threshold and abs(ev.imag) <= rep.null_threshold)
            lines.append(f"{block},{idx},{float(ev.real)!r},{float(ev.imag)!r},{is_null}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
