"""Algebra on symmetric and symmetric-positive-definite matrices.

Everything here is exact-as-possible: matrix exponentials and logarithms go
through a symmetric eigendecomposition, commutants are computed as SVD null
spaces, and the holonomy constructor refuses anything it cannot represent as
``S @ diag(d) @ inv(S)`` with real positive ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "sym_check",
    "spd_check",
    "sym_exp",
    "spd_log",
    "spd_pow",
    "g_inner",
    "commutant_basis",
    "Holonomy",
]

_SYM_TOL = 1e-12


def sym_check(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a float array, raising unless it is square symmetric."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {m.shape}")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > _SYM_TOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def spd_check(g: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Return ``g`` validated as symmetric positive definite."""
    g = sym_check(g, name)
    w = np.linalg.eigvalsh(g)
    if w.min() <= 0.0:
        raise ValidationError(f"{name} is not positive definite (min eigenvalue {w.min():.3e})")
    return g


def _sym_apply(m: np.ndarray, fn) -> np.ndarray:
    w, q = np.linalg.eigh(m)
    out = (q * fn(w)) @ q.T
    return 0.5 * (out + out.T)


def sym_exp(m: np.ndarray) -> np.ndarray:
    """exp of a symmetric matrix via eigendecomposition; the result is SPD."""
    return _sym_apply(sym_check(m, "sym_exp argument"), np.exp)


def spd_log(g: np.ndarray) -> np.ndarray:
    """Symmetric logarithm of an SPD matrix; inverse of :func:`sym_exp`."""
    return _sym_apply(spd_check(g, "spd_log argument"), np.log)


def spd_pow(g: np.ndarray, p: float) -> np.ndarray:
    """Real power of an SPD matrix."""
    return _sym_apply(spd_check(g, "spd_pow argument"), lambda w: w**p)


def g_inner(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Weighted tensor inner product a_ij b_kl g^ik g^jl.

    Positive definite on symmetric matrices when ``g`` is SPD.
    """
    ginv = np.linalg.inv(g)
    return float(np.einsum("ij,jk,kl,li->", ginv, a, ginv, b))


def _pack_isometric(m: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    # svec convention: off-diagonal entries scaled by sqrt(2) so the packed
    # Euclidean norm equals the Frobenius norm.
    out = np.empty(len(pairs))
    for p, (i, j) in enumerate(pairs):
        out[p] = m[i, j] if i == j else np.sqrt(2.0) * m[i, j]
    return out


def _unpack_isometric(v: np.ndarray, pairs: list[tuple[int, int]], n: int) -> np.ndarray:
    m = np.zeros((n, n))
    for p, (i, j) in enumerate(pairs):
        if i == j:
            m[i, i] = v[p]
        else:
            m[i, j] = m[j, i] = v[p] / np.sqrt(2.0)
    return m


def commutant_basis(m: np.ndarray, rel_tol: float = 1e-10) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of {X symmetric : X M = M X}.

    Computed as the SVD null space of X -> XM - MX restricted to symmetric
    matrices, with singular values thresholded at ``rel_tol * ||M||``.
    """
    m = sym_check(m, "commutant_basis argument")
    n = m.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    cols = []
    for i, j in pairs:
        e = np.zeros((n, n))
        e[i, j] = e[j, i] = 1.0
        if i == j:
            e[i, i] = 1.0
        x = e if i == j else e / np.sqrt(2.0)  # isometric basis element
        cols.append((x @ m - m @ x).ravel())
    a = np.stack(cols, axis=1)  # maps packed symmetric space -> full matrices
    _, sv, vt = np.linalg.svd(a)
    thresh = rel_tol * max(np.abs(m).max(), 0.0)
    sv_full = np.zeros(vt.shape[0])
    sv_full[: sv.size] = sv
    null_rows = vt[sv_full <= thresh]
    return [_unpack_isometric(row, pairs, n) for row in null_rows]


@dataclass(frozen=True)
class Holonomy:
    """An admissible holonomy: real matrix with positive real eigenvalues.

    ``lam = similarity @ diag(eigvals) @ inv(similarity)`` to relative error
    1e-10; anything else (complex, negative, or defective spectrum) is
    rejected at construction.  Eigenvalues are stored in descending order.
    """

    lam: np.ndarray
    eigvals: np.ndarray
    similarity: np.ndarray
    similarity_inv: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.lam.shape[0]

    @property
    def log_eigvals(self) -> np.ndarray:
        return np.log(self.eigvals)

    @classmethod
    def from_matrix(cls, lam: np.ndarray, rel_tol: float = 1e-10) -> "Holonomy":
        lam = np.asarray(lam, dtype=float)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise ValidationError(f"holonomy must be a square matrix, got shape {lam.shape}")
        n = lam.shape[0]
        scale = max(np.abs(lam).max(), 1.0)
        if abs(np.linalg.det(lam)) < 1e-300:
            raise ValidationError("holonomy must be invertible")
        if np.abs(lam - lam.T).max() <= _SYM_TOL * scale:
            w, s = np.linalg.eigh(0.5 * (lam + lam.T))
            wi = np.zeros_like(w)
        else:
            w_c, s_c = np.linalg.eig(lam)
            w, wi, s = w_c.real, w_c.imag, s_c
            if np.abs(s.imag).max() > 1e-9 * max(np.abs(s.real).max(), 1.0):
                raise ValidationError(
                    "holonomy has complex eigenvectors; admissible holonomies are "
                    "diagonalizable over the reals with positive eigenvalues"
                )
            s = s.real
        if np.abs(wi).max() > 1e-9 * scale:
            raise ValidationError(
                "holonomy has complex eigenvalues; admissible holonomies are "
                "diagonalizable over the reals with positive eigenvalues"
            )
        if w.min() <= 0.0:
            raise ValidationError(
                "holonomy has a non-positive eigenvalue; admissible holonomies "
                "have strictly positive real spectrum"
            )
        order = np.argsort(w)[::-1]
        w, s = w[order], s[:, order]
        # deterministic eigenvector normalization
        s = s / np.linalg.norm(s, axis=0)
        for k in range(n):
            lead = s[np.argmax(np.abs(s[:, k]) > 1e-14), k]
            if lead < 0:
                s[:, k] = -s[:, k]
        try:
            s_inv = np.linalg.inv(s)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("holonomy eigenvector matrix is singular (defective matrix)") from exc
        recon = s @ np.diag(w) @ s_inv
        err = np.abs(recon - lam).max() / scale
        if err > rel_tol:
            raise ValidationError(
                f"holonomy eigendecomposition reconstructs to relative error {err:.2e} "
                f"(> {rel_tol:.0e}); matrix is too close to defective"
            )
        return cls(lam=lam, eigvals=w, similarity=s, similarity_inv=s_inv)

    def twist_power(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(Lambda^T)^k and Lambda^k, for twisting field values across k wraps."""
        lk = np.linalg.matrix_power(self.lam, k) if k >= 0 else np.linalg.matrix_power(np.linalg.inv(self.lam), -k)
        return lk.T.copy(), lk
