"""Closed-form spectral data for linearized flows over constant-curvature bases.

Covers the scalar Laplacian spectrum on the round n-sphere, the one-form
spectrum, the stability classification of the volume-normalized linearization,
the quadratic forms behind the curvature-normalized and volume-normalized
stability computations, holomorphic-quadratic-differential dimensions, and a
finite-difference Legendre oracle that independently validates the n = 2
scalar spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

__all__ = [
    "lambda_jk",
    "scalar_spectrum",
    "one_form_spectrum",
    "l1_spectrum",
    "l0prime_eigenvalue",
    "VolumeFlowVerdict",
    "volume_flow_verdict",
    "QuadraticFormInputs",
    "kappa_hyperbolic_form",
    "kappa_sphere_form",
    "volume_hyperbolic_form",
    "TeichmullerDim",
    "teichmuller_null_dim",
    "center_manifold_dim",
    "legendre_axisymmetric_oracle",
    "write_spaceform_csv",
]


def lambda_jk(j: int, k: float, n: int) -> float:
    """Scalar Laplacian eigenvalue -j k (n + j - 1) on the curvature-k n-sphere."""
    if j < 0:
        raise ValidationError(f"harmonic level j must be >= 0, got {j}")
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    return -j * k * (n + j - 1)


def scalar_spectrum(n: int, k: float, j_max: int) -> list[float]:
    return [lambda_jk(j, k, n) for j in range(j_max + 1)]


def one_form_spectrum(n: int, k: float, j_max: int) -> list[float]:
    """Hodge Laplacian spectrum on one-forms: the two families
    {lambda_jk}_{j>=1} and {lambda_jk - (n-2)k}_{j>=1}, merged and sorted
    descending.  For n = 2 the families coincide."""
    vals = []
    for j in range(1, j_max + 1):
        vals.append(lambda_jk(j, k, n))
        vals.append(lambda_jk(j, k, n) - (n - 2) * k)
    return sorted(vals, reverse=True)


def l1_spectrum(n: int, k: float, j_max: int) -> list[float]:
    """Spectrum of the one-form block Delta_1 + (n-1)k; its maximum is -k."""
    return sorted((v + (n - 1) * k for v in one_form_spectrum(n, k, j_max)), reverse=True)


def l0prime_eigenvalue(j: int, k: float, n: int) -> float:
    """Eigenvalue of the trace-part operator on level-j harmonics:
    lambda_jk + 2(n-1)k for j >= 1, and 0 on constants."""
    if j == 0:
        return 0.0
    return lambda_jk(j, k, n) + 2.0 * (n - 1) * k


@dataclass(frozen=True)
class VolumeFlowVerdict:
    """Stability classification of the volume-normalized linearization."""

    n: int
    k: float
    l2_verdict: str
    l2_unstable_eigenvalue: float | None
    l2_unstable_eigenspace: str
    l2_null_eigenspace: str
    l1_max_eigenvalue: float
    l0_verdict: str
    l0_null_eigenspace: str


def volume_flow_verdict(n: int, k: float) -> VolumeFlowVerdict:
    """Classification over the round sphere of curvature k > 0.

    n = 2: the tensor block is weakly stable with null eigenspace
    {phi g : phi in level-0 or level-1 harmonics}.  n >= 3: the sole
    unstable eigenvalue is (n-2)k with eigenspace {phi g : phi level-1},
    and {c g} is null.  The one-form block tops out at -k; the scalar
    block is weakly stable with constant null functions.
    """
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    if k <= 0:
        raise ValidationError(f"volume-normalized classification needs k > 0, got {k}")
    if n == 2:
        return VolumeFlowVerdict(
            n=n, k=k, l2_verdict="weakly_stable",
            l2_unstable_eigenvalue=None,
            l2_unstable_eigenspace="",
            l2_null_eigenspace="{phi g : phi in level-0 or level-1 spherical harmonics}",
            l1_max_eigenvalue=-k,
            l0_verdict="weakly_stable",
            l0_null_eigenspace="constant functions",
        )
    return VolumeFlowVerdict(
        n=n, k=k, l2_verdict="unstable",
        l2_unstable_eigenvalue=(n - 2) * k,
        l2_unstable_eigenspace="{phi g : phi in level-1 spherical harmonics}",
        l2_null_eigenspace="{c g : c real}",
        l1_max_eigenvalue=-k,
        l0_verdict="weakly_stable",
        l0_null_eigenspace="constant functions",
    )


@dataclass(frozen=True)
class QuadraticFormInputs:
    """Named ingredients of the stability quadratic forms.

    All squared norms must be nonnegative; when the trace decomposition
    h = (H/n) g + f is supplied in full, ||h||^2 = ||H||^2/n + ||f||^2 must
    hold.
    """

    T_sq: float = 0.0        # ||T||^2, T_ijk = nabla_k h_ij - nabla_i h_jk
    div_h_sq: float = 0.0    # ||delta h||^2
    H_sq: float = 0.0        # ||H||^2, H = tr_g h
    h_sq: float | None = None
    grad_H_sq: float = 0.0   # ||nabla H||^2
    grad_f_sq: float = 0.0   # ||nabla f||^2
    f_sq: float = 0.0        # ||f||^2
    H_bar: float = 0.0       # mean of H
    volume: float = 0.0

    def __post_init__(self):
        for name in ("T_sq", "div_h_sq", "H_sq", "grad_H_sq", "grad_f_sq", "f_sq"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.h_sq is not None and self.h_sq < 0.0:
            raise ValidationError("h_sq must be nonnegative")

    def check_decomposition(self, n: int, tol: float = 1e-12) -> None:
        if self.h_sq is None:
            return
        expect = self.H_sq / n + self.f_sq
        if abs(self.h_sq - expect) > tol * max(1.0, abs(self.h_sq)):
            raise ValidationError(
                f"inconsistent trace decomposition: h_sq = {self.h_sq}, "
                f"H_sq/n + f_sq = {expect}")


def kappa_hyperbolic_form(n: int, inputs: QuadraticFormInputs) -> float:
    """(L2 h, h) over the hyperbolic base of the curvature-normalized flow:
    -||T||^2/2 - ||delta h||^2 - ||H||^2/(2(n-1)) - (n-2)||h||^2/(2(n-1))."""
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    h_sq = inputs.h_sq if inputs.h_sq is not None else inputs.H_sq / n + inputs.f_sq
    return (-0.5 * inputs.T_sq - inputs.div_h_sq
            - inputs.H_sq / (2.0 * (n - 1))
            - (n - 2) / (2.0 * (n - 1)) * h_sq)


def kappa_sphere_form(n: int, inputs: QuadraticFormInputs) -> float:
    """(L2 h, h) over the round sphere of the curvature-normalized flow:
    (||grad H||^2 + ||H||^2)/n - ||grad f||^2 - ||f||^2/(n-1).
    Exhibits the eigenvalue 1 on {c g}."""
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    return ((inputs.grad_H_sq + inputs.H_sq) / n
            - inputs.grad_f_sq - inputs.f_sq / (n - 1))


def volume_hyperbolic_form(n: int, k: float, inputs: QuadraticFormInputs) -> float:
    """(L2 h, h) over the hyperbolic base of the volume-normalized flow:
    -||T||^2/2 - ||delta h||^2 + (n-2)k||f||^2 + 2k(n-1)/n (||H||^2 - V Hbar^2).
    Null on {c g} in all dimensions."""
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    if k >= 0:
        raise ValidationError(f"volume-normalized hyperbolic form needs k < 0, got {k}")
    return (-0.5 * inputs.T_sq - inputs.div_h_sq
            + (n - 2) * k * inputs.f_sq
            + 2.0 * (n - 1) / n * k * (inputs.H_sq - inputs.volume * inputs.H_bar**2))


class TeichmullerDim(NamedTuple):
    value: int
    in_hypothesis: bool


def teichmuller_null_dim(genus: int, punctures: int = 0, points: int = 0) -> TeichmullerDim:
    """Real dimension 6(genus-1) + 3p + 2q of holomorphic quadratic
    differentials; flagged when outside the genus >= 2 hypothesis."""
    if punctures < 0 or points < 0:
        raise ValidationError("puncture and point counts must be nonnegative")
    dim = 6 * (genus - 1) + 3 * punctures + 2 * points
    return TeichmullerDim(value=dim, in_hypothesis=genus >= 2)


def center_manifold_dim(n: int, genus: int | None = None) -> int:
    """Dimension of the center manifold at the hyperbolic stationary datum:
    1 + 6(genus-1) for surface bases, 1 for n >= 3."""
    if n < 2:
        raise ValidationError(f"base dimension must be >= 2, got {n}")
    if n >= 3:
        return 1
    if genus is None or genus < 2:
        raise ValidationError("surface base requires genus >= 2")
    return 1 + 6 * (genus - 1)


def legendre_axisymmetric_oracle(n_nodes: int, j_max: int, k: float) -> np.ndarray:
    """Top eigenvalues of the axisymmetric scalar Laplacian on the round
    2-sphere of curvature k, by a conservative finite-difference oracle.

    Cell-centered colatitude grid theta_i = (i + 1/2) pi / n; the flux
    coefficients sin(theta) vanish identically at both poles, which renders
    the coordinate singularity regular without one-sided stencils.  Returns
    the j_max + 1 largest eigenvalues, descending; they converge at second
    order to -j k (j + 1).
    """
    if n_nodes < 128:
        raise ValidationError(f"oracle needs at least 128 nodes, got {n_nodes}")
    if k <= 0:
        raise ValidationError(f"oracle is for the sphere, needs k > 0, got {k}")
    dth = np.pi / n_nodes
    theta = (np.arange(n_nodes) + 0.5) * dth
    sin_c = np.sin(theta)
    sin_f = np.sin(np.arange(n_nodes + 1) * dth)  # faces; 0 at both ends
    lower = sin_f[1:-1] / dth**2
    diag = -(sin_f[:-1] + sin_f[1:]) / dth**2
    # symmetrize with weight sin(theta): B = W^(1/2) A W^(-1/2)
    wsq = np.sqrt(sin_c)
    mat = np.zeros((n_nodes, n_nodes))
    idx = np.arange(n_nodes)
    mat[idx, idx] = diag / sin_c
    mat[idx[:-1], idx[:-1] + 1] = lower / sin_c[:-1]
    mat[idx[:-1] + 1, idx[:-1]] = lower / sin_c[1:]
    sym = (wsq[:, None] * mat) / wsq[None, :]
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym) * k
    return np.sort(eigs)[::-1][: j_max + 1]


def write_spaceform_csv(path, n: int, k: float, j_max: int,
                        oracle_nodes: int = 0) -> None:
    """CSV ``family,j,value`` for the closed-form families (and the n = 2
    oracle when ``oracle_nodes`` > 0)."""
    lines = ["family,j,value"]
    for j in range(j_max + 1):
        lines.append(f"scalar,{j},{lambda_jk(j, k, n)!r}")
    for j in range(1, j_max + 1):
        lines.append(f"one_form_a,{j},{lambda_jk(j, k, n)!r}")
        lines.append(f"one_form_b,{j},{lambda_jk(j, k, n) - (n - 2) * k!r}")
        lines.append(f"L1_a,{j},{lambda_jk(j, k, n) + (n - 1) * k!r}")
        lines.append(f"L1_b,{j},{lambda_jk(j, k, n) - (n - 2) * k + (n - 1) * k!r}")
    for j in range(j_max + 1):
        lines.append(f"L0prime,{j},{l0prime_eigenvalue(j, k, n)!r}")
    if oracle_nodes and n == 2:
        for j, val in enumerate(legendre_axisymmetric_oracle(oracle_nodes, j_max, k)):
            lines.append(f"oracle,{j},{float(val)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
