"""Grid-level convergence experiments around the stationary datum.

One experiment perturbs the stationary state, evolves the gauge-fixed flow,
projects the fiber deviation off the commutant (center) directions, fits the
exponential decay rate of the remaining deviation, and compares it with the
spectral gap of the assembled linearization.  The center directions are
excluded from the fitted signal on purpose: they parameterize the limit family
and are not expected to decay.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .flow import FlowParams, evolve
from .grid import (
    BundleState,
    FiberField,
    PeriodicScalarField,
    PeriodicVectorField,
    canonical_frame,
    d0 as grid_d0,
    discrete_inner,
    discrete_rescaling_constant,
    harmonic_einstein,
)
from .linear import (
    assemble_L0,
    assemble_L1,
    assemble_L2,
    choose_deturck_C,
    null_fields,
    spectrum,
)
from .spd import Holonomy

__all__ = [
    "ExperimentConfig",
    "TimeSeries",
    "RateFit",
    "ExperimentResult",
    "perturb",
    "deviation",
    "fit_rate",
    "run_convergence",
    "write_timeseries_csv",
    "config_hash",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one convergence experiment."""

    holonomy: tuple[tuple[float, ...], ...]
    n_nodes: int = 256
    eps: float = 1e-3
    seed: int = 0
    tau_end: float = 12.0
    deturck_C: float | str = "auto"   # "auto" -> kappa^2 / (2 gap)
    cfl_safety: float = 0.9
    sample_dtau: float = 0.05
    fit_window: tuple[float, float] = (1e-6, 1e-3)
    perturb_modes: int = 8
    perturb_blocks: tuple[str, ...] = ("v", "B", "h")
    out_dir: str | None = None

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValidationError(f"perturbation amplitude must be positive, got {self.eps}")
        if self.tau_end <= 0.0:
            raise ValidationError(f"tau_end must be positive, got {self.tau_end}")
        if isinstance(self.deturck_C, str) and self.deturck_C != "auto":
            raise ValidationError(f"deturck_C must be a number or 'auto', got {self.deturck_C!r}")

    def holonomy_matrix(self) -> np.ndarray:
        return np.asarray(self.holonomy, dtype=float)


@dataclass
class TimeSeries:
    tau: np.ndarray
    dev_u: np.ndarray
    dev_A: np.ndarray
    dev_h_perp: np.ndarray
    dev_h_null: np.ndarray

    @property
    def dev_total(self) -> np.ndarray:
        return self.dev_u + self.dev_A + self.dev_h_perp


@dataclass(frozen=True)
class RateFit:
    rate: float
    window: tuple[float, float]
    r_squared: float
    n_points: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: TimeSeries
    fit: RateFit
    gap: float
    deturck_C: float
    s: float
    u_limit_err: float
    A_limit_err: float
    he_limit_err: float
    failed: bool
    failure_reason: str = ""
    spectra: dict = dc_field(default_factory=dict)


def _fourier_series(rng: np.random.Generator, n: int, modes: int, eps: float,
                    shape: tuple[int, ...]) -> np.ndarray:
    """Truncated Fourier series with coefficients uniform in [-eps, eps];
    includes the constant mode.  Output shape (n, *shape)."""
    xi = np.arange(n) / n
    out = np.zeros((n,) + shape)
    coeff = rng.uniform(-eps, eps, size=shape)
    out += coeff
    for j in range(1, modes + 1):
        a = rng.uniform(-eps, eps, size=shape)
        b = rng.uniform(-eps, eps, size=shape)
        cosj = np.cos(2 * np.pi * j * xi)
        sinj = np.sin(2 * np.pi * j * xi)
        out += cosj.reshape((n,) + (1,) * len(shape)) * a
        out += sinj.reshape((n,) + (1,) * len(shape)) * b
    return out


def perturb(state: BundleState, eps: float, seed: int,
            modes: int = 8, blocks: tuple[str, ...] = ("v", "B", "h")) -> BundleState:
    """Smooth random perturbation of a state, twist-exact on the fiber block.

    v and B are truncated Fourier series with coefficients uniform in
    [-eps, eps].  The fiber perturbation is built in the canonical frame
    (G = R R^T): a periodic symmetric Fourier series is congruence-multiplied
    into the metric, h = R C R^T, which satisfies the twisted wrap exactly
    and keeps G + h positive definite for small eps.  A fixed seed gives a
    bit-identical perturbation.
    """
    grid = state.grid
    n, nf = grid.n_nodes, grid.fiber_dim
    rng = np.random.default_rng(seed)
    out = state.copy()
    v = _fourier_series(rng, n, modes, eps, ())
    b = _fourier_series(rng, n, modes, eps, (nf,))
    csym = _fourier_series(rng, n, modes, eps, (nf, nf))
    csym = 0.5 * (csym + np.swapaxes(csym, 1, 2))
    if "v" in blocks:
        out.u.values[:] = state.u.values + v
    if "B" in blocks:
        out.A.values[:] = state.A.values + b
    if "h" in blocks:
        r = state.G.frame if state.G.frame is not None else canonical_frame(grid)
        h = np.einsum("mij,mjk,mlk->mil", r, csym, r)
        out.G.values[:] = state.G.values + h
    out.validate()
    return out


def deviation(state: BundleState, target: FiberField,
              null_basis: np.ndarray) -> tuple[float, float, float, float]:
    """(dev_u, dev_A, dev_h_perp, dev_h_null) of a state against the
    stationary datum.

    Deviations are grid max-norms; the fiber difference h = G - G_target is
    split by the (target-weighted) inner-product projection onto the span of
    the commutant fields.
    """
    dev_u = float(np.abs(state.u.values - 1.0).max())
    dev_a = float(np.linalg.norm(state.A.values, axis=1).max()) if state.A.values.size else 0.0
    h = state.G.values - target.values
    coeffs = np.array([discrete_inner("tensor", target, h, nb) for nb in null_basis])
    h_null = np.einsum("a,amij->mij", coeffs, null_basis) if null_basis.size else np.zeros_like(h)
    h_perp = h - h_null
    ginv = np.linalg.inv(target.values)
    def gnorm(x):
        sq = np.einsum("mij,mjk,mkl,mli->m", ginv, x, ginv, x)
        return float(np.sqrt(max(sq.max(), 0.0)))
    return dev_u, dev_a, gnorm(h_perp), gnorm(h_null)


def fit_rate(tau: np.ndarray, dev: np.ndarray,
             window: tuple[float, float] = (1e-6, 1e-3)) -> RateFit:
    """Least-squares slope of log(dev) vs tau over the window where dev lies
    in [window[0], window[1]].  rate is the decay rate (positive slope of
    -log dev)."""
    lo, hi = window
    mask = (dev >= lo) & (dev <= hi)
    if mask.sum() < 3:
        raise NumericalError(
            f"rate fit window [{lo:g}, {hi:g}] contains only {int(mask.sum())} samples")
    t = tau[mask]
    y = np.log(dev[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(rate=float(-slope), window=(float(t.min()), float(t.max())),
                   r_squared=r2, n_points=int(mask.sum()))


def run_convergence(config: ExperimentConfig) -> ExperimentResult:
    """Full convergence experiment; writes outputs when out_dir is set.

    Failure (blow-up, or the tracked deviation rising 50% above its running
    minimum after the initial transient) marks the result failed rather than
    silently passing.
    """
    hol = Holonomy.from_matrix(config.holonomy_matrix())
    n = config.n_nodes
    target, _, _ = harmonic_einstein(hol, n)
    s_run = discrete_rescaling_constant(hol, n)
    grid = target.grid
    if config.deturck_C == "auto":
        c_val = choose_deturck_C(target)
    else:
        c_val = float(config.deturck_C)
    l0 = spectrum(assemble_L0(grid, c_val, s_run))
    l1 = spectrum(assemble_L1(grid, s_run))
    # geometric fiber-block realization: its null eigenvalues are exact at
    # any resolution, so the gap is never polluted by the O(dxi^2) null
    # displacement of the plain stencil
    l2 = spectrum(assemble_L2(target, form="geometric"))
    gaps = [r.gap for r in (l0, l1, l2) if np.isfinite(r.gap) and r.gap > 0]
    gap = min(gaps)
    base = BundleState(
        u=PeriodicScalarField(np.ones(n), grid),
        A=PeriodicVectorField(np.zeros((n, grid.fiber_dim)), grid),
        G=FiberField(target.values.copy(), grid, frame=target.frame),
    )
    start = perturb(base, config.eps, config.seed,
                    modes=config.perturb_modes, blocks=config.perturb_blocks)
    nb = null_fields(target)
    params = FlowParams(s=s_run, c=0.0, C_deturck=c_val, deturck_enabled=True,
                        cfl_safety=config.cfl_safety, t_end=config.tau_end)
    rows = []
    failed = [False, ""]
    running_min = [np.inf]

    def record(tau, st):
        du, da, hp, hn = deviation(st, target, nb)
        rows.append((tau, du, da, hp, hn))
        total = du + da + hp
        if tau > 1.0:
            if total > 1.5 * running_min[0] and total > 1e-12:
                failed[0] = True
                failed[1] = (f"deviation rose to {total:.3e} at tau = {tau:.3f}, "
                             f"50% above its running minimum {running_min[0]:.3e}")
        running_min[0] = min(running_min[0], total)

    try:
        result = evolve(start, params, sample_dtau=config.sample_dtau, callback=record)
    except NumericalError as exc:
        failed[0] = True
        failed[1] = str(exc)
        result = None
    arr = np.array(rows)
    series = TimeSeries(tau=arr[:, 0], dev_u=arr[:, 1], dev_A=arr[:, 2],
                        dev_h_perp=arr[:, 3], dev_h_null=arr[:, 4])
    try:
        fit = fit_rate(series.tau, series.dev_total, config.fit_window)
    except NumericalError as exc:
        fit = RateFit(rate=float("nan"), window=(0.0, 0.0), r_squared=0.0, n_points=0)
        failed[0] = True
        failed[1] = failed[1] or str(exc)
    if result is not None:
        end = result.state
        u_err = float(np.abs(end.u.values - 1.0).max())
        a_err = float(np.linalg.norm(end.A.values, axis=1).max())
        dg = grid_d0(end.G)
        w = np.einsum("mij,mjk->mik", np.linalg.inv(end.G.values), dg)
        he_err = float(np.abs(w - w.mean(axis=0)).max())
    else:
        u_err = a_err = he_err = float("nan")
    out = ExperimentResult(
        config=config, series=series, fit=fit, gap=float(gap), deturck_C=c_val,
        s=s_run, u_limit_err=u_err, A_limit_err=a_err, he_limit_err=he_err,
        failed=failed[0], failure_reason=failed[1],
        spectra={"L0": l0, "L1": l1, "L2": l2},
    )
    if config.out_dir is not None:
        write_experiment_outputs(Path(config.out_dir), out)
    return out


def write_timeseries_csv(path, series: TimeSeries) -> None:
    lines = ["tau,dev_u,dev_A,dev_h_perp,dev_h_null,dev_total"]
    tot = series.dev_total
    for i in range(series.tau.size):
        row = (series.tau[i], series.dev_u[i], series.dev_A[i],
               series.dev_h_perp[i], series.dev_h_null[i], tot[i])
        lines.append(",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def ratefit_to_dict(result: ExperimentResult) -> dict:
    return {
        "rate": result.fit.rate,
        "r2": result.fit.r_squared,
        "window": [result.fit.window[0], result.fit.window[1]],
        "gap": result.gap,
        "u_limit_err": result.u_limit_err,
        "A_limit_err": result.A_limit_err,
        "HE_limit_err": result.he_limit_err,
        "failed": result.failed,
    }


def write_experiment_outputs(out_dir: Path, result: ExperimentResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = config_hash(result.config)
    write_timeseries_csv(out_dir / f"timeseries_{tag}.csv", result.series)
    (out_dir / f"ratefit_{tag}.json").write_text(
        json.dumps(ratefit_to_dict(result), indent=1) + "\n")


def config_hash(config: ExperimentConfig) -> str:
    """Deterministic short hash of a config, for collision-free file names."""
    payload = {
        "holonomy": [list(r) for r in config.holonomy],
        "n_nodes": config.n_nodes,
        "eps": config.eps,
        "seed": config.seed,
        "tau_end": config.tau_end,
        "deturck_C": config.deturck_C,
        "cfl_safety": config.cfl_safety,
        "sample_dtau": config.sample_dtau,
        "fit_window": list(config.fit_window),
        "perturb_modes": config.perturb_modes,
        "perturb_blocks": list(config.perturb_blocks),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
