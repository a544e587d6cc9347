"""Command-line frontend.

Subcommands: stationary, spectrum, evolve, experiment, sphere-spectra,
rescale.  Exit codes: 0 success, 1 validation error, 2 numerical failure.
Config files are flat JSON objects with dotted keys; any key can be
overridden on the command line with --set key=value, and unknown keys are
rejected.  Outputs are reproducible; wall-clock metadata goes to a separate
run_meta.json.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .experiments import (
    ExperimentConfig,
    config_hash,
    ratefit_to_dict,
    run_convergence,
    write_timeseries_csv,
)
from .flow import FlowParams, evolve, evolve_stride, rhs
from .grid import (
    BundleState,
    FiberField,
    PeriodicScalarField,
    PeriodicVectorField,
    canonical_frame,
    discrete_rescaling_constant,
    harmonic_einstein,
)
from .linear import (
    DofLayout,
    assemble_L0,
    assemble_L1,
    assemble_L2,
    assemble_L_full,
    choose_deturck_C,
    kappa_bound,
    spectrum,
    write_spectrum_csv,
)
from .rescale import RescaleParams, from_rescaled, to_rescaled
from .snapshots import load_snapshot, save_snapshot
from .spaceform import (
    center_manifold_dim,
    teichmuller_null_dim,
    volume_flow_verdict,
    write_spaceform_csv,
)
from .spd import Holonomy


def parse_matrix(text: str) -> np.ndarray:
    """Parse a matrix literal: rows separated by ';', entries by ','."""
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse matrix {text!r}: {exc}") from exc
    sizes = {len(r) for r in rows}
    if len(sizes) != 1 or len(rows) != sizes.pop():
        raise ValidationError(f"matrix {text!r} is not square")
    return np.asarray(rows, dtype=float)


def _load_config(path: str | None, overrides: list[str], allowed: dict[str, object]) -> dict:
    """Flat dotted-key config with defaults, file values and CLI overrides."""
    values = dict(allowed)
    file_values = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"config file not found: {p}")
        try:
            file_values = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {p} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ValidationError(f"config {p} must be a JSON object")
    for src in (file_values, _parse_overrides(overrides)):
        for key, val in src.items():
            if key not in allowed:
                raise ValidationError(
                    f"unknown config key {key!r}; known keys: {sorted(allowed)}")
            values[key] = val
    return values


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _maybe_attach_frame(field: FiberField) -> FiberField:
    """Attach the canonical frame when the loaded G is the canonical family."""
    r = canonical_frame(field.grid)
    recon = np.einsum("mij,mkj->mik", r, r)
    scale = np.abs(field.values).max()
    if np.abs(recon - field.values).max() <= 1e-8 * scale:
        return FiberField(field.values, field.grid, frame=r)
    return field


def _stationary_state(hol: Holonomy, n_nodes: int) -> tuple[BundleState, float]:
    gfield, s, _ = harmonic_einstein(hol, n_nodes)
    grid = gfield.grid
    state = BundleState(
        u=PeriodicScalarField(np.ones(n_nodes), grid),
        A=PeriodicVectorField(np.zeros((n_nodes, grid.fiber_dim)), grid),
        G=gfield,
    )
    return state, s


def cmd_stationary(args) -> int:
    hol = Holonomy.from_matrix(parse_matrix(args.lam))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state, s = _stationary_state(hol, args.nodes)
    save_snapshot(out_dir / "stationary.json", state, s)
    lines = [f"holonomy eigenvalues: {', '.join(repr(float(v)) for v in hol.eigvals)}"]
    lines.append(f"s (continuum) = {s!r}")
    if s == 0.0:
        lines.append("warning: s = 0 (trivial twist); the stationary datum is only weakly stable")
    for n in (args.nodes, 2 * args.nodes):
        st, _ = _stationary_state(hol, n)
        s_n = discrete_rescaling_constant(hol, n)
        params = FlowParams(s=s, t_end=1.0)
        r = rhs(st, params)
        res = max(np.abs(r.du.values).max(), np.abs(r.dA.values).max(),
                  np.abs(r.dG.values).max())
        lines.append(f"s (discrete, {n} nodes) = {float(s_n)!r}")
        lines.append(f"max |rhs| at {n} nodes = {res:.6e}")
        lines.append(f"kappa ({n} nodes) = {float(kappa_bound(st.G))!r}")
    (out_dir / "stationary_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_spectrum(args) -> int:
    state, s = load_snapshot(args.snapshot)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gfield = _maybe_attach_frame(state.G)
    if args.deturck_C == "auto":
        c_val = choose_deturck_C(gfield)
    else:
        c_val = float(args.deturck_C)
    grid = gfield.grid
    form = "geometric" if gfield.frame is not None else "stencil"
    l0 = spectrum(assemble_L0(grid, c_val, s))
    l1 = spectrum(assemble_L1(grid, s))
    l2 = spectrum(assemble_L2(gfield, form=form))
    full = spectrum(assemble_L_full(gfield, c_val, s))
    write_spectrum_csv(out_dir / "spectrum.csv",
                       [("L0", l0), ("L1", l1), ("L2", l2), ("full", full)])
    layout = DofLayout(grid.n_nodes, grid.fiber_dim)
    fields = [layout.unpack_sym(vec).tolist() for vec in l2.null_basis]
    null_doc = {
        "block": "L2",
        "n_nodes": grid.n_nodes,
        "N": grid.fiber_dim,
        "lambda": grid.holonomy.lam.tolist(),
        "fields": fields,
    }
    (out_dir / "null_basis.json").write_text(json.dumps(null_doc, indent=1) + "\n")
    print(f"L2 ({form}): null_dim = {l2.null_dim}, gap = {l2.gap!r}, verdict = {l2.verdict}")
    print(f"deturck C = {c_val!r}")
    print(f"full-operator gap = {full.gap!r}")
    return 0


_EVOLVE_KEYS = {
    "snapshot": None,            # required: path to the initial state
    "s": "auto",                 # "auto" -> discrete stationary constant, or a number
    "c": 0.0,
    "deturck_enabled": True,
    "deturck_C": "auto",
    "cfl_safety": 0.25,
    "t_end": 1.0,
    "out_dir": "evolve_out",
    "snapshot_stride": 0,        # emit a snapshot every k steps (0 = only final)
}


def cmd_evolve(args) -> int:
    cfg = _load_config(args.config, args.set or [], _EVOLVE_KEYS)
    if cfg["snapshot"] is None:
        raise ValidationError("evolve config requires 'snapshot'")
    state, s_file = load_snapshot(cfg["snapshot"])
    gfield = _maybe_attach_frame(state.G)
    hol = state.grid.holonomy
    s_val = (discrete_rescaling_constant(hol, state.grid.n_nodes)
             if cfg["s"] == "auto" else float(cfg["s"]))
    if cfg["deturck_enabled"]:
        c_val = choose_deturck_C(gfield) if cfg["deturck_C"] == "auto" else float(cfg["deturck_C"])
    else:
        c_val = 0.0
    params = FlowParams(s=s_val, c=float(cfg["c"]), C_deturck=c_val,
                        deturck_enabled=bool(cfg["deturck_enabled"]),
                        cfl_safety=float(cfg["cfl_safety"]), t_end=float(cfg["t_end"]))
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stride = int(cfg["snapshot_stride"])
    if stride > 0:
        emitted = []

        def emit(tau, steps, st):
            path = out_dir / f"snapshot_{len(emitted):05d}.json"
            save_snapshot(path, st, s_val)
            emitted.append((tau, steps))
        result = evolve_stride(state, params, stride, callback=emit)
    else:
        result = evolve(state, params)
    save_snapshot(out_dir / "final.json", result.state, s_val)
    print(f"evolved to tau = {result.tau!r} in {result.steps} steps; "
          f"final snapshot: {out_dir / 'final.json'}")
    return 0


_EXPERIMENT_KEYS = {
    "lambda": None,              # required: matrix string "a,b;c,d" or nested lists
    "n_nodes": 256,
    "eps": 1e-3,
    "seed": 0,
    "tau_end": 12.0,
    "deturck_C": "auto",
    "cfl_safety": 0.9,
    "sample_dtau": 0.05,
    "fit_lo": 1e-6,
    "fit_hi": 1e-3,
    "perturb_modes": 8,
    "out_dir": "experiment_out",
}


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config, args.set or [], _EXPERIMENT_KEYS)
    if cfg["lambda"] is None:
        raise ValidationError("experiment config requires 'lambda'")
    lam = parse_matrix(cfg["lambda"]) if isinstance(cfg["lambda"], str) \
        else np.asarray(cfg["lambda"], dtype=float)
    config = ExperimentConfig(
        holonomy=tuple(tuple(float(x) for x in row) for row in lam),
        n_nodes=int(cfg["n_nodes"]), eps=float(cfg["eps"]), seed=int(cfg["seed"]),
        tau_end=float(cfg["tau_end"]), deturck_C=cfg["deturck_C"],
        cfl_safety=float(cfg["cfl_safety"]), sample_dtau=float(cfg["sample_dtau"]),
        fit_window=(float(cfg["fit_lo"]), float(cfg["fit_hi"])),
        perturb_modes=int(cfg["perturb_modes"]),
    )
    t_start = time.perf_counter()
    result = run_convergence(config)
    elapsed = time.perf_counter() - t_start
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = config_hash(config)
    write_timeseries_csv(out_dir / f"timeseries_{tag}.csv", result.series)
    (out_dir / f"ratefit_{tag}.json").write_text(
        json.dumps(ratefit_to_dict(result), indent=1) + "\n")
    write_spectrum_csv(out_dir / f"spectrum_{tag}.csv",
                       [(k, v) for k, v in result.spectra.items()])
    (out_dir / "run_meta.json").write_text(json.dumps({
        "wall_seconds": elapsed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "version": __version__,
        "config_hash": tag,
    }, indent=1) + "\n")
    status = "FAILED" if result.failed else "ok"
    print(f"experiment {tag}: {status}")
    print(f"  fitted rate = {result.fit.rate!r} (r^2 = {result.fit.r_squared:.6f})")
    print(f"  spectral gap = {result.gap!r}   deturck C = {result.deturck_C!r}")
    print(f"  limit errors: |u-1| = {result.u_limit_err:.3e}, |A| = {result.A_limit_err:.3e}, "
          f"HE = {result.he_limit_err:.3e}")
    if result.failed:
        print(f"  reason: {result.failure_reason}", file=sys.stderr)
        return 2
    return 0


def cmd_sphere_spectra(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "spaceform.csv"
    write_spaceform_csv(path, args.n, args.k, args.jmax,
                        oracle_nodes=args.oracle_nodes if args.n == 2 else 0)
    if args.k > 0:
        verdict = volume_flow_verdict(args.n, args.k)
        print(f"volume-normalized tensor block: {verdict.l2_verdict}"
              + (f", unstable eigenvalue {verdict.l2_unstable_eigenvalue!r}"
                 if verdict.l2_unstable_eigenvalue is not None else ""))
        print(f"one-form block max eigenvalue: {verdict.l1_max_eigenvalue!r}")
    if args.genus is not None:
        dim = teichmuller_null_dim(args.genus)
        note = "" if dim.in_hypothesis else " (outside the genus >= 2 hypothesis)"
        print(f"holomorphic quadratic differentials: dim = {dim.value}{note}")
        print(f"center manifold dimension: {center_manifold_dim(args.n, args.genus)}"
              if args.n == 2 else f"center manifold dimension: {center_manifold_dim(args.n)}")
    print(f"wrote {path}")
    return 0


def cmd_rescale(args) -> int:
    state, s_file = load_snapshot(args.snapshot)
    params = RescaleParams(s=args.s, c=args.c, t0=args.t0, sigma0=args.sigma0)
    mapper = from_rescaled if args.inverse else to_rescaled
    out_state = mapper(params, state, args.t)
    save_snapshot(args.out, out_state, s_file)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusflow",
                                description="Twisted torus-bundle flow laboratory")
    p.add_argument("--version", action="version", version=f"torusflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stationary", help="build the stationary snapshot for a holonomy")
    sp.add_argument("--lambda", dest="lam", required=True,
                    help="holonomy matrix, rows ';'-separated, entries ','-separated")
    sp.add_argument("--nodes", type=int, default=256)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_stationary)

    sp = sub.add_parser("spectrum", help="linearization spectra of a snapshot")
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--deturck-C", dest="deturck_C", default="auto")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("evolve", help="integrate the flow from a snapshot")
    sp.add_argument("--config", required=True)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("experiment", help="perturb-evolve-fit convergence experiment")
    sp.add_argument("--config", required=True)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("sphere-spectra", help="closed-form space-form spectra")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--jmax", type=int, required=True)
    sp.add_argument("--genus", type=int, default=None)
    sp.add_argument("--oracle-nodes", type=int, default=512)
    sp.add_argument("--out", default="spaceform_out")
    sp.set_defaults(func=cmd_sphere_spectra)

    sp = sub.add_parser("rescale", help="apply the rescaling map to a snapshot")
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--c", type=float, default=0.0)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--sigma0", type=float, default=1.0)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--inverse", action="store_true")
    sp.set_defaults(func=cmd_rescale)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
