"""State snapshot files.

Schema (JSON):
    {"n_nodes": int, "N": int, "lambda": [[...]], "s": float,
     "u": [n floats], "A": [n arrays of N floats], "G": [n row-major NxN arrays]}

Floats are written with Python's shortest round-trip representation, which
preserves the exact double.  Readers re-validate every invariant (shapes,
admissible holonomy, u > 0, SPD symmetric G) and reject on violation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import BundleState, FiberField, PeriodicScalarField, PeriodicVectorField, TwistedGrid
from .spd import Holonomy

__all__ = ["save_snapshot", "load_snapshot", "state_to_dict", "state_from_dict"]


def state_to_dict(state: BundleState, s: float) -> dict:
    grid = state.grid
    return {
        "n_nodes": grid.n_nodes,
        "N": grid.fiber_dim,
        "lambda": grid.holonomy.lam.tolist(),
        "s": float(s),
        "u": state.u.values.tolist(),
        "A": state.A.values.tolist(),
        "G": state.G.values.tolist(),
    }


def save_snapshot(path: str | Path, state: BundleState, s: float) -> None:
    data = state_to_dict(state, s)
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def state_from_dict(data: dict) -> tuple[BundleState, float]:
    required = {"n_nodes", "N", "lambda", "s", "u", "A", "G"}
    missing = required - set(data)
    if missing:
        raise ValidationError(f"snapshot is missing keys: {sorted(missing)}")
    try:
        n = int(data["n_nodes"])
        nf = int(data["N"])
        lam = np.asarray(data["lambda"], dtype=float)
        s = float(data["s"])
        u = np.asarray(data["u"], dtype=float)
        a = np.asarray(data["A"], dtype=float)
        g = np.asarray(data["G"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"snapshot has malformed numeric data: {exc}") from exc
    if lam.shape != (nf, nf):
        raise ValidationError(f"snapshot lambda has shape {lam.shape}, expected ({nf}, {nf})")
    hol = Holonomy.from_matrix(lam)
    grid = TwistedGrid(n, hol)
    if u.shape != (n,):
        raise ValidationError(f"snapshot u has shape {u.shape}, expected ({n},)")
    if a.shape != (n, nf):
        raise ValidationError(f"snapshot A has shape {a.shape}, expected ({n}, {nf})")
    if g.shape != (n, nf, nf):
        raise ValidationError(f"snapshot G has shape {g.shape}, expected ({n}, {nf}, {nf})")
    state = BundleState(
        u=PeriodicScalarField(u, grid),
        A=PeriodicVectorField(a, grid),
        G=FiberField(g, grid),
    )
    state.validate()
    return state, s


def load_snapshot(path: str | Path) -> tuple[BundleState, float]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"snapshot file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"snapshot {path} is not valid JSON: {exc}") from exc
    return state_from_dict(data)
