"""Readers for the delimited experiment outputs.

Schema violations raise :class:`PlotDataError` naming the offending line.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class PlotDataError(Exception):
    """Input file does not conform to the expected schema."""


DECAY_REQUIRED = ("tau", "dev_total", "dev_h_null")
DECAY_OPTIONAL = ("dev_u", "dev_A", "dev_h_perp")
SPECTRUM_COLUMNS = ("block", "index", "re", "im", "is_null")


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    if not path.exists():
        raise PlotDataError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotDataError(f"{path}: empty file") from None
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return [h.strip() for h in header], rows


def read_decay_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Time series columns keyed by name; tau must be strictly increasing."""
    header, rows = _read_rows(path)
    for col in DECAY_REQUIRED:
        if col not in header:
            raise PlotDataError(f"{path}: missing column {col!r}")
    idx = {name: header.index(name) for name in header}
    data: dict[str, list[float]] = {name: [] for name in header}
    for lineno, row in rows:
        if len(row) != len(header):
            raise PlotDataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        for name in header:
            try:
                data[name].append(float(row[idx[name]]))
            except ValueError:
                raise PlotDataError(
                    f"{path}: line {lineno}: column {name!r} is not a number "
                    f"({row[idx[name]]!r})") from None
    out = {name: np.asarray(vals) for name, vals in data.items()}
    tau = out["tau"]
    if tau.size >= 2 and not np.all(np.diff(tau) > 0):
        bad = int(np.argmin(np.diff(tau) > 0)) + 3  # header + 1-based + next row
        raise PlotDataError(f"{path}: line {bad}: tau is not strictly increasing")
    return out


def read_spectrum_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Spectrum rows: blocks, eigenvalue parts, null flags."""
    header, rows = _read_rows(path)
    for col in SPECTRUM_COLUMNS:
        if col not in header:
            raise PlotDataError(f"{path}: missing column {col!r}")
    idx = {name: header.index(name) for name in SPECTRUM_COLUMNS}
    blocks, res, ims, nulls = [], [], [], []
    for lineno, row in rows:
        if len(row) != len(header):
            raise PlotDataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        blocks.append(row[idx["block"]])
        try:
            res.append(float(row[idx["re"]]))
            ims.append(float(row[idx["im"]]))
            nulls.append(int(row[idx["is_null"]]))
        except ValueError as exc:
            raise PlotDataError(f"{path}: line {lineno}: {exc}") from None
    return {
        "block": np.asarray(blocks),
        "re": np.asarray(res),
        "im": np.asarray(ims),
        "is_null": np.asarray(nulls),
    }


def read_ratefit_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise PlotDataError(f"{path}: file not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PlotDataError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise PlotDataError(f"{path}: expected a JSON object")
    return data
