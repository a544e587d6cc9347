"""Batch figure rendering from the command line.

    torusflow-plot --kind decay --in timeseries.csv [--fit ratefit.json] --out decay.svg
    torusflow-plot --kind spectrum --in spectrum.csv --out spectrum.svg

Exit codes: 0 success, 1 schema or argument problem.
"""

from __future__ import annotations

import argparse
import sys

from .io import PlotDataError
from .render import PlotJob, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusflow-plot",
                                description="Render decay and spectrum figures from output files")
    p.add_argument("--kind", required=True, choices=("decay", "spectrum"))
    p.add_argument("--in", dest="csv_path", required=True,
                   help="input CSV (timeseries for decay, spectrum rows for spectrum)")
    p.add_argument("--fit", dest="fit_path", default=None,
                   help="optional rate-fit JSON with the spectral-gap reference")
    p.add_argument("--out", dest="out_path", required=True,
                   help="output image path (SVG recommended)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = PlotJob(kind=args.kind, csv_path=args.csv_path,
                      out_path=args.out_path, fit_path=args.fit_path)
        summary = render(job)
    except PlotDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parts = ", ".join(f"{k}={v}" for k, v in summary.items() if k != "kind")
    print(f"wrote {args.out_path} ({summary['kind']}: {parts})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
