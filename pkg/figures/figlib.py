"""Shared plumbing for the figure scripts.

The scripts are read-only consumers of run directories produced by the
``chaosctrl`` CLI: they load ``manifest.json`` plus the documented CSV tables,
never mutate them, and recompute any regression they draw with the same
definition the CLI used (unweighted least squares on logs via numpy.polyfit),
so plotted slopes agree with the manifest to well below 1e-9.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np


class SchemaError(RuntimeError):
    """A required table or column is missing from the run directory."""


def load_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise SchemaError(f"{path} not found; is this a run directory?")
    return json.loads(path.read_text())


def load_table(run_dir: Path, name: str, columns: list[str]) -> dict[str, np.ndarray]:
    """Read a CSV into float columns, enforcing the documented header."""
    path = Path(run_dir) / name
    if not path.is_file():
        raise SchemaError(f"{path} not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{name} is empty (no header row)") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(
                f"{name} lacks columns {missing}; found {header} "
                f"(expected at least {columns})"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{name} has a header but no data rows")
    idx = {c: header.index(c) for c in columns}
    return {
        c: np.array([float(r[idx[c]]) for r in rows], dtype=float) for c in columns
    }


def loglog_slope(x, y) -> tuple[float, float]:
    """The shared regression definition: polyfit of log y against log x."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)),
                                  np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def make_parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("run_dir", type=Path, help="chaosctrl run directory")
    parser.add_argument("-o", "--output", type=Path, required=True,
                        help="output image path (extension picks the format)")
    return parser


def run_script(render, description: str, argv=None) -> int:
    """Uniform entry point: parse args, render, report schema errors cleanly."""
    args = make_parser(description).parse_args(argv)
    try:
        render(args.run_dir, args.output)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.output)
    return 0
