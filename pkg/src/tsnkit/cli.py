"""Command-line front end: ``tsnkit fit | bootstrap | simulate``.

``fit`` and ``bootstrap`` read one column of a CSV file and print a JSON
document; ``simulate`` runs a scenario file and writes CSV tables.

Exit codes: 0 success, 1 input or usage error, 2 the fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bench_harness import run_scenario_file
from .bootstrap import DEFAULT_B, parametric_bootstrap
from .errors import TsnError
from .estimators import FitResult, GridSpec, Method, MleOptions, fit
from .sampling import RngStream
from .sn_core import TruncationWindow

__all__ = ["main", "FitRequest", "InputError", "read_column", "cmd_fit", "cmd_bootstrap"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CONVERGE = 2


class InputError(Exception):
    """Problem with the user's input; reported with exit code 1."""


@dataclass(frozen=True)
class FitRequest:
    input_path: Path
    column: str | None = None
    lower: float = -math.inf
    upper: float = math.inf
    method: Method = Method.GRID_MOM
    grid: GridSpec = GridSpec()
    multistart: int = 1
    seed: int = 0
    sqrt_transform: bool = False


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_column(path: Path, column: str | None = None) -> np.ndarray:
    """Read one numeric column from a CSV file.

    A header row is assumed when the first row is not entirely numeric.
    ``column`` is a header name or a 0-based index; by default the first
    column whose first data value is numeric is used.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path}: file contains no data")
    header = None
    first = [c.strip() for c in rows[0]]
    if not all(_is_number(c) for c in first if c):
        header, rows = first, rows[1:]
    if not rows:
        raise InputError(f"{path}: file contains a header but no data")

    if column is None:
        idx = next((i for i, c in enumerate(rows[0]) if _is_number(c.strip())), None)
        if idx is None:
            raise InputError(f"{path}: no numeric column found")
    elif header is not None and column in header:
        idx = header.index(column)
    elif column.isdigit():
        idx = int(column)
    else:
        raise InputError(f"{path}: column {column!r} not found")

    values = []
    for lineno, row in enumerate(rows, start=2 if header is not None else 1):
        if idx >= len(row):
            raise InputError(f"{path}:{lineno}: row has no column {idx}")
        cell = row[idx].strip()
        try:
            values.append(float(cell))
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric value {cell!r}") from None
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError(f"{path}: column contains non-finite values")
    return x


def _json_bound(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _prepare(req: FitRequest) -> tuple[np.ndarray, TruncationWindow]:
    try:
        window = TruncationWindow(req.lower, req.upper)
    except TsnError as exc:
        raise InputError(f"invalid window: {exc}") from None
    x = read_column(req.input_path, req.column)
    if req.sqrt_transform:
        if np.any(x < 0):
            raise InputError("square-root transform needs non-negative data")
        x = np.sqrt(x)
    x = x[(x >= window.lower) & (x <= window.upper)]
    if x.size == 0:
        raise InputError("no observations in window")
    if x.size < 2:
        raise InputError("need at least 2 observations in window")
    if np.all(x == x[0]):
        raise InputError("degenerate variance: all observations are equal")
    return x, window


def _run_fit(req: FitRequest, x: np.ndarray, window: TruncationWindow) -> FitResult:
    opts = MleOptions(multistart_count=req.multistart, seed=req.seed)
    try:
        return fit(req.method, x, window, grid=req.grid, mle_options=opts)
    except TsnError as exc:
        raise InputError(f"fit failed: {exc}") from None


def _base_doc(req: FitRequest, res: FitResult, n_used: int, window: TruncationWindow) -> dict:
    doc = {
        "method": res.method.value,
        "estimate": {"xi": res.estimate.xi, "omega": res.estimate.omega, "alpha": res.estimate.alpha},
        "loglik": res.loglik,
        "converged": bool(res.converged),
        "n_used": int(n_used),
        "window": {"lower": _json_bound(window.lower), "upper": _json_bound(window.upper)},
        "sqrt_transform": req.sqrt_transform,
    }
    if res.method.is_grid:
        doc["grid"] = {"half_width_a": req.grid.half_width_a, "points_G": req.grid.points_G}
    if res.method is Method.MLE:
        doc["multistart"] = req.multistart
    return doc


def cmd_fit(req: FitRequest) -> tuple[dict, int]:
    x, window = _prepare(req)
    res = _run_fit(req, x, window)
    return _base_doc(req, res, x.size, window), EXIT_OK if res.converged else EXIT_NO_CONVERGE


def cmd_bootstrap(req: FitRequest, B: int, workers: int = 1) -> tuple[dict, int]:
    if B < 2:
        raise InputError("bootstrap needs B >= 2")
    x, window = _prepare(req)
    res = _run_fit(req, x, window)
    doc = _base_doc(req, res, x.size, window)
    if not res.converged:
        return doc, EXIT_NO_CONVERGE
    try:
        summ = parametric_bootstrap(
            res,
            window,
            x.size,
            B,
            rng=RngStream(req.seed),
            workers=workers,
            grid=req.grid,
            mle_options=MleOptions(multistart_count=req.multistart, seed=req.seed),
        )
    except TsnError as exc:
        raise InputError(f"bootstrap failed: {exc}") from None
    doc.update(summ.as_dict())
    doc["seed"] = req.seed
    return doc, EXIT_OK


def _bound(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or inf/-inf: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the input-error code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsnkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, type=Path, help="CSV file of observations")
    common.add_argument("--column", help="header name or 0-based index (default: first numeric)")
    common.add_argument("--lower", type=_bound, default=-math.inf, help="lower truncation point or -inf")
    common.add_argument("--upper", type=_bound, default=math.inf, help="upper truncation point or inf")
    common.add_argument(
        "--method", default=Method.GRID_MOM.value, choices=[m.value for m in Method], help="estimator"
    )
    common.add_argument("--grid-a", type=float, default=5.0, help="shape grid half-width")
    common.add_argument("--grid-points", type=int, default=401, help="number of grid points")
    common.add_argument("--multistart", type=int, default=1, help="MLE start points")
    common.add_argument("--sqrt-transform", action="store_true", help="fit sqrt of the data")
    common.add_argument("--seed", type=int, default=0, help="seed for multistart and resampling")

    sub.add_parser("fit", parents=[common], help="fit a TSN model to a data column")
    boot = sub.add_parser("bootstrap", parents=[common], help="fit plus parametric bootstrap se")
    boot.add_argument("--bootstrap-B", type=int, default=DEFAULT_B, help="bootstrap replicates")
    boot.add_argument("--workers", type=int, default=1, help="worker processes")

    sim = sub.add_parser("simulate", help="run a scenario file and write CSV tables")
    sim.add_argument("scenario_file", type=Path, help="INI scenario file")
    sim.add_argument("--reps", type=int, help="override replications of every scenario")
    sim.add_argument("--out-dir", type=Path, default=Path("."), help="directory for CSV output")
    sim.add_argument("--workers", type=int, default=1, help="worker processes")
    return parser


def _request(args: argparse.Namespace) -> FitRequest:
    if args.multistart < 1:
        raise InputError("--multistart must be at least 1")
    try:
        grid = GridSpec(args.grid_a, args.grid_points)
    except TsnError as exc:
        raise InputError(f"invalid grid: {exc}") from None
    return FitRequest(
        input_path=args.input,
        column=args.column,
        lower=args.lower,
        upper=args.upper,
        method=Method.parse(args.method),
        grid=grid,
        multistart=args.multistart,
        seed=args.seed,
        sqrt_transform=args.sqrt_transform,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.reps is not None and args.reps < 1:
                raise InputError("--reps must be at least 1")
            try:
                written = run_scenario_file(args.scenario_file, args.out_dir, args.reps, args.workers)
            except TsnError as exc:
                raise InputError(str(exc)) from None
            for path in written:
                print(path)
            return EXIT_OK
        req = _request(args)
        if args.command == "fit":
            doc, code = cmd_fit(req)
        else:
            doc, code = cmd_bootstrap(req, args.bootstrap_B, args.workers)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(doc, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
