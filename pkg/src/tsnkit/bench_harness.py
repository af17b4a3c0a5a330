"""Monte Carlo scenario engine: replicated fits, summary metrics and tables.

Replication ``r`` of a scenario samples from ``RngStream(base_seed, r)``, and
every requested method is fit to that same sample. Results are collected by
replication index, so the output does not depend on the number of workers or
on which other methods were requested.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, TsnError
from .estimators import FitResult, GridSpec, Method, fit, fit_grid_mom
from .sampling import RngStream, TruncationDirection, sample_tsn, truncation_bounds
from .sn_core import SnParams, TsnModel

__all__ = [
    "ScenarioSpec",
    "ScenarioResult",
    "MetricRow",
    "TimingRow",
    "ScenarioFileError",
    "PARAMETERS",
    "BLOWUP_THRESHOLD",
    "run_scenario",
    "summarize",
    "summarize_scenario",
    "timing_study",
    "misspecified_range_study",
    "emit_table",
    "emit_timing",
    "parse_table",
    "load_scenarios",
    "run_scenario_file",
]

PARAMETERS = ("xi", "omega", "alpha")
BLOWUP_THRESHOLD = 100.0
TABLE_COLUMNS = ("method", "parameter", "bias", "rmse", "median", "iqr", "blowup", "n_used", "failures")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation cell: truncation setting, truth, sample size and methods."""

    direction: TruncationDirection
    tau: float
    truth: SnParams
    n: int = 500
    replications: int = 200
    methods: tuple[Method, ...] = (Method.GRID_MOM,)
    grid: GridSpec = GridSpec()
    base_seed: int = 0
    name: str = "scenario"

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", TruncationDirection.parse(self.direction))
        object.__setattr__(self, "methods", tuple(Method.parse(m) for m in self.methods))
        if not 0.0 < self.tau < 1.0:
            raise InvalidParameterError("tau must lie in (0, 1)")
        if self.replications < 1:
            raise InvalidParameterError("replications must be at least 1")
        if self.n < 3:
            raise InvalidParameterError("n must be at least 3")
        if not self.methods:
            raise InvalidParameterError("methods must be nonempty")
        if len(set(self.methods)) != len(self.methods):
            raise InvalidParameterError("methods must not repeat")
        RngStream(self.base_seed)  # validates the seed range

    @property
    def window(self):
        return truncation_bounds(self.direction, self.tau, self.truth)


@dataclass
class ScenarioResult:
    """Replicate estimates per method.

    ``estimates[m]`` is a ``(replications, 3)`` array of ``(xi, omega, alpha)``
    with a row of NaN wherever the fit failed or did not converge.
    """

    spec: ScenarioSpec
    estimates: dict[Method, np.ndarray]

    def failures(self, method: Method) -> int:
        return int(np.isnan(self.estimates[method][:, 0]).sum())


@dataclass(frozen=True)
class MetricRow:
    method: str
    parameter: str
    bias: float
    rmse: float
    median: float
    iqr: float
    blowup_flag: bool
    n_used: int = 0
    failures: int = 0


@dataclass(frozen=True)
class TimingRow:
    method: str
    n: int
    points_G: int
    mean_seconds: float
    repeats: int


class ScenarioFileError(TsnError, ValueError):
    """Malformed scenario file; the message names the line and field."""


# ---------------------------------------------------------------------------
# running scenarios


def _fit_or_none(method: Method, x, window, grid: GridSpec) -> tuple[float, float, float] | None:
    try:
        res = fit(method, x, window, grid=grid)
    except TsnError:
        return None
    return res.estimate.as_tuple() if res.converged else None


def _replication(args):
    spec, r = args
    window = spec.window
    x = sample_tsn(TsnModel(spec.truth, window), spec.n, RngStream(spec.base_seed, r))
    return r, [_fit_or_none(m, x, window, spec.grid) for m in spec.methods]


def run_scenario(spec: ScenarioSpec, workers: int = 1) -> ScenarioResult:
    """Sample every replication and fit each requested method to it."""
    jobs = [(spec, r) for r in range(spec.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_replication, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        out = [_replication(j) for j in jobs]
    out.sort(key=lambda item: item[0])
    estimates = {m: np.full((spec.replications, 3), np.nan) for m in spec.methods}
    for r, fits in out:
        for m, est in zip(spec.methods, fits):
            if est is not None:
                estimates[m][r] = est
    return ScenarioResult(spec, estimates)


# ---------------------------------------------------------------------------
# metrics


def summarize(
    estimates: np.ndarray, truth: SnParams, method: Method | str = "", failures: int | None = None
) -> list[MetricRow]:
    """Bias, RMSE, median and IQR per parameter over the usable replicates.

    Rows of ``estimates`` containing NaN are treated as failed fits and
    excluded. Quantiles use linear interpolation between order statistics.
    """
    est = np.asarray(estimates, dtype=float).reshape(-1, 3)
    used = est[~np.isnan(est).any(axis=1)]
    if used.shape[0] == 0:
        raise InvalidParameterError("summarize needs at least one usable replicate")
    if failures is None:
        failures = est.shape[0] - used.shape[0]
    label = Method.parse(method).value if method else ""
    rows = []
    for j, name in enumerate(PARAMETERS):
        v = used[:, j]
        err = v - truth.as_tuple()[j]
        q25, q50, q75 = np.quantile(v, [0.25, 0.5, 0.75])
        rows.append(
            MetricRow(
                method=label,
                parameter=name,
                bias=float(np.mean(err)),
                rmse=float(math.sqrt(np.mean(err * err))),
                median=float(q50),
                iqr=float(max(q75 - q25, 0.0)),
                blowup_flag=bool(np.any(np.abs(v) > BLOWUP_THRESHOLD)),
                n_used=int(used.shape[0]),
                failures=int(failures),
            )
        )
    return rows


def summarize_scenario(result: ScenarioResult) -> list[MetricRow]:
    rows: list[MetricRow] = []
    for m in result.spec.methods:
        est = result.estimates[m]
        if np.isnan(est).any(axis=1).all():
            nan = math.nan
            rows.extend(
                MetricRow(m.value, p, nan, nan, nan, nan, False, 0, est.shape[0]) for p in PARAMETERS
            )
            continue
        rows.extend(summarize(est, result.spec.truth, m))
    return rows


# ---------------------------------------------------------------------------
# tables


def _cell(value: float, fmt: str) -> str:
    if abs(value) > BLOWUP_THRESHOLD:
        return ">100"
    if math.isnan(value):
        return "nan"
    return repr(float(value)) if fmt == "csv" else f"{value:.3f}"


def _table_records(rows: Iterable[MetricRow], fmt: str) -> list[list[str]]:
    records = []
    for row in rows:
        rec = [row.method, row.parameter]
        for col in ("bias", "rmse", "median", "iqr"):
            rec.append(_cell(getattr(row, col), fmt))
        rec += [str(int(row.blowup_flag)), str(row.n_used), str(row.failures)]
        records.append(rec)
    return records


def emit_table(rows: Iterable[MetricRow], format: str = "csv") -> str:
    """Render metric rows as CSV or aligned text.

    Values beyond 100 in absolute value are written as ``>100``; the
    ``blowup`` column flags rows where any single estimate exceeded 100.
    """
    if format not in ("csv", "text"):
        raise InvalidParameterError("format must be 'csv' or 'text'")
    records = _table_records(rows, format)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(records)
        return buf.getvalue()
    table = [list(TABLE_COLUMNS)] + records
    widths = [max(len(r[i]) for r in table) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for r in table:
        cells = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[MetricRow]:
    """Read back CSV written by :func:`emit_table`; ``>100`` cells become inf."""

    def num(s: str) -> float:
        return math.inf if s == ">100" else float(s)

    rows = []
    reader = csv.DictReader(io.StringIO(text))
    for rec in reader:
        rows.append(
            MetricRow(
                method=rec["method"],
                parameter=rec["parameter"],
                bias=num(rec["bias"]),
                rmse=num(rec["rmse"]),
                median=num(rec["median"]),
                iqr=num(rec["iqr"]),
                blowup_flag=rec["blowup"] == "1",
                n_used=int(rec["n_used"]),
                failures=int(rec["failures"]),
            )
        )
    return rows


def emit_timing(rows: Iterable[TimingRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("method", "n", "points_G", "mean_seconds", "repeats"))
    for r in rows:
        writer.writerow((r.method, r.n, r.points_G, repr(r.mean_seconds), r.repeats))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# studies


def timing_study(
    n_values: Sequence[int],
    grid_sizes: Sequence[int],
    repeats: int = 10,
    methods: Sequence[Method | str] = (Method.GRID_MOM, Method.GRID_MLE),
    truth: SnParams = SnParams(0.0, 1.0, 2.0),
    direction: TruncationDirection | str = TruncationDirection.RIGHT,
    tau: float = 0.1,
    half_width_a: float = 5.0,
    seed: int = 0,
) -> list[TimingRow]:
    """Mean wall-clock fit time per (method, n, G) on freshly sampled data.

    Repeat ``k`` of sample size ``n`` uses the same sample for every method
    and grid size, so the comparison is paired.
    """
    if repeats < 3:
        raise InvalidParameterError("repeats must be at least 3")
    window = truncation_bounds(direction, tau, truth)
    model = TsnModel(truth, window)
    methods = [Method.parse(m) for m in methods]
    rows = []
    for i, n in enumerate(n_values):
        samples = [sample_tsn(model, int(n), RngStream(seed, i * repeats + k)) for k in range(repeats)]
        for G in grid_sizes:
            grid = GridSpec(half_width_a, int(G))
            for m in methods:
                elapsed = 0.0
                for x in samples:
                    t0 = time.perf_counter()
                    fit(m, x, window, grid=grid)
                    elapsed += time.perf_counter() - t0
                rows.append(TimingRow(m.value, int(n), int(G), elapsed / repeats, repeats))
    return rows


def misspecified_range_study(
    alpha_true: float,
    grids: Sequence[GridSpec],
    seed: int = 0,
    n: int = 500,
    direction: TruncationDirection | str = TruncationDirection.RIGHT,
    tau: float = 0.1,
    xi: float = 0.0,
    omega: float = 1.0,
) -> list[FitResult]:
    """Fit GRID-MOM to one TSN sample under each of several shape grids."""
    truth = SnParams(xi, omega, alpha_true)
    window = truncation_bounds(direction, tau, truth)
    x = sample_tsn(TsnModel(truth, window), n, RngStream(seed))
    return [fit_grid_mom(x, window, g) for g in grids]


# ---------------------------------------------------------------------------
# scenario files

_KEYS = {"direction", "tau", "alpha0", "xi0", "omega0", "n", "reps", "methods", "grid", "seed"}
_REQUIRED = ("direction", "tau", "alpha0")


def _key_lines(text: str) -> tuple[dict[tuple[str, str], int], dict[str, int]]:
    keys: dict[tuple[str, str], int] = {}
    sections: dict[str, int] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            sections[current] = lineno
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and current is not None:
            keys[(current, m.group(1).strip().lower())] = lineno
    return keys, sections


def load_scenarios(path: str | Path, reps_override: int | None = None) -> list[ScenarioSpec]:
    """Parse an INI scenario file, one scenario per section.

    Recognized keys: ``direction``, ``tau``, ``alpha0`` (required), ``xi0``,
    ``omega0``, ``n``, ``reps``, ``methods`` (comma separated), ``grid``
    (``a,G``) and ``seed``. Errors name the offending line and field.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{path}: cannot read scenario file ({exc.strerror})") from None
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioFileError(f"{path}: {exc}") from None
    lines, section_lines = _key_lines(text)
    if not parser.sections():
        raise ScenarioFileError(f"{path}: no scenario sections found")

    specs = []
    for name in parser.sections():
        sec = parser[name]

        def fail(key: str, msg: str) -> ScenarioFileError:
            line = lines.get((name, key), section_lines.get(name, 0))
            return ScenarioFileError(f"{path}:{line}: [{name}] field '{key}': {msg}")

        for key in sec:
            if key not in _KEYS:
                raise fail(key, "unknown field")
        for key in _REQUIRED:
            if key not in sec:
                raise fail(key, "missing required field")

        def number(key: str, kind=float, default=None):
            if key not in sec:
                return default
            try:
                return kind(sec[key])
            except ValueError:
                raise fail(key, f"expected a number, got {sec[key]!r}") from None

        try:
            direction = TruncationDirection.parse(sec["direction"])
        except InvalidParameterError as exc:
            raise fail("direction", str(exc)) from None
        methods = []
        for tag in sec.get("methods", "grid-mom").split(","):
            try:
                methods.append(Method.parse(tag))
            except InvalidParameterError as exc:
                raise fail("methods", str(exc)) from None
        grid = GridSpec()
        if "grid" in sec:
            parts = [p.strip() for p in sec["grid"].split(",")]
            try:
                grid = GridSpec(float(parts[0]), int(parts[1]) if len(parts) > 1 else 401)
            except (ValueError, IndexError, InvalidParameterError) as exc:
                raise fail("grid", f"expected 'a,G' ({exc})") from None
        reps = reps_override if reps_override is not None else number("reps", int, 200)
        try:
            truth = SnParams(number("xi0", float, 0.0), number("omega0", float, 1.0), number("alpha0"))
        except InvalidParameterError as exc:
            raise fail("omega0", str(exc)) from None
        tau = number("tau")
        n = number("n", int, 500)
        seed = number("seed", int, 0)
        if not 0.0 < tau < 1.0:
            raise fail("tau", "must lie in (0, 1)")
        if reps < 1:
            raise fail("reps", "must be at least 1")
        if n < 3:
            raise fail("n", "must be at least 3")
        if not 0 <= seed < 2**64:
            raise fail("seed", "must be a 64-bit unsigned integer")
        if len(set(methods)) != len(methods):
            raise fail("methods", "methods must not repeat")
        spec = ScenarioSpec(
            direction=direction,
            tau=tau,
            truth=truth,
            n=n,
            replications=reps,
            methods=tuple(methods),
            grid=grid,
            base_seed=seed,
            name=name,
        )
        specs.append(spec)
    return specs


def run_scenario_file(
    path: str | Path,
    out_dir: str | Path,
    reps_override: int | None = None,
    workers: int = 1,
) -> list[Path]:
    """Run every scenario in ``path``; write one CSV each plus ``combined.csv``."""
    specs = load_scenarios(path, reps_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    combined = io.StringIO()
    combined.write("scenario," + ",".join(TABLE_COLUMNS) + "\n")
    for spec in specs:
        rows = summarize_scenario(run_scenario(spec, workers))
        table = emit_table(rows, "csv")
        safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", spec.name)
        target = out / f"{safe}.csv"
        target.write_text(table)
        written.append(target)
        for line in table.splitlines()[1:]:
            combined.write(f"{safe},{line}\n")
    target = out / "combined.csv"
    target.write_text(combined.getvalue())
    written.append(target)
    return written
