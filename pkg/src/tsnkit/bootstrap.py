"""Parametric bootstrap standard errors for any estimator."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EstimationFailedError, InvalidParameterError, TsnError
from .estimators import FitResult, GridSpec, Method, MleOptions, fit
from .sampling import RngStream, sample_tsn
from .sn_core import TruncationWindow, TsnModel

__all__ = ["BootstrapSummary", "parametric_bootstrap", "DEFAULT_B"]

DEFAULT_B = 500


@dataclass(frozen=True)
class BootstrapSummary:
    """Replicate estimates and their per-parameter standard deviations.

    ``replicates`` holds one ``(xi, omega, alpha)`` row per successful
    replicate, in replicate order; failed replicates are dropped and counted.
    """

    B: int
    replicates: np.ndarray
    se: np.ndarray
    failures: int

    def as_dict(self) -> dict:
        return {
            "B": self.B,
            "se": {"xi": float(self.se[0]), "omega": float(self.se[1]), "alpha": float(self.se[2])},
            "failures": self.failures,
        }


def _replicate(args) -> tuple[int, tuple[float, float, float] | None]:
    b, model, n, method, stream, grid, mle_options = args
    x = sample_tsn(model, n, stream)
    try:
        res = fit(method, x, model.window, grid=grid, mle_options=mle_options)
    except TsnError:
        return b, None
    if not res.converged:
        return b, None
    return b, res.estimate.as_tuple()


def parametric_bootstrap(
    fitted: FitResult,
    window: TruncationWindow,
    n: int,
    B: int = DEFAULT_B,
    method: Method | str | None = None,
    rng: RngStream = RngStream(0),
    workers: int = 1,
    grid: GridSpec | None = None,
    mle_options: MleOptions | None = None,
) -> BootstrapSummary:
    """Resample from the fitted TSN model, refit, and summarize the spread.

    Replicate ``b`` draws its sample from ``rng.child(b)``, so the summary is
    identical for any ``workers``. ``method`` defaults to the method that
    produced ``fitted``; ``grid`` defaults to the fitted grid for grid methods.
    """
    if B < 2:
        raise InvalidParameterError("B must be at least 2")
    if n < 2:
        raise InvalidParameterError("n must be at least 2")
    if not fitted.converged:
        raise InvalidParameterError("bootstrap requires a converged fit")
    method = Method.parse(method if method is not None else fitted.method)
    grid = grid or fitted.grid
    model = TsnModel(fitted.estimate, window)
    jobs = [(b, model, n, method, rng.child(b), grid, mle_options) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, B // (4 * workers))))
    else:
        results = [_replicate(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    rows = [est for _, est in results if est is not None]
    failures = B - len(rows)
    if not rows:
        raise EstimationFailedError("every bootstrap replicate failed")
    reps = np.array(rows, dtype=float).reshape(-1, 3)
    se = reps.std(axis=0, ddof=1) if reps.shape[0] > 1 else np.zeros(3)
    return BootstrapSummary(B=B, replicates=reps, se=se, failures=failures)
