"""Parameter estimation for the truncated skew-normal.

Five estimators share one calling convention ``fit_xxx(data, window, ...)``
and return a :class:`FitResult`:

* ``fit_mle``      -- Nelder-Mead on the full log-likelihood.
* ``fit_mom``      -- first three raw moments matched by damped Newton.
* ``fit_mwm``      -- mean, variance and E[Phi(X)] matched in least squares.
* ``fit_grid_mom`` -- shape fixed on a grid; location/scale from the mean and
  variance equations; the grid point with the highest likelihood wins.
* ``fit_grid_mle`` -- same sweep, location/scale from the profile likelihood.

Location/scale work is done on standardized data ``u = (x - xbar) / s`` and
mapped back, which makes the moment equations well conditioned and the grid
estimators exactly affine equivariant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize, special

from .errors import DataOutsideWindowError, EstimationFailedError, InvalidParameterError
from .newton import DEGENERATE, NO_CONVERGE, OK, damped_newton
from .sn_core import (
    LOG_2,
    LOG_SQRT_2PI,
    MASS_FLOOR,
    SnParams,
    TruncationWindow,
    std_window_log_mass,
    tsn_loglik_many,
)
from .tsn_moments import moment_batch

__all__ = [
    "Method",
    "GridSpec",
    "SampleStats",
    "GridTraceRow",
    "FitResult",
    "MleOptions",
    "compute_stats",
    "solve_location_scale",
    "fit_grid_mom",
    "fit_grid_mle",
    "fit_mle",
    "fit_mom",
    "fit_mom_stats",
    "fit_mwm",
    "fit_mwm_stats",
    "fit",
]

_LOG_FLOOR = math.log(MASS_FLOOR)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Method(str, enum.Enum):
    MLE = "mle"
    MOM = "mom"
    MWM = "mwm"
    GRID_MOM = "grid-mom"
    GRID_MLE = "grid-mle"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"gridmom": "grid-mom", "gridmle": "grid-mle"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise InvalidParameterError(f"unknown method {value!r}; expected one of {names}") from None

    @property
    def is_grid(self) -> bool:
        return self in (Method.GRID_MOM, Method.GRID_MLE)


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced shape grid on ``[-a, a]`` with ``G`` points."""

    half_width_a: float = 5.0
    points_G: int = 401

    def __post_init__(self) -> None:
        if not (math.isfinite(self.half_width_a) and self.half_width_a > 0):
            raise InvalidParameterError("grid half-width must be positive and finite")
        if int(self.points_G) != self.points_G or self.points_G < 2:
            raise InvalidParameterError("grid needs at least 2 points")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width_a / (self.points_G - 1)

    def points(self) -> np.ndarray:
        # integer numerators keep the grid exactly symmetric with exact endpoints
        g = self.points_G - 1
        k = np.arange(self.points_G)
        return self.half_width_a * ((2 * k - g) / g)


@dataclass(frozen=True)
class SampleStats:
    """Sample summaries used by the moment-based estimators.

    ``var_s2`` uses divisor ``n``.
    """

    n: int
    mean_xbar: float
    var_s2: float
    raw2: float
    raw3: float
    mean_phi: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.var_s2)


class GridTraceRow(NamedTuple):
    alpha_g: float
    xi_hat: float
    omega_hat: float
    loglik: float
    status: str


@dataclass
class FitResult:
    method: Method
    estimate: SnParams
    loglik: float
    converged: bool
    grid_trace: list[GridTraceRow] | None = None
    grid: GridSpec | None = None
    residual_norm: float | None = None
    n_evaluations: int | None = None
    message: str = ""

    def as_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "estimate": {
                "xi": self.estimate.xi,
                "omega": self.estimate.omega,
                "alpha": self.estimate.alpha,
            },
            "loglik": self.loglik,
            "converged": bool(self.converged),
        }
        if self.grid is not None:
            out["grid"] = {"half_width_a": self.grid.half_width_a, "points_G": self.grid.points_G}
        if self.residual_norm is not None:
            out["residual_norm"] = self.residual_norm
        return out


@dataclass(frozen=True)
class MleOptions:
    """Options for :func:`fit_mle`.

    With ``multistart_count = k > 1`` the data-driven start is kept and
    ``k - 1`` further starts are drawn uniformly from
    ``[m-1, m+1] x [max(s-1, 1), max(s+1, 2)] x [-5, 5]``.
    """

    multistart_count: int = 1
    seed: int = 0
    xatol: float = 1e-8
    fatol: float = 1e-8
    max_evaluations: int = 2000

    def __post_init__(self) -> None:
        if self.multistart_count < 1:
            raise InvalidParameterError("multistart_count must be >= 1")


# ---------------------------------------------------------------------------
# shared helpers


def compute_stats(data: ArrayLike) -> SampleStats:
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise InvalidParameterError("at least two observations are required")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("observations must be finite")
    mean = float(np.mean(x))
    return SampleStats(
        n=int(x.size),
        mean_xbar=mean,
        var_s2=float(np.mean((x - mean) ** 2)),
        raw2=float(np.mean(x * x)),
        raw3=float(np.mean(x**3)),
        mean_phi=float(np.mean(special.ndtr(x))),
    )


def _prepare(data: ArrayLike, window: TruncationWindow, min_n: int = 2):
    x = np.asarray(data, dtype=float).ravel()
    if x.size < min_n:
        raise InvalidParameterError(f"at least {min_n} observations are required")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("observations must be finite")
    if not np.all(window.contains(x)):
        raise DataOutsideWindowError("observation outside truncation window")
    stats = compute_stats(x)
    if not stats.var_s2 > 0:
        raise EstimationFailedError("sample variance is zero; the data are degenerate")
    return x, stats


def _standardize(x: np.ndarray, stats: SampleStats, window: TruncationWindow):
    s = stats.sd
    u = (x - stats.mean_xbar) / s
    wu = TruncationWindow((window.lower - stats.mean_xbar) / s, (window.upper - stats.mean_xbar) / s)
    return u, wu


def sn_moment_start(mean: float, var: float, alpha: np.ndarray | float):
    """Location/scale matching an untruncated SN's mean and variance at ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    delta = alpha / np.sqrt(1.0 + alpha * alpha)
    omega = np.sqrt(var / (1.0 - 2.0 * delta * delta / math.pi))
    xi = mean - omega * delta * _SQRT_2_OVER_PI
    return xi, omega


def skewness_start(stats: SampleStats, max_delta: float = 0.995) -> tuple[float, float, float]:
    """Untruncated SN moment inversion from mean, variance and skewness."""
    m3 = stats.raw3 - 3 * stats.mean_xbar * stats.raw2 + 2 * stats.mean_xbar**3
    gamma = m3 / stats.var_s2**1.5
    r = (2.0 * abs(gamma) / (4.0 - math.pi)) ** (1.0 / 3.0)
    delta = math.copysign(math.sqrt(0.5 * math.pi * r * r / (1.0 + r * r)), gamma)
    delta = max(-max_delta, min(max_delta, delta))
    alpha = delta / math.sqrt(1.0 - delta * delta)
    xi, omega = sn_moment_start(stats.mean_xbar, stats.var_s2, alpha)
    return float(xi), float(omega), alpha


def _select_grid_point(alphas: np.ndarray, ll: np.ndarray) -> int:
    """Argmax of ``ll``; ties go to the smallest |alpha|, then the smaller alpha."""
    best = np.max(ll)
    cand = np.flatnonzero(ll == best)
    return int(min(cand, key=lambda i: (abs(alphas[i]), alphas[i])))


def _loglik(x, window, xi, omega, alpha) -> float:
    return float(tsn_loglik_many(x, window, xi, omega, alpha)[0])


# ---------------------------------------------------------------------------
# location/scale solve at fixed shape

_TOL_FLOOR = 1e-11


def _std_tolerances(stats: SampleStats) -> tuple[float, float]:
    """Raw-unit moment tolerances expressed on the standardized scale."""
    s2 = stats.var_s2
    tol_mean = 1e-8 * (1.0 + abs(stats.mean_xbar)) / math.sqrt(s2)
    tol_var = 1e-8 * (1.0 + s2) / s2
    return max(tol_mean, _TOL_FLOOR), max(tol_var, _TOL_FLOOR)


def _location_scale_std(alphas: np.ndarray, wu: TruncationWindow, tol: tuple[float, float]):
    """Solve mean = 0, variance = 1 on the standardized scale for every shape.

    Unknowns are (xi, log omega); returns (xi, omega, status) arrays.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    xi0, om0 = sn_moment_start(0.0, 1.0, alphas)

    def residual(theta, rows):
        with np.errstate(over="ignore", invalid="ignore"):
            mb = moment_batch(theta[:, 0], np.exp(theta[:, 1]), alphas[rows], wu)
        r = np.column_stack([mb.mean, mb.var - 1.0])
        return r, mb.ok

    # a fixed standardized target makes the result independent of the data's
    # location and scale; acceptance still uses the raw-unit tolerances
    res = damped_newton(residual, np.column_stack([xi0, np.log(om0)]), tol=_TOL_FLOOR)
    status = res.status.copy()
    met = np.all(np.abs(res.residual) <= np.asarray(tol), axis=1)
    status[(status == NO_CONVERGE) & met] = OK
    status[(status == OK) & ~met] = NO_CONVERGE
    return res.x[:, 0], np.exp(res.x[:, 1]), status


def solve_location_scale(
    alpha_g: float, stats: SampleStats, window: TruncationWindow
) -> tuple[float, float, str]:
    """Location and scale whose TSN mean and variance equal the sample's.

    Returns ``(xi_hat, omega_hat, status)`` with status ``"ok"``,
    ``"no-converge"`` or ``"degenerate"``; failures never raise.
    """
    if not stats.var_s2 > 0:
        return math.nan, math.nan, DEGENERATE
    s = stats.sd
    wu = TruncationWindow((window.lower - stats.mean_xbar) / s, (window.upper - stats.mean_xbar) / s)
    xi_u, om_u, status = _location_scale_std(np.array([alpha_g]), wu, _std_tolerances(stats))
    return float(stats.mean_xbar + s * xi_u[0]), float(s * om_u[0]), str(status[0])


# ---------------------------------------------------------------------------
# grid estimators


def _finish_grid(method, x, window, stats, grid, alphas, xi_u, om_u, ll_u, status):
    s, xbar, n = stats.sd, stats.mean_xbar, stats.n
    status = np.array(status, dtype=object)
    usable = (status == OK) & np.isfinite(ll_u)
    status[(status == OK) & ~usable] = DEGENERATE
    ll = np.where(usable, ll_u - n * math.log(s), -np.inf)
    xi = xbar + s * xi_u
    om = s * om_u
    trace = [
        GridTraceRow(float(a), float(xv), float(ov), float(lv), str(st))
        for a, xv, ov, lv, st in zip(alphas, xi, om, ll, status)
    ]
    if not usable.any():
        msg = f"{method.value}: every grid point failed"
        width = window.upper - window.lower
        # skew-normal densities are log-concave, and a log-concave density on
        # an interval has variance at most that of the uniform
        if math.isfinite(width) and stats.var_s2 >= width * width / 12.0:
            msg += "; the sample variance exceeds that of any model on this window"
        raise EstimationFailedError(msg)
    idx = _select_grid_point(np.where(usable, alphas, np.inf), ll)
    est = SnParams(float(xi[idx]), float(om[idx]), float(alphas[idx]))
    return FitResult(
        method=method,
        estimate=est,
        loglik=_loglik(x, window, est.xi, est.omega, est.alpha),
        converged=True,
        grid_trace=trace,
        grid=grid,
        message=f"{int(usable.sum())}/{alphas.size} grid points usable",
    )


def fit_grid_mom(data: ArrayLike, window: TruncationWindow, grid: GridSpec = GridSpec()) -> FitResult:
    """GRID-MOM: moment-matched location/scale on a shape grid, likelihood selection.

    For every grid shape the TSN mean and variance are matched to the sample
    mean and (divisor-n) variance; the grid point with the largest
    log-likelihood is returned. Points whose solve fails are skipped and
    reported in ``grid_trace``.
    """
    x, stats = _prepare(data, window)
    u, wu = _standardize(x, stats, window)
    alphas = grid.points()
    xi_u, om_u, status = _location_scale_std(alphas, wu, _std_tolerances(stats))
    ll_u = np.full(alphas.size, -np.inf)
    ok = status == OK
    if ok.any():
        ll_u[ok] = tsn_loglik_many(u, wu, xi_u[ok], om_u[ok], alphas[ok])
    return _finish_grid(Method.GRID_MOM, x, window, stats, grid, alphas, xi_u, om_u, ll_u, status)


def _profile_objective(u: np.ndarray, wu: TruncationWindow, alpha: float):
    """Negative log-likelihood and gradient in (xi, log omega) at fixed shape."""
    n = u.size
    lo, hi = wu.lower, wu.upper

    def f(theta):
        xi, eta = theta
        om = math.exp(eta)
        z = (u - xi) / om
        a, b = (lo - xi) / om, (hi - xi) / om
        lm = float(std_window_log_mass(a, b, alpha))
        if not lm >= _LOG_FLOOR:
            return math.inf, np.zeros(2)
        t = alpha * z
        lcdf = special.log_ndtr(t)
        ll = n * (LOG_2 - LOG_SQRT_2PI - eta - lm) + np.sum(-0.5 * z * z + lcdf)
        # d/dz of the per-observation log density
        mills = np.exp(-0.5 * t * t - LOG_SQRT_2PI - lcdf)
        dz = -z + alpha * mills
        fa = _std_sn_pdf(a, alpha)
        fb = _std_sn_pdf(b, alpha)
        mass = math.exp(lm)
        dmass_dxi = (fa - fb) / om
        dmass_deta = (a * fa if math.isfinite(a) else 0.0) - (b * fb if math.isfinite(b) else 0.0)
        g_xi = np.sum(dz) * (-1.0 / om) - n * dmass_dxi / mass
        g_eta = -n + np.sum(dz * -z) - n * dmass_deta / mass
        return -ll, -np.array([g_xi, g_eta])

    return f


def _std_sn_pdf(z: float, alpha: float) -> float:
    if not math.isfinite(z):
        return 0.0
    return 2.0 * math.exp(-0.5 * z * z - LOG_SQRT_2PI) * float(special.ndtr(alpha * z))


def _profile_max(u, wu, alpha, start):
    f = _profile_objective(u, wu, alpha)
    v0, _ = f(start)
    if not math.isfinite(v0):
        return start, -math.inf, DEGENERATE
    res = optimize.minimize(f, start, jac=True, method="BFGS", options={"gtol": 1e-8, "maxiter": 200})
    theta = res.x
    val, grad = f(theta)
    if not math.isfinite(val):
        return start, -math.inf, DEGENERATE
    # BFGS often stops on a line-search precision warning at the optimum
    scale = max(1.0, abs(val))
    stationary = np.max(np.abs(grad)) <= 1e-6 * scale
    return theta, -val, OK if (res.success or stationary) else NO_CONVERGE


def fit_grid_mle(data: ArrayLike, window: TruncationWindow, grid: GridSpec = GridSpec()) -> FitResult:
    """GRID-MLE: profile-likelihood location/scale on a shape grid.

    Each grid point maximizes the log-likelihood over (xi, log omega) with
    BFGS and an analytic gradient, started from the untruncated moment
    solution at that shape.
    """
    x, stats = _prepare(data, window)
    u, wu = _standardize(x, stats, window)
    alphas = grid.points()
    xi0, om0 = sn_moment_start(0.0, 1.0, alphas)
    xi_u = np.empty(alphas.size)
    om_u = np.empty(alphas.size)
    ll_u = np.empty(alphas.size)
    status = np.empty(alphas.size, dtype=object)
    for g, al in enumerate(alphas):
        theta, ll, st = _profile_max(u, wu, float(al), np.array([xi0[g], math.log(om0[g])]))
        xi_u[g], om_u[g], ll_u[g], status[g] = theta[0], math.exp(theta[1]), ll, st
    return _finish_grid(Method.GRID_MLE, x, window, stats, grid, alphas, xi_u, om_u, ll_u, status)


# ---------------------------------------------------------------------------
# MLE


def _negloglik_std(u: np.ndarray, wu: TruncationWindow):
    n = u.size

    def f(theta):
        xi, eta, al = theta
        if not (math.isfinite(xi) and math.isfinite(al) and abs(eta) < 700):
            return math.inf
        om = math.exp(eta)
        lm = float(std_window_log_mass((wu.lower - xi) / om, (wu.upper - xi) / om, al))
        if not lm >= _LOG_FLOOR:
            return math.inf
        z = (u - xi) / om
        ll = n * (LOG_2 - LOG_SQRT_2PI - eta - lm) + np.sum(-0.5 * z * z + special.log_ndtr(al * z))
        return -ll if math.isfinite(ll) else math.inf

    return f


def _mle_starts(stats: SampleStats, x: np.ndarray, opts: MleOptions) -> list[tuple[float, float, float]]:
    starts = [skewness_start(stats)]
    if opts.multistart_count > 1:
        rng = np.random.default_rng(opts.seed)
        m = stats.mean_xbar
        sd = float(np.std(x, ddof=1))
        lo = np.array([m - 1.0, max(sd - 1.0, 1.0), -5.0])
        hi = np.array([m + 1.0, max(sd + 1.0, 2.0), 5.0])
        for _ in range(opts.multistart_count - 1):
            starts.append(tuple(rng.uniform(lo, hi)))
    return starts


MLE_RESTARTS = 3


def _nelder_mead_restarts(f, t0: np.ndarray, opts: MleOptions):
    """Nelder-Mead, restarted from its own result with a fresh simplex.

    A collapsed simplex can stop short of the optimum, notably at the
    stationary point the skew-normal likelihood has at alpha = 0. Restarts
    continue until one improves the objective by less than ``fatol``.
    """
    nfev, best = 0, None
    for _ in range(1 + MLE_RESTARTS):
        start = t0 if best is None else best.x
        simplex = np.vstack([start, start + [0.25, 0, 0], start + [0, 0.2, 0], start + [0, 0, 0.5]])
        res = optimize.minimize(
            f,
            start,
            method="Nelder-Mead",
            options={
                "xatol": opts.xatol,
                "fatol": opts.fatol,
                "maxfev": max(opts.max_evaluations - nfev, 1),
                "initial_simplex": simplex,
            },
        )
        nfev += int(res.nfev)
        improved = best is None or res.fun < best.fun - opts.fatol
        if best is None or res.fun < best.fun:
            best = res
        if not improved or nfev >= opts.max_evaluations:
            break
    return best, nfev


def fit_mle(
    data: ArrayLike, window: TruncationWindow, opts: MleOptions = MleOptions()
) -> FitResult:
    """Maximum likelihood by Nelder-Mead over (xi, log omega, alpha).

    The default single start is the untruncated skew-normal moment solution
    (shape from the sample skewness). Each start runs Nelder-Mead with up to
    ``MLE_RESTARTS`` restarts. With several starts the best log-likelihood
    wins.
    """
    x, stats = _prepare(data, window, min_n=3)
    u, wu = _standardize(x, stats, window)
    s, xbar, n = stats.sd, stats.mean_xbar, stats.n
    f = _negloglik_std(u, wu)
    best = None
    total_evals = 0
    for xi0, om0, al0 in _mle_starts(stats, x, opts):
        t0 = np.array([(xi0 - xbar) / s, math.log(om0 / s), al0])
        if not math.isfinite(f(t0)):
            continue
        res, nfev = _nelder_mead_restarts(f, t0, opts)
        total_evals += nfev
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise EstimationFailedError("mle: no start point has a finite likelihood")
    xi_u, eta, al = best.x
    est = SnParams(float(xbar + s * xi_u), float(s * math.exp(eta)), float(al))
    return FitResult(
        method=Method.MLE,
        estimate=est,
        loglik=_loglik(x, window, est.xi, est.omega, est.alpha),
        converged=bool(best.success),
        n_evaluations=total_evals,
        message=str(best.message),
    )


# ---------------------------------------------------------------------------
# MOM and MWM


def _safe_params(xi: float, omega: float, alpha: float) -> SnParams | None:
    try:
        return SnParams(xi, omega, alpha)
    except InvalidParameterError:
        return None


def _raw_moment_map(xbar: float, sd: float) -> np.ndarray:
    """Matrix taking standardized-moment errors to raw-moment errors."""
    return np.array([
        [sd, 0.0, 0.0],
        [2.0 * xbar * sd, sd**2, 0.0],
        [3.0 * xbar**2 * sd, 3.0 * xbar * sd**2, sd**3],
    ])


MOM_TOLERANCE = 1e-7
MOM_POLISH = 1e-5


# extra shape starts tried when the skewness start does not reach a root
FALLBACK_ALPHA_STARTS = (-4.0, -1.0, 1.0, 4.0)


def _moment_starts(stats: SampleStats) -> list[np.ndarray]:
    s, xbar = stats.sd, stats.mean_xbar
    if stats.n >= 3:
        xi0, om0, al0 = skewness_start(stats)
        starts = [np.array([(xi0 - xbar) / s, math.log(om0 / s), al0])]
    else:
        starts = [np.zeros(3)]
    for al in FALLBACK_ALPHA_STARTS:
        xi_u, om_u = sn_moment_start(0.0, 1.0, al)
        starts.append(np.array([float(xi_u), math.log(float(om_u)), al]))
    return starts


def _mom_rank(res, tol) -> tuple[int, float]:
    """Sort key for Newton outcomes: tolerance met first, then residual size."""
    r = res.residual[0]
    met = res.status[0] != DEGENERATE and bool(np.all(np.abs(r) <= tol))
    norm = float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else math.inf
    return (0 if met else 1, norm)


def fit_mom_stats(stats: SampleStats, window: TruncationWindow, max_iter: int = 100) -> FitResult:
    """Method of moments from summary statistics; ``loglik`` is NaN.

    The first three raw moments are matched by damped Newton with a
    finite-difference Jacobian on the standardized scale, where the
    targets are 0, 1 and the sample skewness. Newton starts from the
    untruncated skewness inversion and, failing that, from the shapes in
    ``FALLBACK_ALPHA_STARTS``. Residuals are measured on the
    raw moments; ``converged`` means their Euclidean norm is at most 1e-7
    (relaxed to 1e-9 relative when a raw moment exceeds 100 in magnitude).
    """
    if not stats.var_s2 > 0:
        raise EstimationFailedError("sample variance is zero; the data are degenerate")
    s, xbar = stats.sd, stats.mean_xbar
    wu = TruncationWindow((window.lower - xbar) / s, (window.upper - xbar) / s)
    m3 = stats.raw3 - 3 * xbar * stats.raw2 + 2 * xbar**3
    targets = np.array([0.0, 1.0, m3 / s**3])
    to_raw = _raw_moment_map(xbar, s)
    starts = _moment_starts(stats)

    def residual(theta, rows):
        with np.errstate(over="ignore", invalid="ignore"):
            om = np.exp(theta[:, 1])
        mb = moment_batch(theta[:, 0], om, theta[:, 2], wu, raw_powers=(1, 2, 3))
        r = (np.column_stack([mb.raw[1], mb.raw[2], mb.raw[3]]) - targets) @ to_raw.T
        return r, mb.ok & np.all(np.isfinite(r), axis=1)

    raw = np.array([xbar, stats.raw2, stats.raw3])
    tol = np.maximum(MOM_TOLERANCE / math.sqrt(3.0), 1e-9 * np.abs(raw))
    # iterate well past the acceptance tolerance: near alpha = 0 the shape is
    # identified only at second order, so a 1e-7 residual leaves it loose
    res = None
    for t0 in starts:
        out = damped_newton(residual, t0[None, :], tol=tol * MOM_POLISH, max_iter=max_iter)
        if res is None or _mom_rank(out, tol) < _mom_rank(res, tol):
            res = out
        if _mom_rank(res, tol)[0] == 0:
            break
    xi_u, eta, al = res.x[0]
    est = _safe_params(float(xbar + s * xi_u), float(s * math.exp(min(eta, 700.0))), float(al))
    if est is None:
        raise EstimationFailedError("mom: iterate left the parameter space")
    met = res.status[0] != DEGENERATE and bool(np.all(np.abs(res.residual[0]) <= tol))
    return FitResult(
        method=Method.MOM,
        estimate=est,
        loglik=math.nan,
        converged=met,
        residual_norm=float(np.linalg.norm(res.residual[0])),
        n_evaluations=int(res.iterations[0]),
        message="ok" if met else str(res.status[0]),
    )


def fit_mom(data: ArrayLike, window: TruncationWindow, max_iter: int = 100) -> FitResult:
    """Method of moments: match the first three raw moments of the data.

    See :func:`fit_mom_stats` for the solver and convergence rule.
    """
    x, stats = _prepare(data, window, min_n=3)
    res = fit_mom_stats(stats, window, max_iter)
    res.loglik = _loglik(x, window, res.estimate.xi, res.estimate.omega, res.estimate.alpha)
    return res


MWM_ROOT_TOLERANCE = 1e-8
_MWM_PENALTY = 1e3


def _mwm_objective(window: TruncationWindow, stats: SampleStats, phi_target: float, phi_scale: float):
    s, xbar = stats.sd, stats.mean_xbar

    def residuals(theta):
        p0, p1, al = theta
        if not (math.isfinite(p0) and math.isfinite(al) and abs(p1) < 700):
            return None
        mb = moment_batch(xbar + s * p0, s * math.exp(p1), al, window, phi=True)
        if not mb.ok[0]:
            return None
        return np.array([
            (mb.mean[0] - xbar) / s,
            mb.var[0] / stats.var_s2 - 1.0,
            (mb.phi[0] - phi_target) / phi_scale,
        ])

    def f(theta):
        r = residuals(theta)
        return math.inf if r is None else float(r @ r)

    return f, residuals


def fit_mwm_stats(
    stats: SampleStats,
    window: TruncationWindow,
    phi_scale: float = 1.0,
    max_evaluations: int = 2000,
    tol: float = 1e-15,
) -> FitResult:
    """Method of weighted moments from summary statistics; ``loglik`` is NaN.

    Minimizes the sum of squares of ``(mean - xbar) / s``,
    ``var / s2 - 1`` and ``(E[Phi(X)] - mean_phi) / phi_scale`` over
    ``(xi, log omega, alpha)`` by trust-region least squares with a
    finite-difference Jacobian (no analytic derivatives). The search starts
    from the untruncated skewness inversion; if that leaves a residual norm
    above 1e-8, starts at shapes -4, -1, 1 and 4 are tried as well and the
    smallest residual wins. ``max_evaluations`` is shared by all starts.
    """
    if not stats.var_s2 > 0:
        raise EstimationFailedError("sample variance is zero; the data are degenerate")
    s, xbar = stats.sd, stats.mean_xbar
    f, residuals = _mwm_objective(window, stats, stats.mean_phi, phi_scale)

    def r(theta):
        v = residuals(theta)
        return np.full(3, _MWM_PENALTY) if v is None else v

    starts = [t for t in _moment_starts(stats) if math.isfinite(f(t))]
    if not starts:
        raise EstimationFailedError("mwm: every start point has degenerate truncation mass")
    per_start = max(max_evaluations // len(starts), 10)
    best, nfev = None, 0
    for t0 in starts:
        if best is not None and math.sqrt(2.0 * best.cost) <= MWM_ROOT_TOLERANCE:
            break
        budget = min(per_start, max_evaluations - nfev)
        if budget < 4:
            break
        out = optimize.least_squares(
            r, t0, method="trf", xtol=tol, ftol=tol, gtol=tol, max_nfev=budget, diff_step=1e-7
        )
        nfev += int(out.nfev)
        if best is None or out.cost < best.cost:
            best = out
    p0, p1, al = best.x
    est = _safe_params(float(xbar + s * p0), float(s * math.exp(min(p1, 700.0))), float(al))
    if est is None:
        raise EstimationFailedError("mwm: iterate left the parameter space")
    fun = f(best.x)
    return FitResult(
        method=Method.MWM,
        estimate=est,
        loglik=math.nan,
        converged=bool(best.status > 0 and math.isfinite(fun)),
        residual_norm=math.sqrt(fun) if math.isfinite(fun) else math.inf,
        n_evaluations=nfev,
        message=str(best.message),
    )


def fit_mwm(
    data: ArrayLike,
    window: TruncationWindow,
    max_evaluations: int = 2000,
) -> FitResult:
    """Method of weighted moments: match mean, variance and E[Phi(X)].

    Phi is applied to the raw observations and the Phi residual is scaled by
    the sample standard deviation of ``Phi(x_i)``. See :func:`fit_mwm_stats`.
    """
    x, stats = _prepare(data, window)
    phi_scale = max(float(np.std(special.ndtr(x))), 1e-8)
    res = fit_mwm_stats(stats, window, phi_scale, max_evaluations)
    res.loglik = _loglik(x, window, res.estimate.xi, res.estimate.omega, res.estimate.alpha)
    return res


# ---------------------------------------------------------------------------
# dispatch


def fit(
    method: Method | str,
    data: ArrayLike,
    window: TruncationWindow,
    grid: GridSpec | None = None,
    mle_options: MleOptions | None = None,
) -> FitResult:
    """Run the estimator named by ``method`` with default settings."""
    method = Method.parse(method)
    if method is Method.GRID_MOM:
        return fit_grid_mom(data, window, grid or GridSpec())
    if method is Method.GRID_MLE:
        return fit_grid_mle(data, window, grid or GridSpec())
    if method is Method.MLE:
        return fit_mle(data, window, mle_options or MleOptions())
    if method is Method.MOM:
        return fit_mom(data, window)
    return fit_mwm(data, window)
