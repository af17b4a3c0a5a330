"""Skew-normal and truncated skew-normal distribution functions.

The skew-normal density with location ``xi``, scale ``omega`` and shape
``alpha`` is::

    f(x) = (2 / omega) * phi(z) * Phi(alpha * z),    z = (x - xi) / omega

and its distribution function is ``Phi(z) - 2 T(z, alpha)`` with ``T`` the
Owen's T function. The truncated version restricts ``f`` to a known window
``[lower, upper]`` and renormalises by the probability mass inside it.

All functions accept scalars or numpy arrays for their first argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from .errors import (
    DataOutsideWindowError,
    DegenerateWindowError,
    InvalidParameterError,
)

__all__ = [
    "MASS_FLOOR",
    "SnParams",
    "TruncationWindow",
    "TsnModel",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_logcdf",
    "owen_t",
    "sn_pdf",
    "sn_logpdf",
    "sn_cdf",
    "sn_sf",
    "sn_quantile",
    "tsn_pdf",
    "tsn_cdf",
    "tsn_loglik",
    "tsn_loglik_many",
    "std_window_log_mass",
]

MASS_FLOOR = 1e-12
LOG_2 = math.log(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Quantile search range in standardized units.
QUANTILE_SPAN = 15.0


@dataclass(frozen=True)
class SnParams:
    """Skew-normal parameter triple (location, scale, shape)."""

    xi: float
    omega: float
    alpha: float

    def __post_init__(self) -> None:
        vals = (self.xi, self.omega, self.alpha)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"non-finite parameter in {vals}")
        if self.omega <= 0:
            raise InvalidParameterError(f"omega must be positive, got {self.omega}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.xi, self.omega, self.alpha)


@dataclass(frozen=True)
class TruncationWindow:
    """Known observation interval ``[lower, upper]``; endpoints may be infinite."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self) -> None:
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise InvalidParameterError("window endpoints must not be NaN")
        if lo == math.inf or hi == -math.inf:
            raise InvalidParameterError(f"empty window [{lo}, {hi}]")
        if not lo < hi:
            raise InvalidParameterError(f"window requires lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def is_unbounded(self) -> bool:
        return self.lower == -math.inf and self.upper == math.inf

    def contains(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lower) & (x <= self.upper)

    def affine(self, shift: float, scale: float) -> "TruncationWindow":
        """Window image under ``y = shift + scale * x`` for ``scale > 0``."""
        return TruncationWindow(shift + scale * self.lower, shift + scale * self.upper)


@dataclass(frozen=True)
class TsnModel:
    """A skew-normal law restricted to a truncation window.

    Construction fails with :class:`DegenerateWindowError` when the window
    holds less than ``MASS_FLOOR`` of the parent probability.
    """

    params: SnParams
    window: TruncationWindow

    def __post_init__(self) -> None:
        p, w = self.params, self.window
        a = (w.lower - p.xi) / p.omega
        b = (w.upper - p.xi) / p.omega
        log_mass = float(std_window_log_mass(a, b, p.alpha))
        if not log_mass >= math.log(MASS_FLOOR):
            raise DegenerateWindowError(
                f"window [{w.lower}, {w.upper}] holds mass {math.exp(log_mass):.3g} "
                f"under {p}, below floor {MASS_FLOOR}"
            )
        object.__setattr__(self, "log_mass", log_mass)

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)

    @property
    def std_window(self) -> tuple[float, float]:
        """Window endpoints in standardized units ``(x - xi) / omega``."""
        p, w = self.params, self.window
        return ((w.lower - p.xi) / p.omega, (w.upper - p.xi) / p.omega)


# ---------------------------------------------------------------------------
# standard normal and Owen's T


def std_normal_pdf(z: ArrayLike) -> np.ndarray | float:
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z - LOG_SQRT_2PI)
    return out if out.ndim else float(out)


def std_normal_cdf(z: ArrayLike) -> np.ndarray | float:
    out = special.ndtr(np.asarray(z, dtype=float))
    return out if np.ndim(out) else float(out)


def std_normal_logcdf(z: ArrayLike) -> np.ndarray | float:
    """log Phi(z), accurate deep into the lower tail."""
    out = special.log_ndtr(np.asarray(z, dtype=float))
    return out if np.ndim(out) else float(out)


def owen_t(h: ArrayLike, a: ArrayLike) -> np.ndarray | float:
    """Owen's T function ``(1/2pi) int_0^a exp(-h^2 (1+t^2)/2) / (1+t^2) dt``."""
    out = special.owens_t(np.asarray(h, dtype=float), np.asarray(a, dtype=float))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# standardized skew-normal helpers (xi = 0, omega = 1)


def _std_cdf(z, alpha):
    return special.ndtr(z) - 2.0 * special.owens_t(z, alpha)


def _std_sf(z, alpha):
    return special.ndtr(-z) + 2.0 * special.owens_t(z, alpha)


def _std_logpdf(z, alpha):
    return LOG_2 - 0.5 * z * z - LOG_SQRT_2PI + special.log_ndtr(alpha * z)


def std_window_log_mass(a: ArrayLike, b: ArrayLike, alpha: ArrayLike) -> np.ndarray:
    """log P(a <= Z <= b) for Z ~ SN(0, 1, alpha); broadcasts over inputs.

    The difference is taken between survival functions when the window sits
    in the upper half of the distribution, so that tail windows keep their
    relative precision.
    """
    a, b, alpha = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(b, float), np.asarray(alpha, float)
    )
    with np.errstate(invalid="ignore"):
        fa = _std_cdf(a, alpha)
        upper = fa > 0.5
        mass = np.where(
            upper, _std_sf(a, alpha) - _std_sf(b, alpha), _std_cdf(b, alpha) - fa
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.clip(mass, 0.0, 1.0))


# ---------------------------------------------------------------------------
# skew-normal


def sn_logpdf(x: ArrayLike, p: SnParams) -> np.ndarray | float:
    z = (np.asarray(x, dtype=float) - p.xi) / p.omega
    out = _std_logpdf(z, p.alpha) - math.log(p.omega)
    return out if np.ndim(out) else float(out)


def sn_pdf(x: ArrayLike, p: SnParams) -> np.ndarray | float:
    z = (np.asarray(x, dtype=float) - p.xi) / p.omega
    out = 2.0 / p.omega * np.exp(-0.5 * z * z - LOG_SQRT_2PI) * special.ndtr(p.alpha * z)
    return out if np.ndim(out) else float(out)


def sn_cdf(x: ArrayLike, p: SnParams) -> np.ndarray | float:
    z = (np.asarray(x, dtype=float) - p.xi) / p.omega
    cdf = _std_cdf(z, p.alpha)
    # 1 - sf rounds monotonically near 1, the direct difference does not
    out = np.clip(np.where(cdf > 0.5, 1.0 - _std_sf(z, p.alpha), cdf), 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def sn_sf(x: ArrayLike, p: SnParams) -> np.ndarray | float:
    """Survival function ``1 - sn_cdf``, computed without cancellation."""
    z = (np.asarray(x, dtype=float) - p.xi) / p.omega
    out = np.clip(_std_sf(z, p.alpha), 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def _std_invert(alpha, target, upper_tail, lo, hi, max_iter=200):
    """Solve ``F(z) = target`` (or ``S(z) = target``) for standardized SN.

    Safeguarded Newton: every iterate stays inside a shrinking bracket and
    bisection takes over whenever Newton would leave it. Vectorized over
    ``target``/``lo``/``hi``.
    """
    target, lo, hi = np.broadcast_arrays(
        np.asarray(target, float), np.asarray(lo, float), np.asarray(hi, float)
    )
    lo = lo.copy()
    hi = hi.copy()
    upper_tail = np.broadcast_to(upper_tail, target.shape)
    sign = np.where(upper_tail, -1.0, 1.0)  # makes g increasing in z

    def g(z):
        val = np.where(upper_tail, _std_sf(z, alpha), _std_cdf(z, alpha))
        return sign * (val - target)

    z = 0.5 * (lo + hi)
    active = np.ones(target.shape, dtype=bool)
    for _ in range(max_iter):
        gz = g(z)
        lo = np.where(active & (gz < 0), z, lo)
        hi = np.where(active & (gz > 0), z, hi)
        done = (np.abs(gz) <= 1e-15 * np.maximum(np.abs(target), 1e-300) + 1e-300) | (
            hi - lo <= 4e-16 * np.maximum(1.0, np.abs(z))
        )
        active &= ~done
        if not active.any():
            break
        dens = np.exp(_std_logpdf(z, alpha))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = z - gz / dens
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        z = np.where(active, np.where(bad, 0.5 * (lo + hi), step), z)
    return z


def sn_quantile(prob: ArrayLike, p: SnParams) -> np.ndarray | float:
    """Inverse of :func:`sn_cdf` for probabilities in ``(0, 1)``."""
    prob = np.asarray(prob, dtype=float)
    if np.any(~((prob > 0) & (prob < 1))):
        raise InvalidParameterError("quantile probabilities must lie in (0, 1)")
    upper = prob > 0.5
    target = np.where(upper, 1.0 - prob, prob)
    z = _std_invert(p.alpha, target, upper, -QUANTILE_SPAN, QUANTILE_SPAN)
    out = p.xi + p.omega * z
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# truncated skew-normal


def tsn_pdf(x: ArrayLike, m: TsnModel) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    inside = m.window.contains(x)
    out = np.where(inside, np.asarray(sn_pdf(x, m.params)) / m.mass, 0.0)
    return out if out.ndim else float(out)


def tsn_cdf(x: ArrayLike, m: TsnModel) -> np.ndarray | float:
    x = np.clip(np.asarray(x, dtype=float), m.window.lower, m.window.upper)
    a, _ = m.std_window
    z = (x - m.params.xi) / m.params.omega
    alpha = m.params.alpha
    # mass between the lower endpoint and x, same tail logic as the window mass
    with np.errstate(invalid="ignore"):
        fa = _std_cdf(a, alpha)
        if fa > 0.5:
            part = _std_sf(a, alpha) - _std_sf(z, alpha)
        else:
            part = _std_cdf(z, alpha) - fa
    out = np.clip(part / m.mass, 0.0, 1.0)
    return out if out.ndim else float(out)


def tsn_loglik(data: ArrayLike, m: TsnModel) -> float:
    """Truncated skew-normal log-likelihood of ``data``.

    Raises :class:`DataOutsideWindowError` if any observation is outside the
    window.
    """
    data = np.atleast_1d(np.asarray(data, dtype=float))
    if data.size < 1:
        raise InvalidParameterError("log-likelihood needs at least one observation")
    if not np.all(m.window.contains(data)):
        raise DataOutsideWindowError("observation outside truncation window")
    p = m.params
    z = (data - p.xi) / p.omega
    total = np.sum(_std_logpdf(z, p.alpha)) - data.size * math.log(p.omega)
    return float(total - data.size * m.log_mass)


def tsn_loglik_many(
    data: ArrayLike,
    window: TruncationWindow,
    xi: ArrayLike,
    omega: ArrayLike,
    alpha: ArrayLike,
    chunk: int = 2_000_000,
) -> np.ndarray:
    """Log-likelihood for many parameter triples at once.

    Entries whose window mass falls below ``MASS_FLOOR`` (or with invalid
    parameters) come back as ``-inf``. Data are assumed to lie in the window.
    """
    data = np.asarray(data, dtype=float).ravel()
    xi, omega, alpha = (np.atleast_1d(np.asarray(v, float)) for v in (xi, omega, alpha))
    xi, omega, alpha = np.broadcast_arrays(xi, omega, alpha)
    n = data.size
    out = np.full(xi.shape, -np.inf)
    ok = np.isfinite(xi) & np.isfinite(alpha) & np.isfinite(omega) & (omega > 0)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return out
    a = (window.lower - xi[idx]) / omega[idx]
    b = (window.upper - xi[idx]) / omega[idx]
    log_mass = std_window_log_mass(a, b, alpha[idx])
    rows = max(1, chunk // max(n, 1))
    sums = np.empty(idx.size)
    for s in range(0, idx.size, rows):
        sl = slice(s, s + rows)
        z = (data[None, :] - xi[idx][sl, None]) / omega[idx][sl, None]
        sums[sl] = np.sum(-0.5 * z * z + special.log_ndtr(alpha[idx][sl, None] * z), axis=1)
    ll = sums + n * (LOG_2 - LOG_SQRT_2PI) - n * np.log(omega[idx]) - n * log_mass
    good = np.isfinite(ll) & (log_mass >= math.log(MASS_FLOOR))
    out[idx[good]] = ll[good]
    return out
