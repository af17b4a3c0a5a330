"""Moments and Phi-weighted moments of the truncated skew-normal.

Everything is computed by adaptive Gauss-Kronrod (7/15) quadrature in the
standardized variable ``z = (x - xi) / omega``. The engine is vectorized over
independent integration problems ("rows"): each row carries its own panel
list and is refined until its error estimate meets the tolerance, so a whole
grid of models can be integrated in one call.

Infinite endpoints are handled by a variable substitution onto ``[0, 1]``;
finite standardized endpoints are clipped to ``[-Z_CLIP, Z_CLIP]``, outside
of which the skew-normal density underflows to exactly zero in double
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import DegenerateWindowError, InvalidParameterError, NumericalDegeneracyError, QuadratureError
from .sn_core import MASS_FLOOR, LOG_SQRT_2PI, TruncationWindow, TsnModel

__all__ = [
    "RTOL",
    "MAX_SUBDIVISIONS",
    "MomentRequest",
    "integrate",
    "tsn_raw_moment",
    "tsn_mean",
    "tsn_variance",
    "tsn_phi_weighted_moment",
    "tsn_weighted_moment",
    "MomentBatch",
    "moment_batch",
]

RTOL = 1e-10
MAX_SUBDIVISIONS = 200
Z_CLIP = 40.0

# Kronrod 15-point nodes/weights with the embedded 7-point Gauss rule.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.0,
    0.129484966168869693270611432679082,
    0.0,
    0.279705391489276667901467771423780,
    0.0,
    0.381830050505118944950369775488975,
    0.0,
    0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
W_GAUSS = np.concatenate([_WG[:-1], _WG[::-1]])

_FINITE, _UPPER_INF, _LOWER_INF, _BOTH_INF = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# substitution onto s in [0, 1]


class _Maps:
    """Maps s -> z with Jacobian for per-row windows ``[a, b]``.

    All rows must share the same endpoint pattern (which ends are infinite),
    as they do when they come from one truncation window.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, clip: float | None):
        a = np.asarray(a, dtype=float).copy()
        b = np.asarray(b, dtype=float).copy()
        fa, fb = np.isfinite(a), np.isfinite(b)
        if fa.any() and not fa.all() or fb.any() and not fb.all():
            raise InvalidParameterError("rows mix finite and infinite endpoints")
        fa, fb = bool(fa.all()), bool(fb.all())
        if clip is not None:
            if fa:
                a = np.clip(a, -clip, clip)
            if fb:
                b = np.clip(b, -clip, clip)
        self.a, self.b = a, b
        if fa and fb:
            self.kind = _FINITE
            lam = np.ones(a.shape)
        elif fa:
            self.kind = _UPPER_INF
            # tail scale: puts the standardized bulk (near 0) around s = 1/2
            lam = np.where(a < 0, np.maximum(1.0, -a), 1.0 / np.maximum(1.0, a))
        elif fb:
            self.kind = _LOWER_INF
            lam = np.where(b > 0, np.maximum(1.0, b), 1.0 / np.maximum(1.0, -b))
        else:
            self.kind = _BOTH_INF
            lam = np.ones(a.shape)
        self.lam = lam

    def __call__(self, s: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        kind = self.kind
        if kind == _FINITE:
            a = self.a[rows][:, None]
            w = self.b[rows][:, None] - a
            return a + w * s, np.broadcast_to(w, s.shape)
        lam = self.lam[rows][:, None]
        if kind == _UPPER_INF:
            t = 1.0 / (1.0 - s)
            return self.a[rows][:, None] + lam * (s * t), lam * t * t
        if kind == _LOWER_INF:
            t = 1.0 / s
            return self.b[rows][:, None] - lam * ((1.0 - s) * t), lam * t * t
        u = 2.0 * s - 1.0
        t = 1.0 / (1.0 - u * u)
        return lam * u * t, 2.0 * lam * (1.0 + u * u) * t * t

    def s_of_zero(self) -> np.ndarray:
        """Position of z = 0 in s-space (NaN when 0 is near or past an end)."""
        a, b, lam, kind = self.a, self.b, self.lam, self.kind
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == _FINITE:
                s0 = -a / (b - a)
            elif kind == _UPPER_INF:
                t = -a / lam
                s0 = t / (1.0 + t)
            elif kind == _LOWER_INF:
                s0 = 1.0 / (1.0 + b / lam)
            else:
                s0 = np.full(a.shape, 0.5)
        return np.where((s0 > 0.02) & (s0 < 0.98), s0, np.nan)


# ---------------------------------------------------------------------------
# vectorized adaptive Gauss-Kronrod


def _gk_panels(func, maps, rows, lo, hi):
    """Apply the 7/15 rule on one panel per row.

    Returns (integral, error, abs_integral), each of shape (rows, ncomp).
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = mid[:, None] + half[:, None] * NODES[None, :]
    z, jac = maps(s, rows)
    vals = func(z, rows) * jac[None, :, :]  # (ncomp, rows, 15)
    vals = np.where(np.isfinite(vals), vals, 0.0)
    res_k = vals @ W_KRONROD * half[None, :]
    res_g = vals @ W_GAUSS * half[None, :]
    res_abs = np.abs(vals) @ W_KRONROD * half[None, :]
    mean = res_k / np.where(half == 0, 1.0, 2.0 * half)[None, :]
    res_asc = np.abs(vals - mean[..., None]) @ W_KRONROD * half[None, :]
    diff = np.abs(res_k - res_g)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(
            res_asc > 0, res_asc * np.minimum(1.0, (200.0 * diff / res_asc) ** 1.5), diff
        )
    eps_floor = 50.0 * np.finfo(float).eps * res_abs
    err = np.maximum(err, eps_floor)
    return res_k.T, err.T, res_abs.T


def _adaptive(func, maps: _Maps, breaks: np.ndarray, rtol: float, max_panels: int):
    """Adaptive integration of ``func`` over s in [0, 1] for every row.

    ``breaks`` is an (nrows, k+1) array of initial panel boundaries. Each
    pass bisects, in every unconverged row, the panel whose error is largest
    relative to that row's budget.
    Returns (integral, error, converged) with integral of shape (nrows, ncomp).
    """
    nrows, k1 = breaks.shape
    k0 = k1 - 1
    cap = max(max_panels, k0)
    width = min(cap, k0 + 16)
    lo = np.zeros((nrows, width))
    hi = np.zeros((nrows, width))
    lo[:, :k0] = breaks[:, :-1]
    hi[:, :k0] = breaks[:, 1:]

    rows0 = np.repeat(np.arange(nrows), k0)
    r0, e0, a0 = _gk_panels(func, maps, rows0, lo[:, :k0].ravel(), hi[:, :k0].ravel())
    ncomp = r0.shape[1]
    res = np.zeros((nrows, width, ncomp))
    err = np.zeros((nrows, width, ncomp))
    res[:, :k0] = r0.reshape(nrows, k0, ncomp)
    err[:, :k0] = e0.reshape(nrows, k0, ncomp)
    tot_res = res.sum(axis=1)
    tot_err = err.sum(axis=1)
    tot_abs = a0.reshape(nrows, k0, ncomp).sum(axis=1)
    count = np.full(nrows, k0)
    failed = np.zeros(nrows, dtype=bool)
    active = np.ones(nrows, dtype=bool)

    while True:
        budget = rtol * np.maximum(tot_abs, 1e-300)
        active &= ~np.all(tot_err <= budget, axis=1) & ~failed
        if not active.any():
            break
        rows = np.flatnonzero(active)
        full = count[rows] >= cap
        if full.any():
            failed[rows[full]] = True
            active[rows[full]] = False
            rows = rows[~full]
            if rows.size == 0:
                break
        used = int(count[rows].max())
        if used >= width:
            grow = min(cap, 2 * width) - width
            lo = np.pad(lo, ((0, 0), (0, grow)))
            hi = np.pad(hi, ((0, 0), (0, grow)))
            res = np.pad(res, ((0, 0), (0, grow), (0, 0)))
            err = np.pad(err, ((0, 0), (0, grow), (0, 0)))
            width += grow
        score = np.max(err[rows, :used] / budget[rows][:, None, :], axis=2)
        worst = np.argmax(score, axis=1)
        plo = lo[rows, worst]
        phi = hi[rows, worst]
        pmid = 0.5 * (plo + phi)
        both = np.concatenate([rows, rows])
        r, e, ab = _gk_panels(
            func, maps, both, np.concatenate([plo, pmid]), np.concatenate([pmid, phi])
        )
        k = rows.size
        new = count[rows]
        tot_res[rows] += r[:k] + r[k:] - res[rows, worst]
        tot_err[rows] += e[:k] + e[k:] - err[rows, worst]
        # abs estimate: replace the parent's share by the children's
        tot_abs[rows] = np.maximum(tot_abs[rows], np.abs(tot_res[rows]))
        hi[rows, worst] = pmid
        res[rows, worst], err[rows, worst] = r[:k], e[:k]
        lo[rows, new], hi[rows, new] = pmid, phi
        res[rows, new], err[rows, new] = r[k:], e[k:]
        count[rows] += 1

    converged = ~failed & ~active
    return tot_res, tot_err, converged


def _initial_breaks(maps: _Maps, per_side: int = 4) -> np.ndarray:
    """Initial partition with a breakpoint at z = 0 where it is interior."""
    n = maps.a.shape[0]
    s0 = maps.s_of_zero()
    k = 2 * per_side
    t = np.linspace(0.0, 1.0, per_side + 1)
    breaks = np.empty((n, k + 1))
    has0 = np.isfinite(s0)
    s0f = np.where(has0, s0, 0.5)
    left = s0f[:, None] * t[None, :]
    right = s0f[:, None] + (1.0 - s0f[:, None]) * t[None, 1:]
    split = np.concatenate([left, right], axis=1)
    even = np.broadcast_to(np.linspace(0.0, 1.0, k + 1), (n, k + 1))
    breaks[:] = np.where(has0[:, None], split, even)
    return breaks


# ---------------------------------------------------------------------------
# generic integration over a window


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    window: TruncationWindow,
    rtol: float = RTOL,
    max_subdivisions: int = MAX_SUBDIVISIONS,
    center: float = 0.0,
    scale: float = 1.0,
) -> float:
    """Integrate a vectorized function ``f`` over ``window``.

    Infinite endpoints are mapped onto a bounded interval; ``center`` and
    ``scale`` position that map (``x = center + scale * z``) so the bulk of
    the integrand sits mid-interval.

    Raises
    ------
    QuadratureError
        If the tolerance is not met within ``max_subdivisions`` panels.
    """
    if scale <= 0:
        raise InvalidParameterError("scale must be positive")
    a = np.array([(window.lower - center) / scale])
    b = np.array([(window.upper - center) / scale])
    maps = _Maps(a, b, clip=None)

    def func(z, rows):
        return (np.asarray(f(center + scale * z), dtype=float) * scale)[None, :, :]

    res, err, ok = _adaptive(func, maps, _initial_breaks(maps), rtol, max_subdivisions)
    if not ok[0]:
        raise QuadratureError(
            f"quadrature did not reach rtol={rtol} within {max_subdivisions} panels "
            f"(error estimate {err[0, 0]:.3g})"
        )
    return float(res[0, 0])


# ---------------------------------------------------------------------------
# batched standardized moments


@dataclass
class MomentBatch:
    """Moments for a batch of TSN models (arrays aligned with the inputs).

    ``ok`` is False where the window mass is below the floor, the quadrature
    did not converge, or the variance lost all precision; the other fields
    are NaN there.
    """

    mean: np.ndarray
    var: np.ndarray
    raw: dict[int, np.ndarray]
    phi: np.ndarray | None
    ok: np.ndarray
    degenerate: np.ndarray
    converged: np.ndarray


def _std_density(z, alpha):
    return 2.0 * np.exp(-0.5 * z * z - LOG_SQRT_2PI) * special.ndtr(alpha * z)


def moment_batch(
    xi: np.ndarray,
    omega: np.ndarray,
    alpha: np.ndarray,
    window: TruncationWindow,
    raw_powers: Sequence[int] = (),
    phi: bool = False,
    rtol: float = RTOL,
    max_subdivisions: int = MAX_SUBDIVISIONS,
) -> MomentBatch:
    """Mean, variance, optional raw moments and E[Phi(X)] for many models.

    Parameters
    ----------
    xi, omega, alpha : array_like
        Parameter arrays, broadcast against each other.
    window : TruncationWindow
        Common truncation window.
    raw_powers : sequence of int
        Orders ``k`` (1..3) of ``E[X^k]`` to return in ``raw``.
    phi : bool
        Also return ``E[Phi(X)]``.
    """
    xi, omega, alpha = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (xi, omega, alpha))
    )
    shape = xi.shape
    xi, omega, alpha = xi.ravel(), omega.ravel(), alpha.ravel()
    n = xi.size
    for k in raw_powers:
        if not 1 <= k <= 3:
            raise InvalidParameterError(f"raw moment order must be 1..3, got {k}")

    valid = np.isfinite(xi) & np.isfinite(alpha) & np.isfinite(omega) & (omega > 0)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        a = (window.lower - xi) / omega
        b = (window.upper - xi) / omega
    # a tiny omega can overflow a finite endpoint; such rows are degenerate
    valid &= (np.isfinite(a) == math.isfinite(window.lower)) & (np.isfinite(b) == math.isfinite(window.upper))
    # placeholders for invalid rows keep the window's finite/infinite pattern
    a = np.where(valid, a, 0.0 if math.isfinite(window.lower) else window.lower)
    b = np.where(valid, b, 1.0 if math.isfinite(window.upper) else window.upper)
    maps = _Maps(a, b, clip=Z_CLIP)
    need_phi = phi

    def func(z, rows):
        w = _std_density(z, alpha[rows][:, None])
        comps = [w, w * z, w * z * z]
        if 3 in raw_powers:
            comps.append(w * z * z * z)
        if need_phi:
            comps.append(w * special.ndtr(xi[rows][:, None] + omega[rows][:, None] * z))
        return np.stack(comps)

    res, _, conv = _adaptive(func, maps, _initial_breaks(maps), rtol, max_subdivisions)
    mass = res[:, 0]
    degenerate = ~valid | ~(mass >= MASS_FLOOR)
    ok = conv & ~degenerate
    with np.errstate(invalid="ignore", divide="ignore"):
        ez = res[:, 1] / mass
        ez2 = res[:, 2] / mass
        vz = ez2 - ez * ez

    # cancellation control: recompute the central second moment directly
    far = ok & (np.abs(ez) > 10.0 * np.sqrt(np.maximum(vz, 0.0)))
    if far.any():
        rows_far = np.flatnonzero(far)
        centre = ez[rows_far]
        sub = _Maps(a[rows_far], b[rows_far], clip=Z_CLIP)

        def func_c(z, rows):
            w = _std_density(z, alpha[rows_far][rows][:, None])
            d = z - centre[rows][:, None]
            return np.stack([w, w * d * d])

        rc, _, convc = _adaptive(func_c, sub, _initial_breaks(sub), rtol, max_subdivisions)
        vz[rows_far] = rc[:, 1] / rc[:, 0]
        ok[rows_far] &= convc
        conv[rows_far] &= convc

    ok &= vz > 0
    mean = np.where(ok, xi + omega * ez, np.nan)
    var = np.where(ok, omega * omega * vz, np.nan)
    raw: dict[int, np.ndarray] = {}
    col = 3
    for k in sorted(set(raw_powers)):
        if k == 1:
            raw[1] = mean.copy()
        elif k == 2:
            raw[2] = var + mean * mean
        else:
            ez3 = res[:, 3] / mass
            raw[3] = np.where(
                ok,
                xi**3 + 3 * xi**2 * omega * ez + 3 * xi * omega**2 * ez2 + omega**3 * ez3,
                np.nan,
            )
    if 3 in raw_powers:
        col += 1
    phi_out = np.where(ok, res[:, col] / mass, np.nan) if need_phi else None

    def rs(v):
        return None if v is None else v.reshape(shape)

    return MomentBatch(
        mean=rs(mean),
        var=rs(var),
        raw={k: rs(v) for k, v in raw.items()},
        phi=rs(phi_out),
        ok=rs(ok),
        degenerate=rs(degenerate),
        converged=rs(conv),
    )


# ---------------------------------------------------------------------------
# scalar front ends


@dataclass(frozen=True)
class MomentRequest:
    """A request for ``E[X^k Phi(X)^r | L <= X <= U]`` with k <= 3, r <= 1."""

    model: TsnModel
    power_k: int
    phi_weight_r: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.power_k <= 3:
            raise InvalidParameterError("power_k must be in 0..3")
        if self.phi_weight_r not in (0, 1):
            raise InvalidParameterError("phi_weight_r must be 0 or 1")


def _single(m: TsnModel, **kw) -> MomentBatch:
    p = m.params
    batch = moment_batch(p.xi, p.omega, p.alpha, m.window, **kw)
    if batch.degenerate[0]:
        raise DegenerateWindowError(f"window mass below floor for {p}")
    if not batch.converged[0]:
        raise QuadratureError(f"moment quadrature failed for {p} on {m.window}")
    if not batch.ok[0]:
        raise NumericalDegeneracyError(f"variance not positive for {p} on {m.window}")
    return batch


def tsn_raw_moment(m: TsnModel, k: int) -> float:
    """``E[X^k | L <= X <= U]`` for ``k`` in 1..3."""
    if not 1 <= k <= 3:
        raise InvalidParameterError(f"raw moment order must be 1..3, got {k}")
    return float(_single(m, raw_powers=(k,)).raw[k][0])


def tsn_mean(m: TsnModel) -> float:
    return float(_single(m).mean[0])


def tsn_variance(m: TsnModel) -> float:
    return float(_single(m).var[0])


def tsn_phi_weighted_moment(m: TsnModel) -> float:
    """``E[Phi(X) | L <= X <= U]`` with Phi applied to the raw observation."""
    return float(_single(m, phi=True).phi[0])


def tsn_weighted_moment(req: MomentRequest) -> float:
    """Weighted moment ``E[X^k Phi(X)^r]`` for the supported (k, r) pairs."""
    m, k, r = req.model, req.power_k, req.phi_weight_r
    if r == 0:
        return 1.0 if k == 0 else tsn_raw_moment(m, k)
    if k == 0:
        return tsn_phi_weighted_moment(m)
    raise InvalidParameterError("weighted moments with both k > 0 and r = 1 are not supported")
