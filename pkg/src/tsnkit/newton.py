"""Batched damped Newton iteration with a forward-difference Jacobian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["NewtonResult", "damped_newton", "OK", "NO_CONVERGE", "DEGENERATE"]

OK = "ok"
NO_CONVERGE = "no-converge"
DEGENERATE = "degenerate"

# residual(x, rows) -> (r, valid): x is (k, d) and rows (k,) gives the original
# problem index of each row; r is (k, d); valid is (k,)
ResidualFn = Callable[[np.ndarray, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    status: np.ndarray  # object array of OK / NO_CONVERGE / DEGENERATE
    iterations: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.status == OK


def damped_newton(
    residual: ResidualFn,
    x0: np.ndarray,
    tol: np.ndarray,
    max_iter: int = 100,
    fd_step: float = 1e-6,
    max_halvings: int = 30,
) -> NewtonResult:
    """Solve ``residual(x) = 0`` independently for every row of ``x0``.

    ``residual`` is called with a stack of candidate rows and the index of
    the problem each row belongs to, so per-problem constants can be looked
    up.

    The Jacobian is a forward difference with step ``fd_step * max(1, |x|)``.
    A full Newton step is halved until the scaled residual norm
    ``||r / tol||`` decreases; a row that cannot decrease, or whose Jacobian
    is singular, stops with ``no-converge``. Rows whose residual cannot be
    evaluated at the start are ``degenerate``. Convergence means
    ``|r_j| <= tol_j`` for every component.
    """
    x = np.array(x0, dtype=float, copy=True)
    m, d = x.shape
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (m, d))
    status = np.full(m, NO_CONVERGE, dtype=object)
    iters = np.zeros(m, dtype=int)

    r, valid = residual(x, np.arange(m))
    r = np.array(r, dtype=float)
    status[~valid] = DEGENERATE
    active = valid.copy()

    def merit(res, t):
        return np.sum((res / t) ** 2, axis=1)

    for _ in range(max_iter):
        done = active & np.all(np.abs(r) <= tol, axis=1)
        status[done] = OK
        active &= ~done
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        iters[rows] += 1
        xa = x[rows]
        ra = r[rows]
        ta = tol[rows]

        h = fd_step * np.maximum(1.0, np.abs(xa))
        pert = np.repeat(xa[None, :, :], d, axis=0)  # (d, k, d)
        for j in range(d):
            pert[j, :, j] += h[:, j]
        rp, vp = residual(pert.reshape(d * rows.size, d), np.tile(rows, d))
        rp = rp.reshape(d, rows.size, d)
        vp = vp.reshape(d, rows.size).all(axis=0)
        jac = np.empty((rows.size, d, d))
        for j in range(d):
            jac[:, :, j] = (rp[j] - ra) / h[:, j][:, None]

        good = vp & np.all(np.isfinite(jac), axis=(1, 2))
        with np.errstate(all="ignore"):
            det_ok = np.abs(np.linalg.det(np.where(good[:, None, None], jac, np.eye(d)))) > 0
        good &= det_ok
        step = np.zeros_like(xa)
        if good.any():
            step[good] = np.linalg.solve(jac[good], -ra[good][:, :, None])[:, :, 0]
        good &= np.all(np.isfinite(step), axis=1)

        base = merit(ra, ta)
        lam = np.ones(rows.size)
        pending = good.copy()
        new_x = xa.copy()
        new_r = ra.copy()
        for _h in range(max_halvings + 1):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            trial = xa[idx] + lam[idx][:, None] * step[idx]
            rt, vt = residual(trial, rows[idx])
            better = vt & np.all(np.isfinite(rt), axis=1)
            better[better] = merit(rt[better], ta[idx][better]) < base[idx][better]
            acc = idx[better]
            new_x[acc] = trial[better]
            new_r[acc] = rt[better]
            pending[acc] = False
            lam[idx[~better]] *= 0.5
        stuck = ~good | pending
        active[rows[stuck]] = False
        x[rows] = new_x
        r[rows] = new_r
    else:
        done = active & np.all(np.abs(r) <= tol, axis=1)
        status[done] = OK

    return NewtonResult(x=x, residual=r, status=status, iterations=iters)
