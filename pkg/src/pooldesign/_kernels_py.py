"""Pure-numpy primal-dual iteration kernels.

This is the fallback backend used when the compiled extension is not
available, and the reference the compiled kernel is checked against.
Both backends expose ``nnlad_uniform`` with the same signature and
halting rule; the dense general-matrix variant only exists here because
BLAS already covers it.

The iteration solves ``min_{z >= 0} ||A z - y||_1`` by a first-order
primal-dual scheme: the dual ascent step is clipped to the l-infinity
unit ball, the primal descent step is projected onto the nonnegative
orthant, and the primal extrapolation uses overrelaxation factor 1.
Optimality is certified through the bound

    best_obj + <q, y> + rbound * max(0, -min_n (A^T q)_n / colsum_n)

which upper-bounds the suboptimality of the best iterate for any dual
point with ``||q||_inf <= 1``, because every minimizer z* of the
nonnegative problem satisfies ``sum_n colsum_n * z*_n <= 2 ||y||_1``
(entrywise-nonnegative A).  ``rbound`` is that box radius.

Status codes: 0 converged, 1 iteration limit, 2 numerical failure.
"""

from __future__ import annotations

import numpy as np


def _finish(history: list[list[float]]):
    return np.asarray(history, dtype=float).reshape(len(history), 3)


def nnlad_uniform(
    rows: np.ndarray,
    scale: float,
    y: np.ndarray,
    step_primal: float,
    step_dual: float,
    tol_abs: float,
    rbound: float,
    colsum: float,
    max_iters: int,
    check_every: int,
):
    """Primal-dual iteration for a uniform-column-weight sparse matrix.

    ``rows[i, n]`` holds the row of the i-th nonzero of column ``n``; all
    nonzero entries equal ``scale``.  Returns
    ``(estimate, objective, gap, iterations, status, history)`` where
    ``history`` rows are (iteration, best objective so far, certified gap).
    """
    n_rows = y.shape[0]
    n_cols = rows.shape[1]
    flat = rows.ravel()
    shape = rows.shape

    z = np.zeros(n_cols)
    dual = np.zeros(n_rows)
    zbar = np.zeros(n_cols)
    zbest = np.zeros(n_cols)

    best_obj = float(np.abs(y).sum())
    gap = best_obj  # z = 0, dual = 0 certificate
    history: list[list[float]] = [[0.0, best_obj, gap]]
    if gap <= tol_abs:
        return zbest, best_obj, gap, 0, 0, _finish(history)

    gradient = np.zeros(n_cols)
    for it in range(1, max_iters + 1):
        az = np.bincount(
            flat, weights=np.broadcast_to(zbar, shape).ravel(), minlength=n_rows
        ) * scale
        np.clip(dual + step_dual * (az - y), -1.0, 1.0, out=dual)
        gradient = dual[rows].sum(axis=0) * scale
        znew = np.maximum(z - step_primal * gradient, 0.0)
        zbar = 2.0 * znew - z
        z = znew

        if it % check_every == 0 or it == max_iters:
            az = np.bincount(
                flat, weights=np.broadcast_to(z, shape).ravel(), minlength=n_rows
            ) * scale
            obj = float(np.abs(az - y).sum())
            if not np.isfinite(obj):
                return zbest, best_obj, gap, it, 2, _finish(history)
            if obj < best_obj:
                best_obj = obj
                zbest = z.copy()
            violation = max(0.0, -float(gradient.min()))
            gap = best_obj + float(dual @ y) + rbound * violation / colsum
            history.append([float(it), best_obj, gap])
            if gap <= tol_abs:
                return zbest, best_obj, gap, it, 0, _finish(history)

    return zbest, best_obj, gap, max_iters, 1, _finish(history)


def nnlad_dense(
    a: np.ndarray,
    y: np.ndarray,
    step_primal: float,
    step_dual: float,
    tol_abs: float,
    rbound: float,
    colsums: np.ndarray,
    max_iters: int,
    check_every: int,
):
    """Same iteration for an arbitrary entrywise-nonnegative dense matrix.

    ``colsums`` are the column sums of ``a``; zero columns never violate
    the dual sign condition and are excluded from the certificate term.
    """
    n_rows, n_cols = a.shape
    positive = colsums > 0
    safe = np.where(positive, colsums, 1.0)

    z = np.zeros(n_cols)
    dual = np.zeros(n_rows)
    zbar = np.zeros(n_cols)
    zbest = np.zeros(n_cols)

    best_obj = float(np.abs(y).sum())
    gap = best_obj
    history: list[list[float]] = [[0.0, best_obj, gap]]
    if gap <= tol_abs:
        return zbest, best_obj, gap, 0, 0, _finish(history)

    for it in range(1, max_iters + 1):
        np.clip(dual + step_dual * (a @ zbar - y), -1.0, 1.0, out=dual)
        gradient = a.T @ dual
        znew = np.maximum(z - step_primal * gradient, 0.0)
        zbar = 2.0 * znew - z
        z = znew

        if it % check_every == 0 or it == max_iters:
            obj = float(np.abs(a @ z - y).sum())
            if not np.isfinite(obj):
                return zbest, best_obj, gap, it, 2, _finish(history)
            if obj < best_obj:
                best_obj = obj
                zbest = z.copy()
            violation = float(
                np.max(np.where(positive, np.maximum(-gradient, 0.0) / safe, 0.0))
            )
            gap = best_obj + float(dual @ y) + rbound * violation
            history.append([float(it), best_obj, gap])
            if gap <= tol_abs:
                return zbest, best_obj, gap, it, 0, _finish(history)

    return zbest, best_obj, gap, max_iters, 1, _finish(history)
