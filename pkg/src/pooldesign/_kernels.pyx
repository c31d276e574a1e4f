# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled primal-dual iteration kernel for uniform-column-weight matrices.

Mirrors ``_kernels_py.nnlad_uniform`` (same halting rule, same return
shape); the whole loop runs without the GIL so concurrent solves scale
across threads.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "math.h" nogil:
    double fabs(double)
    int isnan(double)


def nnlad_uniform(
    const cnp.int32_t[:, ::1] rows,
    double scale,
    const double[::1] y,
    double step_primal,
    double step_dual,
    double tol_abs,
    double rbound,
    double colsum,
    long max_iters,
    long check_every,
):
    """See ``_kernels_py.nnlad_uniform``; returns the same 6-tuple."""
    cdef Py_ssize_t d = rows.shape[0]
    cdef Py_ssize_t n_cols = rows.shape[1]
    cdef Py_ssize_t n_rows = y.shape[0]

    z_arr = np.zeros(n_cols)
    dual_arr = np.zeros(n_rows)
    zbar_arr = np.zeros(n_cols)
    zbest_arr = np.zeros(n_cols)
    az_arr = np.zeros(n_rows)
    grad_arr = np.zeros(n_cols)
    hist_arr = np.zeros((max_iters // check_every + 2, 3))

    cdef double[::1] z = z_arr
    cdef double[::1] dual = dual_arr
    cdef double[::1] zbar = zbar_arr
    cdef double[::1] zbest = zbest_arr
    cdef double[::1] az = az_arr
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hist = hist_arr

    cdef double best_obj = 0.0
    cdef double gap, obj, qy, gmin, violation, value, acc, znew
    cdef Py_ssize_t i, j, it
    cdef long iterations = 0
    cdef int status = 1
    cdef Py_ssize_t n_checks = 0

    for i in range(n_rows):
        best_obj += fabs(y[i])
    gap = best_obj
    hist[0, 0] = 0.0
    hist[0, 1] = best_obj
    hist[0, 2] = gap
    n_checks = 1
    if gap <= tol_abs:
        return zbest_arr, best_obj, gap, 0, 0, hist_arr[:1].copy()

    with nogil:
        for it in range(1, max_iters + 1):
            # dual ascent on A zbar - y, clipped to [-1, 1]
            for i in range(n_rows):
                az[i] = 0.0
            for j in range(n_cols):
                value = zbar[j]
                if value != 0.0:
                    for i in range(d):
                        az[rows[i, j]] += value
            for i in range(n_rows):
                value = dual[i] + step_dual * (az[i] * scale - y[i])
                if value > 1.0:
                    value = 1.0
                elif value < -1.0:
                    value = -1.0
                dual[i] = value
            # primal descent on A^T dual, projected onto z >= 0
            for j in range(n_cols):
                acc = 0.0
                for i in range(d):
                    acc += dual[rows[i, j]]
                acc *= scale
                grad[j] = acc
                znew = z[j] - step_primal * acc
                if znew < 0.0:
                    znew = 0.0
                zbar[j] = 2.0 * znew - z[j]
                z[j] = znew

            if it % check_every == 0 or it == max_iters:
                for i in range(n_rows):
                    az[i] = 0.0
                for j in range(n_cols):
                    value = z[j]
                    if value != 0.0:
                        for i in range(d):
                            az[rows[i, j]] += value
                obj = 0.0
                qy = 0.0
                for i in range(n_rows):
                    obj += fabs(az[i] * scale - y[i])
                    qy += dual[i] * y[i]
                if isnan(obj):
                    status = 2
                    iterations = it
                    break
                if obj < best_obj:
                    best_obj = obj
                    for j in range(n_cols):
                        zbest[j] = z[j]
                gmin = grad[0]
                for j in range(1, n_cols):
                    if grad[j] < gmin:
                        gmin = grad[j]
                violation = -gmin if gmin < 0.0 else 0.0
                gap = best_obj + qy + rbound * violation / colsum
                hist[n_checks, 0] = <double> it
                hist[n_checks, 1] = best_obj
                hist[n_checks, 2] = gap
                n_checks += 1
                if gap <= tol_abs:
                    status = 0
                    iterations = it
                    break
        else:
            iterations = max_iters

    return zbest_arr, best_obj, gap, iterations, status, hist_arr[:n_checks].copy()
