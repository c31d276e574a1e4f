"""Tuning-free nonnegative least-absolute-deviation decoding.

Solves ``min_{z >= 0} ||A z - y||_1`` where ``A`` is the volume-fraction
matrix of a pooling design and ``y`` the per-test virus-count readout.
The program needs no regularization parameter and no noise-level input;
its minimizer is the decoded viral-load estimate.

Two backends implement the inner iteration: a compiled extension
(``pooldesign._kernels``) and a pure-numpy fallback, selected at import
time.  Set ``POOLDESIGN_PURE_PYTHON=1`` to force the fallback.  Both are
deterministic for identical inputs and options.
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .design import PoolingDesign
from .errors import DimensionMismatch, NumericalFailure

try:
    from . import _kernels  # compiled extension, optional
except ImportError:  # pragma: no cover - depends on build environment
    _kernels = None

_FORCE_PY = os.environ.get("POOLDESIGN_PURE_PYTHON", "") not in ("", "0")
_UNIFORM_KERNEL = (
    _kernels_py.nnlad_uniform
    if _kernels is None or _FORCE_PY
    else _kernels.nnlad_uniform
)

POWER_ITERATIONS = 20
STEP_SAFETY = 0.95  # keeps step_primal * step_dual * ||A||^2 < 1


def active_backend() -> str:
    """Name of the iteration backend selected at import: compiled or python."""
    return "python" if _UNIFORM_KERNEL is _kernels_py.nnlad_uniform else "compiled"


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_FAILURE = "numerical_failure"


_STATUS_BY_CODE = {
    0: SolveStatus.CONVERGED,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.NUMERICAL_FAILURE,
}


@dataclass(frozen=True)
class SolverOptions:
    """Tolerance and iteration controls.

    The solve stops once the certified optimality gap falls below
    ``max(tol, tol * ||y||_1)``; the gap is recomputed every
    ``check_every`` iterations.
    """

    tol: float = 1e-8
    max_iters: int = 50_000
    check_every: int = 64
    record_history: bool = False

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.check_every < 1:
            raise ValueError(f"check_every must be >= 1, got {self.check_every}")


@dataclass(frozen=True)
class NnladProblem:
    """A pooling design together with one measured readout vector."""

    design: PoolingDesign
    readout: np.ndarray

    def __post_init__(self) -> None:
        readout = np.ascontiguousarray(self.readout, dtype=float)
        if readout.shape != (self.design.m,):
            raise DimensionMismatch(
                f"readout has shape {np.shape(self.readout)}, "
                f"design has {self.design.m} tests"
            )
        if not np.isfinite(readout).all():
            raise ValueError("readout contains non-finite values")
        object.__setattr__(self, "readout", readout)


@dataclass(frozen=True)
class NnladSolution:
    """Decoded estimate plus solver diagnostics.

    ``objective`` is the l1 residual of ``estimate`` (recomputed from the
    returned point), ``gap`` the certified optimality gap at termination,
    and ``history`` (when recorded) an array with rows
    (iteration, best objective so far, certified gap).
    """

    estimate: np.ndarray
    objective: float
    iterations: int
    status: SolveStatus
    gap: float
    history: np.ndarray | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@dataclass(frozen=True)
class LinearProgram:
    """Epigraph linear program equivalent to an NNLAD instance.

    Variables are ``(z, t)`` with ``z`` the n-vector of loads and ``t``
    the m-vector of per-test residual bounds; minimize ``sum(t)`` subject
    to ``lhs_ub @ (z, t) <= rhs_ub`` and ``(z, t) >= 0``.  The z-part of
    any LP optimum is an NNLAD optimum.
    """

    objective: np.ndarray
    lhs_ub: np.ndarray
    rhs_ub: np.ndarray

    @property
    def n_variables(self) -> int:
        return self.objective.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.rhs_ub.shape[0]


def epigraph_lp(a: np.ndarray, y: np.ndarray) -> LinearProgram:
    """Epigraph reformulation of ``min_{z>=0} ||a z - y||_1``.

    Constraints: ``a z - t <= y`` and ``-a z - t <= -y``; ``t >= 0`` is
    implied but kept explicit in the variable bounds.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    n_rows, n_cols = a.shape
    eye = np.eye(n_rows)
    objective = np.concatenate([np.zeros(n_cols), np.ones(n_rows)])
    lhs = np.block([[a, -eye], [-a, -eye]])
    rhs = np.concatenate([y, -y])
    return LinearProgram(objective=objective, lhs_ub=lhs, rhs_ub=rhs)


def lp_form(problem: NnladProblem) -> LinearProgram:
    """Epigraph LP of a design-backed problem."""
    return epigraph_lp(problem.design.matrix_a(), problem.readout)


def _power_norm(forward, adjoint, n_cols: int) -> float:
    """Operator-norm estimate by a fixed number of power iterations."""
    v = np.ones(n_cols)
    for _ in range(POWER_ITERATIONS):
        v = adjoint(forward(v))
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            return 0.0
        v /= norm
    return float(np.linalg.norm(forward(v)))


def _make_solution(result, record_history: bool) -> NnladSolution:
    zbest, obj, gap, iterations, code, history = result
    estimate = np.asarray(zbest)
    estimate.setflags(write=False)
    return NnladSolution(
        estimate=estimate,
        objective=float(obj),
        iterations=int(iterations),
        status=_STATUS_BY_CODE[int(code)],
        gap=float(gap),
        history=history if record_history else None,
    )


def solve_nnlad(
    problem: NnladProblem, options: SolverOptions | None = None
) -> NnladSolution:
    """Decode a readout on a pooling design.

    Returns an elementwise-nonnegative estimate whose l1 residual is
    within ``max(tol, tol * ||y||_1)`` of the optimum when the status is
    CONVERGED; on ITERATION_LIMIT the best iterate found is returned.
    """
    opts = options or SolverOptions()
    design = problem.design
    y = problem.readout
    norm = _power_norm(design.forward, design.adjoint, design.n)
    if norm == 0.0:
        raise NumericalFailure("design matrix has zero operator norm")
    step = STEP_SAFETY / norm
    y_l1 = float(np.abs(y).sum())
    result = _UNIFORM_KERNEL(
        design.row_index,
        design.scale,
        y,
        step,
        step,
        max(opts.tol, opts.tol * y_l1),
        2.0 * y_l1,
        design.scale * design.column_weight,
        opts.max_iters,
        opts.check_every,
    )
    return _make_solution(result, opts.record_history)


def solve_nnlad_dense(
    a: np.ndarray, y: np.ndarray, options: SolverOptions | None = None
) -> NnladSolution:
    """Decode against an arbitrary entrywise-nonnegative dense matrix.

    Used for small ad-hoc instances (the design path goes through
    :func:`solve_nnlad`).  Negative entries are rejected: the optimality
    certificate relies on nonnegativity.
    """
    opts = options or SolverOptions()
    a = np.ascontiguousarray(a, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if a.ndim != 2 or y.shape != (a.shape[0],):
        raise DimensionMismatch(
            f"matrix {a.shape} incompatible with readout {y.shape}"
        )
    if not np.isfinite(y).all():
        raise ValueError("readout contains non-finite values")
    if (a < 0).any():
        raise ValueError("matrix must be entrywise nonnegative")
    norm = _power_norm(lambda v: a @ v, lambda u: a.T @ u, a.shape[1])
    if norm == 0.0:
        # zero matrix: objective is constant, z = 0 is optimal
        estimate = np.zeros(a.shape[1])
        obj = float(np.abs(y).sum())
        return NnladSolution(
            estimate=estimate,
            objective=obj,
            iterations=0,
            status=SolveStatus.CONVERGED,
            gap=0.0,
        )
    step = STEP_SAFETY / norm
    y_l1 = float(np.abs(y).sum())
    result = _kernels_py.nnlad_dense(
        a,
        y,
        step,
        step,
        max(opts.tol, opts.tol * y_l1),
        2.0 * y_l1,
        a.sum(axis=0),
        opts.max_iters,
        opts.check_every,
    )
    return _make_solution(result, opts.record_history)


# ---------------------------------------------------------------------------
# Measurement file format
# ---------------------------------------------------------------------------


def write_measurements(values: np.ndarray, path) -> None:
    """Write a measurement CSV: header ``test_id,value`` then one row per test."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_id", "value"])
        for test_id, value in enumerate(values):
            writer.writerow([test_id, repr(float(value))])


def read_measurements(path) -> np.ndarray:
    """Read a measurement CSV; test ids must be 0..M-1 in order."""
    values = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["test_id", "value"]:
            raise ValueError(f"{path}: expected header 'test_id,value'")
        for row_num, row in enumerate(reader):
            if len(row) < 2:
                raise ValueError(f"{path}: malformed row {row_num + 2}")
            if int(row[0]) != row_num:
                raise ValueError(
                    f"{path}: test ids must be consecutive from 0, "
                    f"got {row[0]} at row {row_num + 2}"
                )
            values.append(float(row[1]))
    return np.asarray(values, dtype=float)
