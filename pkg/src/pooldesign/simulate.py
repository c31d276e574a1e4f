"""Monte Carlo recovery experiments over (prevalence, corruption) grids.

Synthetic specimens carry Poisson loads on a uniformly drawn support;
readouts are corrupted by zeroing tests (false negatives) and/or
replacing them with spurious values.  Each grid cell counts how often
the decoded estimate lands within a relative l1 tolerance of the truth,
reproducing the empirical recovery phase diagram.

Randomness is counter-based: every (cell, trial) owns a private stream
derived from (seed, cell indices, trial index), so cells can run
concurrently in any order and still give identical counts.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import PoolingDesign
from .errors import GridTooCoarse, PoolDesignError
from .solver import NnladProblem, SolverOptions, SolveStatus, solve_nnlad

# Paper-reported empirical recovery region for the (q=31, s=7) design:
# corruption fraction at most REGION_PE_MAX and
# 4/3 * pe + p at most REGION_LINE_MAX.
REGION_PE_MAX = 0.06
REGION_LINE_MAX = 0.08
REGION_PE_COEFF = 4.0 / 3.0

# Relative l1 error below which a trial counts as recovered; exact
# recoveries land around 1e-6 and failures near 1, so three orders of
# magnitude separate the two.
DEFAULT_SUCCESS_RTOL = 1e-3

DEFAULT_POISSON_MEAN = 100.0

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class SignalModel:
    """Infected specimens carry Poisson(poisson_mean) loads conditioned
    to be at least 1; ``prevalence`` is the infected fraction."""

    poisson_mean: float = DEFAULT_POISSON_MEAN
    prevalence: float = 0.0

    def __post_init__(self) -> None:
        if not self.poisson_mean > 0:
            raise ValueError(f"poisson_mean must be positive, got {self.poisson_mean}")
        if not 0.0 <= self.prevalence <= 1.0:
            raise ValueError(f"prevalence must be in [0, 1], got {self.prevalence}")


class CorruptionKind(enum.Enum):
    ZERO_OUT = "zero_out"
    REPLACE_RANDOM = "replace_random"
    MIXED = "mixed"


@dataclass(frozen=True)
class CorruptionModel:
    """Fraction of tests whose readout is grossly wrong and how:
    zeroed (false negative), replaced by a spurious value, or a
    per-test mix of both."""

    fraction: float
    kind: CorruptionKind = CorruptionKind.MIXED

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class SpecimenProfile:
    """Ground-truth loads of one synthetic cohort."""

    loads: np.ndarray
    support: np.ndarray

    @property
    def sparsity(self) -> int:
        return int(self.support.shape[0])


@dataclass(frozen=True)
class PhaseDiagram:
    """Per-cell success counts of a recovery sweep.

    ``success_counts[i, j]`` counts recovered trials at prevalence
    ``p_grid[i]`` and corruption fraction ``pe_grid[j]``;
    ``solver_failures`` counts trials whose solve failed numerically
    (those also count as unrecovered).
    """

    p_grid: np.ndarray
    pe_grid: np.ndarray
    trials: int
    success_counts: np.ndarray
    seed: int
    solver_failures: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return self.success_counts / self.trials

    def cell_probability(self, p: float, pe: float) -> float:
        i = int(np.argmin(np.abs(self.p_grid - p)))
        j = int(np.argmin(np.abs(self.pe_grid - pe)))
        if abs(self.p_grid[i] - p) > _GRID_TOL or abs(self.pe_grid[j] - pe) > _GRID_TOL:
            raise KeyError(f"cell ({p}, {pe}) not on the grid")
        return float(self.success_counts[i, j]) / self.trials


def draw_signal(
    n: int, model: SignalModel, rng: np.random.Generator
) -> SpecimenProfile:
    """Draw a load vector: round(p*n) infected slots chosen uniformly
    without replacement, each with a Poisson load conditioned >= 1."""
    count = round(model.prevalence * n)
    loads = np.zeros(n)
    support = np.sort(rng.choice(n, size=count, replace=False))
    if count:
        values = rng.poisson(model.poisson_mean, size=count).astype(float)
        while True:
            zero = values == 0.0
            if not zero.any():
                break
            values[zero] = rng.poisson(model.poisson_mean, size=int(zero.sum()))
        loads[support] = values
    return SpecimenProfile(loads=loads, support=support)


def corrupt_readout(
    clean: np.ndarray, model: CorruptionModel, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt round(fraction * M) tests chosen uniformly without
    replacement; returns (readout, error) with error = readout - clean.

    Zeroing a test that already reads zero would change nothing, so such
    picks fall back to a spurious replacement; replacement values are
    redrawn on exact collision with the clean value.  The realized error
    therefore has exactly round(fraction * M) nonzeros.  Spurious values
    are uniform on (0, max(clean)], or (0, 1] when the clean readout is
    all zero.
    """
    clean = np.asarray(clean, dtype=float)
    count = round(model.fraction * clean.shape[0])
    readout = clean.copy()
    indices = rng.choice(clean.shape[0], size=count, replace=False)
    top = float(clean.max()) if clean.size and clean.max() > 0 else 1.0
    for m in indices:
        if model.kind is CorruptionKind.ZERO_OUT:
            zero = True
        elif model.kind is CorruptionKind.REPLACE_RANDOM:
            zero = False
        else:
            zero = rng.random() < 0.5
        if zero and clean[m] > 0:
            readout[m] = 0.0
        else:
            value = rng.uniform(0.0, top)
            while value == clean[m]:
                value = rng.uniform(0.0, top)
            readout[m] = value
    return readout, readout - clean


def _trial_rng(seed: int, i: int, j: int, trial: int) -> np.random.Generator:
    bits = np.random.Philox(
        key=np.array([seed & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64),
        counter=np.array([trial, i, j, 0], dtype=np.uint64),
    )
    return np.random.Generator(bits)


def run_trial(
    design: PoolingDesign,
    p: float,
    pe: float,
    rng: np.random.Generator,
    *,
    success_rtol: float = DEFAULT_SUCCESS_RTOL,
    poisson_mean: float = DEFAULT_POISSON_MEAN,
    kind: CorruptionKind = CorruptionKind.MIXED,
    options: SolverOptions | None = None,
) -> tuple[bool, bool]:
    """One draw-corrupt-decode trial; returns (recovered, solver_failed)."""
    profile = draw_signal(design.n, SignalModel(poisson_mean, p), rng)
    clean = design.forward(profile.loads)
    readout, _ = corrupt_readout(clean, CorruptionModel(pe, kind), rng)
    try:
        solution = solve_nnlad(NnladProblem(design, readout), options)
    except PoolDesignError:
        return False, True
    if solution.status is SolveStatus.NUMERICAL_FAILURE:
        return False, True
    error = float(np.abs(solution.estimate - profile.loads).sum())
    bound = success_rtol * max(1.0, float(np.abs(profile.loads).sum()))
    return error <= bound, False


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, then POOLDESIGN_THREADS, then
    the machine's CPU count."""
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("POOLDESIGN_THREADS", "")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_phase_diagram(
    design: PoolingDesign,
    p_grid,
    pe_grid,
    trials: int,
    seed: int,
    *,
    success_rtol: float = DEFAULT_SUCCESS_RTOL,
    poisson_mean: float = DEFAULT_POISSON_MEAN,
    kind: CorruptionKind = CorruptionKind.MIXED,
    options: SolverOptions | None = None,
    workers: int | None = None,
) -> PhaseDiagram:
    """Sweep the (prevalence, corruption) grid with ``trials`` per cell.

    Identical (design, grids, trials, seed) give identical counts
    regardless of worker count or scheduling.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    pe_grid = np.asarray(pe_grid, dtype=float)
    if p_grid.size == 0 or pe_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    successes = np.zeros((p_grid.size, pe_grid.size), dtype=np.int64)
    failures = np.zeros_like(successes)

    def run_cell(cell: tuple[int, int]) -> tuple[int, int, int, int]:
        i, j = cell
        n_ok = n_fail = 0
        for t in range(trials):
            ok, failed = run_trial(
                design,
                float(p_grid[i]),
                float(pe_grid[j]),
                _trial_rng(seed, i, j, t),
                success_rtol=success_rtol,
                poisson_mean=poisson_mean,
                kind=kind,
                options=options,
            )
            n_ok += ok
            n_fail += failed
        return i, j, n_ok, n_fail

    cells = [(i, j) for i in range(p_grid.size) for j in range(pe_grid.size)]
    n_workers = resolve_workers(workers)
    if n_workers == 1:
        results = map(run_cell, cells)
    else:
        pool = ThreadPoolExecutor(max_workers=n_workers)
        try:
            results = list(pool.map(run_cell, cells))
        finally:
            pool.shutdown()
    for i, j, n_ok, n_fail in results:
        successes[i, j] = n_ok
        failures[i, j] = n_fail
    return PhaseDiagram(
        p_grid=p_grid,
        pe_grid=pe_grid,
        trials=trials,
        success_counts=successes,
        seed=seed,
        solver_failures=failures,
    )


# ---------------------------------------------------------------------------
# Region comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionCell:
    p: float
    pe: float
    inside: bool
    outside_with_margin: bool
    probability: float
    ok: bool


@dataclass(frozen=True)
class RegionReport:
    """Agreement between a measured diagram and the reported region.

    ``inside`` cells (pe <= 0.06 and 4/3 pe + p <= 0.08, boundary
    included) should recover with probability >= 0.9; cells outside the
    region by at least one grid step should fail (probability <= 0.1);
    cells in the margin band in between are not scored.  ``agreement``
    is the fraction of all cells whose implication holds.
    """

    cells: list[RegionCell]
    inside_ok: int
    inside_total: int
    outside_ok: int
    outside_total: int
    agreement: float

    def summary(self) -> str:
        return (
            f"region agreement {self.agreement:.3f}: "
            f"inside {self.inside_ok}/{self.inside_total} cells at prob >= 0.9, "
            f"outside-with-margin {self.outside_ok}/{self.outside_total} "
            f"at prob <= 0.1"
        )


def region_contains(p: float, pe: float) -> bool:
    """Membership in the reported recovery region (closed boundary)."""
    return (
        pe <= REGION_PE_MAX + _GRID_TOL
        and REGION_PE_COEFF * pe + p <= REGION_LINE_MAX + _GRID_TOL
    )


def _max_step(grid: np.ndarray) -> float:
    return float(np.diff(grid).max()) if grid.size > 1 else math.inf


def region_check(
    diagram: PhaseDiagram,
    *,
    inside_prob: float = 0.9,
    outside_prob: float = 0.1,
) -> RegionReport:
    """Score a diagram against the reported region.

    Requires the grid to cover [0, 0.12] x [0, 0.1] at step <= 0.01;
    coarser or smaller grids raise :class:`GridTooCoarse`.
    """
    p_grid, pe_grid = diagram.p_grid, diagram.pe_grid
    step_p, step_pe = _max_step(p_grid), _max_step(pe_grid)
    if (
        p_grid.min() > _GRID_TOL
        or p_grid.max() < 0.12 - _GRID_TOL
        or pe_grid.min() > _GRID_TOL
        or pe_grid.max() < 0.1 - _GRID_TOL
        or step_p > 0.01 + _GRID_TOL
        or step_pe > 0.01 + _GRID_TOL
    ):
        raise GridTooCoarse(
            "region check needs the grid to cover [0, 0.12] x [0, 0.1] "
            "at step <= 0.01"
        )
    probs = diagram.probabilities
    cells = []
    inside_ok = inside_total = outside_ok = outside_total = 0
    for i, p in enumerate(p_grid):
        for j, pe in enumerate(pe_grid):
            prob = float(probs[i, j])
            inside = region_contains(p, pe)
            # one grid step of slack per coordinate before a cell counts
            # as strictly outside
            relaxed = (
                pe <= REGION_PE_MAX + step_pe + _GRID_TOL
                and REGION_PE_COEFF * pe + p
                <= REGION_LINE_MAX + REGION_PE_COEFF * step_pe + step_p + _GRID_TOL
            )
            outside = not relaxed
            if inside:
                inside_total += 1
                ok = prob >= inside_prob
                inside_ok += ok
            elif outside:
                outside_total += 1
                ok = prob <= outside_prob
                outside_ok += ok
            else:
                ok = True
            cells.append(
                RegionCell(
                    p=float(p),
                    pe=float(pe),
                    inside=inside,
                    outside_with_margin=outside,
                    probability=prob,
                    ok=ok,
                )
            )
    agreement = sum(cell.ok for cell in cells) / len(cells)
    return RegionReport(
        cells=cells,
        inside_ok=inside_ok,
        inside_total=inside_total,
        outside_ok=outside_ok,
        outside_total=outside_total,
        agreement=agreement,
    )


# ---------------------------------------------------------------------------
# Grid file format
# ---------------------------------------------------------------------------


def write_grid_csv(diagram: PhaseDiagram, path) -> None:
    """Write the sweep as CSV: header ``p,pe,trials,successes,prob``,
    one row per cell, row-major in (p, pe)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "pe", "trials", "successes", "prob"])
        for i, p in enumerate(diagram.p_grid):
            for j, pe in enumerate(diagram.pe_grid):
                count = int(diagram.success_counts[i, j])
                writer.writerow(
                    [
                        f"{p:.10g}",
                        f"{pe:.10g}",
                        diagram.trials,
                        count,
                        f"{count / diagram.trials:.6f}",
                    ]
                )


def load_grid_csv(path) -> PhaseDiagram:
    """Load a sweep CSV back into a :class:`PhaseDiagram`.

    The file does not store the seed or failure counts; those fields
    come back as zeros.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:5]] != [
            "p", "pe", "trials", "successes", "prob",
        ]:
            raise ValueError(f"{path}: expected header 'p,pe,trials,successes,prob'")
        for row in reader:
            rows.append((float(row[0]), float(row[1]), int(row[2]), int(row[3])))
    if not rows:
        raise ValueError(f"{path}: empty grid")
    p_grid = np.unique([r[0] for r in rows])
    pe_grid = np.unique([r[1] for r in rows])
    trials = rows[0][2]
    counts = np.zeros((p_grid.size, pe_grid.size), dtype=np.int64)
    seen = np.zeros(counts.shape, dtype=bool)
    for p, pe, row_trials, count in rows:
        if row_trials != trials:
            raise ValueError(f"{path}: inconsistent trial counts")
        i = int(np.searchsorted(p_grid, p))
        j = int(np.searchsorted(pe_grid, pe))
        if seen[i, j]:
            raise ValueError(f"{path}: duplicate cell ({p}, {pe})")
        seen[i, j] = True
        counts[i, j] = count
    if not seen.all():
        raise ValueError(f"{path}: grid is not a full rectangle")
    return PhaseDiagram(
        p_grid=p_grid,
        pe_grid=pe_grid,
        trials=trials,
        success_counts=counts,
        seed=0,
        solver_failures=np.zeros_like(counts),
    )
