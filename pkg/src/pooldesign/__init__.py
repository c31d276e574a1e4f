"""Deterministic pooled-testing designs with tuning-free l1 decoding.

Build circulant-block pooling matrices with provable recovery
guarantees, decode pooled qPCR readouts by nonnegative least absolute
deviation, and reproduce the empirical recovery phase diagram over
prevalence and measurement corruption.
"""

from .design import (
    DesignCertificate,
    DesignParams,
    PoolingDesign,
    budget_disjunct_bound,
    budget_dorfman,
    certificate,
    construct_design,
    dorfman_optimal_pool,
    load_design,
    matrix_pinv_one_norm,
    max_column_coherence,
    pinv_one_norm,
    plan_for_population,
    save_design,
    verify_disjunct,
    write_lab_sheet,
)
from .decode import (
    DEFAULT_EPSILON,
    InfectionCall,
    ThresholdPolicy,
    classify_disjunct,
    classify_nnlad,
    infected_indices,
    noise_tolerance,
    write_result,
)
from .errors import (
    DegenerateS,
    DesignFileError,
    DimensionMismatch,
    GridTooCoarse,
    InfeasiblePrevalence,
    NonPrimeQ,
    NumericalFailure,
    PoolDesignError,
    STooLarge,
    TooLargeToVerify,
)
from .heatmap import render_heatmap, write_heatmap
from .simulate import (
    CorruptionKind,
    CorruptionModel,
    PhaseDiagram,
    RegionReport,
    SignalModel,
    SpecimenProfile,
    corrupt_readout,
    draw_signal,
    load_grid_csv,
    region_check,
    run_phase_diagram,
    write_grid_csv,
)
from .solver import (
    LinearProgram,
    NnladProblem,
    NnladSolution,
    SolveStatus,
    SolverOptions,
    active_backend,
    epigraph_lp,
    lp_form,
    read_measurements,
    solve_nnlad,
    solve_nnlad_dense,
    write_measurements,
)

__version__ = "0.1.0"
