"""Infection calls from decoded estimates or raw test outcomes.

Two decoders: thresholding the NNLAD estimate at half the infection
threshold (which is exact whenever the l1 measurement error is below the
design's noise tolerance), and the classical disjunct-matrix rule that
flags an individual when every one of its tests is positive.  The
classical rule is qualitative, fast, and fragile: a single false-negative
test unavoidably clears at least one infected individual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .design import DesignCertificate, PoolingDesign
from .errors import DimensionMismatch
from .solver import NnladSolution

# Default infection threshold (virus copies) used by the CLI; chosen so
# that Poisson(100) loads sit far above it while half of it still clears
# solver noise.
DEFAULT_EPSILON = 10.0


@dataclass(frozen=True)
class ThresholdPolicy:
    """Virus-count threshold defining infection: a person is infected
    when their specimen holds more than ``epsilon`` virus copies."""

    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class InfectionCall:
    """Verdict for one individual; ``estimated_load`` is 0 for the
    classical decoder, which cannot estimate loads."""

    individual: int
    infected: bool
    estimated_load: float


def classify_nnlad(
    solution: NnladSolution, policy: ThresholdPolicy
) -> list[InfectionCall]:
    """Flag individual n as infected iff the estimate exceeds epsilon/2."""
    half = policy.epsilon / 2.0
    return [
        InfectionCall(individual=n, infected=bool(load > half), estimated_load=float(load))
        for n, load in enumerate(solution.estimate)
    ]


def classify_disjunct(
    design: PoolingDesign,
    readout: np.ndarray,
    positivity_threshold: float = 0.0,
) -> list[InfectionCall]:
    """Classical group-testing decoder.

    A test is positive when its readout strictly exceeds
    ``positivity_threshold``; an individual is infected when all of its
    tests are positive.
    """
    readout = np.asarray(readout, dtype=float)
    if readout.shape != (design.m,):
        raise DimensionMismatch(
            f"readout has shape {readout.shape}, design has {design.m} tests"
        )
    positive = readout > positivity_threshold
    infected = positive[design.row_index].all(axis=0)
    return [
        InfectionCall(individual=n, infected=bool(flag), estimated_load=0.0)
        for n, flag in enumerate(infected)
    ]


def noise_tolerance(cert: DesignCertificate, policy: ThresholdPolicy) -> float:
    """Largest guaranteed-safe l1 measurement error for exact calls.

    Whenever ``||e||_1`` stays below this value and every true load is
    either 0 or above epsilon, thresholding the estimate at epsilon/2
    reproduces the true infection set exactly.
    """
    return policy.epsilon / 4.0 / (cert.bound_constant / 2.0)


def infected_indices(calls: list[InfectionCall]) -> list[int]:
    return [call.individual for call in calls if call.infected]


# ---------------------------------------------------------------------------
# Result file format
# ---------------------------------------------------------------------------


def result_to_json(
    calls: list[InfectionCall],
    solution: NnladSolution,
    cert: DesignCertificate,
    policy: ThresholdPolicy,
) -> str:
    payload = {
        "calls": [
            {
                "individual": call.individual,
                "infected": call.infected,
                "load": call.estimated_load,
            }
            for call in calls
        ],
        "objective": solution.objective,
        "status": solution.status.value,
        "bound_constant": cert.bound_constant,
        "noise_tolerance": noise_tolerance(cert, policy),
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def write_result(path, calls, solution, cert, policy) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(result_to_json(calls, solution, cert, policy))
