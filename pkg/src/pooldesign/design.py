"""Deterministic pooling designs built from circulant blocks.

A design pools ``n = q**2`` specimens into ``m = (s+1)*q`` tests, where
``q`` is prime and ``s`` is the number of infected individuals the scheme
is guaranteed to identify.  The binary test-assignment matrix ``B`` is a
``(s+1) x q`` grid of ``q x q`` blocks, the block at grid position
``(i, j)`` (0-based) being the ``i*j``-th power of the cyclic shift
permutation.  Each specimen therefore appears in exactly ``s+1`` tests,
each test pools exactly ``q`` specimens, and two distinct specimens share
at most one test.  The volume-fraction matrix actually pipetted is
``A = B / (s+1)``, whose columns sum to one.

The module also computes the recovery certificate (null-space-property
constants and the worst-case decoding error constant) and the test-budget
formulas used to compare this scheme against two-stage Dorfman pooling
and the classical disjunct-matrix bound.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import (
    DegenerateS,
    DesignFileError,
    InfeasiblePrevalence,
    NonPrimeQ,
    NumericalFailure,
    STooLarge,
    TooLargeToVerify,
)

# Singular values below max(sv) * PINV_RCOND are treated as zero when
# forming the pseudoinverse (standard numerical-rank tolerance).
PINV_RCOND = 1e-10

# Refuse exhaustive disjunctness checks costing more than this many
# elementary set operations unless the caller forces them.
DISJUNCT_BUDGET = 10**8

# plan_for_population gives up past this pool size.
MAX_POOL_PRIME = 10_000


def is_prime(value: int) -> bool:
    """Trial-division primality test; adequate for pool-size candidates."""
    if value < 2:
        return False
    if value < 4:
        return True
    if value % 2 == 0:
        return False
    f = 3
    while f * f <= value:
        if value % f == 0:
            return False
        f += 2
    return True


def next_prime(value: int) -> int:
    """Smallest prime >= value."""
    candidate = max(2, value)
    while not is_prime(candidate):
        candidate += 1
    return candidate


@dataclass(frozen=True)
class DesignParams:
    """Parameters of a pooling design: prime pool size and guaranteed sparsity.

    ``q`` is the pool size (specimens per test, also the block dimension)
    and ``s`` is the largest number of infected individuals the design
    certifiably identifies.  Requires ``q`` prime and ``q > s >= 1``.
    """

    q: int
    s: int

    def __post_init__(self) -> None:
        if self.s < 1:
            raise STooLarge(f"s must be >= 1, got {self.s}")
        if not is_prime(self.q):
            raise NonPrimeQ(f"pool size q={self.q} is not prime")
        if self.s >= self.q:
            raise STooLarge(f"need q > s, got q={self.q}, s={self.s}")


@dataclass(frozen=True)
class PoolingDesign:
    """A pooling matrix in sparse one-position form.

    ``row_index[i, n]`` is the row of the i-th one in column ``n`` of the
    binary matrix ``B``; rows within a column are stored in increasing
    order.  The pipetting matrix is ``A = B * scale`` with
    ``scale = 1/(s+1)``.  Instances are immutable and safe to share
    between threads.
    """

    params: DesignParams
    row_index: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.params.s + 1, self.params.q**2)
        if self.row_index.shape != expected:
            raise DesignFileError(
                f"row_index shape {self.row_index.shape}, expected {expected}"
            )

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def s(self) -> int:
        return self.params.s

    @property
    def m(self) -> int:
        """Number of tests."""
        return (self.params.s + 1) * self.params.q

    @property
    def n(self) -> int:
        """Number of specimen slots."""
        return self.params.q**2

    @property
    def column_weight(self) -> int:
        """Tests each specimen appears in."""
        return self.params.s + 1

    @property
    def scale(self) -> float:
        """Volume fraction of a specimen pipetted into each of its tests."""
        return 1.0 / (self.params.s + 1)

    def matrix_b(self) -> np.ndarray:
        """Dense binary test-assignment matrix (m x n)."""
        b = np.zeros((self.m, self.n))
        b[self.row_index, np.arange(self.n)[None, :]] = 1.0
        return b

    def matrix_a(self) -> np.ndarray:
        """Dense volume-fraction matrix A = B / (s+1)."""
        return self.matrix_b() * self.scale

    def sparse_b(self) -> sp.csc_matrix:
        """CSC form of B, column-major ones."""
        d = self.column_weight
        indptr = np.arange(0, d * self.n + 1, d)
        return sp.csc_matrix(
            (np.ones(d * self.n), self.row_index.T.ravel(), indptr),
            shape=(self.m, self.n),
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        """A @ x without forming the dense matrix."""
        x = np.asarray(x, dtype=float)
        contrib = np.broadcast_to(x, self.row_index.shape).ravel()
        return np.bincount(
            self.row_index.ravel(), weights=contrib, minlength=self.m
        ) * self.scale

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        """A.T @ u without forming the dense matrix."""
        u = np.asarray(u, dtype=float)
        return u[self.row_index].sum(axis=0) * self.scale

    def column_support(self, n: int) -> np.ndarray:
        """Row indices of the tests that pool specimen ``n``."""
        return self.row_index[:, n].copy()


@dataclass(frozen=True)
class DesignCertificate:
    """Recovery-guarantee constants of a design.

    ``coherence`` is the largest number of tests shared by two distinct
    specimens; ``column_weight`` the tests per specimen.  ``contraction``
    and ``noise_gain`` are the robust null-space-property constants, and
    ``bound_constant`` multiplies the l1 measurement error in the
    worst-case decoding bound
    ``||x - estimate||_1 <= bound_constant * ||e||_1``.
    """

    coherence: int
    column_weight: int
    contraction: float
    noise_gain: float
    pinv_norm: float
    bound_constant: float


def construct_design(params: DesignParams) -> PoolingDesign:
    """Build the circulant-block design for the given parameters.

    Column ``n`` corresponds to block-column ``j = n // q`` and offset
    ``c = n % q``; its one in block-row ``i`` lands on global row
    ``i*q + (c + i*j) mod q``.  The construction is deterministic:
    identical parameters give bit-identical matrices.
    """
    q, s = params.q, params.s
    blk = np.arange(s + 1, dtype=np.int64)[:, None]
    col = np.arange(q * q, dtype=np.int64)[None, :]
    rows = blk * q + (col % q + blk * (col // q)) % q
    rows = np.ascontiguousarray(rows, dtype=np.int32)
    rows.setflags(write=False)
    return PoolingDesign(params=params, row_index=rows)


def binary_max_coherence(b: np.ndarray) -> int:
    """Largest inner product over all pairs of distinct columns of a 0/1 matrix.

    Computed through the Gram matrix, which covers every one of the
    N(N-1)/2 pairs (pairs sharing no row contribute zero entries).
    """
    b = np.asarray(b)
    if b.shape[1] < 2:
        return 0
    gram = sp.csc_matrix(b).T @ sp.csc_matrix(b)
    gram.setdiag(0)
    return 0 if gram.nnz == 0 else int(gram.max())


def max_column_coherence(design: PoolingDesign) -> int:
    """Largest number of tests shared by two distinct specimens."""
    gram = design.sparse_b().T @ design.sparse_b()
    gram.setdiag(0)
    return 0 if gram.nnz == 0 else int(gram.max())


def _column_masks(b: np.ndarray) -> list[int]:
    masks = []
    for n in range(b.shape[1]):
        mask = 0
        for r in np.flatnonzero(b[:, n]):
            mask |= 1 << int(r)
        masks.append(mask)
    return masks


def binary_is_disjunct(
    b: np.ndarray, s: int, *, budget: int = DISJUNCT_BUDGET, force: bool = False
) -> bool:
    """Exhaustively decide whether a 0/1 matrix is s-disjunct.

    A matrix is s-disjunct when no column's support is covered by the
    union of the supports of any s other columns.  The check enumerates,
    for every column, all size-s subsets of the remaining columns, so the
    cost grows as ``N * C(N-1, s)``; above ``budget`` it refuses unless
    ``force`` is set.
    """
    b = np.asarray(b)
    n_cols = b.shape[1]
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    r = min(s, n_cols - 1)
    if r == 0:
        return True
    cost = n_cols * math.comb(n_cols - 1, r)
    if cost > budget and not force:
        raise TooLargeToVerify(
            f"exhaustive check needs ~{cost:.2e} set operations "
            f"(budget {budget:.0e}); pass force=True to run anyway"
        )
    masks = _column_masks(b)
    for n in range(n_cols):
        target = masks[n]
        others = [masks[k] for k in range(n_cols) if k != n]
        for subset in combinations(others, r):
            union = 0
            for mask in subset:
                union |= mask
            if target & ~union == 0:
                return False
    return True


def verify_disjunct(
    design: PoolingDesign,
    s: int | None = None,
    *,
    budget: int = DISJUNCT_BUDGET,
    force: bool = False,
) -> bool:
    """Exhaustively verify that the design's binary matrix is s-disjunct."""
    if s is None:
        s = design.s
    return binary_is_disjunct(design.matrix_b(), s, budget=budget, force=force)


def matrix_pinv_one_norm(a: np.ndarray) -> float:
    """l1->l1 operator norm of the Moore-Penrose pseudoinverse of a matrix.

    The pseudoinverse is formed by SVD with singular values below
    ``max(sv) * PINV_RCOND`` treated as zero; the operator norm is the
    maximum absolute column sum.
    """
    try:
        pinv = np.linalg.pinv(np.asarray(a, dtype=float), rcond=PINV_RCOND)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return float(np.abs(pinv).sum(axis=0).max())


def pinv_one_norm(design: PoolingDesign) -> float:
    """l1->l1 operator norm of the pseudoinverse of the design's A."""
    return matrix_pinv_one_norm(design.matrix_a())


def certificate(design: PoolingDesign) -> DesignCertificate:
    """Compute the recovery certificate of a design.

    With coherence ``lam`` and column weight ``d`` the null-space-property
    constants are ``contraction = s / (2d/lam - s)`` and
    ``noise_gain = s*(2d/lam + 1) / (2d/lam - s) * pinv_norm``; for this
    construction ``lam = 1`` so they reduce to ``s/(s+2)`` and
    ``s*(2s+3)/(s+2) * pinv_norm``.  The decoding error constant is
    ``2*(s+1 + s*(2s+3)*pinv_norm)``.
    """
    s = design.s
    d = design.column_weight
    lam = max_column_coherence(design)
    pnorm = pinv_one_norm(design)
    ratio = 2.0 * d / lam
    contraction = s / (ratio - s)
    noise_gain = s * (ratio + 1.0) / (ratio - s) * pnorm
    bound_constant = 2.0 * (s + 1 + s * (2 * s + 3) * pnorm)
    return DesignCertificate(
        coherence=lam,
        column_weight=d,
        contraction=contraction,
        noise_gain=noise_gain,
        pinv_norm=pnorm,
        bound_constant=bound_constant,
    )


def plan_for_population(
    n_people: int, prevalence: float, *, max_prime: int = MAX_POOL_PRIME
) -> DesignParams:
    """Pick design parameters for a population and an expected prevalence.

    Sets ``s = ceil(prevalence * n_people)`` and ``q`` to the smallest
    prime with ``q >= ceil(sqrt(n_people))`` and ``q > s``.  The design
    then covers ``q**2 >= n_people`` specimen slots; slots beyond the real
    population are dummy columns that always read zero.
    """
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must be in (0, 1), got {prevalence}")
    if n_people < 4:
        raise ValueError(f"need at least 4 people, got {n_people}")
    s = math.ceil(prevalence * n_people)
    q = math.ceil(math.sqrt(n_people))
    while True:
        q = next_prime(q)
        if q > max_prime:
            raise InfeasiblePrevalence(
                f"no prime pool size <= {max_prime} exceeds s={s} "
                f"for {n_people} people at prevalence {prevalence}"
            )
        if q > s:
            return DesignParams(q=q, s=s)
        q += 1


def budget_dorfman(prevalence: float, pool_size: int) -> float:
    """Expected tests per individual for two-stage Dorfman pooling.

    Everyone is pooled into groups of ``pool_size``; positive groups are
    retested individually: ``1/k + 1 - (1-p)**k``.
    """
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must be in (0, 1), got {prevalence}")
    if pool_size < 2:
        raise ValueError(f"pool size must be >= 2, got {pool_size}")
    return 1.0 / pool_size + 1.0 - (1.0 - prevalence) ** pool_size


def dorfman_optimal_pool(prevalence: float) -> tuple[int, float]:
    """Grid-search the Dorfman pool size minimizing expected tests per person.

    The optimum sits near ``1/sqrt(p)``; the search covers
    ``k in [2, 3/sqrt(p)]``.
    """
    k_max = max(3, math.ceil(3.0 / math.sqrt(prevalence)))
    best_k, best_rate = 2, budget_dorfman(prevalence, 2)
    for k in range(3, k_max + 1):
        rate = budget_dorfman(prevalence, k)
        if rate < best_rate:
            best_k, best_rate = k, rate
    return best_k, best_rate


def budget_disjunct_bound(n_people: int, prevalence: float) -> float:
    """Tests per individual of the classical disjunct-matrix construction.

    Evaluates ``2 s^2 log2(N) / log2(s)`` with ``s = prevalence * N`` and
    divides by the population; requires ``s >= 2`` for the denominator to
    be positive.
    """
    s = prevalence * n_people
    if s < 2:
        raise DegenerateS(
            f"bound needs prevalence * n_people >= 2, got {s:.3g}"
        )
    tests = 2.0 * s * s * math.log2(n_people) / math.log2(s)
    return tests / n_people


# ---------------------------------------------------------------------------
# Interchange formats
# ---------------------------------------------------------------------------


def design_to_json(design: PoolingDesign) -> str:
    """Serialize a design to the JSON interchange format.

    Schema: ``{"q", "s", "m", "n", "ones": [[row, col], ...]}`` with
    0-based positions of the ones of B sorted lexicographically.
    """
    cols = np.broadcast_to(
        np.arange(design.n, dtype=np.int64), design.row_index.shape
    ).ravel()
    rows = design.row_index.ravel().astype(np.int64)
    order = np.lexsort((cols, rows))
    ones = [[int(rows[k]), int(cols[k])] for k in order]
    payload = {
        "q": design.q,
        "s": design.s,
        "m": design.m,
        "n": design.n,
        "ones": ones,
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def save_design(design: PoolingDesign, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(design_to_json(design))


def load_design(path) -> PoolingDesign:
    """Load and structurally validate a design file.

    Raises :class:`DesignFileError` if the file is malformed or violates
    the invariants (weights, dimensions, duplicate positions).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DesignFileError(f"cannot read design file: {exc}") from exc
    try:
        q, s = int(payload["q"]), int(payload["s"])
        m, n = int(payload["m"]), int(payload["n"])
        ones = payload["ones"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DesignFileError(f"missing or bad field: {exc}") from exc
    try:
        params = DesignParams(q=q, s=s)
    except (NonPrimeQ, STooLarge) as exc:
        raise DesignFileError(str(exc)) from exc
    if m != (s + 1) * q or n != q * q:
        raise DesignFileError(
            f"inconsistent dimensions: m={m}, n={n} for q={q}, s={s}"
        )
    if len(ones) != (s + 1) * n:
        raise DesignFileError(
            f"expected {(s + 1) * n} ones, file has {len(ones)}"
        )
    arr = np.asarray(ones, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DesignFileError("'ones' must be a list of [row, col] pairs")
    if arr.min() < 0 or arr[:, 0].max() >= m or arr[:, 1].max() >= n:
        raise DesignFileError("one-position out of range")
    if len(np.unique(arr[:, 0] * n + arr[:, 1])) != len(arr):
        raise DesignFileError("duplicate one-positions")
    col_weights = np.bincount(arr[:, 1], minlength=n)
    if not (col_weights == s + 1).all():
        raise DesignFileError("column weights are not uniformly s+1")
    row_weights = np.bincount(arr[:, 0], minlength=m)
    if not (row_weights == q).all():
        raise DesignFileError("row weights are not uniformly q")
    by_col = arr[np.lexsort((arr[:, 0], arr[:, 1]))]
    rows = np.ascontiguousarray(
        by_col[:, 0].reshape(n, s + 1).T, dtype=np.int32
    )
    rows.setflags(write=False)
    return PoolingDesign(params=params, row_index=rows)


def write_lab_sheet(design: PoolingDesign, path) -> None:
    """Write the lab sheet CSV: one row per test listing pooled specimens.

    Header ``test_id,specimen_ids``; the q specimen indices of each test
    are semicolon-separated.
    """
    members: list[list[int]] = [[] for _ in range(design.m)]
    for n in range(design.n):
        for r in design.row_index[:, n]:
            members[int(r)].append(n)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_id", "specimen_ids"])
        for test_id, specimens in enumerate(members):
            writer.writerow([test_id, ";".join(str(n) for n in specimens)])
