"""Exception types shared across the package.

Every error raised by the library derives from :class:`PoolDesignError`,
so callers (notably the CLI) can map failures to exit codes without
catching bare exceptions.
"""


class PoolDesignError(Exception):
    """Base class for all pooldesign errors."""


class NonPrimeQ(PoolDesignError):
    """The requested pool size is not a prime number."""


class STooLarge(PoolDesignError):
    """The guaranteed sparsity level must be strictly below the pool size."""


class TooLargeToVerify(PoolDesignError):
    """Exhaustive disjunctness verification would exceed the work budget."""


class NumericalFailure(PoolDesignError):
    """A numerical routine (SVD, solver) failed to produce a usable result."""


class DimensionMismatch(PoolDesignError):
    """Vector length does not match the design it is used with."""


class InfeasiblePrevalence(PoolDesignError):
    """No admissible prime pool size exists for the requested population."""


class DegenerateS(PoolDesignError):
    """The disjunct-matrix test-count bound needs an expected count of at least 2."""


class GridTooCoarse(PoolDesignError):
    """The phase-diagram grid does not cover the reference region finely enough."""


class DesignFileError(PoolDesignError):
    """A design file is malformed or violates the structural invariants."""
