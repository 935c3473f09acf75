"""Exception hierarchy.

Every error raised on purpose by this package derives from FloqlatError, so
callers can catch one type at the CLI boundary.
"""


class FloqlatError(Exception):
    """Base class for all package errors."""


# --- graph construction ---

class MalformedSpec(FloqlatError):
    """A spec document failed to parse or has the wrong shape."""


class IsolatedVertex(FloqlatError):
    """A fundamental-cell vertex has degree zero."""


class DimensionMismatch(FloqlatError):
    """An offset/period/position does not match the declared dimension."""


# --- static operators ---

class PotentialShapeMismatch(FloqlatError):
    """A potential is not defined on every cell edge / vertex it needs."""


class EigensolverFailure(FloqlatError):
    """Dense diagonalization failed; carries the k-point it failed at."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


# --- driving fields ---

class PeriodMeanNonzero(FloqlatError):
    """Q_x(tau) != 0 beyond tolerance for some vertex: q is not mean-zero."""


class UnknownCondition(FloqlatError):
    """Condition name is not one of MZ_p, MZ_a, VZ_p, VZ_a, M, V, H, R."""


class MissingWeight(FloqlatError):
    """A condition clause needs weight data (b, a, p, c, w) not supplied."""


class WeightVanishes(FloqlatError):
    """Weight b vanishes at a retained vertex while a factorization b^-1 F b^-1 was requested."""


# --- evolution ---

class StepBudgetExceeded(FloqlatError):
    """Requested propagation tolerance unreachable within the step budget."""


class NonHermitianSample(FloqlatError):
    """An assembled Hamiltonian sample h(t) is not Hermitian."""


class QuadratureBudgetExceeded(FloqlatError):
    """Dyson quadrature cannot reach the requested accuracy within the node cap."""


class NonUnitaryInput(FloqlatError):
    """An operator expected to be unitary is not, beyond tolerance."""


class NotAnEigenpair(FloqlatError):
    """(lambda, psi) is not an eigenpair of the monodromy within tolerance."""


# --- Howland space ---

class SpectrumHit(FloqlatError):
    """lambda lies within tolerance of sigma(h0) + omega*n for some retained mode."""


class ResonantPeriod(FloqlatError):
    """1 - exp(i*tau*phi) is singular within tolerance: the kernel formula degenerates."""


# --- gauge ---

class MeanNonzero(FloqlatError):
    """Gauge transform refused: Q(tau) != 0 would break time-periodicity."""


# --- scattering ---

class BoundaryContamination(FloqlatError):
    """Boundary mass exceeded the configured cap; rerun with a larger truncation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonNormalizedInput(FloqlatError):
    """Initial state is not normalized."""


class SolverStagnation(FloqlatError):
    """Power iteration on the weighted resolvent failed to settle."""


# --- CLI ---

class ConfigInvalid(FloqlatError):
    """Experiment config failed validation; message names the offending fields."""
