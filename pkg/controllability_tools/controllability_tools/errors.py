"""Exceptions raised by controllability_tools."""


class ControllabilityError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ControllabilityError, ValueError):
    """An environment or command line setting could not be parsed."""


class PrimeDividesDenominator(ControllabilityError, ArithmeticError):
    """A fixed rational entry cannot be reduced modulo the field prime."""

    def __init__(self, value, prime):
        super().__init__(f"Denominator of {value} is divisible by the field prime {prime}")
        self.value = value
        self.prime = prime


class NoCommonBasis(ControllabilityError):
    """Two matroids of equal rank share no common basis."""


class KTooSmall(ControllabilityError):
    """The requested input budget is below the rank of a constraint matroid."""

    def __init__(self, k, minimum_k):
        super().__init__(f"k={k} is infeasible; at least {minimum_k} inputs are required")
        self.k = k
        self.minimum_k = minimum_k


class NotStronglyConnected(ControllabilityError):
    """The network graph of the system is not strongly connected."""


class NoIndependentMatching(ControllabilityError):
    """No perfect matching of H induces linearly independent rows of Omega."""


class CompletionFailure(ControllabilityError):
    """The input rows do not complete the matched rows to a basis of Omega."""


class CycleBudgetExceeded(ControllabilityError):
    """Simple-cycle enumeration exceeded its budget."""

    def __init__(self, budget):
        super().__init__(f"More than {budget} simple cycles; refusing to enumerate further")
        self.budget = budget


class UnboundedVariance(ControllabilityError):
    """Some follower is not connected to any input, so its variance diverges."""


class GenerationError(ControllabilityError):
    """Network generation did not reach the requested mean degree."""

    def __init__(self, message, achieved_degree):
        super().__init__(f"{message} (achieved mean degree {achieved_degree:.3f})")
        self.achieved_degree = achieved_degree


class UnsolvableSystem(ControllabilityError):
    """det(A - zF) vanishes identically, so no input set can help."""
