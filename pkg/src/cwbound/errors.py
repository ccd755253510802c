"""Exception taxonomy shared by every module.

Three categories drive the CLI exit codes: "validation" for malformed or
inconsistent inputs (exit 1), "constraint" for well-formed inputs whose
mathematical side conditions fail (exit 2), and "solver" for iterative
procedures that stop without reaching their tolerance (exit 3).
"""

from __future__ import annotations


class CwboundError(Exception):
    """Base class; `category` selects the CLI exit code."""

    category = "validation"


# -- validation -------------------------------------------------------------

class NotNormalized(CwboundError):
    """Mass function has negative entries or does not sum to one."""


class PartsMismatch(CwboundError):
    """Multinomial parts are not nonnegative integers summing to n."""


class WrongLevel(CwboundError):
    """Objects from different coarsening levels were mixed."""


class InvalidComponent(CwboundError):
    """Index triple does not sum to a power of two, or indices are negative."""


class Infeasible(CwboundError):
    """No distribution exists with the requested marginals / signs."""


class ZeroMass(CwboundError):
    """An average was requested over an empty or zero-weight selection."""


class MultipleZeros(CwboundError):
    """Operation needs a component with exactly one zero index."""


class InfeasibleSplit(CwboundError):
    """Split distribution puts mass on children with no valid complement."""


class OutOfRange(CwboundError):
    """Index outside the valid range for its level."""


class MissingLowerValue(CwboundError):
    """A required lower-level value entry is absent from the table."""


class MarginMismatch(CwboundError):
    """Region marginal disagrees with its declared split target."""


class ZeroComponent(CwboundError):
    """Component-level routine called on a component with a zero index."""


class NonIntegerCounts(CwboundError):
    """Exact counting requested but implied counts are not integers."""


class TooLarge(CwboundError):
    """Requested explicit tensor exceeds the term budget."""


class UniverseMismatch(CwboundError):
    """Tensor operands have incompatible variable universes."""


class EvenModulus(CwboundError):
    """Hash modulus must be odd."""


class NotAChild(CwboundError):
    """Finer block index does not refine the coarser one."""


class PreconditionUnmet(CwboundError):
    """Caller violated a documented structural precondition."""


class ParameterMismatch(CwboundError):
    """Objects built from different parameter sets were combined."""


class ParseError(CwboundError):
    """Parameter file is not syntactically valid."""


class ValidationError(CwboundError):
    """Parameter file is syntactically valid but semantically inconsistent."""


# -- constraint -------------------------------------------------------------

class ConstraintViolated(CwboundError):
    """A required inequality between derived quantities fails."""

    category = "constraint"


class SymmetryViolated(CwboundError):
    """Distribution lacks the symmetry its value kinds require."""

    category = "constraint"


class NoFeasibleTau(CwboundError):
    """No exponent in the search bracket reaches the target value."""

    category = "constraint"


# -- solver -----------------------------------------------------------------

class SolverFailure(CwboundError):
    """Optimization loop stopped without a certified iterate."""

    category = "solver"


class DidNotConverge(SolverFailure):
    """Iteration cap reached before tolerance."""
