"""Exception types. Every error carries a short machine-readable ``code``."""


class EntropyFlowError(Exception):
    code = "error"


class InvalidBounds(EntropyFlowError, ValueError):
    code = "invalid-bounds"


class InvalidCount(EntropyFlowError, ValueError):
    code = "invalid-count"


class LengthMismatch(EntropyFlowError, ValueError):
    code = "length-mismatch"


class GridMismatch(EntropyFlowError, ValueError):
    code = "grid-mismatch"


class NonpositiveDensity(EntropyFlowError, ValueError):
    code = "nonpositive-density"


class AllBelowFloor(EntropyFlowError, ValueError):
    code = "all-below-floor"


class DegenerateEnergy(EntropyFlowError, ValueError):
    code = "degenerate-energy"


class TargetOutOfRange(EntropyFlowError, ValueError):
    code = "target-out-of-range"


class InfeasibleConstraints(EntropyFlowError, ValueError):
    code = "infeasible-constraints"


class SingularHessian(EntropyFlowError, ValueError):
    code = "singular-hessian"


class StepInstability(EntropyFlowError, ArithmeticError):
    code = "step-instability"


class ProjectionInfeasible(EntropyFlowError, ArithmeticError):
    code = "projection-infeasible"


class ZeroField(EntropyFlowError, ValueError):
    code = "zero-field"


class InvalidExponent(EntropyFlowError, ValueError):
    code = "invalid-exponent"


class ConfigInvalid(EntropyFlowError, ValueError):
    code = "config-invalid"
