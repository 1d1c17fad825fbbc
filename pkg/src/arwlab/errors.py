"""Exception types shared across the package."""


class ArwError(Exception):
    """Base class for all arwlab errors."""


class TopologyError(ArwError, ValueError):
    """Invalid topology specification."""


class InvalidSizeError(TopologyError):
    """Empty or negative-size vertex set."""


class KernelError(TopologyError):
    """Transition-kernel row fails validation (bad sum, negative entry, ...)."""


class AccessibilityError(TopologyError):
    """Vertices not mutually accessible, or sink unreachable."""


class InstructionIndexError(ArwError, ValueError):
    """Instruction index outside the supported range (j >= 1)."""


class IllegalToppleError(ArwError, ValueError):
    """Toppled a site holding no particle."""


class SinkToppleError(ArwError, ValueError):
    """Attempted to topple the sink."""


class IllegalJumpError(ArwError, ValueError):
    """Jumped a site holding no particle."""


class InvalidDrivingError(ArwError, ValueError):
    """Driving site is the sink or not a vertex."""


class CapExceededError(ArwError, RuntimeError):
    """Termination guard tripped: toppling/round budget exhausted."""


class NodeBudgetError(ArwError, RuntimeError):
    """Brute-force enumeration exceeded its node budget."""


class DomainError(ArwError, ValueError):
    """Operation applied outside its stated domain."""


class StateSpaceTooLargeError(ArwError, ValueError):
    """Plug-in TV estimator requested beyond its size cap."""


class GridTooCoarseError(ArwError, RuntimeError):
    """A bound never crossed the target on the supplied grid."""


class ReplicateBudgetError(GridTooCoarseError):
    """Monte Carlo budget provably too small for the requested bound level."""


class ConfigSchemaError(ArwError, ValueError):
    """Experiment config failed schema validation."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
