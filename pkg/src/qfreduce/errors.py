"""Exception types raised across the package."""


class ReductionToolError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class DimensionError(ReductionToolError, ValueError):
    pass


class ConfigError(ReductionToolError, ValueError):
    pass


class StateError(ReductionToolError, ValueError):
    pass


class NotClosedError(ReductionToolError):
    """A subspace that should be invariant under a generator is not."""


class DecompositionError(ReductionToolError):
    pass


class DomainError(ReductionToolError, ValueError):
    pass


class ContainmentError(ReductionToolError):
    """The chosen algebra does not contain the observable space."""


class IntegrationError(ReductionToolError):
    pass


class DegeneracyError(IntegrationError):
    pass


class ParseError(ReductionToolError, ValueError):
    pass
