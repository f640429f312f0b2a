"""Exception types raised across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain of the operation."""


class RejectionError(ValueError):
    """Input data violates a structural precondition (e.g. tied values)."""


class RefusalError(ValueError):
    """The request is well-formed but deliberately refused (too large, too few bins...)."""


class StructuralError(ValueError):
    """An internal object is malformed, e.g. an insertion sequence with no leading cycle start."""


class SamplerOverflowError(RuntimeError):
    """A sampler exceeded its iteration guard instead of terminating."""
