"""Exception hierarchy; the CLI maps these onto exit codes."""


class HybridFdmError(Exception):
    """Base class for all solver errors."""


class ReductionError(HybridFdmError):
    """Invalid inputs to the derivative-reduction recursion."""


class MlsError(HybridFdmError):
    """Degenerate sample geometry or over-ambitious derivative request."""


class StencilError(HybridFdmError):
    """Recursive stencil solve failed (residual or feasibility)."""


class GeometryError(HybridFdmError):
    """Interface geometry inconsistent with the grid."""


class AssemblyError(HybridFdmError):
    """Global system assembly failed."""


class ConfigError(HybridFdmError):
    """Malformed problem configuration."""
