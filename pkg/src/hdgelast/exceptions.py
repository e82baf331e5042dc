"""Exception hierarchy used across the package."""


class InputError(ValueError):
    """Malformed caller input (bad axis label, non-unit normal, ...)."""


class ParameterError(ValueError):
    """Physically inadmissible material parameters (non-SPD stiffness, ...)."""


class ConfigError(ValueError):
    """Invalid configuration file or unsupported option combination."""


class MeshValidationError(ValueError):
    """Topologically inconsistent or malformed mesh."""


class AssemblyError(RuntimeError):
    """Element-level assembly failure (SPD violation at a quadrature point, ...)."""


class SolverError(RuntimeError):
    """Global or local linear solve failure."""


class OracleError(RuntimeError):
    """Riemann-problem oracle could not produce a trustworthy answer."""
