"""Exception taxonomy shared across the solver stack.

Exit-code mapping used by the CLI: ConfigError -> 2, runtime degeneracies
(DegenerateInterfaceError, MapDegeneracyError, DivergenceError,
DegenerateDataError, SolverError, OracleDomainError) -> 3, OSError -> 4.
"""


class StefanError(Exception):
    """Base class for all stefan2p errors."""


class ConfigError(StefanError):
    """Invalid configuration. Carries the full list of violations."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GeometryError(StefanError):
    """Rejected geometric configuration (non-simple curve, bad radii)."""


class DegenerateInterfaceError(StefanError):
    """Height state left the normal bundle (1 + H h <= 0 or amplitude bound)."""


class MapDegeneracyError(StefanError):
    """Jacobian determinant lost positivity at a named grid node."""


class ConditioningError(StefanError):
    """Modal elliptic system too ill-conditioned to trust."""


class SolverError(StefanError):
    """Iterative solver failed to converge."""


class DivergenceError(StefanError):
    """NaN detected during time stepping; carries the step index."""


class CflError(StefanError):
    """Advective CFL bound violated and policy is abort."""


class DegenerateDataError(StefanError):
    """Initial data degenerate for a derived constant (e.g. c1 = 0)."""


class WeightUndefinedError(StefanError):
    """Weight field undefined because the Rayleigh-Taylor bound failed."""


class UnsupportedOrderError(StefanError):
    """Requested derivative order beyond grid support without surrogate flag."""


class OracleDomainError(StefanError):
    """Reference oracle left its domain of validity (front collision etc.)."""
