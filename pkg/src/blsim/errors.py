"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration and usage problems exit
with 1, numerical failures with 2, failed certificates with 3.
"""


class BLSimError(Exception):
    """Base class for every error raised by the package."""


class DomainError(BLSimError, ValueError):
    """An argument lies outside the domain of a mathematical function."""


class ModelError(BLSimError, ValueError):
    """A flux model cannot be built from the given parameters."""


class StructuralError(BLSimError, ValueError):
    """Arrays are not shaped for the grid they are used with."""


class DataError(BLSimError, ValueError):
    """Boundary or initial data fail a compatibility check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(BLSimError, ValueError):
    """A configuration file is malformed or incomplete."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NumericError(BLSimError, RuntimeError):
    """A computation produced non-finite values or broke an invariant."""


class SolverError(NumericError):
    """A linear or saddle-point solve did not converge."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class CFLError(NumericError):
    """The requested time step exceeds the stability bound."""

    def __init__(self, dt, bound):
        super().__init__(f"time step {dt:.6e} exceeds the stable bound {bound:.6e}")
        self.dt = dt
        self.bound = bound


class OracleError(BLSimError, RuntimeError):
    """An exact-solution construction failed (for example, no bracket)."""


class CertificationError(BLSimError):
    """A diagnostic certificate failed."""
