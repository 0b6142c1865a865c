#!/usr/bin/env python3
"""
decoscatter - Error Types
Exception hierarchy shared by the numerical modules and the CLI.
ConfigError maps to exit code 2; NumericalError and ArtifactError map to exit code 3.
"""

from typing import Optional

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class DecoScatterError(Exception):
    """Base class for every error raised by decoscatter."""

    exit_code = EXIT_NUMERICAL_FAILURE


class ConfigError(DecoScatterError):
    """Experiment configuration does not match the schema."""

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class NumericalError(DecoScatterError):
    """A computation could not produce a trustworthy result."""


class InvalidParameterError(NumericalError, ValueError):
    """Model, packet or grid parameter outside its domain."""


class InvalidMomentumError(NumericalError, ValueError):
    """Relative momentum must be strictly positive."""


class UndefinedPhaseError(NumericalError, ValueError):
    """Reflected phase requested where the reflection amplitude vanishes."""


class CoverageError(NumericalError):
    """Momentum grid does not cover the packet support."""


class PreconditionError(NumericalError):
    """An operation was called outside its regime of validity."""


class InvalidStateError(NumericalError):
    """Density matrix violates Hermiticity, positivity or trace."""


class BoundaryLeakError(NumericalError):
    """Wavefunction reached the walls of the oracle box."""


class NonConvergenceError(NumericalError):
    """Norm or trace drifted beyond tolerance during time stepping."""


class StalenessError(NumericalError):
    """Channel probabilities requested before scattering completed."""


class ArtifactError(DecoScatterError):
    """An output table could not be written as declared."""
