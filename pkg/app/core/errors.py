"""
Exception hierarchy.

Invalid arguments raise plain ``ValueError`` and unknown ids raise
``KeyError``; everything domain-specific derives from ``RelayBeamError``.
"""

from __future__ import annotations


class RelayBeamError(Exception):
    """Base class for all RelayBeam errors."""


class ConfigError(RelayBeamError, ValueError):
    """Invalid or incomplete experiment / trace configuration."""


class TraceFormatError(RelayBeamError, ValueError):
    """A trajectory file could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateChainError(RelayBeamError, ValueError):
    """A two-state Markov chain with no transitions has no unique steady state."""


class TrainingDivergenceError(RelayBeamError, ArithmeticError):
    """A loss or gradient became non-finite during training."""


class InsufficientSamplesError(RelayBeamError, ValueError):
    """Too few samples for the requested statistic."""
