#!/usr/bin/env python3
"""
Exception Hierarchy
===================

All errors raised by the simulator derive from IonGroverError so callers can
catch one type. Configuration problems are also ValueErrors; numerical
failures carry enough context to report how far a run got.
"""

from typing import Any, Optional


class IonGroverError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(IonGroverError, ValueError):
    """Invalid input: ion counts, pulse parameters, bounds, run documents."""


class InvalidMarkedStateError(ConfigurationError):
    """Marked bitstring has the wrong length, characters or excitation count."""

    def __init__(self, bits: str, reason: str) -> None:
        super().__init__(f"invalid marked state {bits!r}: {reason}")
        self.bits = bits
        self.reason = reason


class NumericalError(IonGroverError):
    """Base class for failures of a numerical procedure."""


class NumericalDegeneracyError(NumericalError):
    """An eigenspace could not be resolved into the expected chains."""


class IntegrationError(NumericalError):
    """Time integration failed or ran out of its evaluation budget."""

    def __init__(
        self,
        message: str,
        *,
        achieved_tolerance: Optional[float] = None,
        tau_reached: Optional[float] = None,
        step: Optional[int] = None,
    ) -> None:
        details = []
        if achieved_tolerance is not None:
            details.append(f"tolerance={achieved_tolerance:.1e}")
        if tau_reached is not None:
            details.append(f"tau={tau_reached:.4f}")
        if step is not None:
            details.append(f"step={step}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")
        self.message = message
        self.achieved_tolerance = achieved_tolerance
        self.tau_reached = tau_reached
        self.step = step

    def at_step(self, step: int) -> "IntegrationError":
        """Copy of this error annotated with the Grover step it occurred in."""
        return IntegrationError(
            self.message,
            achieved_tolerance=self.achieved_tolerance,
            tau_reached=self.tau_reached,
            step=step,
        )


class TuningFailedError(NumericalError):
    """No tuner candidate reached the objective threshold."""

    def __init__(self, message: str, best: Any) -> None:
        super().__init__(message)
        self.best = best
