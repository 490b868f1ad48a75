"""Exception hierarchy for the deltabox simulator.

Numerical-failure exceptions (everything derived from ``NumericalError``)
map to CLI exit code 2; configuration problems map to exit code 1.
"""

from __future__ import annotations


class DeltaboxError(Exception):
    """Base class for all deltabox exceptions."""


class ConfigError(DeltaboxError):
    """Invalid or inconsistent run configuration."""


class NumericalError(DeltaboxError):
    """A numerical consistency check failed; results are not trustworthy."""


class RootCountMismatch(NumericalError):
    """Root census in a scan window is incompatible with the free-box count.

    A rank-two barrier perturbation can shift at most two roots across any
    window boundary, so a count outside the interlacing bounds means roots
    were missed (or spurious ones found) at the configured scan resolution.
    """


class NonSimpleRoot(NumericalError):
    """A determinant zero could not be bracketed by a sign change."""


class DegenerateNullSpace(NumericalError):
    """The matching matrix has a (near-)two-dimensional null space.

    Signals a near-double quantization root; reported rather than silently
    resolved.
    """


class SumRuleViolation(NumericalError):
    """Region overlap matrices do not sum to the identity within tolerance."""


class NonPositiveProbability(NumericalError):
    """Nondecay probability dropped to zero or below (truncation failure)."""


class NormDrift(NumericalError):
    """Propagator norm conservation broke beyond roundoff."""


class FittingError(DeltaboxError):
    """Base class for decay-rate extraction failures."""


class WindowTooShort(FittingError):
    """Fit window contains fewer than the minimum number of samples."""


class NonExponentialWindow(FittingError):
    """Log-linear fit residual exceeds tolerance; the window is rejected."""


class PlateauNotFound(FittingError):
    """No decay-rate plateau; automatic window selection refuses to guess."""


class OutOfDomain(DeltaboxError, ValueError):
    """Evaluation requested outside the simulation box."""
