"""Exception types shared across the package."""


class OamCavityError(Exception):
    """Base class for all package errors."""


class ConfigError(OamCavityError):
    """Configuration rejected; carries the list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NoConvergence(OamCavityError):
    """Steady-state root search found no usable root.

    Attributes
    ----------
    window : (float, float)
        The bracket-scan window in radians that was searched.
    """

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class SingularSystem(OamCavityError):
    """Sideband linear system is numerically singular (parametric-instability point)."""


class NoInteriorMinimum(OamCavityError):
    """No interior transmission minimum found after maximal window expansion."""


class DipTooShallow(OamCavityError):
    """Transmission dip depth is below the measurable floor."""


class ModelNotInvertible(OamCavityError):
    """Calibration curve is not strictly monotone; cannot invert a measurement."""


class OutOfRange(OamCavityError):
    """Measured valley position lies outside the calibration range."""


class FingerprintMismatch(OamCavityError):
    """Calibration file was built from different physical parameters."""


class StepSizeUnderflow(OamCavityError):
    """Time-domain integration blew up (stiff divergence).

    Attributes
    ----------
    t_divergence : float
        Time at which the integrator gave up.
    """

    def __init__(self, message, t_divergence=None):
        super().__init__(message)
        self.t_divergence = t_divergence


class WindowTooShort(OamCavityError):
    """Demodulation window does not cover enough beat periods."""


class PoorFit(OamCavityError):
    """Demodulation residual too large; higher harmonics present (probe too strong)."""


class CalibrationError(OamCavityError):
    """Too many per-charge failures while building a calibration curve."""
