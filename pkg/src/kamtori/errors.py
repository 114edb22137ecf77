"""Exception types shared across the toolkit."""


class KamtoriError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(KamtoriError, ValueError):
    """State dimension does not match the system's degrees of freedom."""


class DegenerateAngleError(KamtoriError, ValueError):
    """Angle undefined because an action is zero (x_i = y_i = 0)."""


class OutOfRegimeError(KamtoriError, ValueError):
    """Requested quantity is undefined in this dynamical regime."""


class NonConvergenceError(KamtoriError, RuntimeError):
    """Implicit solve failed to reach the residual tolerance.

    Attributes
    ----------
    residual : float
        Infinity norm of the last residual.
    step_index : int or None
        Index of the failing step when raised from a trajectory run.
    """

    def __init__(self, message, residual=float("nan"), step_index=None):
        super().__init__(message)
        self.residual = residual
        self.step_index = step_index


class DivergenceError(KamtoriError, RuntimeError):
    """A step produced non-finite state components."""


class RefinementError(KamtoriError, RuntimeError):
    """Peak refinement could not locate a local maximum in the bracket."""


class LatticeSizeError(KamtoriError, ValueError):
    """Requested integer-lattice enumeration is too large."""


class ConfigError(KamtoriError, ValueError):
    """Invalid run configuration.

    Attributes
    ----------
    line : int or None
        1-based line in the config text where the problem was found.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedDimensionError(KamtoriError, ValueError):
    """Operation only defined for a specific number of degrees of freedom."""
