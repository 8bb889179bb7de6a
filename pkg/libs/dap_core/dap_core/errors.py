# dap_core/errors.py
from __future__ import annotations


class DapError(Exception):
    """Base class for every error raised by dap_core."""


class ConfigError(DapError, ValueError):
    """Invalid run configuration: unknown key, wrong type or violated constraint."""

    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}{where}: {message}")


class WrongTierError(DapError, ValueError):
    """A user of the wrong tier was passed to an interference computation."""


class InconsistentMomentsError(DapError, ValueError):
    """Second moment below the squared first moment (or non-positive mean)."""


class EmptySampleError(DapError, ValueError):
    """An empirical distribution was requested from no samples."""


# -------------------------- numerical failures (CLI exit 2) --------------------------
class NumericalError(DapError):
    """A computation could not produce a trustworthy number."""


class QuadratureError(NumericalError):
    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")


class DegenerateConditioningError(NumericalError):
    """The conditioning event of a moment has (numerically) zero probability."""


class NoDapUsersError(NumericalError):
    """p_0 == 1: no user can ever select the microcell."""


class NoCrossingError(NumericalError):
    def __init__(self, lo: float, hi: float, gap_lo: float, gap_hi: float):
        self.lo, self.hi = lo, hi
        self.gap_lo, self.gap_hi = gap_lo, gap_hi
        super().__init__(
            f"E{{tau_u}} - E{{tau_d}} does not change sign on [{lo:g}, {hi:g}]: "
            f"gap({lo:g})={gap_lo:.4g}, gap({hi:g})={gap_hi:.4g}"
        )
