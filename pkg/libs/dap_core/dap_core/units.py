# dap_core/units.py
from __future__ import annotations

import math


def db_to_linear(value_db: float) -> float:
    """
    Convert a power ratio in dB to linear.

      - 7.0  -> 5.0119
      - 0.0  -> 1.0
    """
    return 10.0 ** (float(value_db) / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError(f"cannot express non-positive ratio {value} in dB")
    return 10.0 * math.log10(value)


# natural-log standard deviation of a dB-Gaussian term
DB_TO_NEPER = math.log(10.0) / 10.0


def db_sigma_to_log_sigma(sigma_db: float) -> float:
    """Std of ln(10^(chi/10)) when chi ~ N(0, sigma_db^2)."""
    return DB_TO_NEPER * float(sigma_db)
