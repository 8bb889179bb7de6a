# dap_core/__init__.py
__version__ = "0.1.0"

from .models import (
    BalancePoint, HotspotComparison, LognormalParams, Method, RateDistribution, SweepRow,
    SystemParams, Tier, TierCountDistribution, TrialOutcome, UserDistribution,
)
from .units import db_to_linear, linear_to_db
from .propagation import path_gain, select_base
from .interference import cross_tier_interference, feasible, max_rate, pole_capacity, solve_powers
from .montecarlo import run_campaign, run_trial
from .analytic import analyze, lognormal_from_moments, selection_probability
from .sweeps import compare_hotspot, find_balance, sweep_N, sweep_zeta
