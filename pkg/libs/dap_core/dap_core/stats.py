# dap_core/stats.py
from __future__ import annotations

import logging
import math
from typing import Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats as sps

from .errors import EmptySampleError
from .montecarlo import SampleSet

log = logging.getLogger(__name__)

DEFAULT_MIN_COUNT = 200


# -------------------------- empirical distributions --------------------------
class EmpiricalCdf(BaseModel):
    """Right-continuous step function: F(x) = heights[i] for values[i] <= x < values[i+1]."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    heights: np.ndarray

    @model_validator(mode="after")
    def _validate_steps(self) -> "EmpiricalCdf":
        if len(self.values) == 0 or len(self.values) != len(self.heights):
            raise ValueError("values and heights must be non-empty and aligned")
        if np.any(np.diff(self.values) <= 0) or np.any(np.diff(self.heights) < 0):
            raise ValueError("values must increase and heights must not decrease")
        if self.heights[0] <= 0.0 or self.heights[-1] != 1.0:
            raise ValueError("heights must end at 1")
        return self

    @property
    def atoms(self) -> np.ndarray:
        return self.values

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.values, x, side="right")
        out = np.where(idx > 0, self.heights[np.maximum(idx - 1, 0)], 0.0)
        return out if out.ndim else float(out)


CdfLike = Union[EmpiricalCdf, Callable]


def empirical_cdf(samples, weights=None) -> EmpiricalCdf:
    """Empirical CDF of `samples`, optionally with positive per-sample weights."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise EmptySampleError("empirical CDF of an empty sample")
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != s.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and aligned with samples")
    values, inverse = np.unique(s, return_inverse=True)
    mass = np.bincount(inverse.ravel(), weights=w)
    heights = np.cumsum(mass) / mass.sum()
    heights[-1] = 1.0
    return EmpiricalCdf(values=values, heights=np.minimum(heights, 1.0))


def _step_points(cdf: CdfLike) -> np.ndarray:
    atoms = getattr(cdf, "atoms", None)
    return np.empty(0) if atoms is None else np.asarray(atoms, dtype=float)


def ks_distance(a: CdfLike, b: CdfLike) -> float:
    """
    sup |a - b|, evaluated at every step point of either argument and just
    left of it (exact when each argument is a step function or continuous
    between its own atoms).
    """
    points = np.union1d(_step_points(a), _step_points(b))
    if points.size == 0:
        raise ValueError("ks_distance needs at least one step point")
    grid = np.concatenate([points, np.nextafter(points, -np.inf)])
    return float(np.max(np.abs(np.asarray(a(grid)) - np.asarray(b(grid)))))


def rate_cdf(samples: SampleSet) -> EmpiricalCdf:
    """Simulated CDF of r over trials with n >= 1, each trial weighted 1."""
    return empirical_cdf(samples.rates, samples.rate_weights())


def tau_u_cdf(samples: SampleSet) -> EmpiricalCdf:
    return empirical_cdf(samples.tau_u(), samples.rate_weights())


# -------------------------- conditional moments --------------------------
class MomentEstimate(BaseModel):
    quantity: Literal["i_m", "i_mu", "term"]
    n: int | None = None
    count: int = Field(..., ge=0)
    mean: float | None = None
    mean_sq: float | None = None
    se_mean: float | None = None
    se_mean_sq: float | None = None
    available: bool = False


class ConditionalMoments(BaseModel):
    """
    First and second moments of I_M (active Micro user), I_mu given n and the
    per-Macro-user term t = T_mu/T_M, with standard errors.
    """
    min_count: int
    i_m: MomentEstimate
    term: MomentEstimate
    i_m_by_n: dict[int, MomentEstimate] = Field(default_factory=dict)
    i_mu_by_n: dict[int, MomentEstimate] = Field(default_factory=dict)

    def rows(self) -> list[MomentEstimate]:
        return [
            self.i_m, self.term,
            *[self.i_m_by_n[k] for k in sorted(self.i_m_by_n)],
            *[self.i_mu_by_n[k] for k in sorted(self.i_mu_by_n)],
        ]


def _estimate(values: np.ndarray, quantity: str, n: int | None, min_count: int) -> MomentEstimate:
    count = int(values.size)
    if count == 0:
        return MomentEstimate(quantity=quantity, n=n, count=0)
    sq = values * values
    se = (lambda v: float(np.std(v, ddof=1) / math.sqrt(count))) if count > 1 else (lambda v: None)
    return MomentEstimate(
        quantity=quantity, n=n, count=count,
        mean=float(values.mean()), mean_sq=float(sq.mean()),
        se_mean=se(values), se_mean_sq=se(sq),
        available=count >= min_count,
    )


def estimate_conditional_moments(samples: SampleSet, min_count: int = DEFAULT_MIN_COUNT) -> ConditionalMoments:
    n_of_rate = samples.n[samples.rate_trial]
    i_m_by_n = {
        int(k): _estimate(samples.i_m[n_of_rate == k], "i_m", int(k), min_count)
        for k in np.unique(n_of_rate)
    }
    # I_mu given n is only random while Macro users remain
    i_mu_by_n = {
        int(k): _estimate(samples.i_mu_given_n(int(k)), "i_mu", int(k), min_count)
        for k in np.unique(samples.n) if k < samples.N
    }
    moments = ConditionalMoments(
        min_count=min_count,
        i_m=_estimate(samples.i_m, "i_m", None, min_count),
        term=_estimate(samples.terms, "term", None, min_count),
        i_m_by_n=i_m_by_n,
        i_mu_by_n=i_mu_by_n,
    )
    short = [r for r in moments.rows() if not r.available]
    if short:
        log.warning(f"{len(short)} moment estimates below min_count={min_count}; flagged unavailable")
    return moments


# -------------------------- tier-count law --------------------------
class TierCountFit(BaseModel):
    total_variation: float
    chi2: float
    p_value: float
    dof: int


def tier_count_fit(samples: SampleSet, q: float, q_estimated: bool = False) -> TierCountFit:
    """
    Compare the simulated n histogram with Binomial(N, q). Bins expected below 5
    counts are lumped together for the chi-square statistic.
    """
    hist = samples.histogram().astype(float)
    pmf = sps.binom.pmf(np.arange(samples.N + 1), samples.N, q)
    tv = 0.5 * float(np.abs(hist / samples.trials - pmf).sum())

    expected = pmf * samples.trials
    big = expected >= 5.0
    observed_bins = list(hist[big])
    expected_bins = list(expected[big])
    if (~big).any() and expected[~big].sum() > 0:
        observed_bins.append(hist[~big].sum())
        expected_bins.append(expected[~big].sum())
    expected_bins = np.asarray(expected_bins)
    expected_bins *= samples.trials / expected_bins.sum()
    ddof = 1 if q_estimated else 0
    chi2, p_value = sps.chisquare(np.asarray(observed_bins), expected_bins, ddof=ddof)
    return TierCountFit(
        total_variation=tv, chi2=float(chi2), p_value=float(p_value),
        dof=len(observed_bins) - 1 - ddof,
    )
