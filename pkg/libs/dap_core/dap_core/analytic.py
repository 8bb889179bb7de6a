# dap_core/analytic.py
"""
Lognormal approximation of the DAP rate.

Tier counts are Binomial(N, q). Given n, I_M and I_mu are fitted as independent
lognormals from their first two moments, so Z = (K - N + n)/(Gamma_mu I_M I_mu)
is lognormal and r = min(Z, 1) is a truncated lognormal. Mixing over n gives the
CDFs of r and tau_u and the expected throughputs.
"""
from __future__ import annotations

import logging
import math
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, special
from scipy import stats as sps

from .errors import DegenerateConditioningError, InconsistentMomentsError, NoDapUsersError
from .models import (
    LognormalParams,
    RateConditional,
    RateDistribution,
    SystemParams,
    TierCountDistribution,
    UserDistribution,
)
from .propagation import mean_gains
from .quadrature import position_average
from .stats import ConditionalMoments
from .units import DB_TO_NEPER

log = logging.getLogger(__name__)

Q_ATOL = 1e-5
MOMENT_RTOL = 1e-5
THROUGHPUT_ATOL = 1e-6
DEGENERATE_PROBABILITY = 1e-12


def lognormal_from_moments(E1: float, E2: float) -> LognormalParams:
    """
    Lognormal (m, sigma) with E{X} = E1 and E{X^2} = E2:
    m = ln(E1^4/E2)/2, sigma = sqrt(ln(E2/E1^2)).
    """
    if not E1 > 0:
        raise InconsistentMomentsError(f"first moment must be positive, got {E1}")
    if E2 < E1 * E1:
        raise InconsistentMomentsError(f"E2={E2} < E1^2={E1 * E1}")
    variance = max(math.log(E2 / (E1 * E1)), 0.0)
    return LognormalParams(m=math.log(E1) - 0.5 * variance, sigma=math.sqrt(variance))


def tier_count_distribution(N: int, q: float) -> TierCountDistribution:
    """p_n = C(N, n) q^n (1 - q)^(N - n): users pick their base independently."""
    p = sps.binom.pmf(np.arange(N + 1), N, q)
    return TierCountDistribution(q=q, p=(p / p.sum()).tolist())


# -------------------------- position integrals --------------------------
def _selection_integrand(params: SystemParams):
    delta = params.delta
    sigma_db = params.combined_shadow_sigma_db

    def integrand(X, Y):
        T_M, T_mu = mean_gains(params, X, Y)
        margin_db = 10.0 * np.log10(delta * T_mu / T_M)
        if sigma_db == 0.0:
            return (margin_db >= 0.0).astype(float)
        return special.ndtr(margin_db / sigma_db)

    return integrand


def selection_probability(params: SystemParams, dist: UserDistribution | None = None) -> float:
    """
    q = P(a user selects the DAP): chi_M - chi_mu ~ N(0, sigma_M^2 + sigma_mu^2)
    must not exceed the dB margin 10 log10(delta Tbar_mu / Tbar_M).
    """
    dist = dist or UserDistribution.uniform()
    value = position_average(_selection_integrand(params), params, dist, rtol=0.0, atol=Q_ATOL)
    return float(np.clip(value[0], 0.0, 1.0))


def _partial_moment(k: int, m, s: float, log_c: float, strict: bool):
    """E{X^k 1[X < c]} for ln X ~ N(m, s^2)."""
    if s == 0.0:
        hit = (m < log_c) if strict else (m <= log_c)
        return np.where(hit, np.exp(k * m), 0.0)
    return np.exp(k * m + 0.5 * (k * s) ** 2 + special.log_ndtr((log_c - m - k * s * s) / s))


def _term_integrand(params: SystemParams):
    s = DB_TO_NEPER * params.combined_shadow_sigma_db
    log_delta = math.log(params.delta)

    def integrand(X, Y):
        T_M, T_mu = mean_gains(params, X, Y)
        m_t = np.log(T_mu / T_M)   # ln t, t = T_mu/T_M of a Macro user
        m_i = -m_t                 # ln I_M of a Micro user
        if s == 0.0:
            p_micro = (m_i <= log_delta).astype(float)
        else:
            p_micro = special.ndtr((log_delta - m_i) / s)
        return np.stack([
            p_micro,
            _partial_moment(1, m_t, s, -log_delta, strict=True),
            _partial_moment(2, m_t, s, -log_delta, strict=True),
            _partial_moment(1, m_i, s, log_delta, strict=False),
            _partial_moment(2, m_i, s, log_delta, strict=False),
        ])

    return integrand


class TermMoments(BaseModel):
    """E{t^k | Macro} and E{I_M^k | Micro}, k = 1, 2, plus q."""
    model_config = ConfigDict(frozen=True)

    q: float
    t_E1: float
    t_E2: float
    i_m_E1: float
    i_m_E2: float


def _term_averages(params: SystemParams, dist: UserDistribution) -> np.ndarray:
    return position_average(_term_integrand(params), params, dist, rtol=MOMENT_RTOL, atol=1e-14)


def _normalise_terms(raw: np.ndarray) -> TermMoments:
    q = float(np.clip(raw[0], 0.0, 1.0))
    p_macro = 1.0 - q
    if q < DEGENERATE_PROBABILITY:
        raise DegenerateConditioningError(f"P(Micro)={q:.3g}: I_M moments undefined")
    if p_macro < DEGENERATE_PROBABILITY:
        raise DegenerateConditioningError(f"P(Macro)={p_macro:.3g}: I_mu term moments undefined")
    return TermMoments(
        q=q,
        t_E1=float(raw[1] / p_macro), t_E2=float(raw[2] / p_macro),
        i_m_E1=float(raw[3] / q), i_m_E2=float(raw[4] / q),
    )


def conditional_term_moments(params: SystemParams, dist: UserDistribution | None = None) -> TermMoments:
    """
    Per position, t = T_mu/T_M is lognormal with log-mean ln(Tbar_mu/Tbar_M) and
    log-sd (ln10/10) sqrt(sigma_M^2 + sigma_mu^2). Macro conditioning truncates t
    below 1/delta, Micro conditioning truncates I_M = 1/t at delta; the truncated
    partial moments are averaged over position and divided by the tier probability.
    """
    return _normalise_terms(_term_averages(params, dist or UserDistribution.uniform()))


def compose_Imu_moments(N_M: int, term_E1: float, term_E2: float) -> tuple[float, float]:
    """Moments of a sum of N_M i.i.d. terms."""
    if N_M < 0:
        raise ValueError("N_M must be non-negative")
    return N_M * term_E1, N_M * term_E2 + N_M * (N_M - 1) * term_E1 ** 2


# -------------------------- rate law --------------------------
def rate_cdf_given_n(
    params: SystemParams, n: int, ln_im: LognormalParams | None, ln_imu: LognormalParams | None
) -> RateConditional:
    N = params.N_total
    if not 1 <= n <= N:
        raise ValueError(f"n={n} outside 1..{N}")
    headroom = params.pole_capacity - N + n
    if headroom <= 0:
        return RateConditional(n=n, kind="point", atom=0.0)
    if n == N:
        return RateConditional(n=n, kind="point", atom=1.0)
    if ln_im is None or ln_imu is None:
        raise ValueError("lognormal parameters of I_M and I_mu are required when Macro users exist")
    mu_z = math.log(headroom / params.gamma_mu) - ln_im.m - ln_imu.m
    # I_M (active Micro user) and I_mu (Macro users) involve distinct independent users
    sigma_z = math.hypot(ln_im.sigma, ln_imu.sigma)
    return RateConditional(n=n, kind="lognormal", mu_z=mu_z, sigma_z=sigma_z)


class LognormalFit(BaseModel):
    """One lognormal fit used by the rate law and the moments it came from."""
    model_config = ConfigDict(frozen=True)

    quantity: Literal["i_m", "i_mu"]
    n: int | None = None
    source: Literal["quadrature", "montecarlo"]
    E1: float
    E2: float
    fit: LognormalParams


def _fitted(quantity: str, n: int | None, source: str, E1: float, E2: float) -> LognormalFit:
    return LognormalFit(
        quantity=quantity, n=n, source=source, E1=E1, E2=E2, fit=lognormal_from_moments(E1, E2),
    )


def lognormal_fits(
    params: SystemParams, terms: TermMoments, measured: ConditionalMoments | None = None
) -> Iterator[LognormalFit]:
    """
    I_M, then I_mu for every n with Macro users and positive headroom. With
    `measured`, Monte Carlo moments replace the quadrature ones wherever the
    estimate is available.
    """
    if measured is not None and measured.i_m.available:
        yield _fitted("i_m", None, "montecarlo", measured.i_m.mean, measured.i_m.mean_sq)
    else:
        yield _fitted("i_m", None, "quadrature", terms.i_m_E1, terms.i_m_E2)
    N = params.N_total
    for n in range(1, N):
        if params.pole_capacity - N + n <= 0:
            continue
        estimate = measured.i_mu_by_n.get(n) if measured is not None else None
        if estimate is not None and estimate.available:
            yield _fitted("i_mu", n, "montecarlo", estimate.mean, estimate.mean_sq)
        else:
            yield _fitted("i_mu", n, "quadrature", *compose_Imu_moments(N - n, terms.t_E1, terms.t_E2))


def build_rate_distribution(
    params: SystemParams, terms: TermMoments, measured: ConditionalMoments | None = None
) -> RateDistribution:
    """F(r|n) for n = 1..N from the fits of `lognormal_fits`."""
    fits = {(f.quantity, f.n): f.fit for f in lognormal_fits(params, terms, measured)}
    ln_im = fits[("i_m", None)]
    conditionals = {
        n: rate_cdf_given_n(params, n, ln_im, fits.get(("i_mu", n)))
        for n in range(1, params.N_total + 1)
    }
    return RateDistribution(N=params.N_total, conditionals=conditionals)


class MixtureCdf:
    """
    sum_{n>=1} p_n F(scale_n x | n) / (1 - p_0). scale_n = 1 gives the CDF of r,
    scale_n = n the CDF of tau_u.
    """

    def __init__(self, pn: TierCountDistribution, rates: RateDistribution, per_user: bool):
        mass = float(sum(pn.p[1:]))
        if pn.p0 >= 1.0 or mass <= 0.0:
            raise NoDapUsersError("p_0 = 1: no user ever selects the DAP")
        self.per_user = per_user
        self._terms = [
            (pn.p[n] / mass, rates.for_n(n), float(n) if per_user else 1.0)
            for n in range(1, pn.N + 1) if pn.p[n] > 0.0
        ]

    @property
    def atoms(self) -> np.ndarray:
        points = set()
        for _, cond, scale in self._terms:
            if cond.kind == "point":
                points.add(cond.atom / scale)
            else:
                points.add(1.0 / scale)
                if cond.sigma_z == 0.0:
                    points.add(min(math.exp(cond.mu_z), 1.0) / scale)
        return np.array(sorted(points))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for weight, cond, scale in self._terms:
            out = out + weight * np.asarray(cond.cdf(x * scale))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)


def mixture_rate_cdf(pn: TierCountDistribution, rates: RateDistribution) -> MixtureCdf:
    return MixtureCdf(pn, rates, per_user=False)


def user_throughput_cdf(pn: TierCountDistribution, rates: RateDistribution) -> MixtureCdf:
    return MixtureCdf(pn, rates, per_user=True)


def conditional_mean_rates(rates: RateDistribution) -> dict[int, float]:
    """E{r|n} for n = 1..N."""
    return {n: cond.mean() for n, cond in rates.conditionals.items()}


def expected_throughputs(pn: TierCountDistribution, rates: RateDistribution) -> tuple[float, float]:
    """
    E{tau_d} = sum_n p_n E{r|n} (n = 0 contributes 0);
    E{tau_u} = integral_0^1 (1 - F_tau_u(t)) dt, taken as 0 when p_0 = 1.
    """
    means = conditional_mean_rates(rates)
    e_tau_d = float(sum(pn.p[n] * means[n] for n in range(1, pn.N + 1)))
    if pn.p0 >= 1.0:
        return 0.0, 0.0
    cdf = user_throughput_cdf(pn, rates)
    breaks = [a for a in cdf.atoms if 0.0 < a < 1.0]
    e_tau_u, _ = integrate.quad(
        lambda t: 1.0 - cdf(t), 0.0, 1.0,
        points=breaks or None, epsabs=THROUGHPUT_ATOL, limit=max(200, 4 * len(breaks)),
    )
    return float(np.clip(e_tau_u, 0.0, 1.0)), float(np.clip(e_tau_d, 0.0, 1.0))


def expected_user_throughput_closed_form(pn: TierCountDistribution, rates: RateDistribution) -> float:
    """sum_{n>=1} p_n E{r|n}/n / (1 - p_0)."""
    means = conditional_mean_rates(rates)
    mass = float(sum(pn.p[1:]))
    return float(sum(pn.p[n] * means[n] / n for n in range(1, pn.N + 1)) / mass)


# -------------------------- full pipeline --------------------------
class AnalyticResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: SystemParams
    dist: UserDistribution
    q: float
    pn: TierCountDistribution
    terms: TermMoments
    rates: RateDistribution
    measured: ConditionalMoments | None = None
    E_tau_u: float
    E_tau_d: float

    @property
    def mean_n(self) -> float:
        return self.pn.mean()

    def rate_cdf(self) -> MixtureCdf:
        return mixture_rate_cdf(self.pn, self.rates)

    def tau_u_cdf(self) -> MixtureCdf:
        return user_throughput_cdf(self.pn, self.rates)

    def lognormal_fits(self) -> list[LognormalFit]:
        """The fits behind `rates`, with the moments and source of each."""
        return list(lognormal_fits(self.params, self.terms, self.measured))


def analyze(
    params: SystemParams,
    dist: UserDistribution | None = None,
    measured: ConditionalMoments | None = None,
) -> AnalyticResult:
    dist = dist or UserDistribution.uniform()
    # q alone first: the truncated moments are ill-posed when nobody selects the DAP
    q_coarse = selection_probability(params, dist)
    if q_coarse <= Q_ATOL or tier_count_distribution(params.N_total, q_coarse).p0 >= 1.0:
        raise NoDapUsersError(
            f"p_0 = 1 at zeta={params.zeta:g} (q={q_coarse:.3g} within tolerance {Q_ATOL:g}): "
            "no user ever selects the DAP"
        )
    terms = _normalise_terms(_term_averages(params, dist))
    q = terms.q
    pn = tier_count_distribution(params.N_total, q)
    rates = build_rate_distribution(params, terms, measured)
    e_tau_u, e_tau_d = expected_throughputs(pn, rates)
    log.debug(f"analytic zeta={params.zeta:g} N={params.N_total}: q={q:.5g} E_tau_u={e_tau_u:.4f} E_tau_d={e_tau_d:.4f}")
    return AnalyticResult(
        params=params, dist=dist, q=q, pn=pn, terms=terms, rates=rates, measured=measured,
        E_tau_u=e_tau_u, E_tau_d=e_tau_d,
    )
