"""Acceptance-scale checks at the reference parameters; run with `pytest -m slow`."""
import numpy as np
import pytest
from scipy import stats as sps

from dap_core.analytic import analyze, conditional_term_moments, lognormal_from_moments
from dap_core.models import Method, SystemParams, UserDistribution
from dap_core.montecarlo import run_campaign
from dap_core.stats import (
    empirical_cdf, estimate_conditional_moments, ks_distance, rate_cdf, tau_u_cdf, tier_count_fit,
)
from dap_core.sweeps import DEFAULT_ZETA_GRID, compare_hotspot, find_balance, sweep_N, sweep_zeta

pytestmark = pytest.mark.slow

REFERENCE = SystemParams()
UNIFORM = UserDistribution.uniform()


@pytest.mark.parametrize("zeta", [0.001, 0.005, 0.05])
def test_cdfs_agree_with_simulation(zeta):
    params = REFERENCE.with_updates(zeta=zeta)
    samples = run_campaign(params, UNIFORM, trials=10_000, seed=1)
    result = analyze(params)
    assert ks_distance(rate_cdf(samples), result.rate_cdf()) <= 0.05
    assert ks_distance(tau_u_cdf(samples), result.tau_u_cdf()) <= 0.07


def test_rate_given_single_dap_user():
    params = REFERENCE
    samples = run_campaign(params, UNIFORM, trials=10_000, seed=1)
    result = analyze(params)
    single = samples.rates[samples.n[samples.rate_trial] == 1]
    assert ks_distance(empirical_cdf(single), result.rates.for_n(1).cdf) <= 0.05


def test_fitted_lognormal_matches_simulated_im():
    samples = run_campaign(REFERENCE, UNIFORM, trials=100_000, seed=2)
    m = estimate_conditional_moments(samples)
    fit = lognormal_from_moments(m.i_m.mean, m.i_m.mean_sq)
    fitted = sps.lognorm(s=fit.sigma, scale=np.exp(fit.m))
    # I_M given Micro is capped at delta; the two-moment fit is not, so KS settles near 0.16
    assert np.all(samples.i_m <= REFERENCE.delta)
    assert fitted.sf(REFERENCE.delta) > 0
    assert 0.1 <= ks_distance(empirical_cdf(samples.i_m), fitted.cdf) <= 0.2


def test_tier_counts_are_binomial():
    samples = run_campaign(REFERENCE, UNIFORM, trials=100_000, seed=3)
    result = analyze(REFERENCE)
    assert tier_count_fit(samples, result.q).total_variation <= 0.02
    se = np.sqrt(result.q * (1 - result.q) / (samples.trials * REFERENCE.N_total))
    assert abs(samples.q_hat() - result.q) <= 3 * se


@pytest.mark.parametrize("zeta", [0.005, 0.05])
def test_quadrature_moments_match_simulation(zeta):
    params = REFERENCE.with_updates(zeta=zeta)
    samples = run_campaign(params, UNIFORM, trials=100_000, seed=4)
    measured = estimate_conditional_moments(samples)
    terms = conditional_term_moments(params)
    assert terms.i_m_E1 == pytest.approx(measured.i_m.mean, rel=0.02)
    assert terms.t_E1 == pytest.approx(measured.term.mean, rel=0.02)
    assert terms.i_m_E2 == pytest.approx(measured.i_m.mean_sq, rel=0.02)
    assert terms.t_E2 == pytest.approx(measured.term.mean_sq, rel=0.02)


def test_throughput_trends():
    rows = sweep_zeta(REFERENCE, DEFAULT_ZETA_GRID, trials=10_000, seed=1)
    assert all(r.status == "ok" for r in rows)
    tau_u = np.array([r.E_tau_u_analytic for r in rows])
    tau_d = np.array([r.E_tau_d_analytic for r in rows])
    assert np.all(np.diff(tau_u) < 1e-9) and np.all(np.diff(tau_d) > -1e-9)
    for column, sign in (("E_tau_u_sim", -1), ("E_tau_d_sim", 1)):
        sim = np.array([getattr(r, column) for r in rows])
        bad = sign * np.diff(sim) < 0
        assert bad.sum() <= 1 and np.all(np.abs(np.diff(sim)[bad]) <= 0.005)
    for r in rows:
        assert abs(r.E_tau_u_sim - r.E_tau_u_analytic) <= 0.05
        assert abs(r.E_tau_d_sim - r.E_tau_d_analytic) <= 0.05


def test_balance_point_both_paths():
    analytic = find_balance(REFERENCE, Method.analytic)
    simulated = find_balance(REFERENCE, Method.simulation, trials=10_000, seed=1)
    for point in (analytic, simulated):
        assert 0.003 <= point.zeta_star <= 0.02
    assert abs(analytic.tau_star - simulated.tau_star) <= 0.05
    again = analyze(REFERENCE.with_updates(zeta=analytic.zeta_star))
    assert abs(again.E_tau_u - again.E_tau_d) <= 0.01


def test_balance_point_falls_with_users():
    points = sweep_N(REFERENCE, [10, 14, 18, 22, 26], Method.analytic)
    assert all(p.found for p in points)
    zetas = [p.zeta_star for p in points]
    taus = [p.tau_star for p in points]
    # one bisection width of slack between neighbours
    assert all(b <= a * 10 ** 0.01 for a, b in zip(zetas, zetas[1:]))
    assert all(b <= a + 1e-3 for a, b in zip(taus, taus[1:]))
    assert taus[0] > taus[-1]


def test_hotspot_lowers_balance_point():
    cmp = compare_hotspot(REFERENCE, UserDistribution.hotspot(0.5, 100.0), Method.analytic)
    assert cmp.delta_zeta < 0 and cmp.delta_tau < 0
