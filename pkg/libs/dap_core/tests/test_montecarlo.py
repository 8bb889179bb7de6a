import numpy as np
import pytest

from dap_core.models import SystemParams, UserDistribution
from dap_core.montecarlo import TRIAL_BLOCK, block_rng, default_workers, run_campaign, run_trial

PARAMS = SystemParams(N_total=8, zeta=0.02)
UNIFORM = UserDistribution.uniform()


def test_run_trial_outcome_is_consistent():
    out = run_trial(PARAMS, UNIFORM, np.random.default_rng(7))
    assert out.n + out.n_macro == 8
    assert len(out.rates) == out.n
    assert all(0.0 <= r <= 1.0 for r in out.rates)
    assert all(i <= PARAMS.delta for i in out.i_m)
    assert out.i_mu == pytest.approx(sum(out.terms))


def test_campaign_is_reproducible():
    a = run_campaign(PARAMS, UNIFORM, trials=700, seed=11)
    b = run_campaign(PARAMS, UNIFORM, trials=700, seed=11)
    c = run_campaign(PARAMS, UNIFORM, trials=700, seed=12)
    assert a.equals(b)
    assert not a.equals(c)


def test_campaign_independent_of_worker_count():
    one = run_campaign(PARAMS, UNIFORM, trials=3 * TRIAL_BLOCK + 17, seed=5, workers=1)
    many = run_campaign(PARAMS, UNIFORM, trials=3 * TRIAL_BLOCK + 17, seed=5, workers=4)
    assert one.equals(many)
    assert one.trials == len(one.n) == 3 * TRIAL_BLOCK + 17


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("DAP_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.delenv("DAP_WORKERS")
    assert default_workers() == 1


def test_block_streams_differ():
    assert block_rng(1, 0).random() != block_rng(1, 1).random()
    assert block_rng(1, 0).random() == block_rng(1, 0).random()


def test_selection_bounds_hold_for_every_sample():
    s = run_campaign(PARAMS, UNIFORM, trials=1000, seed=2)
    assert np.all(s.i_m <= PARAMS.delta)
    assert np.all(s.terms < 1.0 / PARAMS.delta * (1 + 1e-12))
    assert np.all((s.rates >= 0) & (s.rates <= 1))


def test_outcomes_match_pooled_arrays():
    s = run_campaign(PARAMS, UNIFORM, trials=600, seed=4)
    outcomes = [s.outcome(k) for k in range(s.trials)]
    assert sum(o.n for o in outcomes) == len(s.rates)
    assert s.mean_tau_d() == pytest.approx(np.mean([o.tau_d for o in outcomes]))
    with_users = [o for o in outcomes if o.n > 0]
    # every trial with DAP users weighs 1
    expected_tau_u = np.mean([np.mean(o.tau_u_samples) for o in with_users])
    assert s.mean_tau_u() == pytest.approx(expected_tau_u)
    expected_rate = np.mean([np.mean(o.rates) for o in with_users])
    assert s.mean_rate() == pytest.approx(expected_rate)


def test_histogram_and_q_hat():
    s = run_campaign(PARAMS, UNIFORM, trials=500, seed=9)
    h = s.histogram()
    assert len(h) == 9 and h.sum() == 500
    assert s.q_hat() == pytest.approx(s.mean_n() / 8)


def test_hotspot_raises_dap_load():
    p = SystemParams(N_total=10, zeta=0.005)
    uniform = run_campaign(p, UNIFORM, trials=1500, seed=1)
    dense = run_campaign(p, UserDistribution.hotspot(1.0, 20.0), trials=1500, seed=1)
    assert dense.mean_n() > uniform.mean_n()


def test_rejects_zero_trials():
    with pytest.raises(ValueError):
        run_campaign(PARAMS, UNIFORM, trials=0)
