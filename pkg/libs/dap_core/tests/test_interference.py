import numpy as np
import pytest

from dap_core.errors import WrongTierError
from dap_core.interference import (
    cross_tier_interference, feasible, interference_IM, interference_Imu, max_rate, pole_capacity, solve_powers,
)
from dap_core.models import (
    CrossTierInterference, Infeasible, Position, PowerSolution, SystemParams, Tier, UserRealization,
)
from dap_core.units import db_to_linear


def _user(tier: Tier, T_M: float, T_mu: float) -> UserRealization:
    return UserRealization(position=Position(x=0, y=0), chi_M=0, chi_mu=0, T_M=T_M, T_mu=T_mu, tier=tier)


def test_pole_capacity_reference():
    assert pole_capacity(128, db_to_linear(7)) == pytest.approx(26.539, abs=1e-3)
    with pytest.raises(ValueError):
        pole_capacity(0, 1)


def test_cross_tier_interference():
    assert interference_IM(_user(Tier.micro, 1.0, 50.0)) == pytest.approx(0.02)
    macros = [_user(Tier.macro, 10.0, 1.0), _user(Tier.macro, 4.0, 2.0)]
    assert interference_Imu(macros) == pytest.approx(0.6)
    assert interference_Imu([]) == 0.0


def test_cross_tier_interference_pairs_both_terms():
    dap_user = _user(Tier.micro, 1.0, 50.0)
    macros = [_user(Tier.macro, 10.0, 1.0), _user(Tier.macro, 4.0, 2.0)]
    ci = cross_tier_interference(dap_user, macros)
    assert isinstance(ci, CrossTierInterference)
    assert ci.I_M == pytest.approx(0.02) and ci.I_mu == pytest.approx(0.6)
    with pytest.raises(WrongTierError):
        cross_tier_interference(dap_user, [dap_user])


def test_wrong_tier_rejected():
    with pytest.raises(WrongTierError):
        interference_IM(_user(Tier.macro, 1.0, 1.0))
    with pytest.raises(WrongTierError):
        interference_Imu([_user(Tier.micro, 1.0, 1.0)])


def test_max_rate_cases():
    K = 26.5
    # no Macro users: capped at 1
    assert max_rate(K, 26, 26, 7.0, 0.01, 0.0) == 1.0
    # load beyond the pole: infeasible
    assert max_rate(K, 30, 1, 7.0, 0.01, 2.0) == 0.0
    assert max_rate(K, 26, 1, 7.0, 0.05, 20.0) == pytest.approx(1.5 / 7.0)
    assert max_rate(K, 26, 1, 7.0, 0.001, 1.0) == 1.0


def test_max_rate_is_the_feasibility_boundary():
    K, gmu, I_M, I_mu = 26.5, 7.0, 0.05, 20.0
    r = max_rate(K, 26, 1, gmu, I_M, I_mu)
    assert feasible(K, 25, r, gmu, I_M, I_mu)
    assert not feasible(K, 25, r * 1.01, gmu, I_M, I_mu)
    with pytest.raises(ValueError):
        feasible(K, 25, 0.0, gmu, I_M, I_mu)


def test_solve_powers_meets_both_targets():
    p = SystemParams()
    sol = solve_powers(p, N_M=20, r=0.5, I_M=0.02, I_mu=3.0)
    assert isinstance(sol, PowerSolution)
    G, gM, gmu, eta = p.spreading_factor_G, p.gamma_M, p.gamma_mu, p.noise_power_etaW
    assert G * sol.S_M == pytest.approx(gM * (19 * sol.S_M + sol.S_mu * 0.02 + eta))
    assert sol.S_mu / 0.5 == pytest.approx(gmu * (sol.S_M * 3.0 + eta))


def test_solve_powers_infeasible():
    assert isinstance(solve_powers(SystemParams(), N_M=30, r=1.0, I_M=0.05, I_mu=30.0), Infeasible)


@pytest.mark.parametrize("eta", [0.1, 1.0, 10.0])
def test_power_solution_iff_feasible(eta):
    params = SystemParams(noise_power_etaW=eta)
    rng = np.random.default_rng(int(eta * 10))
    outcomes = []
    for _ in range(1000):
        N_M = int(rng.integers(1, 31))
        r = float(rng.uniform(1e-3, 1.0))
        I_M = float(rng.uniform(1e-4, params.delta))
        I_mu = float(rng.lognormal(1.0, 1.5))
        by_power = isinstance(solve_powers(params, N_M, r, I_M, I_mu), PowerSolution)
        by_condition = feasible(params.pole_capacity, N_M, r, params.gamma_mu, I_M, I_mu)
        assert by_power == by_condition
        outcomes.append(by_power)
    assert any(outcomes) and not all(outcomes)
