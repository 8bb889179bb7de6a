# dap_core/interference.py
from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import WrongTierError
from .models import CrossTierInterference, Infeasible, PowerSolution, SystemParams, Tier, UserRealization

# relative slack on the feasibility boundary (division chains lose exactness)
FEASIBILITY_RTOL = 1e-9


def pole_capacity(G: float, gamma_M: float) -> float:
    """Single-cell pole capacity K = G/Gamma_M + 1."""
    if G <= 0 or gamma_M <= 0:
        raise ValueError("G and gamma_M must be positive")
    return G / gamma_M + 1.0


def interference_IM(dap_user: UserRealization) -> float:
    """Normalised interference of the active DAP user into the macro base."""
    if dap_user.tier != Tier.micro:
        raise WrongTierError("I_M is defined for the active Micro-tier user only")
    return dap_user.T_M / dap_user.T_mu


def interference_Imu(macro_users: Iterable[UserRealization]) -> float:
    """Normalised interference of all Macro users into the micro base."""
    total = 0.0
    for user in macro_users:
        if user.tier != Tier.macro:
            raise WrongTierError("I_mu sums over Macro-tier users only")
        total += user.T_mu / user.T_M
    return total


def cross_tier_interference(
    dap_user: UserRealization, macro_users: Iterable[UserRealization]
) -> CrossTierInterference:
    """Both cross-tier terms seen while `dap_user` holds the DAP."""
    return CrossTierInterference(I_M=interference_IM(dap_user), I_mu=interference_Imu(macro_users))


def max_rate(K, N_total, n, gamma_mu, I_M, I_mu):
    """
    Largest normalised DAP rate meeting the feasibility condition with equality,
    capped at 1 (spreading factor >= 1) and 0 on infeasible load. Vectorised.
    """
    headroom = K - N_total + np.asarray(n, dtype=float)
    product = np.asarray(I_M, dtype=float) * np.asarray(I_mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(product > 0, headroom / (gamma_mu * product), np.inf)
    r = np.where(headroom > 0, np.minimum(z, 1.0), 0.0)
    return float(r) if r.ndim == 0 else r


def feasible(K: float, N_M: float, r: float, gamma_mu: float, I_M: float, I_mu: float) -> bool:
    """(1/r)(K - N_M) - Gamma_mu I_M I_mu >= 0, to FEASIBILITY_RTOL."""
    if r <= 0:
        raise ValueError("rate must be positive")
    supply = (K - N_M) / r
    demand = gamma_mu * I_M * I_mu
    return supply - demand >= -FEASIBILITY_RTOL * max(abs(supply), abs(demand))


def solve_powers(
    params: SystemParams, N_M: int, r: float, I_M: float, I_mu: float
) -> PowerSolution | Infeasible:
    """
    Received powers meeting both SINR targets with equality:

        G S_M        = Gamma_M  [(N_M - 1) S_M + S_mu I_M + eta W]
        (1/r) S_mu   = Gamma_mu [S_M I_mu + eta W]
    """
    if N_M < 1:
        raise ValueError("solve_powers needs at least one macro user")
    if not 0 < r <= 1:
        raise ValueError("rate must lie in (0, 1]")
    G, gM, gmu, eta = params.spreading_factor_G, params.gamma_M, params.gamma_mu, params.noise_power_etaW
    A = np.array([
        [G - gM * (N_M - 1), -gM * I_M],
        [-gmu * I_mu, 1.0 / r],
    ])
    rhs = np.array([gM * eta, gmu * eta])
    try:
        S_M, S_mu = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return Infeasible(reason="singular power-control system")
    if not (np.isfinite(S_M) and np.isfinite(S_mu)) or S_M <= 0 or S_mu <= 0:
        return Infeasible(reason=f"non-positive powers S_M={S_M:.4g}, S_mu={S_mu:.4g}")
    return PowerSolution(S_M=float(S_M), S_mu=float(S_mu))
