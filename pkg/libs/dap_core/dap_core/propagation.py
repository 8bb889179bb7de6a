# dap_core/propagation.py
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .models import Position, SystemParams, Tier, UserDistribution, UserRealization

# users closer than this to a base are moved out to it (path gain is singular at d=0)
MIN_DISTANCE_M = 1.0


class UserArrays(NamedTuple):
    """Vectorised UserRealization fields; every array has the same shape."""
    x: np.ndarray
    y: np.ndarray
    chi_M: np.ndarray
    chi_mu: np.ndarray
    T_M: np.ndarray
    T_mu: np.ndarray
    micro: np.ndarray  # bool


def path_gain(d, b: float, H: float, chi=0.0):
    """
    Dual-slope path gain with lognormal shadowing:
    H (b/d)^2 10^(chi/10) up to the breakpoint b, H (b/d)^4 10^(chi/10) beyond.
    Vectorised over d and chi.
    """
    d = np.asarray(d, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if b <= 0 or H <= 0:
        raise ValueError(f"breakpoint and gain constant must be positive (b={b}, H={H})")
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    ratio = b / d
    gain = H * np.where(d <= b, ratio ** 2, ratio ** 4) * 10.0 ** (chi / 10.0)
    return float(gain) if gain.ndim == 0 else gain


def distances(params: SystemParams, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Distances to the macro base (origin) and micro base (D, 0), clamped to 1 m."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d_M = np.maximum(np.hypot(x, y), MIN_DISTANCE_M)
    d_mu = np.maximum(np.hypot(x - params.base_separation_D, y), MIN_DISTANCE_M)
    return d_M, d_mu


def mean_gains(params: SystemParams, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Shadow-free (chi = 0) path gains to both bases."""
    d_M, d_mu = distances(params, x, y)
    return (
        path_gain(d_M, params.breakpoint_macro_bM, params.H_M),
        path_gain(d_mu, params.breakpoint_micro_bmu, params.H_mu),
    )


def micro_mask(T_M, T_mu, delta: float) -> np.ndarray:
    """True where the user selects the DAP: not (T_M > delta T_mu); ties go Micro."""
    T_M = np.asarray(T_M, dtype=float)
    T_mu = np.asarray(T_mu, dtype=float)
    # compare the ratio so that I_M = T_M/T_mu <= delta holds exactly for Micro users
    return ~(T_M / T_mu > delta)


def select_base(T_M: float, T_mu: float, delta: float) -> Tier:
    if T_M <= 0 or T_mu <= 0 or delta <= 0:
        raise ValueError("path gains and delta must be positive")
    return Tier.micro if bool(micro_mask(T_M, T_mu, delta)) else Tier.macro


# -------------------------- user placement --------------------------
def _sample_disc(params: SystemParams, radius: float, rng: np.random.Generator, count: int):
    """Uniform points on the disc around the micro base, rejected outside the square."""
    half = params.half_side
    xs = np.empty(count)
    ys = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        rho = radius * np.sqrt(rng.random(need))
        theta = 2.0 * np.pi * rng.random(need)
        cx = params.base_separation_D + rho * np.cos(theta)
        cy = rho * np.sin(theta)
        ok = (np.abs(cx) <= half) & (np.abs(cy) <= half)
        k = int(ok.sum())
        xs[filled:filled + k] = cx[ok]
        ys[filled:filled + k] = cy[ok]
        filled += k
    return xs, ys


def sample_positions(
    params: SystemParams, dist: UserDistribution, rng: np.random.Generator, shape
) -> tuple[np.ndarray, np.ndarray]:
    half = params.half_side
    x = rng.uniform(-half, half, size=shape)
    y = rng.uniform(-half, half, size=shape)
    if dist.is_uniform:
        return x, y
    in_disc = rng.random(size=shape) < dist.hotspot_fraction
    dx, dy = _sample_disc(params, dist.hotspot_radius, rng, int(in_disc.sum()))
    x[in_disc] = dx
    y[in_disc] = dy
    return x, y


def sample_users(
    params: SystemParams, dist: UserDistribution, rng: np.random.Generator, shape
) -> UserArrays:
    """Positions, then independent shadowing per base, then gains and tiers."""
    x, y = sample_positions(params, dist, rng, shape)
    chi_M = rng.normal(0.0, params.shadow_sigma_macro, size=shape)
    chi_mu = rng.normal(0.0, params.shadow_sigma_micro, size=shape)
    d_M, d_mu = distances(params, x, y)
    T_M = path_gain(d_M, params.breakpoint_macro_bM, params.H_M, chi_M)
    T_mu = path_gain(d_mu, params.breakpoint_micro_bmu, params.H_mu, chi_mu)
    return UserArrays(x, y, chi_M, chi_mu, T_M, T_mu, micro_mask(T_M, T_mu, params.delta))


def realize_user(params: SystemParams, position: Position, chi_M: float, chi_mu: float) -> UserRealization:
    """Deterministic user at a given position and shadowing."""
    d_M, d_mu = distances(params, position.x, position.y)
    T_M = path_gain(d_M, params.breakpoint_macro_bM, params.H_M, chi_M)
    T_mu = path_gain(d_mu, params.breakpoint_micro_bmu, params.H_mu, chi_mu)
    return UserRealization(
        position=position, chi_M=chi_M, chi_mu=chi_mu,
        T_M=T_M, T_mu=T_mu, tier=select_base(T_M, T_mu, params.delta),
    )


def sample_user(params: SystemParams, dist: UserDistribution, rng: np.random.Generator) -> UserRealization:
    users = sample_users(params, dist, rng, (1,))
    return UserRealization(
        position=Position(x=float(users.x[0]), y=float(users.y[0])),
        chi_M=float(users.chi_M[0]),
        chi_mu=float(users.chi_mu[0]),
        T_M=float(users.T_M[0]),
        T_mu=float(users.T_mu[0]),
        tier=Tier.micro if users.micro[0] else Tier.macro,
    )
