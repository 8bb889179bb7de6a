# dap_core/sweeps.py
"""
Sweeps over zeta and N, and the search for the balance point where
E{tau_u} = E{tau_d}.

Every grid point reuses the same master seed, so simulated curves differ only
through zeta (common random numbers). Grid points run on a thread pool and
results come back in grid order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .analytic import analyze
from .errors import DapError, NoCrossingError, NoDapUsersError, NumericalError
from .models import BalancePoint, HotspotComparison, Method, SweepRow, SystemParams, UserDistribution
from .montecarlo import DEFAULT_TRIALS, default_workers, run_campaign

log = logging.getLogger(__name__)

DEFAULT_ZETA_GRID = tuple(np.logspace(-4.0, -1.0, 25).tolist())
DEFAULT_SEARCH_INTERVAL = (1e-4, 0.1)
CROSSING_WIDTH_DECADES = 0.01
CROSSING_GAP_TOL = 1e-3
N_MARGIN = 3


def _pool_map(func: Callable, items: Sequence, workers: int | None) -> list:
    workers = workers or default_workers()
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def validate_zeta_grid(zeta_grid: Sequence[float]) -> list[float]:
    grid = [float(z) for z in zeta_grid]
    if not grid:
        raise ValueError("zeta grid is empty")
    if any(not 0.0 < z <= 1.0 for z in grid):
        raise ValueError("zeta grid values must lie in (0, 1]")
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ValueError("zeta grid must be strictly increasing")
    return grid


def log_zeta_grid(zeta_min: float, zeta_max: float, points: int) -> list[float]:
    if points == 1:
        return [float(zeta_min)]
    return np.logspace(math.log10(zeta_min), math.log10(zeta_max), points).tolist()


# -------------------------- zeta sweep --------------------------
def _sweep_point(
    params: SystemParams, dist: UserDistribution, trials: int, seed: int, simulate: bool, analytic: bool
) -> SweepRow:
    row = {"zeta": params.zeta, "N": params.N_total}
    errors = []
    if simulate:
        try:
            samples = run_campaign(params, dist, trials=trials, seed=seed, workers=1)
            row.update(E_tau_u_sim=samples.mean_tau_u(), E_tau_d_sim=samples.mean_tau_d(), mean_n=samples.mean_n())
        except DapError as exc:
            errors.append(f"simulation: {exc}")
    if analytic:
        try:
            result = analyze(params, dist)
            row.update(E_tau_u_analytic=result.E_tau_u, E_tau_d_analytic=result.E_tau_d, q=result.q)
            row.setdefault("mean_n", result.mean_n)
        except DapError as exc:
            errors.append(f"analytic: {exc}")
    if errors:
        log.warning(f"sweep row zeta={params.zeta:g} N={params.N_total} failed: {'; '.join(errors)}")
        return SweepRow(**row, status="failed", error="; ".join(errors))
    return SweepRow(**row)


def sweep_zeta(
    params: SystemParams,
    zeta_grid: Sequence[float] = DEFAULT_ZETA_GRID,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    dist: UserDistribution | None = None,
    workers: int | None = None,
    simulate: bool = True,
    analytic: bool = True,
) -> list[SweepRow]:
    """One SweepRow per grid point; failures are flagged on their row."""
    grid = validate_zeta_grid(zeta_grid)
    dist = dist or UserDistribution.uniform()
    points = [params.with_updates(zeta=z) for z in grid]
    rows = _pool_map(lambda p: _sweep_point(p, dist, trials, seed, simulate, analytic), points, workers)
    log.info(f"zeta sweep done: N={params.N_total} points={len(rows)} failed={sum(r.status != 'ok' for r in rows)}")
    return rows


# -------------------------- balance point --------------------------
def bisect_log_crossing(
    func: Callable[[float], tuple[float, float]],
    lo: float,
    hi: float,
    *,
    width_decades: float = CROSSING_WIDTH_DECADES,
    gap_tol: float = CROSSING_GAP_TOL,
) -> tuple[float, float, float, int]:
    """
    Bisect on log10(zeta) for a sign change of a - b where (a, b) = func(zeta).
    Stops when the bracket is at most `width_decades` wide or |a - b| <= gap_tol.
    Returns (zeta, a, b, iterations).
    """
    if not 0.0 < lo < hi:
        raise ValueError(f"search interval must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    a_lo, b_lo = func(lo)
    a_hi, b_hi = func(hi)
    gap_lo, gap_hi = a_lo - b_lo, a_hi - b_hi
    if abs(gap_lo) <= gap_tol:
        return lo, a_lo, b_lo, 0
    if abs(gap_hi) <= gap_tol:
        return hi, a_hi, b_hi, 0
    if math.copysign(1.0, gap_lo) == math.copysign(1.0, gap_hi):
        raise NoCrossingError(lo, hi, gap_lo, gap_hi)

    left, right = math.log10(lo), math.log10(hi)
    iterations = 0
    while True:
        mid = 0.5 * (left + right)
        zeta = 10.0 ** mid
        a, b = func(zeta)
        iterations += 1
        gap = a - b
        log.debug(f"bisection {iterations}: zeta={zeta:.6g} gap={gap:.3g}")
        if math.copysign(1.0, gap) == math.copysign(1.0, gap_lo):
            left, gap_lo = mid, gap
        else:
            right = mid
        if abs(gap) <= gap_tol or right - left <= width_decades:
            return zeta, a, b, iterations


def throughputs_at(
    params: SystemParams,
    method: Method,
    dist: UserDistribution,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int | None = None,
) -> tuple[float, float]:
    """(E{tau_u}, E{tau_d}) at params.zeta by either path."""
    if method == Method.analytic:
        result = analyze(params, dist)
        return result.E_tau_u, result.E_tau_d
    samples = run_campaign(params, dist, trials=trials, seed=seed, workers=workers)
    tau_u = samples.mean_tau_u()
    if tau_u is None:
        raise NoDapUsersError(f"no trial selected the DAP at zeta={params.zeta:g}")
    return tau_u, samples.mean_tau_d()


def find_balance(
    params: SystemParams,
    method: Method = Method.analytic,
    search_interval: tuple[float, float] = DEFAULT_SEARCH_INTERVAL,
    dist: UserDistribution | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int | None = None,
) -> BalancePoint:
    """(zeta*, tau*) with tau* the average of both throughputs at zeta*."""
    dist = dist or UserDistribution.uniform()
    cache: dict[float, tuple[float, float]] = {}

    def evaluate(zeta: float) -> tuple[float, float]:
        if zeta not in cache:
            cache[zeta] = throughputs_at(params.with_updates(zeta=zeta), method, dist, trials, seed, workers)
        return cache[zeta]

    lo, hi = search_interval
    zeta, tau_u, tau_d, iterations = bisect_log_crossing(evaluate, lo, hi)
    point = BalancePoint(
        N=params.N_total, method=method, zeta_star=zeta, tau_star=0.5 * (tau_u + tau_d),
        gap=tau_u - tau_d, iterations=iterations,
    )
    log.info(
        f"balance N={point.N} method={method.value}: zeta*={zeta:.5g} tau*={point.tau_star:.4f} "
        f"after {iterations} bisections"
    )
    return point


def n_range_limit(params: SystemParams) -> int:
    return math.ceil(params.pole_capacity) + N_MARGIN


def sweep_N(
    params: SystemParams,
    N_values: Sequence[int],
    method: Method = Method.analytic,
    search_interval: tuple[float, float] = DEFAULT_SEARCH_INTERVAL,
    dist: UserDistribution | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int | None = None,
) -> list[BalancePoint]:
    """find_balance per N; a row without a crossing or with a numerical failure is flagged."""
    limit = n_range_limit(params)
    values = [int(v) for v in N_values]
    if not values or any(not 2 <= v <= limit for v in values):
        raise ValueError(f"N values must lie in [2, {limit}] (ceil(K) + {N_MARGIN})")

    def one(N: int) -> BalancePoint:
        try:
            return find_balance(params.with_updates(N_total=N), method, search_interval, dist, trials, seed, workers=1)
        except NoCrossingError as exc:
            log.warning(f"N={N}: {exc}")
            return BalancePoint(N=N, method=method, status="no_crossing", error=str(exc))
        except NumericalError as exc:
            log.warning(f"N={N}: {exc}")
            return BalancePoint(N=N, method=method, status="failed", error=str(exc))

    return _pool_map(one, values, workers)


def compare_hotspot(
    params: SystemParams,
    hotspot: UserDistribution,
    method: Method = Method.analytic,
    search_interval: tuple[float, float] = DEFAULT_SEARCH_INTERVAL,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int | None = None,
) -> HotspotComparison:
    """Balance points under the uniform law and under `hotspot`, with hotspot - uniform deltas."""
    uniform = find_balance(params, method, search_interval, UserDistribution.uniform(), trials, seed, workers)
    if hotspot.is_uniform:
        dense = uniform
    else:
        dense = find_balance(params, method, search_interval, hotspot, trials, seed, workers)
    return HotspotComparison(
        uniform=uniform,
        hotspot=dense,
        delta_zeta=dense.zeta_star - uniform.zeta_star,
        delta_tau=dense.tau_star - uniform.tau_star,
    )
