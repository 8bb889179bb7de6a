import math

import pytest

from dap_core import sweeps
from dap_core.errors import NoCrossingError
from dap_core.models import Method, SystemParams, UserDistribution
from dap_core.sweeps import (
    bisect_log_crossing, compare_hotspot, find_balance, log_zeta_grid, sweep_N, sweep_zeta, validate_zeta_grid,
)


def _linear_in_log(crossing: float, slope: float = 0.1):
    def func(zeta: float):
        return 0.5 - slope * math.log10(zeta / crossing), 0.5
    return func


def test_zeta_grid_validation():
    assert validate_zeta_grid([0.001, 0.01, 1.0]) == [0.001, 0.01, 1.0]
    with pytest.raises(ValueError):
        validate_zeta_grid([0.01, 0.01])
    with pytest.raises(ValueError):
        validate_zeta_grid([0.0, 0.1])
    with pytest.raises(ValueError):
        validate_zeta_grid([0.5, 2.0])
    with pytest.raises(ValueError):
        validate_zeta_grid([])


def test_default_grid():
    grid = log_zeta_grid(1e-4, 0.1, 25)
    assert len(grid) == 25
    assert grid[0] == pytest.approx(1e-4) and grid[-1] == pytest.approx(0.1)
    assert log_zeta_grid(0.005, 0.1, 1) == [0.005]


def test_bisection_finds_synthetic_crossing():
    zeta, a, b, iterations = bisect_log_crossing(_linear_in_log(0.01), 1e-4, 0.1)
    assert abs(math.log10(zeta) + 2.0) <= 0.01
    assert iterations > 0
    assert abs(a - b) <= 0.1 * 0.01 + 1e-12


def test_bisection_without_crossing():
    with pytest.raises(NoCrossingError) as err:
        bisect_log_crossing(lambda z: (0.9, 0.1), 1e-4, 0.1)
    assert err.value.gap_lo == pytest.approx(0.8)
    with pytest.raises(ValueError):
        bisect_log_crossing(lambda z: (0.9, 0.1), 0.1, 1e-4)


@pytest.fixture
def synthetic(monkeypatch):
    """Throughputs crossing at zeta = 0.2/N; no crossing for N > 26."""
    calls = []

    def fake(params, method, dist, trials=0, seed=1, workers=None):
        calls.append(params.zeta)
        if params.N_total > 26:
            return 0.9, 0.1
        crossing = 0.2 / params.N_total
        if not dist.is_uniform:
            crossing /= 2
        return 0.5 - 0.1 * math.log10(params.zeta / crossing), 0.5 + 0.01 * math.log10(params.zeta / crossing)

    monkeypatch.setattr(sweeps, "throughputs_at", fake)
    return calls


def test_find_balance(synthetic):
    point = find_balance(SystemParams(N_total=20), Method.analytic)
    assert point.found and point.N == 20
    assert abs(math.log10(point.zeta_star) - math.log10(0.01)) <= 0.01
    assert point.tau_star == pytest.approx(0.5, abs=1e-3)
    assert point.gap == pytest.approx(0.0, abs=2e-3)
    # evaluations are cached per zeta
    assert len(synthetic) == len(set(synthetic))


def test_sweep_N_flags_rows_without_crossing(synthetic):
    points = sweep_N(SystemParams(), [10, 20, 28], Method.simulation)
    assert [p.N for p in points] == [10, 20, 28]
    assert [p.status for p in points] == ["ok", "ok", "no_crossing"]
    assert points[0].zeta_star > points[1].zeta_star
    assert points[2].zeta_star is None and "does not change sign" in points[2].error


def test_sweep_N_range_checked():
    with pytest.raises(ValueError):
        sweep_N(SystemParams(), [1, 10])
    with pytest.raises(ValueError):
        sweep_N(SystemParams(), [31])


def test_compare_hotspot(synthetic):
    same = compare_hotspot(SystemParams(), UserDistribution.hotspot(0.0, 100.0))
    assert same.delta_zeta == 0.0 and same.delta_tau == 0.0
    dense = compare_hotspot(SystemParams(), UserDistribution.hotspot(0.5, 100.0))
    assert dense.delta_zeta < 0.0


def test_sweep_zeta_rows_in_grid_order_and_reproducible():
    params = SystemParams(N_total=6)
    grid = [0.002, 0.02, 0.2]
    rows = sweep_zeta(params, grid, trials=300, seed=3, analytic=False, workers=1)
    again = sweep_zeta(params, grid, trials=300, seed=3, analytic=False, workers=3)
    assert [r.zeta for r in rows] == grid
    assert rows == again
    for r in rows:
        assert r.N == 6 and 0.0 <= r.mean_n <= 6
        assert r.E_tau_d_sim is None or 0.0 <= r.E_tau_d_sim <= 1.0
    assert rows[0].mean_n <= rows[-1].mean_n


def test_sweep_zeta_flags_failed_rows():
    rows = sweep_zeta(SystemParams(N_total=4), [1e-30], trials=50, seed=1, simulate=False)
    assert len(rows) == 1
    assert rows[0].status == "failed" and "analytic" in rows[0].error
