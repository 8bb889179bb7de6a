# dap_core/csv_adapter.py
"""
CSV tables written by the CLI. Column names and order are part of the file
contract (docs/contracts.md); floats are written in shortest round-trip form
and missing values as empty cells.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .analytic import AnalyticResult, lognormal_from_moments
from .errors import InconsistentMomentsError
from .models import BalancePoint, HotspotComparison, SweepRow, UserDistribution
from .montecarlo import SampleSet
from .stats import ConditionalMoments

SAMPLES_HEADER = ["trial", "n", "user", "rate", "tau_u", "i_m", "i_mu", "tau_d"]
CDF_HEADER = ["value", "F_sim", "F_analytic"]
REPORT_CDF_HEADER = ["zeta", *CDF_HEADER]
REPORT_KS_HEADER = ["zeta", "ks_r", "ks_tau_u", "mean_n", "q"]
MOMENTS_HEADER = [
    "quantity", "n", "source", "count", "E1", "E2", "se_E1", "se_E2", "available", "log_mean", "log_sigma",
]
SWEEP_ZETA_HEADER = list(SweepRow.model_fields)
SWEEP_N_HEADER = list(BalancePoint.model_fields)
HOTSPOT_HEADER = ["distribution", "hotspot_fraction", "hotspot_radius_m", *SWEEP_N_HEADER]


def _write(path: str | Path, df: pd.DataFrame, header: Sequence[str]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df = df.reindex(columns=list(header))
    df.to_csv(p, index=False, lineterminator="\n")
    return p


def _ints(values) -> pd.arrays.IntegerArray:
    return pd.array(values, dtype="Int64")


def save_samples(path: str | Path, samples: SampleSet) -> Path:
    """
    One row per Micro user of every trial; a trial without DAP users keeps one
    row with empty user columns so tau_d = 0 survives.
    """
    first = np.searchsorted(samples.rate_trial, samples.rate_trial, side="left")
    users = pd.DataFrame({
        "trial": samples.rate_trial,
        "n": samples.n[samples.rate_trial],
        "user": _ints(np.arange(len(samples.rates)) - first),
        "rate": samples.rates,
        "tau_u": samples.tau_u(),
        "i_m": samples.i_m,
        "i_mu": samples.i_mu[samples.rate_trial],
        "tau_d": samples.tau_d[samples.rate_trial],
    })
    empty_trials = np.flatnonzero(samples.n == 0)
    empty = pd.DataFrame({
        "trial": empty_trials,
        "n": samples.n[empty_trials],
        "user": _ints([None] * len(empty_trials)),
        "i_mu": samples.i_mu[empty_trials],
        "tau_d": samples.tau_d[empty_trials],
    })
    frames = [df for df in (users, empty) if len(df)]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SAMPLES_HEADER)
    if len(df):
        df = df.sort_values(["trial", "user"], kind="stable", na_position="first")
    return _write(path, df, SAMPLES_HEADER)


def cdf_table(grid, f_sim=None, f_analytic=None) -> pd.DataFrame:
    grid = np.asarray(grid, dtype=float)
    return pd.DataFrame({
        "value": grid,
        "F_sim": np.asarray(f_sim(grid), dtype=float) if f_sim is not None else np.nan,
        "F_analytic": np.asarray(f_analytic(grid), dtype=float) if f_analytic is not None else np.nan,
    })


def save_cdf(path: str | Path, grid, f_sim=None, f_analytic=None) -> Path:
    return _write(path, cdf_table(grid, f_sim, f_analytic), CDF_HEADER)


def save_report_cdf(path: str | Path, tables: Iterable[tuple[float, pd.DataFrame]]) -> Path:
    frames = [table.assign(zeta=zeta) for zeta, table in tables]
    return _write(path, pd.concat(frames, ignore_index=True), REPORT_CDF_HEADER)


def save_report_ks(path: str | Path, rows: Iterable[dict]) -> Path:
    return _write(path, pd.DataFrame(list(rows)), REPORT_KS_HEADER)


# -------------------------- moments --------------------------
def _fit(E1, E2) -> tuple[float | None, float | None]:
    if E1 is None or E2 is None:
        return None, None
    try:
        fit = lognormal_from_moments(E1, E2)
    except InconsistentMomentsError:
        return None, None
    return fit.m, fit.sigma


def moment_rows(result: AnalyticResult | None, measured: ConditionalMoments | None = None) -> list[dict]:
    """
    q and the per-term moments, then one row per lognormal fit the rate law used
    (source says where its moments came from), then any remaining Monte Carlo
    estimates.
    """
    estimates = {(est.quantity, est.n): est for est in measured.rows()} if measured is not None else {}
    rows: list[dict] = []
    used: set[tuple[str, int | None]] = set()
    if result is not None:
        t = result.terms
        rows.append({"quantity": "q", "source": "quadrature", "E1": result.q, "available": True})
        rows.append({"quantity": "term", "source": "quadrature", "E1": t.t_E1, "E2": t.t_E2, "available": True})
        for f in result.lognormal_fits():
            row = {
                "quantity": f.quantity, "n": f.n, "source": f.source, "E1": f.E1, "E2": f.E2,
                "available": True, "log_mean": f.fit.m, "log_sigma": f.fit.sigma,
            }
            est = estimates.get((f.quantity, f.n))
            if f.source == "montecarlo" and est is not None:
                row.update(count=est.count, se_E1=est.se_mean, se_E2=est.se_mean_sq)
                used.add((f.quantity, f.n))
            rows.append(row)
    for key, est in estimates.items():
        if key in used:
            continue
        rows.append({
            "quantity": est.quantity, "n": est.n, "source": "montecarlo", "count": est.count,
            "E1": est.mean, "E2": est.mean_sq, "se_E1": est.se_mean, "se_E2": est.se_mean_sq,
            "available": est.available,
        })
    for row in rows:
        if row["quantity"] != "q" and "log_mean" not in row:
            row["log_mean"], row["log_sigma"] = _fit(row.get("E1"), row.get("E2"))
    return rows


def save_moments(path: str | Path, rows: Iterable[dict]) -> Path:
    df = pd.DataFrame(list(rows))
    for col in ("n", "count"):
        if col in df:
            df[col] = _ints(df[col].where(df[col].notna(), None).tolist())
    return _write(path, df, MOMENTS_HEADER)


# -------------------------- sweeps --------------------------
def save_sweep_zeta(path: str | Path, rows: Iterable[SweepRow]) -> Path:
    return _write(path, pd.DataFrame([r.model_dump() for r in rows]), SWEEP_ZETA_HEADER)


def load_sweep_zeta(path: str | Path) -> list[SweepRow]:
    p = Path(path)
    if not p.exists():
        return []
    df = pd.read_csv(p)
    df = df.astype(object).where(df.notna(), None)
    return [SweepRow(**row) for row in df.to_dict(orient="records")]


def save_sweep_n(path: str | Path, points: Iterable[BalancePoint]) -> Path:
    return _write(path, pd.DataFrame([p.model_dump(mode="json") for p in points]), SWEEP_N_HEADER)


def save_hotspot(path: str | Path, comparison: HotspotComparison, hotspot: UserDistribution) -> Path:
    uniform = {"distribution": "uniform", **comparison.uniform.model_dump(mode="json")}
    dense = {
        "distribution": "hotspot",
        "hotspot_fraction": hotspot.hotspot_fraction,
        "hotspot_radius_m": hotspot.hotspot_radius,
        **comparison.hotspot.model_dump(mode="json"),
    }
    delta = {
        "distribution": "delta", "N": comparison.uniform.N, "method": comparison.uniform.method.value,
        "zeta_star": comparison.delta_zeta, "tau_star": comparison.delta_tau,
    }
    return _write(path, pd.DataFrame([uniform, dense, delta]), HOTSPOT_HEADER)
