from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from dap_core.analytic import analyze
from dap_core.csv_adapter import (
    CDF_HEADER, SAMPLES_HEADER, SWEEP_ZETA_HEADER, load_sweep_zeta, moment_rows, save_cdf, save_moments,
    save_samples, save_sweep_zeta,
)
from dap_core.models import SweepRow, SystemParams, UserDistribution
from dap_core.montecarlo import run_campaign
from dap_core.stats import estimate_conditional_moments, rate_cdf

SAMPLES = run_campaign(SystemParams(N_total=6, zeta=0.02), UserDistribution.uniform(), trials=400, seed=8)


def test_samples_csv(tmp_path: Path):
    f = save_samples(tmp_path / "samples.csv", SAMPLES)
    df = pd.read_csv(f)
    assert list(df.columns) == SAMPLES_HEADER
    assert len(df) == len(SAMPLES.rates) + int(np.sum(SAMPLES.n == 0))
    per_trial = df.drop_duplicates("trial")
    assert len(per_trial) == SAMPLES.trials
    assert per_trial["tau_d"].mean() == pytest.approx(SAMPLES.mean_tau_d())
    assert df["user"].dropna().min() == 0


def test_samples_csv_is_byte_stable(tmp_path: Path):
    a = save_samples(tmp_path / "a.csv", SAMPLES).read_bytes()
    b = save_samples(tmp_path / "b.csv", SAMPLES).read_bytes()
    assert a == b


def test_cdf_csv(tmp_path: Path):
    grid = np.linspace(0, 1, 51)
    f = save_cdf(tmp_path / "cdf_r.csv", grid, rate_cdf(SAMPLES))
    df = pd.read_csv(f)
    assert list(df.columns) == CDF_HEADER
    assert df["F_analytic"].isna().all()
    assert (df["F_sim"].diff().dropna() >= 0).all()
    assert df["F_sim"].iloc[-1] == 1.0


def test_shortest_round_trip_floats(tmp_path: Path):
    f = save_cdf(tmp_path / "cdf.csv", [0.1, 1.0 / 3.0], lambda g: np.asarray(g) * 0.5)
    lines = f.read_text().splitlines()
    assert lines[1] == "0.1,0.05,"
    assert lines[2].startswith("0.3333333333333333,")


def test_moments_csv(tmp_path: Path):
    rows = moment_rows(None, estimate_conditional_moments(SAMPLES, min_count=10))
    df = pd.read_csv(save_moments(tmp_path / "moments.csv", rows))
    assert set(df["source"]) == {"montecarlo"}
    assert df.loc[df["quantity"] == "i_m", "count"].iloc[0] == len(SAMPLES.rates)


def test_moments_csv_reports_the_fits_used(tmp_path: Path):
    measured = estimate_conditional_moments(SAMPLES, min_count=10)
    result = analyze(SAMPLES.params, measured=measured)
    df = pd.read_csv(save_moments(tmp_path / "moments.csv", moment_rows(result, measured)))
    pooled = df[(df["quantity"] == "i_m") & df["n"].isna()]
    assert len(pooled) == 1
    row = pooled.iloc[0]
    assert row["source"] == "montecarlo" and row["count"] == len(SAMPLES.rates)
    fit = result.lognormal_fits()[0].fit
    assert row["log_mean"] == pytest.approx(fit.m) and row["log_sigma"] == pytest.approx(fit.sigma)
    assert set(df.loc[df["quantity"] == "q", "source"]) == {"quadrature"}


def test_sweep_zeta_roundtrip(tmp_path: Path):
    rows = [
        SweepRow(zeta=0.001, N=26, E_tau_u_sim=0.9, E_tau_d_sim=0.2, E_tau_u_analytic=0.91,
                 E_tau_d_analytic=0.21, mean_n=0.4, q=0.015),
        SweepRow(zeta=0.1, N=26, status="failed", error="analytic: quadrature did not converge"),
    ]
    f = tmp_path / "sweep_zeta.csv"
    save_sweep_zeta(f, rows)
    assert f.read_text().splitlines()[0].split(",") == SWEEP_ZETA_HEADER
    assert load_sweep_zeta(f) == rows
    assert load_sweep_zeta(tmp_path / "missing.csv") == []
