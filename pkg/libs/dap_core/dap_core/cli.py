# dap_core/cli.py
"""
Command line entry point.

    dap-core <simulate|analyze|sweep-zeta|sweep-n|hotspot|report> --config run.yaml
             [--seed S] [--trials T] [--zeta Z] [--n N] [--out DIR]

Exit status: 0 success, 1 invalid configuration or usage, 2 numerical failure.
"""
from __future__ import annotations

import functools
import logging
import sys
import time
from typing import Callable

import click
import numpy as np
from pydantic import ValidationError

from . import __version__
from .analytic import analyze as run_analysis, expected_user_throughput_closed_form
from .config import LOG_LEVEL, RunConfig, parse_config
from .csv_adapter import (
    cdf_table, moment_rows, save_cdf, save_hotspot, save_moments, save_report_cdf, save_report_ks,
    save_samples, save_sweep_n, save_sweep_zeta,
)
from .errors import DapError, NumericalError
from .manifest import RunManifest, utc_now, write_manifest
from .montecarlo import run_campaign
from .plots import plot_balance_points, plot_cdf_overlay, plot_throughput_sweep
from .stats import estimate_conditional_moments, ks_distance, rate_cdf, tau_u_cdf, tier_count_fit
from .storage import LocalStorage
from .sweeps import compare_hotspot, sweep_N, sweep_zeta

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("dap_core").setLevel(level)


def run_options(func: Callable) -> Callable:
    """Shared flags; each overrides its config key when given."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="YAML run configuration (or a manifest.json to replay)."),
        click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="run.seed"),
        click.option("--trials", type=click.IntRange(min=1), default=None, help="run.trials"),
        click.option("--zeta", type=float, default=None, help="selection.zeta"),
        click.option("--n", "users", type=click.IntRange(min=1), default=None, help="load.users"),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="output.dir"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _command(name: str):
    """Resolve the config, run the body with a LocalStorage, then write the manifest."""
    def decorate(body: Callable[[RunConfig, LocalStorage], None]):
        @cli.command(name)
        @run_options
        @functools.wraps(body)
        def command(config_path, seed, trials, zeta, users, out):
            config = parse_config(config_path, {
                "run.seed": seed, "run.trials": trials, "selection.zeta": zeta,
                "load.users": users, "output.dir": out,
            })
            storage = LocalStorage(config.output_dir)
            started_at, t0 = utc_now(), time.perf_counter()
            body(config, storage)
            manifest = RunManifest(
                tool_version=__version__, command=name, seed=config.seed, config=config.to_flat(),
                started_at=started_at, wall_clock_s=round(time.perf_counter() - t0, 3),
            )
            path = write_manifest(storage, manifest)
            log.info(f"{name} done: {len(storage.outputs)} outputs, manifest {path}")
        return command
    return decorate


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="dap-core")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def cli(verbose: bool) -> None:
    """Two-tier CDMA uplink: macrocell users sharing spectrum with a data access point."""
    _configure_logging(verbose)


def _grid(config: RunConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, config.flat.cdf_grid_points)


@_command("simulate")
def simulate(config: RunConfig, storage: LocalStorage) -> None:
    """Monte Carlo campaign: samples and simulated CDFs of r and tau_u."""
    samples = run_campaign(config.params, config.dist, trials=config.trials, seed=config.seed)
    try:
        result = run_analysis(config.params, config.dist)
        analytic_r, analytic_tau = result.rate_cdf(), result.tau_u_cdf()
        fit = tier_count_fit(samples, result.q)
        log.info(f"tier counts vs Binomial(N, q={result.q:.5g}): TV={fit.total_variation:.4f} p={fit.p_value:.3g}")
    except NumericalError as exc:
        log.warning(f"analytic overlay skipped: {exc}")
        analytic_r = analytic_tau = None
    has_rates = len(samples.rates) > 0
    storage.write_with("samples.csv", lambda p: save_samples(p, samples))
    storage.write_with("cdf_r.csv", lambda p: save_cdf(
        p, _grid(config), rate_cdf(samples) if has_rates else None, analytic_r))
    storage.write_with("cdf_tau_u.csv", lambda p: save_cdf(
        p, _grid(config), tau_u_cdf(samples) if has_rates else None, analytic_tau))
    tau_u = samples.mean_tau_u()
    tau_u_text = "n/a" if tau_u is None else f"{tau_u:.6g}"
    click.echo(
        f"E_tau_u={tau_u_text} E_tau_d={samples.mean_tau_d():.6g} "
        f"mean_n={samples.mean_n():.6g} q_hat={samples.q_hat():.6g}"
    )


@_command("analyze")
def analyze(config: RunConfig, storage: LocalStorage) -> None:
    """Lognormal approximation: analytic CDFs and the moments behind them."""
    samples = measured = None
    if config.flat.moments_source == "montecarlo":
        samples = run_campaign(config.params, config.dist, trials=config.trials, seed=config.seed)
        measured = estimate_conditional_moments(samples, config.flat.moments_min_count)
    result = run_analysis(config.params, config.dist, measured)
    has_rates = samples is not None and len(samples.rates) > 0
    storage.write_with("analytic_cdf_r.csv", lambda p: save_cdf(
        p, _grid(config), rate_cdf(samples) if has_rates else None, result.rate_cdf()))
    storage.write_with("analytic_cdf_tau_u.csv", lambda p: save_cdf(
        p, _grid(config), tau_u_cdf(samples) if has_rates else None, result.tau_u_cdf()))
    storage.write_with("moments.csv", lambda p: save_moments(p, moment_rows(result, measured)))
    closed = expected_user_throughput_closed_form(result.pn, result.rates)
    click.echo(
        f"q={result.q:.6g} mean_n={result.mean_n:.6g} E_tau_u={result.E_tau_u:.6g} "
        f"(closed form {closed:.6g}) E_tau_d={result.E_tau_d:.6g}"
    )


@_command("sweep-zeta")
def sweep_zeta_command(config: RunConfig, storage: LocalStorage) -> None:
    """Both throughputs over the zeta grid (sweep.zeta_min .. sweep.zeta_max, log-spaced)."""
    rows = sweep_zeta(config.params, config.zeta_grid, trials=config.trials, seed=config.seed, dist=config.dist)
    storage.write_with("sweep_zeta.csv", lambda p: save_sweep_zeta(p, rows))
    storage.write_with("fig4.svg", lambda p: plot_throughput_sweep(rows, p))
    click.echo(f"{len(rows)} rows, {sum(r.status != 'ok' for r in rows)} failed")


@_command("sweep-n")
def sweep_n_command(config: RunConfig, storage: LocalStorage) -> None:
    """Balance point (zeta*, tau*) for every N in sweep.n_values."""
    points = sweep_N(
        config.params, config.checked_n_values(), method=config.flat.balance_method,
        search_interval=config.search_interval, dist=config.dist, trials=config.trials, seed=config.seed,
    )
    storage.write_with("sweep_n.csv", lambda p: save_sweep_n(p, points))
    storage.write_with("fig5.svg", lambda p: plot_balance_points(points, p))
    for point in points:
        click.echo(f"N={point.N} zeta*={point.zeta_star} tau*={point.tau_star} status={point.status}")


@_command("hotspot")
def hotspot_command(config: RunConfig, storage: LocalStorage) -> None:
    """Balance point under the uniform law and under the configured hotspot."""
    comparison = compare_hotspot(
        config.params, config.hotspot, method=config.flat.balance_method,
        search_interval=config.search_interval, trials=config.trials, seed=config.seed,
    )
    storage.write_with("hotspot.csv", lambda p: save_hotspot(p, comparison, config.hotspot))
    click.echo(f"delta_zeta*={comparison.delta_zeta:.6g} delta_tau*={comparison.delta_tau:.6g}")


@_command("report")
def report(config: RunConfig, storage: LocalStorage) -> None:
    """Simulated and analytic CDFs of r and tau_u overlaid for every cdf.report_zetas value."""
    grid = _grid(config)
    r_tables, tau_tables, ks_rows, r_curves, tau_curves = [], [], [], [], []
    for zeta in config.flat.report_zetas:
        params = config.params.with_updates(zeta=zeta)
        samples = run_campaign(params, config.dist, trials=config.trials, seed=config.seed)
        result = run_analysis(params, config.dist)
        has_rates = len(samples.rates) > 0
        sim_r = rate_cdf(samples) if has_rates else None
        sim_tau = tau_u_cdf(samples) if has_rates else None
        r_table = cdf_table(grid, sim_r, result.rate_cdf())
        tau_table = cdf_table(grid, sim_tau, result.tau_u_cdf())
        r_tables.append((zeta, r_table))
        tau_tables.append((zeta, tau_table))
        ks_rows.append({
            "zeta": zeta,
            "ks_r": ks_distance(sim_r, result.rate_cdf()) if has_rates else None,
            "ks_tau_u": ks_distance(sim_tau, result.tau_u_cdf()) if has_rates else None,
            "mean_n": samples.mean_n(),
            "q": result.q,
        })
        r_curves.append((zeta, grid, r_table["F_sim"] if has_rates else None, r_table["F_analytic"]))
        tau_curves.append((zeta, grid, tau_table["F_sim"] if has_rates else None, tau_table["F_analytic"]))
    storage.write_with("report_cdf_r.csv", lambda p: save_report_cdf(p, r_tables))
    storage.write_with("report_cdf_tau_u.csv", lambda p: save_report_cdf(p, tau_tables))
    storage.write_with("report_ks.csv", lambda p: save_report_ks(p, ks_rows))
    storage.write_with("fig2.svg", lambda p: plot_cdf_overlay(r_curves, p, "r"))
    storage.write_with("fig3.svg", lambda p: plot_cdf_overlay(tau_curves, p, "tau_u"))
    for row in ks_rows:
        click.echo(f"zeta={row['zeta']:g} KS(r)={row['ks_r']} KS(tau_u)={row['ks_tau_u']}")


def main(argv: list[str] | None = None) -> int:
    """Console entry point; maps failures to exit statuses."""
    try:
        rv = cli.main(args=argv, prog_name="dap-core", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_INVALID
    except NumericalError as exc:
        click.echo(f"numerical failure ({type(exc).__name__}): {exc}", err=True)
        return EXIT_NUMERICAL
    except (DapError, ValidationError, ValueError) as exc:
        click.echo(f"invalid input ({type(exc).__name__}): {exc}", err=True)
        return EXIT_INVALID
    return rv if isinstance(rv, int) else EXIT_OK
