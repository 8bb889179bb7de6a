# dap_core/plots.py
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .models import BalancePoint, SweepRow  # noqa: E402

# fixed ids and no date stamp: identical inputs give identical SVG bytes
matplotlib.rcParams["svg.hashsalt"] = "dap-core"
SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    return path


def _finish(ax, xlabel: str, ylabel: str, title: str) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", linestyle=":", linewidth=0.5)
    ax.legend(fontsize=8)


def plot_throughput_sweep(rows: Sequence[SweepRow], path: Path) -> Path:
    """E{tau_u} and E{tau_d} against zeta, simulated (markers) and analytic (lines)."""
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot()
    zetas = [r.zeta for r in rows]
    curves = [
        ("E_tau_u_analytic", "E{tau_u} analysis", "C0", "-"),
        ("E_tau_d_analytic", "E{tau_d} analysis", "C1", "-"),
        ("E_tau_u_sim", "E{tau_u} simulation", "C0", "o"),
        ("E_tau_d_sim", "E{tau_d} simulation", "C1", "s"),
    ]
    for field, label, color, style in curves:
        ys = [getattr(r, field) for r in rows]
        if all(y is None for y in ys):
            continue
        ys = [float("nan") if y is None else y for y in ys]
        if style == "-":
            ax.semilogx(zetas, ys, style, color=color, label=label)
        else:
            ax.semilogx(zetas, ys, style, color=color, label=label, markerfacecolor="none", linestyle="none")
    ax.set_ylim(0.0, 1.0)
    N = rows[0].N if rows else ""
    _finish(ax, "zeta", "expected throughput", f"Throughput vs normalized desensitivity (N={N})")
    return _save(fig, path)


def plot_balance_points(points: Sequence[BalancePoint], path: Path) -> Path:
    """zeta*(N) (log axis) and tau*(N); flagged rows are left out."""
    found = [p for p in points if p.found]
    fig = Figure(figsize=(7, 7))
    ax_z, ax_t = fig.subplots(2, 1, sharex=True)
    Ns = [p.N for p in found]
    ax_z.semilogy(Ns, [p.zeta_star for p in found], "o-", color="C0", label="zeta*")
    ax_t.plot(Ns, [p.tau_star for p in found], "s-", color="C1", label="tau*")
    method = found[0].method.value if found else ""
    _finish(ax_z, "", "zeta*", f"Balance point vs users ({method})")
    _finish(ax_t, "N", "tau*", "")
    return _save(fig, path)


def plot_cdf_overlay(curves: Sequence[tuple[float, Sequence[float], Sequence[float] | None, Sequence[float] | None]],
                     path: Path, quantity: str) -> Path:
    """
    One (zeta, grid, F_sim, F_analytic) entry per curve; simulated CDFs as
    steps, analytic ones as lines.
    """
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot()
    for i, (zeta, grid, f_sim, f_analytic) in enumerate(curves):
        color = f"C{i % 10}"
        if f_sim is not None:
            ax.step(grid, f_sim, where="post", color=color, linestyle="--", label=f"simulation zeta={zeta:g}")
        if f_analytic is not None:
            ax.plot(grid, f_analytic, color=color, label=f"analysis zeta={zeta:g}")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    _finish(ax, quantity, f"P({quantity} <= x)", f"CDF of {quantity}")
    return _save(fig, path)
