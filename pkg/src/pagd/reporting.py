"""CSV/manifest emission and figure rendering for experiment results.

CSV files are the contract-bearing output: float cells use shortest
round-trip formatting and absent values are empty fields, so identical
configurations produce byte-identical files.  Figures are rendered alongside
them as PNG; the manifest is a plain-text companion (it carries wall-clock
timings, so it is not byte-stable by design).
"""

from __future__ import annotations

import os
import time
from dataclasses import asdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .heavyball import TRAJECTORY_CSV_HEADER, Trajectory
from .optimizers import TRACE_CSV_HEADER, IterateTrace
from .experiments import (
    ManufacturedResult,
    OdeStudyResult,
    ParamSweepResult,
    ResolutionSweepResult,
)

SUMMARY_CSV_HEADER = "alpha,scheme,iterations,nu,step"

_SCHEME_STYLE = {
    "gd": dict(color="tab:blue", linestyle="-"),
    "agd": dict(color="tab:orange", linestyle="--"),
    "pgd": dict(color="tab:green", linestyle="-."),
    "pagd": dict(color="tab:red", linestyle=":"),
}


def fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt_cell(cell) for cell in row) + "\n")


def write_trace_csv(trace: IterateTrace, path) -> None:
    write_csv(path, TRACE_CSV_HEADER, trace.rows())


def write_trajectory_csv(traj: Trajectory, path) -> None:
    sp = np.asarray(traj.speed_sq)
    g = np.asarray(traj.g_values)
    cum = np.concatenate(([0.0], np.cumsum(traj.dt * 0.5 * (sp[1:] + sp[:-1]))))
    identity = 0.5 * sp + g - g[0] + 2.0 * traj.eta * cum
    has_energy = bool(traj.total)
    rows = []
    for i, t in enumerate(traj.ts):
        if has_energy:
            rows.append((t, traj.potential[i], traj.kinetic[i], traj.total[i],
                         traj.inflated[i], float(identity[i])))
        else:
            rows.append((t, None, None, None, None, float(identity[i])))
    write_csv(path, TRAJECTORY_CSV_HEADER, rows)


def write_manifest(path, experiment: str, config, timings: dict[str, float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"experiment: {experiment}\n")
        fh.write("configuration:\n")
        for key, value in asdict(config).items():
            fh.write(f"  {key} = {value}\n")
        fh.write(
            "determinism: runs are seed-free (fixed initial guess, fixed "
            "summation order); identical configurations give byte-identical "
            "CSV output.\n"
        )
        fh.write("timings (wall-clock seconds):\n")
        for key, value in timings.items():
            fh.write(f"  {key} = {value:.3f}\n")
        fh.write(f"written: {time.strftime('%Y-%m-%d %H:%M:%S')}\n")


def _savefig(fig, path) -> None:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


# ---------------------------------------------------------------------------
# per-experiment emission


def emit_manufactured(result: ManufacturedResult, outdir, plots: bool = True,
                      timings: dict | None = None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []
    for name, trace in result.traces.items():
        path = os.path.join(outdir, f"trace_{name}.csv")
        write_trace_csv(trace, path)
        written.append(path)

    summary = os.path.join(outdir, "summary.csv")
    rows = [
        (result.config.alpha, name, trace.passes, result.nu_used[name],
         result.step_sizes[name])
        for name, trace in result.traces.items()
    ]
    write_csv(summary, SUMMARY_CSV_HEADER, rows)
    written.append(summary)

    manifest = os.path.join(outdir, "manifest.txt")
    write_manifest(manifest, "manufactured", result.config, timings or {})
    written.append(manifest)

    if plots:
        written += _manufactured_figures(result, outdir)
    return written


def _manufactured_figures(result: ManufacturedResult, outdir) -> list[str]:
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, trace in result.traces.items():
        ax.semilogy(trace.ks, trace.objective_gap, label=name.upper(),
                    **_SCHEME_STYLE[name])
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective gap")
    ax.legend()
    path = os.path.join(outdir, "objective_gap.png")
    _savefig(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, trace in result.traces.items():
        ax.semilogy(trace.ks, trace.err_L, label=name.upper(), **_SCHEME_STYLE[name])
    ax.set_xlabel("iteration")
    ax.set_ylabel("error in the preconditioner norm")
    ax.legend()
    path = os.path.join(outdir, "error_norm.png")
    _savefig(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("gd", "agd"):
        trace = result.traces[name]
        ax.semilogy(trace.ks, trace.potential, label=f"{name.upper()} potential")
        ax.semilogy(trace.ks, trace.kinetic, label=f"{name.upper()} kinetic")
        ax.semilogy(trace.ks, trace.total, label=f"{name.upper()} total")
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    path = os.path.join(outdir, "energy_decomposition.png")
    _savefig(fig, path)
    written.append(path)
    return written


RESOLUTION_CSV_HEADER = "n,scheme,lipschitz_plain,verdict,iterations"


def emit_resolution_sweep(result: ResolutionSweepResult, outdir, plots: bool = True,
                          timings: dict | None = None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []
    table = os.path.join(outdir, "iterations_vs_n.csv")
    rows = [
        (c.n, c.scheme, c.lipschitz_plain, c.verdict, c.iterations)
        for c in result.cells
    ]
    write_csv(table, RESOLUTION_CSV_HEADER, rows)
    written.append(table)

    manifest = os.path.join(outdir, "manifest.txt")
    write_manifest(manifest, "resolution-sweep", result.config, timings or {})
    written.append(manifest)

    if plots:
        for big_l in result.config.lipschitz_plain_values:
            fig, ax = plt.subplots(figsize=(6, 4))
            for scheme in ("gd", "agd", "pgd", "pagd"):
                pts = [
                    (c.n, c.iterations)
                    for c in result.cells
                    if c.scheme == scheme
                    and (c.lipschitz_plain in (None, big_l))
                ]
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                        label=scheme.upper(), **_SCHEME_STYLE[scheme])
            ax.set_xscale("log", base=2)
            ax.set_xlabel("grid resolution n")
            ax.set_ylabel("iterations (1000 = cap, 1100 = blow-up)")
            ax.legend()
            path = os.path.join(outdir, f"iterations_vs_n_L{int(big_l)}.png")
            _savefig(fig, path)
            written.append(path)
    return written


PARAM_CELLS_CSV_HEADER = "alpha,scheme,nu,step,verdict,iterations"


def emit_param_sweep(result: ParamSweepResult, outdir, plots: bool = True,
                     timings: dict | None = None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []

    cells = os.path.join(outdir, "sweep_cells.csv")
    write_csv(
        cells,
        PARAM_CELLS_CSV_HEADER,
        [(c.alpha, c.scheme, c.nu, c.step, c.verdict, c.iterations) for c in result.cells],
    )
    written.append(cells)

    summary = os.path.join(outdir, "summary.csv")
    write_csv(
        summary,
        SUMMARY_CSV_HEADER,
        [(b.alpha, b.scheme, b.iterations, b.nu, b.step) for b in result.best],
    )
    written.append(summary)

    manifest = os.path.join(outdir, "manifest.txt")
    write_manifest(manifest, "param-sweep", result.config, timings or {})
    written.append(manifest)

    if plots and result.best:
        fig, ax = plt.subplots(figsize=(6, 4))
        for scheme in ("pgd", "pagd"):
            pts = sorted(
                (b.alpha, b.iterations) for b in result.best if b.scheme == scheme
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=scheme.upper(), **_SCHEME_STYLE[scheme])
        ax.set_xlabel("fractional order alpha")
        ax.set_ylabel("minimal iterations over the (nu, s) grid")
        ax.legend()
        path = os.path.join(outdir, "best_iterations.png")
        _savefig(fig, path)
        written.append(path)
    return written


RATE_CSV_HEADER = "label,fitted,target,rel_deviation"


def emit_ode_study(result: OdeStudyResult, outdir, plots: bool = True,
                   timings: dict | None = None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []

    trajectory = os.path.join(outdir, "trajectory.csv")
    write_trajectory_csv(result.trajectory, trajectory)
    written.append(trajectory)

    rates = os.path.join(outdir, "rate_match.csv")
    write_csv(
        rates,
        RATE_CSV_HEADER,
        [(r.label, r.fitted, r.target, r.rel_deviation) for r in result.rate_rows],
    )
    written.append(rates)

    manifest = os.path.join(outdir, "manifest.txt")
    write_manifest(manifest, "ode-study", result.config, timings or {})
    written.append(manifest)

    if plots:
        traj = result.trajectory
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(traj.ts, traj.potential, label="potential")
        ax.semilogy(traj.ts, traj.kinetic, label="kinetic")
        ax.semilogy(traj.ts, traj.total, label="total")
        ax.semilogy(traj.ts, traj.inflated, label="inflated total")
        ax.set_xlabel("time")
        ax.set_ylabel("energy")
        ax.legend()
        path = os.path.join(outdir, "flow_energies.png")
        _savefig(fig, path)
        written.append(path)
    return written
