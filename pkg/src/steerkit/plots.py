"""Figure rendering for the report paths (PNG next to the delimited output).

matplotlib is imported lazily so the numeric paths stay import-light.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_sweep_figure(result, path) -> Path:
    """Violation curve over reflectivity with the refined landmarks marked."""
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.4), sharex=True)
    rs = result.reflectivities
    ax1.plot(rs, result.lhs, label="correlation side", color="tab:blue")
    ax1.plot(rs, result.rhs, label="bound side", color="tab:orange")
    ax1.set_ylabel("inequality sides")
    ax1.legend(frameon=False)
    ax2.plot(rs, result.violation, color="tab:green")
    ax2.axhline(0.0, color="0.5", lw=0.8)
    ax2.plot([result.r_opt], [result.violation_opt], "k^", label=f"optimum R = {result.r_opt:.3f}")
    if result.r_max is not None:
        ax2.plot([result.r_max], [0.0], "kv", label=f"last crossing R = {result.r_max:.3f}")
    ax2.set_xlabel("beam splitter reflectivity R")
    ax2.set_ylabel("violation")
    ax2.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_wigner_figure(grid, path, title: str = "") -> Path:
    """Filled phase-space map with the zero contour highlighted."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.6, 4.8))
    qg, pg = np.meshgrid(grid.q_axis, grid.p_axis, indexing="ij")
    vmax = float(np.abs(grid.values).max())
    mesh = ax.pcolormesh(qg, pg, grid.values, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="auto")
    if grid.values.min() < 0 < grid.values.max():
        ax.contour(qg, pg, grid.values, levels=[0.0], colors="k", linewidths=0.6)
    fig.colorbar(mesh, ax=ax, label="W(q, p)")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_report_figure(report, path) -> Path:
    """Per-setting correlator terms against the bound, with the headline gap."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    terms = np.asarray(report.per_setting_terms, dtype=float)
    ax.bar(np.arange(terms.size), terms, color="tab:blue", label="per-setting term")
    ax.axhline(report.lhs, color="tab:blue", lw=1.0, ls="--", label=f"mean = {report.lhs:.4f}")
    ax.axhline(report.rhs, color="tab:orange", lw=1.2, label=f"bound = {report.rhs:.4f}")
    ax.set_xlabel("setting index")
    ax.set_ylabel("correlator")
    ax.set_title(
        f"violation = {report.violation:+.4f} (bootstrap {report.bootstrap_mean:+.4f}"
        f" +/- {report.bootstrap_std:.4f})"
    )
    ax.legend(frameon=False, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_run_figures(artifacts, run_dir) -> list:
    """Report figure plus a Wigner map of the pooled reconstruction."""
    from .tomography import wigner

    run_dir = Path(run_dir)
    written = [save_report_figure(artifacts.report, run_dir / "report.png")]
    grid = wigner(artifacts.unconditioned_state, points=121, extent=4.0)
    written.append(
        save_wigner_figure(grid, run_dir / "wigner_unconditioned.png", title="pooled state")
    )
    cond = artifacts.reconstructed_states.get((0, +1))
    if cond is not None:
        written.append(
            save_wigner_figure(
                wigner(cond, points=121, extent=4.0),
                run_dir / "wigner_conditioned.png",
                title="setting 0, label +1",
            )
        )
    return written
