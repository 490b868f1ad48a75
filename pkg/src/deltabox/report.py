"""Figure rendering for decay runs and barrier sweeps.

The CLI report path drops PNG figures next to the delimited output: the
nondecay probability with its exponential fit and running decay rate, the
partial decay probabilities against their exponential-limit templates, the
right-to-left ratios around the fitted width ratio, and (for sweeps) the
width ratio versus barrier asymmetry with the inverse-square curve.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import ProbabilityTrace
from .fitting import FitResult, SweepRow

__all__ = [
    "render_survival_figure",
    "render_partials_figure",
    "render_ratios_figure",
    "render_sweep_figure",
]

_DPI = 150


def _clip_to_window(trace: ProbabilityTrace, fit: FitResult | None) -> np.ndarray:
    if fit is None:
        return trace.valid_mask
    return trace.t <= min(trace.horizon, 1.25 * fit.window.t_hi)


def render_survival_figure(
    trace: ProbabilityTrace, fit: FitResult | None, path: str | Path
) -> Path:
    """Nondecay probability (log scale) and running decay rate."""
    fig, (ax_p, ax_g) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    t = trace.t
    ax_p.semilogy(t, trace.p0_surv, "k-", lw=1.0, label="P0")
    if fit is not None:
        model = np.exp(-fit.gamma * (t - fit.t0))
        ax_p.semilogy(t, model, "r--", lw=1.0, label="shifted exponential")
        ax_p.axvspan(fit.window.t_lo, fit.window.t_hi, color="0.9", zorder=0)
    ax_p.set_xlabel("t")
    ax_p.set_ylabel("P0(t)")
    ax_p.legend(frameon=False, fontsize=8)
    ax_g.plot(t[1:], trace.gamma_running[1:], "k-", lw=1.0)
    if fit is not None:
        ax_g.axhline(fit.gamma, color="r", ls="--", lw=1.0)
    ax_g.set_xlabel("t")
    ax_g.set_ylabel("-ln P0 / t")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_partials_figure(
    trace: ProbabilityTrace, fit: FitResult | None, path: str | Path
) -> Path:
    """Partial decay probabilities with their exponential-limit curves."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    t = trace.t
    ax.plot(t, trace.p_left, "k-", lw=1.0, label="PL")
    ax.plot(t, trace.p_right, "b-", lw=1.0, label="PR")
    if fit is not None:
        template = 1.0 - np.exp(-fit.gamma * (t - fit.t0))
        ax.plot(t, fit.gamma_left / fit.gamma * template, "r--", lw=1.0)
        ax.plot(t, fit.gamma_right / fit.gamma * template, "r--", lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("partial decay probability")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_ratios_figure(
    trace: ProbabilityTrace, fit: FitResult | None, path: str | Path
) -> Path:
    """Right-to-left probability and current ratios around beta."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    mask = _clip_to_window(trace, fit)
    t = trace.t[mask]
    ax.plot(t, trace.ratio_prob[mask], "k-", lw=1.0, label="probability ratio")
    ax.plot(t, trace.ratio_curr[mask], "b-", lw=0.8, alpha=0.8, label="current ratio")
    if fit is not None:
        ax.axhline(fit.beta, color="r", ls="--", lw=1.0, label="beta")
        spread = max(3.0 * abs(fit.beta), 1.0)
        ax.set_ylim(-0.2 * spread, spread)
    ax.set_xlabel("t")
    ax.set_ylabel("right-to-left ratio")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_sweep_figure(rows: list[SweepRow], path: str | Path) -> Path:
    """Fitted width ratio versus asymmetry, one line per barrier strength."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ok = [r for r in rows if r.status == "ok"]
    for v0 in sorted({r.v0 for r in ok}):
        pts = sorted((r.kappa, r.beta) for r in ok if r.v0 == v0)
        ax.plot(
            [k for k, _ in pts], [b for _, b in pts],
            marker="o", ms=3.5, lw=1.0, label=f"V0 = {v0:g}",
        )
    if ok:
        kappas = np.linspace(min(r.kappa for r in ok), max(r.kappa for r in ok), 200)
        ax.plot(kappas, kappas**-2.0, "g-", lw=1.5, alpha=0.6, label="1 / kappa^2")
    ax.set_xlabel("kappa")
    ax.set_ylabel("beta")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
