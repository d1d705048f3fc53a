"""Figure rendering for solve and bench outputs.

Figures are written next to the CSV artifacts; the data files remain the
source of truth and plotting never changes them.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_LABELS = {
    "apc": "APC",
    "dgd": "DGD",
    "dnag": "D-NAG",
    "dhbm": "D-HBM",
    "admm": "M-ADMM",
    "cimmino": "B-Cimmino",
    "consensus": "Consensus",
    "pdhbm": "Precond. D-HBM",
}


def render_decay(traces, path, title=None):
    """Semilog error-decay curves, one per trace, saved to `path`."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for trace in traces:
        errs = [e if e > 0 else float("nan") for e in trace.errors]
        ax.semilogy(range(len(errs)), errs,
                    label=_LABELS.get(trace.method, trace.method))
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_times(table, path, title=None):
    """Log-scale bar chart of predicted vs empirical convergence times."""
    rows = [r for r in table.rows
            if r.error is None and math.isfinite(r.T_predicted) and r.T_predicted > 0]
    if not rows:
        return None
    labels = [_LABELS.get(r.method, r.method) for r in rows]
    xs = range(len(rows))
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.bar([x - 0.2 for x in xs], [r.T_predicted for r in rows], width=0.4,
           label="predicted T")
    emp = [r.T_empirical if math.isfinite(r.T_empirical) else 0.0 for r in rows]
    ax.bar([x + 0.2 for x in xs], emp, width=0.4, label="empirical T")
    ax.set_yscale("log")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("convergence time T = 1 / (-ln rho)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
