"""Figure and residual-table rendering for evaluation runs.

Renders forecast-vs-truth scatter panels (one per target) to an image file
next to the delimited output, so an eval run leaves both machine-readable
numbers and something a human can eyeball.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import EvalSet, MetricsReport


def write_residuals_csv(path: str, labels: list[str],
                        per_target: dict[str, EvalSet]) -> None:
    """Per-design residual table: one row per design, two columns per target."""
    targets = list(per_target)
    header = ["design"]
    for t in targets:
        header += [f"{t}_truth", f"{t}_forecast", f"{t}_residual"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, label in enumerate(labels):
            row: list = [label]
            for t in targets:
                forecast, truth = per_target[t].pairs[i]
                row += [truth, forecast, forecast - truth]
            writer.writerow(row)


def render_eval_figure(path: str, per_target: dict[str, EvalSet],
                       reports: dict[str, MetricsReport]) -> None:
    """Scatter each target's forecasts against ground truth with a y=x
    reference line; log-log when the data spans decades."""
    targets = list(per_target)
    fig, axes = plt.subplots(1, len(targets),
                             figsize=(5.0 * len(targets), 4.2))
    if len(targets) == 1:
        axes = [axes]
    for ax, target in zip(axes, targets):
        eval_set = per_target[target]
        forecasts = [f for f, _ in eval_set.pairs]
        truths = [t for _, t in eval_set.pairs]
        positive = [v for v in forecasts + truths if v > 0]
        log_scale = (positive and min(positive) > 0
                     and max(positive) / min(positive) > 1e3
                     and all(v > 0 for v in forecasts + truths))
        ax.scatter(truths, forecasts, s=28, alpha=0.8, edgecolors="none")
        lo = min(truths + forecasts)
        hi = max(truths + forecasts)
        pad = (hi - lo) * 0.05 or 1.0
        line = [lo - pad, hi + pad]
        ax.plot(line, line, linestyle="--", linewidth=1, color="gray")
        if log_scale:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(f"ground truth {target}")
        ax.set_ylabel(f"forecast {target}")
        rep = reports[target]
        ax.set_title(f"{target}: APME {rep.apme_percent:.2f}%  "
                     f"NRMSE {rep.nrmse_percent:.2f}%  R² {rep.r2:.4f}",
                     fontsize=10)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
