"""Figure rendering for evaluation reports and depth sweeps.

Renders to files only (Agg backend); the CLI drops these next to the
JSON/CSV outputs so a run leaves both machine-readable tables and the
pictures people actually look at.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SWEEP_METRICS = ("mrr", "spearmanr", "mape", "hits1")


def save_report_figure(report: dict, path) -> None:
    """Grouped per-type bars for MRR and Spearman correlation."""
    per_type = report["per_type"]
    types = list(per_type.keys())
    mrr_values = [per_type[t]["mrr"] for t in types]
    sp_values = [per_type[t]["spearmanr"] for t in types]

    fig, axes = plt.subplots(2, 1, figsize=(max(6.0, 0.6 * len(types) + 2), 6.4), sharex=True)
    positions = range(len(types))
    axes[0].bar(positions, mrr_values, color="#4878d0")
    axes[0].set_ylabel("mrr")
    axes[0].set_ylim(0, 1.05)
    axes[1].bar(
        positions,
        [0.0 if v is None else v for v in sp_values],
        color="#ee854a",
    )
    axes[1].set_ylabel("spearmanr")
    axes[1].set_ylim(-1.05, 1.05)
    axes[1].set_xticks(list(positions))
    axes[1].set_xticklabels(types, rotation=45, ha="right")
    axes[0].set_title(f"{report['dataset']} | {report['predictor']}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(rows: list[dict], path) -> None:
    """Metric-versus-depth curves, one line per query type.

    ``rows`` are sweep CSV records: depth, type, mrr, spearmanr, mape, hits1.
    """
    types = sorted({row["type"] for row in rows})
    fig, axes = plt.subplots(2, 2, figsize=(9.6, 7.2))
    for ax, metric in zip(axes.flat, _SWEEP_METRICS):
        for qtype in types:
            series = sorted(
                (row for row in rows if row["type"] == qtype), key=lambda r: r["depth"]
            )
            depths = [row["depth"] for row in series]
            values = [row[metric] for row in series]
            if all(v is None for v in values):
                continue
            ax.plot(depths, values, marker="o", label=qtype)
        ax.set_xlabel("unraveling depth")
        ax.set_ylabel(metric)
        ax.grid(True, alpha=0.3)
    axes.flat[0].legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
