"""Figure rendering for sweep summaries.

Renders the privacy-utility curves (metric vs epsilon, and vs per-site sample
size when swept) as PNG files next to the delimited output, one line per
method with error bars from the per-cell standard deviations.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .sweep import SummaryRow

__all__ = ["render_figures"]

_METRIC_LABEL = {"q_ce": "captured energy", "q_comp": "component error"}


def _slug(value) -> str:
    return str(value).replace(".", "p").replace("-", "m")


def _plot_panel(ax, points, x_label, y_label):
    for method in sorted({p[0] for p in points}):
        xs = [p[1] for p in points if p[0] == method]
        ys = [p[2] for p in points if p[0] == method]
        es = [p[3] for p in points if p[0] == method]
        order = sorted(range(len(xs)), key=lambda i: xs[i])
        ax.errorbar(
            [xs[i] for i in order],
            [ys[i] for i in order],
            yerr=[es[i] for i in order],
            marker="o",
            capsize=3,
            label=method,
        )
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.set_xscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)


def render_figures(summary: list[SummaryRow], out_dir) -> list[Path]:
    """Write one metric-vs-epsilon figure per (family, delta, n_s, s) cell group.

    When the sweep covers several sample sizes, companion metric-vs-n_s
    figures are written at each (epsilon, delta).  Returns the created paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    by_eps: dict[tuple, list] = {}
    by_ns: dict[tuple, list] = {}
    for r in summary:
        by_eps.setdefault((r.family, r.metric, r.delta, r.n_s, r.s, r.k), []).append(
            (r.method, r.epsilon, r.mean, r.stddev)
        )
        by_ns.setdefault((r.family, r.metric, r.delta, r.epsilon, r.s, r.k), []).append(
            (r.method, r.n_s, r.mean, r.stddev)
        )

    for (family, metric, delta, n_s, s, k), points in sorted(by_eps.items()):
        if len({p[1] for p in points}) < 2:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        _plot_panel(ax, points, "epsilon", _METRIC_LABEL.get(metric, metric))
        ax.set_title(f"{family}: delta={delta}, n_s={n_s}, sites={s}, k={k}", fontsize=9)
        fig.tight_layout()
        path = out_dir / f"{family}_{metric}_vs_eps_delta{_slug(delta)}_ns{n_s}_s{s}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)

    for (family, metric, delta, eps, s, k), points in sorted(by_ns.items()):
        if len({p[1] for p in points}) < 2:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        _plot_panel(ax, points, "samples per site", _METRIC_LABEL.get(metric, metric))
        ax.set_title(f"{family}: eps={eps}, delta={delta}, sites={s}, k={k}", fontsize=9)
        fig.tight_layout()
        path = out_dir / f"{family}_{metric}_vs_ns_eps{_slug(eps)}_delta{_slug(delta)}_s{s}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)

    return created
