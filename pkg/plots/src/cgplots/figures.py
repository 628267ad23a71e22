"""Render experiment-results CSVs into the two benchmark figure styles.

Input is the fixed results schema produced by the learning pipeline; this
package never recomputes metrics or touches matrices.  ``ratio_curves``
draws one panel per metric with mean +/- std bands over trials against the
sampling ratio; ``sphere_panel`` draws grouped per-method bars for the
geometric experiment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

RESULTS_COLUMNS = [
    "seed",
    "method",
    "family",
    "v",
    "n",
    "M",
    "r",
    "alpha",
    "beta",
    "f1",
    "weight_mse",
    "empirical_tv",
    "spectral_dist",
    "heat_dist",
    "kernel_dim_est",
    "kernel_dim_true",
    "wall_time_s",
]

RATIO_DEFAULT_METRICS = ["f1", "empirical_tv", "weight_mse"]
SPHERE_DEFAULT_METRICS = ["f1", "spectral_dist", "heat_dist", "kernel_dim_est"]

METRIC_LABELS = {
    "f1": "F1 score",
    "weight_mse": "edge-weight MSE",
    "empirical_tv": "empirical total variation",
    "spectral_dist": "average spectral distance",
    "heat_dist": "heat diffusion distance",
    "kernel_dim_est": "kernel dimension",
}

# Pinned style: rendering a frozen CSV twice must produce identical bytes.
STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "svg.hashsalt": "cgplots",
    "svg.fonttype": "none",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}

METHOD_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]


class SchemaError(ValueError):
    """The CSV does not carry the documented results schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str  # "ratio_curves" | "sphere_panel"
    out_path: str
    metrics: list[str] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)  # empty = all present

    def __post_init__(self) -> None:
        if self.kind not in ("ratio_curves", "sphere_panel"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        for metric in self.metrics:
            if metric not in RESULTS_COLUMNS:
                raise SchemaError(
                    f"metric {metric!r} is not in the results schema {RESULTS_COLUMNS}"
                )


def load_rows(csv_path: str | Path) -> list[dict]:
    with Path(csv_path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in RESULTS_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{csv_path}: missing results columns {missing}")
        return list(reader)


def _select_methods(rows: list[dict], wanted: list[str]) -> list[str]:
    present = sorted({r["method"] for r in rows})
    if not wanted:
        return present
    chosen = [m for m in wanted if m in present]
    if not chosen:
        raise ValueError(f"method filter {wanted} matches nothing; available: {present}")
    return chosen


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def _write_both(fig, out_path: str | Path) -> tuple[Path, Path]:
    raster = Path(out_path)
    if raster.suffix.lower() != ".png":
        raster = raster.with_suffix(".png")
    vector = raster.with_suffix(".svg")
    raster.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(raster, format="png", metadata={"Software": "cgplots"})
    fig.savefig(vector, format="svg", metadata={"Date": None})
    plt.close(fig)
    return raster, vector


def plot_ratio_curves(spec: FigureSpec) -> tuple[Path, Path]:
    """Metric-versus-sampling-ratio curves with mean +/- std bands.

    One panel per requested metric, one line per method; the total-variation
    panel carries a horizontal reference at the model rank n(v-1).
    """
    rows = load_rows(spec.csv_path)
    if not rows:
        raise ValueError(f"{spec.csv_path}: no data rows")
    metrics = spec.metrics or RATIO_DEFAULT_METRICS
    methods = _select_methods(rows, spec.methods)

    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(metrics), figsize=(3.4 * len(metrics), 3.0))
        axes = np.atleast_1d(axes)
        for ax, metric in zip(axes, metrics):
            for idx, method in enumerate(methods):
                mine = [r for r in rows if r["method"] == method]
                ratios = sorted({float(r["r"]) for r in mine})
                means, stds = [], []
                for ratio in ratios:
                    mean, std = _mean_std(
                        [float(r[metric]) for r in mine if float(r["r"]) == ratio]
                    )
                    means.append(mean)
                    stds.append(std)
                color = METHOD_COLORS[idx % len(METHOD_COLORS)]
                ax.plot(ratios, means, marker="o", color=color, label=method)
                lo = np.array(means) - np.array(stds)
                hi = np.array(means) + np.array(stds)
                ax.fill_between(ratios, lo, hi, color=color, alpha=0.2, linewidth=0)
            if metric == "empirical_tv":
                ranks = {int(r["n"]) * (int(r["v"]) - 1) for r in rows if r["method"] in methods}
                for rank in sorted(ranks):
                    ax.axhline(rank, color="black", linestyle="--", linewidth=1.0, label=f"rank = {rank}")
            ax.set_xlabel("sampling ratio r")
            ax.set_ylabel(METRIC_LABELS.get(metric, metric))
            ax.legend(fontsize=7)
        fig.tight_layout()
        return _write_both(fig, spec.out_path)


def plot_sphere_panel(spec: FigureSpec) -> tuple[Path, Path]:
    """Grouped per-method bars for the sphere experiment.

    The kernel-dimension panel draws the true value as a dashed reference.
    """
    rows = [r for r in load_rows(spec.csv_path) if r["family"] == "sphere"]
    if not rows:
        raise ValueError(f"{spec.csv_path}: no sphere-family rows")
    metrics = spec.metrics or SPHERE_DEFAULT_METRICS
    methods = _select_methods(rows, spec.methods)

    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(metrics), figsize=(2.6 * len(metrics), 3.0))
        axes = np.atleast_1d(axes)
        positions = np.arange(len(methods))
        for ax, metric in zip(axes, metrics):
            means, stds = [], []
            for method in methods:
                mean, std = _mean_std(
                    [float(r[metric]) for r in rows if r["method"] == method]
                )
                means.append(mean)
                stds.append(std)
            colors = [METHOD_COLORS[i % len(METHOD_COLORS)] for i in range(len(methods))]
            ax.bar(positions, means, yerr=stds, color=colors, width=0.7, capsize=3)
            if metric == "kernel_dim_est":
                true_dims = {int(r["kernel_dim_true"]) for r in rows if r["method"] in methods}
                for dim in sorted(true_dims):
                    ax.axhline(dim, color="black", linestyle="--", linewidth=1.0)
                    ax.annotate(
                        f"true = {dim}", (0.97, dim), xycoords=("axes fraction", "data"),
                        fontsize=7, ha="right", va="bottom",
                    )
            ax.set_xticks(positions)
            ax.set_xticklabels(methods, rotation=20)
            ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        fig.tight_layout()
        return _write_both(fig, spec.out_path)


def render(spec: FigureSpec) -> tuple[Path, Path]:
    if spec.kind == "ratio_curves":
        return plot_ratio_curves(spec)
    return plot_sphere_panel(spec)
