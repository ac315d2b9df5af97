"""Panel rendering over the experiment results CSV schema.

Input files are ``run_id,model,<x>,metric,value,seed,status`` with optional
'#'-prefixed metadata lines; <x> is noise_level or K.  Each panel draws one
mean line per model with a +/-1 standard-error band over repetitions; rows
with status != ok are excluded and counted in a footnote.  Improvement panels
instead plot the per-(run, x) difference standard - robust, averaged the same
way.
"""
from __future__ import annotations

import csv
import os
import tempfile
import warnings
from dataclasses import dataclass

import numpy as np

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figure-plots"
import matplotlib.pyplot as plt  # noqa: E402


@dataclass(frozen=True)
class PanelSpec:
    csv_path: str
    x_field: str = "noise_level"
    y_field: str = "value"
    group_field: str = "model"
    title: str = ""
    y_label: str = ""
    improvement: bool = False


# panels per figure name: (csv suffix, title, y label)
FIGURE_LAYOUTS = {
    "linear": [
        ("figure_linear_neg_pL1.csv", "(a) Negative predictive L1", "negative pL1"),
        ("figure_linear_neg_pR2.csv", "(b) Negative predictive R2", "negative pR2"),
        ("figure_linear_param_mse.csv", "(c) Parameter MSE", "MSE"),
    ],
    "logistic": [
        ("figure_logistic_classification_error.csv", "(a) Classification error", "error rate"),
        ("figure_logistic_neg_pred_loglik.csv", "(b) Negative predictive log likelihood", "negative log likelihood"),
        ("figure_logistic_param_mse.csv", "(c) Parameter MSE", "MSE"),
    ],
    "poisson": [
        ("figure_poisson_neg_pL1.csv", "(a) Negative predictive L1", "negative pL1"),
        ("figure_poisson_neg_pred_loglik.csv", "(b) Negative predictive log likelihood", "negative log likelihood"),
        ("figure_poisson_param_mse.csv", "(c) Parameter MSE", "MSE"),
    ],
    "improvement": [
        ("figure_improvement_linear_neg_pR2.csv", "(a) Predictive R2 improvement", "improvement"),
        ("figure_improvement_logistic_neg_pred_loglik.csv", "(b) Log likelihood improvement", "improvement"),
        ("figure_improvement_poisson_neg_pred_loglik.csv", "(c) Log likelihood improvement", "improvement"),
    ],
    "lda": [
        ("figure_lda_neg_pred_loglik.csv", "Held-out negative per-word log likelihood", "negative log likelihood"),
    ],
}


class MissingColumnError(ValueError):
    pass


def load_results_csv(path: str):
    """Parse a results CSV into (rows, header, metadata)."""
    metadata = {}
    rows = []
    header = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = fields
                continue
            rows.append(dict(zip(header, fields)))
    if header is None:
        raise ValueError(f"{path}: no header row found")
    return rows, header, metadata


def _require_columns(header, spec: PanelSpec, path: str):
    for col in (spec.x_field, spec.y_field, spec.group_field, "status", "run_id"):
        if col not in header:
            raise MissingColumnError(f"{path}: missing column {col!r}")


def panel_series(spec: PanelSpec):
    """Aggregate one panel: {line label: (x, mean, stderr, n)} plus the
    excluded-row count.  Means use only status-ok rows."""
    rows, header, _ = load_results_csv(spec.csv_path)
    _require_columns(header, spec, spec.csv_path)
    excluded = sum(1 for r in rows if r["status"] != "ok")
    rows = [r for r in rows if r["status"] == "ok"]

    def aggregate(pairs):
        # pairs: list of (x, value) tuples
        xs = sorted({x for x, _ in pairs})
        means, ses, counts = [], [], []
        for x in xs:
            vals = np.asarray([v for xx, v in pairs if xx == x], dtype=float)
            means.append(float(np.mean(vals)))
            ses.append(float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0)
            counts.append(len(vals))
        return np.asarray(xs), np.asarray(means), np.asarray(ses), np.asarray(counts)

    series = {}
    if spec.improvement:
        models = sorted({r[spec.group_field] for r in rows})
        robust = [m for m in models if m.startswith("robust") or m == "rlda"]
        standard = [m for m in models if m not in robust]
        if len(robust) != 1 or len(standard) != 1:
            raise ValueError(
                f"{spec.csv_path}: improvement needs one robust and one standard model, got {models}"
            )
        by_key = {}
        for r in rows:
            key = (r["run_id"], float(r[spec.x_field]))
            by_key.setdefault(key, {})[r[spec.group_field]] = float(r[spec.y_field])
        pairs = [
            (key[1], vals[standard[0]] - vals[robust[0]])
            for key, vals in by_key.items()
            if standard[0] in vals and robust[0] in vals
        ]
        series[f"{standard[0]} - {robust[0]}"] = aggregate(pairs)
    else:
        for model in sorted({r[spec.group_field] for r in rows}):
            pairs = [
                (float(r[spec.x_field]), float(r[spec.y_field]))
                for r in rows
                if r[spec.group_field] == model
            ]
            series[model] = aggregate(pairs)
    return series, excluded


def render_figure(panel_specs, out_path: str):
    """Render panels side by side; writes <out>.png and <out>.svg atomically.

    Returns the per-panel aggregated series so callers can verify the plotted
    values independently.
    """
    n = len(panel_specs)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.4), squeeze=False)
    rendered = []
    for ax, spec in zip(axes[0], panel_specs):
        series, excluded = panel_series(spec)
        for label, (xs, means, ses, counts) in sorted(series.items()):
            if xs.size == 0:
                warnings.warn(f"{spec.csv_path}: empty cell for {label}", RuntimeWarning)
                continue
            ax.plot(xs, means, marker="o", markersize=3, label=label)
            ax.fill_between(xs, means - ses, means + ses, alpha=0.25, linewidth=0)
        ax.set_xlabel(spec.x_field)
        ax.set_ylabel(spec.y_label or spec.y_field)
        title = spec.title
        if excluded:
            title = f"{title} [{excluded} failed runs excluded]"
        ax.set_title(title, fontsize=10)
        ax.legend(fontsize=8)
        rendered.append({"spec": spec, "series": series, "excluded": excluded})
    fig.tight_layout()

    stem, ext = os.path.splitext(out_path)
    if ext.lower() not in ("", ".png", ".svg"):
        stem = out_path
    targets = {f"{stem}.png": "png", f"{stem}.svg": "svg"}
    for target, fmt in targets.items():
        directory = os.path.dirname(os.path.abspath(target)) or "."
        fd, tmp = tempfile.mkstemp(prefix=".tmp-fig-", suffix=f".{fmt}", dir=directory)
        os.close(fd)
        try:
            # Date metadata suppressed so rerenders are byte-identical
            fig.savefig(tmp, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    plt.close(fig)
    return rendered


def figure_panel_specs(figure: str, in_dir: str):
    if figure not in FIGURE_LAYOUTS:
        raise ValueError(f"unknown figure {figure!r}; choose from {sorted(FIGURE_LAYOUTS)}")
    specs = []
    for suffix, title, y_label in FIGURE_LAYOUTS[figure]:
        path = os.path.join(in_dir, suffix)
        x_field = "K" if figure == "lda" else "noise_level"
        specs.append(
            PanelSpec(
                csv_path=path,
                x_field=x_field,
                title=title,
                y_label=y_label,
                improvement=figure == "improvement",
            )
        )
    return specs
