"""Dataset/model/results persistence shared by the CLI.

Dataset CSVs carry the header ``x1,...,xd,y`` (UTF-8, '.' decimal).  Model
JSON embeds the artifact version and round-trips float parameters exactly
(json serializes doubles via repr).  Results CSVs start with '# key: value'
metadata lines (artifact version, config hash, deviations) followed by the
fixed schema ``run_id,model,<x>,metric,value,seed,status`` sorted by
(x, model, run_id, metric).
"""
from __future__ import annotations

import csv
import io as _io
import json

import numpy as np

from . import expfam as ef
from . import glm
from . import lda
from .errors import DataFormatError, InvalidDataError, InvalidParameterError
from .sim import MetricRecord
from .util import atomic_write_text

ARTIFACT_VERSION = "0.1.0"

__all__ = [
    "ARTIFACT_VERSION",
    "read_dataset_csv",
    "write_dataset_csv",
    "model_to_json",
    "model_from_json",
    "write_predictions_csv",
    "read_predictions_csv",
    "write_results_csv",
    "read_results_csv",
]


def read_dataset_csv(path: str, expect_y: bool = True):
    """Read a dataset CSV with header x1..xd[,y]; returns (X, y-or-None)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("dataset file is empty", line=1)
        header = [h.strip() for h in header]
        has_y = header[-1] == "y"
        cov_cols = header[:-1] if has_y else header
        for j, name in enumerate(cov_cols):
            if name != f"x{j + 1}":
                raise DataFormatError(
                    f"expected column 'x{j + 1}' at position {j + 1}, found {name!r}", line=1
                )
        if expect_y and not has_y:
            raise DataFormatError("expected final column 'y'", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, found {len(row)}", line=lineno
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataFormatError(f"non-numeric value ({exc})", line=lineno)
    if not rows:
        raise DataFormatError("dataset contains no data rows", line=2)
    arr = np.asarray(rows, dtype=float)
    if has_y:
        return arr[:, :-1], arr[:, -1]
    return arr, None


def write_dataset_csv(path: str, X: np.ndarray, y=None) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"x{j + 1}" for j in range(X.shape[1])]
    if y is not None:
        header.append("y")
    writer.writerow(header)
    for i in range(X.shape[0]):
        row = [repr(float(v)) for v in X[i]]
        if y is not None:
            row.append(repr(float(y[i])))
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

def _family_to_dict(family: ef.ExpFamily) -> dict:
    out = {"tag": family.family_tag}
    if family.family_tag == "gaussian_known_variance":
        out["sigma2"] = family.sigma2
    if family.family_tag == "categorical":
        out["dimension"] = family.dimension
    return out


def _family_from_dict(d: dict) -> ef.ExpFamily:
    tag = d["tag"]
    if tag == "gaussian_known_variance":
        return ef.gaussian_known_variance(d.get("sigma2", 1.0))
    if tag == "categorical":
        return ef.categorical(d["dimension"])
    return ef.ExpFamily(tag)


def model_to_json(model) -> str:
    if isinstance(model, glm.RobustGlmModel):
        payload = {
            "model_type": "robust_glm",
            "family": _family_to_dict(model.family),
            "w": list(model.w),
            "intercept": model.intercept,
            "has_intercept": model.has_intercept,
            "lambda2": model.lambda2,
            "diagnostics": {
                "converged": model.converged,
                "n_iters": model.n_iters,
                "final_elbo": model.elbo_trace[-1] if model.elbo_trace else None,
                "lambda2_clamped": model.lambda2_clamped,
                "elbo_decreased": model.elbo_decreased,
            },
        }
    elif isinstance(model, glm.StandardGlmModel):
        payload = {
            "model_type": "standard_glm",
            "family": _family_to_dict(model.family),
            "w": list(model.w),
            "intercept": model.intercept,
            "has_intercept": model.has_intercept,
            "sigma2_hat": None if not np.isfinite(model.sigma2_hat) else model.sigma2_hat,
            "diagnostics": {"converged": model.converged, "diverged": model.diverged,
                            "loglik": model.loglik},
        }
    elif isinstance(model, glm.StudentTRegressionModel):
        payload = {
            "model_type": "student_t_regression",
            "w": list(model.w),
            "intercept": model.intercept,
            "has_intercept": model.has_intercept,
            "s": model.s,
            "nu": model.nu,
            "diagnostics": {"converged": model.converged,
                            "degenerate_scale": model.degenerate_scale},
        }
    elif isinstance(model, glm.NegBinRegressionModel):
        payload = {
            "model_type": "negative_binomial",
            "w": list(model.w),
            "intercept": model.intercept,
            "has_intercept": model.has_intercept,
            "r": model.r,
            "diagnostics": {"converged": model.converged,
                            "poisson_equivalent": model.poisson_equivalent},
        }
    elif isinstance(model, lda.TopicModelState):
        payload = {
            "model_type": "topic_model",
            "mode": model.mode,
            "K": model.K,
            "alpha": model.alpha,
            "eta": [list(row) for row in model.eta],
        }
    else:
        raise InvalidParameterError(f"cannot serialize model type {type(model).__name__}")
    payload["artifact_version"] = ARTIFACT_VERSION
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str):
    d = json.loads(text)
    kind = d.get("model_type")
    if kind == "robust_glm":
        return glm.RobustGlmModel(
            w=np.asarray(d["w"], dtype=float),
            intercept=float(d["intercept"]),
            lambda2=float(d["lambda2"]),
            family=_family_from_dict(d["family"]),
            has_intercept=bool(d["has_intercept"]),
            elbo_trace=(d["diagnostics"].get("final_elbo") or 0.0,),
            converged=bool(d["diagnostics"]["converged"]),
            lambda2_clamped=bool(d["diagnostics"].get("lambda2_clamped", False)),
            elbo_decreased=bool(d["diagnostics"].get("elbo_decreased", False)),
            n_iters=int(d["diagnostics"].get("n_iters", 0)),
        )
    if kind == "standard_glm":
        return glm.StandardGlmModel(
            w=np.asarray(d["w"], dtype=float),
            intercept=float(d["intercept"]),
            family=_family_from_dict(d["family"]),
            has_intercept=bool(d["has_intercept"]),
            loglik=float(d["diagnostics"].get("loglik", float("nan"))),
            converged=bool(d["diagnostics"]["converged"]),
            diverged=bool(d["diagnostics"].get("diverged", False)),
            sigma2_hat=float(d["sigma2_hat"]) if d.get("sigma2_hat") is not None else float("nan"),
        )
    if kind == "student_t_regression":
        return glm.StudentTRegressionModel(
            w=np.asarray(d["w"], dtype=float),
            intercept=float(d["intercept"]),
            s=float(d["s"]),
            nu=float(d["nu"]),
            has_intercept=bool(d["has_intercept"]),
            loglik_trace=(),
            converged=bool(d["diagnostics"]["converged"]),
            degenerate_scale=bool(d["diagnostics"].get("degenerate_scale", False)),
        )
    if kind == "negative_binomial":
        return glm.NegBinRegressionModel(
            w=np.asarray(d["w"], dtype=float),
            intercept=float(d["intercept"]),
            r=float(d["r"]),
            has_intercept=bool(d["has_intercept"]),
            loglik_trace=(),
            converged=bool(d["diagnostics"]["converged"]),
            poisson_equivalent=bool(d["diagnostics"].get("poisson_equivalent", False)),
        )
    if kind == "topic_model":
        return lda.TopicModelState(
            K=int(d["K"]),
            eta=np.asarray(d["eta"], dtype=float),
            alpha=float(d["alpha"]),
            mode=d["mode"],
        )
    raise InvalidDataError(f"unknown model_type {kind!r} in model file")


# ---------------------------------------------------------------------------
# predictions and results
# ---------------------------------------------------------------------------

PREDICTION_FIELDS = ("point", "mean", "variance", "prob1", "class1")


def write_predictions_csv(path: str, summary: glm.PredictiveSummary) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PREDICTION_FIELDS)
    n = len(summary.point)
    for i in range(n):
        writer.writerow([repr(float(getattr(summary, f)[i])) for f in PREDICTION_FIELDS])
    atomic_write_text(path, buf.getvalue())


def read_predictions_csv(path: str) -> dict:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PREDICTION_FIELDS:
            raise DataFormatError(f"unexpected prediction header {header!r}", line=1)
        cols = {f: [] for f in PREDICTION_FIELDS}
        for row in reader:
            if not row:
                continue
            for f, val in zip(PREDICTION_FIELDS, row):
                cols[f].append(float(val))
    return {f: np.asarray(v) for f, v in cols.items()}


def results_csv_text(records, metadata: dict, x_field: str = "noise_level") -> str:
    buf = _io.StringIO()
    for key in sorted(metadata):
        buf.write(f"# {key}: {metadata[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run_id", "model", x_field, "metric", "value", "seed", "status"])
    ordered = sorted(
        records,
        key=lambda r: (r.noise_level, r.model_name, r.run_id, r.metric_name),
    )
    for r in ordered:
        writer.writerow(
            [r.run_id, r.model_name, repr(float(r.noise_level)), r.metric_name,
             repr(float(r.value)), r.seed, r.status]
        )
    return buf.getvalue()


def write_results_csv(path: str, records, metadata: dict, x_field: str = "noise_level") -> None:
    atomic_write_text(path, results_csv_text(records, metadata, x_field))


def read_results_csv(path: str):
    """Returns (records, metadata, x_field)."""
    metadata = {}
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = None
        x_field = "noise_level"
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
                continue
            row = next(csv.reader([line]))
            if header is None:
                header = row
                if len(header) != 7 or header[0] != "run_id" or header[3] != "metric":
                    raise DataFormatError(f"unexpected results header {header!r}", line=lineno)
                x_field = header[2]
                continue
            records.append(
                MetricRecord(
                    run_id=int(row[0]),
                    model_name=row[1],
                    noise_level=float(row[2]),
                    metric_name=row[3],
                    value=float(row[4]),
                    seed=int(row[5]),
                    status=row[6],
                )
            )
    if header is None:
        raise DataFormatError("results file has no header", line=1)
    return records, metadata, x_field
