"""Experiment command-line surface.

Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 when every
repetition of a simulation failed.  All randomness derives from --seed via
named streams; rerunning any command with the same seed and thread count
reproduces outputs byte for byte.  ROBUSTIFY_THREADS (or --threads) caps the
worker count for repetition-parallel commands.
"""
from __future__ import annotations

import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import expfam as ef
from . import glm
from . import io as rio
from . import lda
from . import sim
from .errors import (
    DataFormatError,
    EmptyDataError,
    InvalidDataError,
    InvalidParameterError,
    RankDeficientError,
    RobustifyError,
)
from .util import config_hash, derive_rng, worker_count

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ALL_FAILED = 4

MODELS_BY_KIND = {
    "linear": ("robust_linear", "ols"),
    "logistic": ("robust_logistic", "logistic"),
    "poisson": ("robust_poisson", "poisson", "nb"),
}

FIT_MODEL_CHOICES = (
    "ols",
    "logistic",
    "poisson",
    "robust_linear",
    "robust_logistic",
    "robust_poisson",
    "nb",
)


class _TotalFailure(RobustifyError):
    pass


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Translate library errors into the documented exit codes."""

    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InvalidParameterError,) as exc:
            _fail(EXIT_CONFIG, str(exc))
        except (DataFormatError, InvalidDataError, EmptyDataError, RankDeficientError) as exc:
            _fail(EXIT_DATA, str(exc))
        except _TotalFailure as exc:
            _fail(EXIT_ALL_FAILED, str(exc))
        except FileNotFoundError as exc:
            _fail(EXIT_DATA, str(exc))

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


def _glm_config(tol, max_iters, intercept) -> glm.GlmConfig:
    kwargs = {}
    if tol is not None:
        kwargs["tol"] = tol
    if max_iters is not None:
        kwargs["max_iters"] = max_iters
    kwargs["intercept"] = intercept == "on"
    return glm.GlmConfig(**kwargs)


def _fit_model(name: str, dataset: glm.RegressionDataset, config: glm.GlmConfig):
    if name == "ols":
        return glm.fit_standard_glm(dataset, ef.gaussian_known_variance(1.0), config)
    if name == "logistic":
        return glm.fit_standard_glm(dataset, ef.bernoulli(), config)
    if name == "poisson":
        return glm.fit_standard_glm(dataset, ef.poisson(), config)
    if name == "robust_linear":
        return glm.fit_student_t_regression(dataset, config)
    if name == "robust_logistic":
        return glm.fit_robust_glm(dataset, ef.bernoulli(), config)
    if name == "robust_poisson":
        return glm.fit_robust_glm(dataset, ef.poisson(), config)
    if name == "nb":
        return glm.fit_negative_binomial(dataset, config)
    raise InvalidParameterError(f"unknown model {name!r}")


def _scoring_model(model):
    """Predictions in the study are formed from the fitted coefficients alone
    (the localized variance robustifies estimation, not test-time scoring), so
    robust GLMs are scored at the lambda2 -> 0 plug-in."""
    if isinstance(model, glm.RobustGlmModel):
        from dataclasses import replace

        return replace(model, lambda2=glm.LAMBDA2_FLOOR)
    return model


def _eval_model(name, model, data: sim.SimData, kind, rep, noise, seed):
    test = data.test
    scorer = _scoring_model(model)
    summary = glm.predict(scorer, test.X)
    mean_ll = None
    y_class = None
    if kind == "linear":
        yhat = summary.point
    elif kind == "logistic":
        yhat = summary.prob1
        y_class = summary.class1
        mean_ll = float(np.mean(glm.predictive_loglik(scorer, test.X, test.y)))
    else:
        yhat = summary.mean
        mean_ll = float(np.mean(glm.predictive_loglik(scorer, test.X, test.y)))
    return sim.compute_metrics(
        test.y,
        yhat,
        data.w_true,
        model.w,
        kind,
        run_id=rep,
        model_name=name,
        noise_level=noise,
        seed=seed,
        mean_loglik=mean_ll,
        y_class=y_class,
    )


def run_simulation(kind, noise_grid, reps, seed, config: glm.GlmConfig, threads=1,
                   models=None):
    """Fit all requested models on every (noise, rep) cell; failures become
    status=failed rows and the run continues."""
    models = models or MODELS_BY_KIND[kind]
    cells = [(noise, rep) for noise in noise_grid for rep in range(reps)]

    def run_cell(cell):
        noise, rep = cell
        spec = sim.SimSpec(kind, noise_level=noise, reps=reps, seed=seed)
        data = sim.generate(spec, rep)
        records = []
        for name in models:
            try:
                model = _fit_model(name, data.train, config)
                records.extend(_eval_model(name, model, data, kind, rep, noise, seed))
            except RobustifyError as exc:
                for metric in sim.METRICS_BY_KIND[kind]:
                    records.append(
                        sim.MetricRecord(
                            run_id=rep, model_name=name, noise_level=noise,
                            metric_name=metric, value=float("nan"), seed=seed,
                            status="failed",
                        )
                    )
        return records

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_cell, cells))
    else:
        chunks = [run_cell(c) for c in cells]
    records = [r for chunk in chunks for r in chunk]
    if records and all(r.status == "failed" for r in records):
        raise _TotalFailure("every repetition failed")
    return records


@click.group()
def main():
    """Robust Bayesian models: fitting, simulation, and figure reproduction."""


@main.command()
@click.option("--model", "kind", type=click.Choice(sim.MODEL_KINDS), required=True)
@click.option("--noise-grid", default=None, help="comma-separated noise levels")
@click.option("--reps", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--tol", default=None, type=float)
@click.option("--max-iters", default=None, type=int)
@click.option("--intercept", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--threads", default=None, type=int)
@_guard
def simulate(kind, noise_grid, reps, seed, out, tol, max_iters, intercept, threads):
    """Corrupted-train / clean-test simulation over a noise grid."""
    grid = (
        tuple(float(v) for v in noise_grid.split(","))
        if noise_grid
        else sim.DEFAULT_NOISE_GRIDS[kind]
    )
    config = _glm_config(tol, max_iters, intercept)
    threads = threads or worker_count()
    records = run_simulation(kind, grid, reps, seed, config, threads)
    meta = _metadata(
        command="simulate", model=kind, noise_grid=list(grid), reps=reps, seed=seed,
        intercept=intercept,
    )
    if kind == "poisson":
        meta["deviations"] = "poisson covariates Unif[-1,1]; paper range overflows exp"
    rio.write_results_csv(out, records, meta)
    click.echo(f"wrote {out} ({len(records)} rows)")


def _metadata(**config) -> dict:
    return {
        "artifact_version": rio.ARTIFACT_VERSION,
        "config_hash": config_hash(config),
        "config": str(sorted(config.items())),
    }


@main.command()
@click.option("--model", "model_name", type=click.Choice(FIT_MODEL_CHOICES), required=True)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--tol", default=None, type=float)
@click.option("--max-iters", default=None, type=int)
@click.option("--intercept", type=click.Choice(["on", "off"]), default="on", show_default=True)
@_guard
def fit(model_name, data_path, out, tol, max_iters, intercept):
    """Fit one model to a dataset CSV and serialize it as JSON."""
    X, y = rio.read_dataset_csv(data_path)
    dataset = glm.RegressionDataset(X, y)
    if model_name in ("logistic", "robust_logistic"):
        glm.validate_response(dataset.y, ef.bernoulli())
    if model_name in ("poisson", "robust_poisson", "nb"):
        glm.validate_response(dataset.y, ef.poisson())
    model = _fit_model(model_name, dataset, _glm_config(tol, max_iters, intercept))
    from .util import atomic_write_text

    atomic_write_text(out, rio.model_to_json(model))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--model-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def predict(model_file, data_path, out):
    """Write per-row predictive summaries for new covariates."""
    with open(model_file, "r", encoding="utf-8") as fh:
        model = rio.model_from_json(fh.read())
    X, _ = rio.read_dataset_csv(data_path, expect_y=False)
    if isinstance(model, lda.TopicModelState):
        raise InvalidDataError("predict expects a regression model, got a topic model")
    summary = glm.predict(model, X)
    rio.write_predictions_csv(out, summary)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(sim.MODEL_KINDS), default="linear", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def evaluate(pred_path, data_path, kind, out):
    """Join predictions with ground truth and report the natural-form metrics."""
    preds = rio.read_predictions_csv(pred_path)
    X, y = rio.read_dataset_csv(data_path)
    if y is None:
        raise DataFormatError("evaluation dataset must contain a y column", line=1)
    if len(y) != len(preds["point"]):
        raise InvalidDataError(
            f"predictions have {len(preds['point'])} rows but dataset has {len(y)}"
        )
    yhat = preds["prob1"] if kind == "logistic" else preds["point"]
    records = sim.compute_metrics(
        y, yhat, np.zeros(1), np.zeros(1), kind,
        model_name="supplied", y_class=preds["class1"] if kind == "logistic" else None,
    )
    lines = ["metric,value"]
    for r in records:
        if r.metric_name == "param_mse" or r.status != "ok":
            continue
        name, value = r.metric_name, r.value
        if name.startswith("neg_"):
            name, value = name[4:], -value
        lines.append(f"{name},{repr(float(value))}")
    from .util import atomic_write_text

    atomic_write_text(out, "\n".join(lines) + "\n")
    click.echo("\n".join(lines[1:]))


@main.group(name="lda")
def lda_group():
    """Topic-model commands (corpus generation, fitting, held-out evaluation)."""


@lda_group.command(name="gen")
@click.option("--docs", default=100, show_default=True)
@click.option("--topics", default=5, show_default=True)
@click.option("--vocab", default=200, show_default=True)
@click.option("--burstiness", default=10.0, show_default=True)
@click.option("--doc-length", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def lda_gen(docs, topics, vocab, burstiness, doc_length, seed, out):
    """Write a synthetic bursty corpus in the LDA-C format."""
    corpus = lda.generate_bursty_corpus(
        docs, topics, vocab, burstiness, seed=seed, mean_doc_length=doc_length
    )
    from .util import atomic_write_text

    atomic_write_text(out, lda.corpus_to_text(corpus))
    click.echo(f"wrote {out} ({corpus.n_documents} documents)")


def _read_corpus(path, vocab_path=None):
    vocabulary = None
    if vocab_path:
        with open(vocab_path, "r", encoding="utf-8") as fh:
            vocabulary = [line.rstrip("\n") for line in fh if line.strip()]
    with open(path, "r", encoding="utf-8") as fh:
        return lda.parse_corpus(fh.read(), vocabulary=vocabulary)


def _lda_config(tol, max_iters, alpha, seed) -> lda.LdaConfig:
    kwargs = {"seed": seed}
    if tol is not None:
        kwargs["em_tol"] = tol
    if max_iters is not None:
        kwargs["em_max_rounds"] = max_iters
    if alpha is not None:
        kwargs["alpha"] = alpha
    return lda.LdaConfig(**kwargs)


@lda_group.command(name="fit")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab-file", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--topics", default=5, show_default=True)
@click.option("--mode", type=click.Choice(["standard", "robust"]), default="robust", show_default=True)
@click.option("--alpha", default=None, type=float)
@click.option("--tol", default=None, type=float)
@click.option("--max-iters", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def lda_fit(corpus_path, vocab_file, topics, mode, alpha, tol, max_iters, seed, out):
    """Fit a topic model and serialize its state."""
    corpus = _read_corpus(corpus_path, vocab_file)
    config = _lda_config(tol, max_iters, alpha, seed)
    result = lda.fit(corpus, topics, f"{mode}_lda", config)
    from .util import atomic_write_text

    atomic_write_text(out, rio.model_to_json(result.state))
    click.echo(
        f"wrote {out} (ELBO {result.elbo_trace[-1]:.2f}, "
        f"{'converged' if result.converged else 'round cap reached'})"
    )


@lda_group.command(name="eval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab-file", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--topics", default=5, show_default=True)
@click.option("--mode", type=click.Choice(["standard", "robust", "both"]), default="both", show_default=True)
@click.option("--split-ratio", default=0.5, show_default=True)
@click.option("--holdout-fraction", default=0.2, show_default=True)
@click.option("--alpha", default=None, type=float)
@click.option("--tol", default=None, type=float)
@click.option("--max-iters", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def lda_eval(corpus_path, vocab_file, topics, mode, split_ratio, holdout_fraction,
             alpha, tol, max_iters, seed, out):
    """Hold out documents, fit on the rest, report per-word predictive log likelihood."""
    corpus = _read_corpus(corpus_path, vocab_file)
    config = _lda_config(tol, max_iters, alpha, seed)
    rng = derive_rng(seed, "lda-holdout")
    n_test = max(1, int(round(holdout_fraction * corpus.n_documents)))
    if n_test >= corpus.n_documents:
        raise InvalidDataError("holdout fraction leaves no training documents")
    order = rng.permutation(corpus.n_documents)
    test_idx = set(order[:n_test].tolist())
    train_docs = [d for i, d in enumerate(corpus.documents) if i not in test_idx]
    test_docs = [d for i, d in enumerate(corpus.documents) if i in test_idx]
    train = lda.Corpus(corpus.vocab_size, train_docs, corpus.vocabulary)
    test = lda.Corpus(corpus.vocab_size, test_docs, corpus.vocabulary)
    modes = ("standard", "robust") if mode == "both" else (mode,)
    lines = ["mode,K,per_word_loglik,tokens_scored,docs_scored,docs_skipped"]
    for m in modes:
        result = lda.fit(train, topics, f"{m}_lda", config)
        score = lda.heldout_perword_loglik(result.state, test, split_ratio, seed=seed, config=config)
        lines.append(
            f"{m},{topics},{repr(score.per_word_loglik)},{score.n_tokens_scored},"
            f"{score.n_docs_scored},{score.n_docs_skipped}"
        )
    from .util import atomic_write_text

    atomic_write_text(out, "\n".join(lines) + "\n")
    click.echo("\n".join(lines[1:]))


FIGURES = ("linear", "logistic", "poisson", "improvement", "lda")

IMPROVEMENT_PANELS = (
    ("linear", "neg_pR2", ("robust_linear", "ols")),
    ("logistic", "neg_pred_loglik", ("robust_logistic", "logistic")),
    ("poisson", "neg_pred_loglik", ("robust_poisson", "poisson")),
)


@main.command()
@click.option("--figure", type=click.Choice(FIGURES), required=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@click.option("--reps", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--noise-grid", default=None)
@click.option("--topics", default="3,5,8,10", show_default=True, help="K grid for the lda figure")
@click.option("--lda-seeds", default=3, show_default=True, help="corpora per K for the lda figure")
@click.option("--tol", default=None, type=float)
@click.option("--max-iters", default=None, type=int)
@click.option("--threads", default=None, type=int)
@_guard
def reproduce(figure, out_dir, reps, seed, noise_grid, topics, lda_seeds, tol, max_iters, threads):
    """Run a default-grid experiment and emit one CSV per figure panel."""
    os.makedirs(out_dir, exist_ok=True)
    threads = threads or worker_count()
    config = _glm_config(tol, max_iters, "on")

    def write_panels(kind, records, prefix, metrics=None):
        for metric in metrics or sim.METRICS_BY_KIND[kind]:
            rows = [r for r in records if r.metric_name == metric]
            meta = _metadata(command="reproduce", figure=figure, kind=kind, metric=metric,
                             reps=reps, seed=seed)
            path = os.path.join(out_dir, f"figure_{prefix}_{metric}.csv")
            rio.write_results_csv(path, rows, meta)
            click.echo(f"wrote {path}")

    if figure in ("linear", "logistic", "poisson"):
        grid = (
            tuple(float(v) for v in noise_grid.split(","))
            if noise_grid
            else sim.DEFAULT_NOISE_GRIDS[figure]
        )
        records = run_simulation(figure, grid, reps, seed, config, threads)
        write_panels(figure, records, figure)
    elif figure == "improvement":
        for kind, metric, models in IMPROVEMENT_PANELS:
            grid = sim.DEFAULT_NOISE_GRIDS[kind]
            records = run_simulation(kind, grid, reps, seed, config, threads, models=models)
            write_panels(kind, records, f"improvement_{kind}", metrics=(metric,))
    else:
        k_grid = tuple(int(v) for v in topics.split(","))
        records = []
        for rep in range(lda_seeds):
            corpus_seed = int(derive_rng(seed, "lda-corpus-seed", rep).integers(2**31))
            full = lda.generate_bursty_corpus(
                125, 5, 200, burstiness=10.0, seed=corpus_seed, mean_doc_length=100
            )
            train = lda.Corpus(full.vocab_size, full.documents[:100])
            test = lda.Corpus(full.vocab_size, full.documents[100:])
            for K in k_grid:
                cfg = _lda_config(tol, max_iters, None, seed)
                for mode, name in (("robust_lda", "rlda"), ("standard_lda", "lda")):
                    result = lda.fit(train, K, mode, cfg)
                    score = lda.heldout_perword_loglik(result.state, test, 0.5, seed=seed, config=cfg)
                    records.append(
                        sim.MetricRecord(
                            run_id=rep, model_name=name, noise_level=float(K),
                            metric_name="neg_pred_loglik",
                            value=-score.per_word_loglik, seed=seed, status="ok",
                        )
                    )
        meta = _metadata(command="reproduce", figure="lda", K_grid=list(k_grid),
                         lda_seeds=lda_seeds, seed=seed)
        path = os.path.join(out_dir, "figure_lda_neg_pred_loglik.csv")
        rio.write_results_csv(path, records, meta, x_field="K")
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
