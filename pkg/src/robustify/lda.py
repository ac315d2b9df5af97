"""Bursty (robust) LDA via per-document topics, plus standard LDA baseline.

The robust topic model draws each document's topics anew from master
Dirichlet parameters eta_k; fitting alternates closed-form mean-field updates
per document (phi over token assignments, gamma over proportions, lambda over
per-document topics) with a Newton M-step for eta -- the Dirichlet MLE given
the expected log-topic sufficient statistics.  Standard LDA shares the code
path with point topics and the conventional M-step.

Corpus file format is the LDA-C convention: one document per line,
``N term:count term:count ...`` with N the number of distinct terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, polygamma, psi

from .errors import (
    ConvergenceError,
    DataFormatError,
    EmptyDataError,
    InvalidDataError,
    InvalidParameterError,
)
from .util import derive_rng

__all__ = [
    "Document",
    "Corpus",
    "TopicModelState",
    "DocVariational",
    "LdaConfig",
    "parse_corpus",
    "corpus_to_text",
    "estep_document",
    "mstep_eta",
    "fit",
    "heldout_perword_loglik",
    "HeldoutResult",
    "generate_bursty_corpus",
    "dirichlet_expected_log",
]

ETA_FLOOR = 1e-8
ETA_TOTAL_CAP = 1e6


@dataclass(frozen=True)
class Document:
    """Sparse counts over distinct term ids (ascending)."""

    ids: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "counts", counts)
        if ids.ndim != 1 or counts.shape != ids.shape:
            raise InvalidDataError("document ids and counts must be parallel 1-D arrays")
        if ids.size == 0:
            raise EmptyDataError("documents must contain at least one term")
        if np.any(counts < 1):
            raise InvalidDataError("term counts must be >= 1")
        if np.any(np.diff(ids) <= 0):
            raise InvalidDataError("term ids must be strictly increasing")

    @property
    def n_tokens(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class Corpus:
    vocab_size: int
    documents: tuple
    vocabulary: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        if self.vocab_size < 1:
            raise InvalidParameterError("vocab_size must be positive")
        for i, doc in enumerate(self.documents):
            if doc.ids[-1] >= self.vocab_size or doc.ids[0] < 0:
                raise InvalidDataError(
                    f"term id out of range for vocab_size {self.vocab_size}", index=i
                )
        if self.vocabulary is not None:
            vocab = tuple(self.vocabulary)
            if len(vocab) != self.vocab_size:
                raise InvalidDataError("vocabulary length must equal vocab_size")
            object.__setattr__(self, "vocabulary", vocab)

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @property
    def n_tokens(self) -> float:
        return float(sum(d.n_tokens for d in self.documents))


def parse_corpus(text: str, vocab_size: int | None = None, vocabulary=None) -> Corpus:
    """Parse LDA-C formatted text; errors carry line number and byte offset."""
    docs = []
    offset = 0
    max_id = -1
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if stripped:
            parts = stripped.split()
            try:
                n_terms = int(parts[0])
            except ValueError:
                raise DataFormatError(
                    f"expected a term count, got {parts[0]!r}", line=lineno, offset=offset
                )
            if n_terms != len(parts) - 1:
                raise DataFormatError(
                    f"declared {n_terms} terms but found {len(parts) - 1}",
                    line=lineno,
                    offset=offset,
                )
            if n_terms == 0:
                raise DataFormatError("empty document", line=lineno, offset=offset)
            ids = np.empty(n_terms, dtype=np.int64)
            counts = np.empty(n_terms, dtype=float)
            for j, pair in enumerate(parts[1:]):
                field_offset = offset + line.find(pair)
                try:
                    term, _, count = pair.partition(":")
                    ids[j] = int(term)
                    counts[j] = int(count)
                except ValueError:
                    raise DataFormatError(
                        f"malformed term:count pair {pair!r}", line=lineno, offset=field_offset
                    )
                if ids[j] < 0 or counts[j] < 1:
                    raise DataFormatError(
                        f"invalid term or count in {pair!r}", line=lineno, offset=field_offset
                    )
            order = np.argsort(ids, kind="stable")
            ids, counts = ids[order], counts[order]
            if np.any(np.diff(ids) == 0):
                raise DataFormatError("duplicate term id in document", line=lineno, offset=offset)
            max_id = max(max_id, int(ids[-1]))
            docs.append(Document(ids=ids, counts=counts))
        offset += len(line.encode("utf-8")) + 1
    if not docs:
        raise DataFormatError("corpus contains no documents", line=1, offset=0)
    if vocab_size is None:
        vocab_size = (len(vocabulary) if vocabulary is not None else max_id + 1)
    return Corpus(vocab_size=vocab_size, documents=docs, vocabulary=vocabulary)


def corpus_to_text(corpus: Corpus) -> str:
    """Serialize in the LDA-C convention (ids ascending); round-trips byte-exactly."""
    lines = []
    for doc in corpus.documents:
        pairs = " ".join(f"{int(i)}:{int(c)}" for i, c in zip(doc.ids, doc.counts))
        lines.append(f"{doc.ids.size} {pairs}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TopicModelState:
    """Master parameters; in standard mode ``eta`` rows are the point topics."""

    K: int
    eta: np.ndarray
    alpha: float
    mode: str

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        object.__setattr__(self, "eta", eta)
        if self.mode not in ("standard_lda", "robust_lda"):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if self.K < 1 or eta.shape[0] != self.K:
            raise InvalidParameterError("eta must have K rows")
        if not np.all(eta > 0):
            raise InvalidParameterError("eta entries must be positive")
        if not self.alpha > 0:
            raise InvalidParameterError("alpha must be positive")

    @property
    def vocab_size(self) -> int:
        return self.eta.shape[1]

    def topics(self) -> np.ndarray:
        """Row-normalized topics (Dirichlet means in robust mode)."""
        return self.eta / self.eta.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class DocVariational:
    """Per-document mean-field state.

    ``lam`` holds q(beta_dk) Dirichlet parameters on the document's support
    only; off-support entries equal eta exactly (the update adds zero), and
    ``lam_total`` carries the full row sums.  ``phi`` rows are per-distinct-term
    assignment distributions (tokens of one type share their phi).
    """

    ids: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    lam: np.ndarray | None
    lam_total: np.ndarray | None
    elbo: float
    n_sweeps: int


@dataclass(frozen=True)
class LdaConfig:
    doc_tol: float = 1e-6
    doc_max_sweeps: int = 100
    em_tol: float = 1e-5
    em_max_rounds: int = 100
    alpha: float | None = None          # default 1/K
    fit_alpha: bool = False
    seed: int = 0
    eta_scale: float | None = None      # default V / K
    eta_smoothing: float = 0.01
    warm_start: bool = True

    def __post_init__(self):
        if self.doc_tol <= 0 or self.em_tol <= 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.doc_max_sweeps < 1 or self.em_max_rounds < 1:
            raise InvalidParameterError("iteration caps must be >= 1")


DEFAULT_LDA_CONFIG = LdaConfig()


def dirichlet_expected_log(lam: np.ndarray, axis: int = -1) -> np.ndarray:
    """E[log x] under Dirichlet(lam): psi(lam) - psi(sum lam)."""
    lam = np.asarray(lam, dtype=float)
    return psi(lam) - psi(lam.sum(axis=axis, keepdims=True))


def _doc_elbo_robust(doc, state, gamma, phi, lam, lam_total, eta_sub, eta_row_sum, elog_theta, elog_beta_sub):
    alpha, K = state.alpha, state.K
    counts = doc.counts
    # theta terms
    elbo = gammaln(K * alpha) - K * gammaln(alpha) + (alpha - 1.0) * float(elog_theta.sum())
    elbo -= float(gammaln(gamma.sum()) - gammaln(gamma).sum()
                  + ((gamma - 1.0) * elog_theta).sum())
    # beta terms: off-support pieces cancel because lam == eta there
    elbo += float((gammaln(eta_row_sum) - gammaln(lam_total)).sum())
    elbo += float((gammaln(lam) - gammaln(eta_sub)).sum())
    elbo += float(((eta_sub - lam) * elog_beta_sub).sum())
    # token terms
    with np.errstate(divide="ignore", invalid="ignore"):
        philog = np.where(phi > 0, phi * np.log(phi), 0.0)
    per_term = phi @ elog_theta + (phi * elog_beta_sub.T).sum(axis=1) - philog.sum(axis=1)
    elbo += float(counts @ per_term)
    return elbo


def _doc_elbo_standard(doc, state, gamma, phi, log_beta_sub, elog_theta):
    alpha, K = state.alpha, state.K
    counts = doc.counts
    elbo = gammaln(K * alpha) - K * gammaln(alpha) + (alpha - 1.0) * float(elog_theta.sum())
    elbo -= float(gammaln(gamma.sum()) - gammaln(gamma).sum()
                  + ((gamma - 1.0) * elog_theta).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        philog = np.where(phi > 0, phi * np.log(phi), 0.0)
    per_term = phi @ elog_theta + (phi * log_beta_sub.T).sum(axis=1) - philog.sum(axis=1)
    elbo += float(counts @ per_term)
    return elbo


def estep_document(
    doc: Document,
    state: TopicModelState,
    config: LdaConfig = DEFAULT_LDA_CONFIG,
    warm_phi: np.ndarray | None = None,
    doc_index: int | None = None,
) -> DocVariational:
    """Coordinate ascent on one document's mean-field factors to convergence."""
    K = state.K
    ids, counts = doc.ids, doc.counts
    S = ids.size
    robust = state.mode == "robust_lda"
    eta_sub = state.eta[:, ids]
    eta_row_sum = state.eta.sum(axis=1)
    if not robust:
        with np.errstate(divide="ignore"):
            log_beta_sub = np.log(state.eta[:, ids])

    if warm_phi is not None and warm_phi.shape == (S, K):
        phi = warm_phi.copy()
    else:
        phi = np.full((S, K), 1.0 / K)
    gamma = state.alpha + counts @ phi
    lam = lam_total = None
    if robust:
        lam = eta_sub + (phi * counts[:, None]).T
        lam_total = eta_row_sum + (counts @ phi)

    elbo = -np.inf
    sweeps = 0
    for sweeps in range(1, config.doc_max_sweeps + 1):
        elog_theta = psi(gamma) - psi(gamma.sum())
        if robust:
            elog_beta_sub = psi(lam) - psi(lam_total)[:, None]
            log_phi = elog_theta[None, :] + elog_beta_sub.T
        else:
            log_phi = elog_theta[None, :] + log_beta_sub.T
        log_phi -= log_phi.max(axis=1, keepdims=True)
        phi = np.exp(log_phi)
        phi /= phi.sum(axis=1, keepdims=True)
        weighted = counts @ phi
        gamma = state.alpha + weighted
        if robust:
            lam = eta_sub + (phi * counts[:, None]).T
            lam_total = eta_row_sum + weighted

        elog_theta = psi(gamma) - psi(gamma.sum())
        if robust:
            elog_beta_sub = psi(lam) - psi(lam_total)[:, None]
            new_elbo = _doc_elbo_robust(doc, state, gamma, phi, lam, lam_total,
                                        eta_sub, eta_row_sum, elog_theta, elog_beta_sub)
        else:
            new_elbo = _doc_elbo_standard(doc, state, gamma, phi, log_beta_sub, elog_theta)
        if not np.isfinite(new_elbo):
            where = f" (document {doc_index})" if doc_index is not None else ""
            raise ConvergenceError(
                f"non-finite ELBO during document E-step{where} at sweep {sweeps}"
            )
        if np.isfinite(elbo) and abs(new_elbo - elbo) <= config.doc_tol * (abs(elbo) + 1e-10):
            elbo = new_elbo
            break
        elbo = new_elbo

    return DocVariational(
        ids=ids,
        gamma=gamma,
        phi=phi,
        lam=lam,
        lam_total=lam_total,
        elbo=elbo,
        n_sweeps=sweeps,
    )


# ---------------------------------------------------------------------------
# Dirichlet M-step
# ---------------------------------------------------------------------------

def _inv_psi(y: np.ndarray) -> np.ndarray:
    """Inverse digamma by the standard initializer plus Newton polishing."""
    y = np.asarray(y, dtype=float)
    x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y + 0.577215664901532))
    for _ in range(6):
        x = x - (psi(x) - y) / polygamma(1, x)
        x = np.maximum(x, 1e-12)
    return x


def _dirichlet_objective(eta: np.ndarray, s_bar: np.ndarray) -> float:
    return float(gammaln(eta.sum()) - gammaln(eta).sum() + ((eta - 1.0) * s_bar).sum())


def mstep_eta(
    mean_elog_beta: np.ndarray,
    eta_init: np.ndarray,
    max_iters: int = 500,
    grad_tol: float = 1e-10,
):
    """Dirichlet MLE per topic given mean expected log topics.

    Newton in log space: the Hessian there is diagonal plus the rank-one
    piece psi'(sum eta) eta eta', so Sherman-Morrison gives linear-time
    solves.  Steps that fail to increase the objective fall back to Minka's
    fixed point eta_v <- invpsi(psi(sum eta) + s_v), which always ascends.
    Degenerate statistics (e.g. a single document) push the MLE concentration
    to infinity; the row total is capped at ETA_TOTAL_CAP, where the
    stationarity residual is already O(1/total).  Returns (eta, floored_flag).
    """
    s = np.asarray(mean_elog_beta, dtype=float)
    eta = np.array(eta_init, dtype=float, copy=True)
    K, V = eta.shape
    floored = False
    for k in range(K):
        ek = eta[k]
        sk = s[k]
        obj = _dirichlet_objective(ek, sk)
        for _ in range(max_iters):
            total = ek.sum()
            grad = psi(total) - psi(ek) + sk
            if np.max(np.abs(grad)) < grad_tol:
                break
            # log-space Newton with Sherman-Morrison
            c = polygamma(1, total)
            q = -polygamma(1, ek)
            diag = ek * ek * q + ek * grad
            gtil = ek * grad
            step = None
            if np.all(diag < 0):
                dinv_g = gtil / diag
                dinv_u = ek / diag
                denom = 1.0 + c * float(ek @ dinv_u)
                if abs(denom) > 1e-300:
                    hinv_g = dinv_g - dinv_u * (c * float(ek @ dinv_g) / denom)
                    step = -hinv_g
            moved = False
            if step is not None and np.all(np.isfinite(step)):
                t = 1.0
                for _ in range(30):
                    cand = ek * np.exp(t * step)
                    val = _dirichlet_objective(cand, sk)
                    if np.isfinite(val) and val > obj:
                        ek, obj, moved = cand, val, True
                        break
                    t *= 0.5
            if not moved:
                # Minka fixed point: monotone, linear rate
                cand = _inv_psi(psi(ek.sum()) + sk)
                val = _dirichlet_objective(cand, sk)
                if not np.isfinite(val) or val <= obj + 1e-15 * abs(obj):
                    break
                ek, obj = cand, val
            if ek.sum() > ETA_TOTAL_CAP:
                break
        if np.any(ek < ETA_FLOOR):
            ek = np.maximum(ek, ETA_FLOOR)
            floored = True
        eta[k] = ek
    return eta, floored


def _fit_alpha_symmetric(alpha: float, K: int, D: int, sum_elog_theta: float) -> float:
    """1-D Newton (log space) for the symmetric proportions Dirichlet."""
    t = math.log(alpha)

    def obj(a):
        return D * (gammaln(K * a) - K * gammaln(a)) + (a - 1.0) * sum_elog_theta

    cur = obj(math.exp(t))
    for _ in range(100):
        a = math.exp(t)
        g = (D * K * (psi(K * a) - psi(a)) + sum_elog_theta) * a
        if abs(g) < 1e-10 * max(1.0, D):
            break
        h = (D * K * K * polygamma(1, K * a) - D * K * polygamma(1, a)) * a * a + g
        step = -g / h if h < 0 else math.copysign(1.0, g)
        step = float(np.clip(step, -2.0, 2.0))
        moved = False
        for _ in range(30):
            cand = obj(math.exp(t + step))
            if cand > cur:
                t, cur, moved = t + step, cand, True
                break
            step *= 0.5
        if not moved:
            break
    return math.exp(t)


@dataclass(frozen=True)
class FitResult:
    state: TopicModelState
    elbo_trace: tuple
    converged: bool
    eta_floored: bool = False


def _init_eta(corpus: Corpus, K: int, config: LdaConfig) -> np.ndarray:
    """Randomized word-frequency initialization, seeded."""
    rng = derive_rng(config.seed, "lda-init")
    V = corpus.vocab_size
    freq = np.zeros(V)
    for doc in corpus.documents:
        freq[doc.ids] += doc.counts
    freq = freq / freq.sum() + 1.0 / V
    scale = config.eta_scale if config.eta_scale is not None else V / K
    raw = freq[None, :] * rng.uniform(0.5, 1.5, size=(K, V))
    raw /= raw.sum(axis=1, keepdims=True)
    return scale * raw + config.eta_smoothing


def fit(corpus: Corpus, K: int, mode: str, config: LdaConfig = DEFAULT_LDA_CONFIG) -> FitResult:
    """Variational EM over the corpus in either mode."""
    if mode not in ("standard_lda", "robust_lda"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if K < 1:
        raise InvalidParameterError("K must be >= 1")
    D = corpus.n_documents
    V = corpus.vocab_size
    alpha = config.alpha if config.alpha is not None else 1.0 / K
    eta = _init_eta(corpus, K, config)
    if mode == "standard_lda":
        eta = eta / eta.sum(axis=1, keepdims=True)
    state = TopicModelState(K=K, eta=eta, alpha=alpha, mode=mode)

    warm = [None] * D if config.warm_start else None
    trace = []
    converged = False
    floored = False
    for _ in range(config.em_max_rounds):
        corpus_elbo = 0.0
        if mode == "robust_lda":
            corr = np.zeros((K, V))
            t_k = np.zeros(K)
        else:
            ss = np.zeros((K, V))
        sum_elog_theta = 0.0
        for di, doc in enumerate(corpus.documents):
            dv = estep_document(
                doc, state, config,
                warm_phi=warm[di] if warm is not None else None,
                doc_index=di,
            )
            if warm is not None:
                warm[di] = dv.phi
            corpus_elbo += dv.elbo
            if mode == "robust_lda":
                corr[:, doc.ids] += psi(dv.lam) - psi(state.eta[:, doc.ids])
                t_k += psi(dv.lam_total)
            else:
                ss[:, doc.ids] += (dv.phi * doc.counts[:, None]).T
            if config.fit_alpha:
                sum_elog_theta += float((psi(dv.gamma) - psi(dv.gamma.sum())).sum())
        trace.append(corpus_elbo)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= config.em_tol * (abs(trace[-2]) + 1e-10):
            converged = True
            break
        # M-step
        if mode == "robust_lda":
            s_bar = psi(state.eta) + (corr - t_k[:, None]) / D
            new_eta, fl = mstep_eta(s_bar, state.eta)
            floored = floored or fl
        else:
            new_eta = np.maximum(ss, 0.0) + 1e-10
            new_eta = new_eta / new_eta.sum(axis=1, keepdims=True)
        new_alpha = state.alpha
        if config.fit_alpha:
            new_alpha = _fit_alpha_symmetric(state.alpha, K, D, sum_elog_theta)
        state = TopicModelState(K=K, eta=new_eta, alpha=new_alpha, mode=mode)
    return FitResult(state=state, elbo_trace=tuple(trace), converged=converged, eta_floored=floored)


# ---------------------------------------------------------------------------
# held-out evaluation and the generative oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeldoutResult:
    per_word_loglik: float
    n_tokens_scored: int
    n_docs_scored: int
    n_docs_skipped: int


def _doc_predictive(state: TopicModelState, dv: DocVariational, term_ids: np.ndarray) -> np.ndarray:
    """p(w | d) = sum_k E[theta_k] E[beta_kw] at the requested terms."""
    theta_bar = dv.gamma / dv.gamma.sum()
    if state.mode == "robust_lda":
        beta_sub = state.eta[:, term_ids].copy()
        # replace entries on the observed-half support with the lambda values
        pos = np.searchsorted(dv.ids, term_ids)
        pos_clipped = np.minimum(pos, dv.ids.size - 1)
        on_support = dv.ids[pos_clipped] == term_ids
        beta_sub[:, on_support] = dv.lam[:, pos_clipped[on_support]]
        beta_sub /= dv.lam_total[:, None]
    else:
        beta_sub = state.eta[:, term_ids]
    return theta_bar @ beta_sub


def heldout_perword_loglik(
    state: TopicModelState,
    test_corpus: Corpus,
    split_ratio: float = 0.5,
    seed: int = 0,
    config: LdaConfig = DEFAULT_LDA_CONFIG,
) -> HeldoutResult:
    """Document-completion score: condition on the first split, score the rest.

    Tokens are expanded, shuffled in a seeded per-document order, and split;
    inference runs on the first part with the state frozen; the second part
    is scored under the posterior-mean predictive and normalized per token.
    Documents with fewer than two tokens are skipped and counted.
    """
    if not 0.0 < split_ratio < 1.0:
        raise InvalidParameterError("split_ratio must lie in (0, 1)")
    total = 0.0
    n_tokens = 0
    scored = 0
    skipped = 0
    for di, doc in enumerate(test_corpus.documents):
        tokens = np.repeat(doc.ids, doc.counts.astype(np.int64))
        if tokens.size < 2:
            skipped += 1
            continue
        rng = derive_rng(seed, "heldout-split", di)
        order = rng.permutation(tokens.size)
        n1 = int(np.ceil(split_ratio * tokens.size))
        n1 = min(max(n1, 1), tokens.size - 1)
        first = tokens[order[:n1]]
        second = tokens[order[n1:]]
        ids1, counts1 = np.unique(first, return_counts=True)
        dv = estep_document(Document(ids=ids1, counts=counts1.astype(float)), state, config)
        ids2, counts2 = np.unique(second, return_counts=True)
        p = _doc_predictive(state, dv, ids2)
        if np.any(p <= 0):
            raise ConvergenceError(f"zero predictive probability in document {di}")
        total += float(counts2 @ np.log(p))
        n_tokens += int(counts2.sum())
        scored += 1
    if n_tokens == 0:
        raise EmptyDataError("no documents were long enough to split")
    return HeldoutResult(
        per_word_loglik=total / n_tokens,
        n_tokens_scored=n_tokens,
        n_docs_scored=scored,
        n_docs_skipped=skipped,
    )


def generate_bursty_corpus(
    n_docs: int,
    K: int,
    vocab_size: int,
    burstiness: float,
    seed: int,
    mean_doc_length: int = 100,
    alpha: float = 0.5,
    master_concentration: float = 0.3,
    return_truth: bool = False,
):
    """Sample a corpus from the per-document-topics generative process.

    Master topics are drawn once; each document redraws its topics from
    Dir(burstiness * master_k), so smaller ``burstiness`` gives burstier
    documents and the large-burstiness limit recovers standard LDA
    generation.  Fully determined by ``seed``.
    """
    if min(n_docs, K, vocab_size) < 1 or burstiness <= 0 or mean_doc_length < 2:
        raise InvalidParameterError("generator parameters must be positive")
    rng = derive_rng(seed, "bursty-corpus")
    master = rng.dirichlet(np.full(vocab_size, master_concentration), size=K)
    master = np.maximum(master, 1e-10)
    master /= master.sum(axis=1, keepdims=True)
    docs = []
    doc_topics = []
    thetas = []
    for _ in range(n_docs):
        theta = rng.dirichlet(np.full(K, alpha))
        beta_d = np.vstack([rng.dirichlet(burstiness * master[k]) for k in range(K)])
        n_d = max(2, int(rng.poisson(mean_doc_length)))
        z_counts = rng.multinomial(n_d, theta)
        word_counts = np.zeros(vocab_size, dtype=np.int64)
        for k in np.flatnonzero(z_counts):
            word_counts += rng.multinomial(z_counts[k], beta_d[k])
        ids = np.flatnonzero(word_counts)
        docs.append(Document(ids=ids, counts=word_counts[ids].astype(float)))
        if return_truth:
            doc_topics.append(beta_d)
            thetas.append(theta)
    corpus = Corpus(vocab_size=vocab_size, documents=docs)
    if return_truth:
        return corpus, {"master_topics": master, "doc_topics": doc_topics, "thetas": thetas}
    return corpus
