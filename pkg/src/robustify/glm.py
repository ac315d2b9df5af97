"""Robust generalized linear models and their classical baselines.

The robust GLM localizes the natural parameter of each response,
eta_i ~ N(w'x_i, lambda2), and fits (w, lambda2) by variational EM: a Laplace
E-step per data point and a closed-form Gaussian M-step.  Baselines: standard
GLMs by iteratively reweighted least squares, negative binomial regression
(mean-one gamma noise, shape fit by empirical Bayes), and student-t linear
regression (the localized-dispersion robust linear model) by exact-E-step EM.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, psi, polygamma

from . import expfam as ef
from . import laplace as lp
from .conjugate import student_t_logpdf
from .errors import (
    EmptyDataError,
    InvalidDataError,
    InvalidParameterError,
    RankDeficientError,
)

__all__ = [
    "RegressionDataset",
    "GlmConfig",
    "RobustGlmModel",
    "StandardGlmModel",
    "StudentTRegressionModel",
    "NegBinRegressionModel",
    "fit_robust_glm",
    "fit_standard_glm",
    "fit_negative_binomial",
    "fit_student_t_regression",
    "predict",
    "predictive_loglik",
    "PredictiveSummary",
]

LAMBDA2_FLOOR = 1e-12
EM_LL_TOL = 1e-8
SEPARATION_NORM = 1e6
NB_SHAPE_CAP = 1e6
GH_NODES = 32


@dataclass(frozen=True)
class RegressionDataset:
    """Covariates and a response vector typed by the likelihood family."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.shape[0] != y.shape[0]:
            raise InvalidDataError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if X.shape[0] == 0:
            raise EmptyDataError("dataset must contain at least one row")
        if not np.all(np.isfinite(X)):
            raise InvalidDataError("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise InvalidDataError("y contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def validate_response(y: np.ndarray, family: ef.ExpFamily) -> None:
    tag = family.family_tag
    if tag == "bernoulli":
        if not np.all(np.isin(y, (0.0, 1.0))):
            bad = int(np.flatnonzero(~np.isin(y, (0.0, 1.0)))[0])
            raise InvalidDataError("bernoulli responses must be 0/1", index=bad)
    elif tag == "poisson":
        if not np.all((y >= 0) & (y == np.round(y))):
            bad = int(np.flatnonzero(~((y >= 0) & (y == np.round(y))))[0])
            raise InvalidDataError("poisson responses must be nonnegative integers", index=bad)


@dataclass(frozen=True)
class GlmConfig:
    tol: float = 1e-6
    max_iters: int = 200
    intercept: bool = True
    ridge: float = 0.0           # > 0 enables the rank-deficiency fallback
    lambda2_init: float | None = None
    fix_lambda2: bool = False
    max_irls_iters: int = 100
    laplace: lp.LaplaceConfig = field(default_factory=lp.LaplaceConfig)

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters <= 0 or self.max_irls_iters <= 0:
            raise InvalidParameterError("GlmConfig tolerances and iteration caps must be positive")


DEFAULT_GLM_CONFIG = GlmConfig()


def _design(X: np.ndarray, intercept: bool) -> np.ndarray:
    if intercept:
        return np.hstack([X, np.ones((X.shape[0], 1))])
    return X


def _check_rank(design: np.ndarray, ridge: float) -> None:
    """Raise RankDeficientError naming collinear columns (unless ridge is on)."""
    if ridge > 0:
        return
    n, p = design.shape
    if n < p:
        raise RankDeficientError(columns=[f"x{j + 1}" for j in range(n, p)])
    # QR with column pivoting exposes the dependent columns
    from scipy.linalg import qr

    _, r, piv = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.max() > 0 else 0.0
    bad = piv[np.flatnonzero(diag <= tol)]
    if bad.size:
        raise RankDeficientError(columns=[f"x{j + 1}" for j in sorted(bad)])


def _solve_lstsq(design: np.ndarray, target: np.ndarray, weights=None, ridge: float = 0.0):
    """Weighted least squares via normal equations (deterministic)."""
    if weights is None:
        a = design.T @ design
        b = design.T @ target
    else:
        wd = design * weights[:, None]
        a = wd.T @ design
        b = wd.T @ target
    if ridge > 0:
        a = a + ridge * np.eye(a.shape[0])
    return np.linalg.solve(a, b)


# ---------------------------------------------------------------------------
# standard GLMs by IRLS
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardGlmModel:
    w: np.ndarray
    intercept: float
    family: ef.ExpFamily
    has_intercept: bool
    loglik: float
    deviance_trace: tuple = ()
    converged: bool = True
    diverged: bool = False
    sigma2_hat: float = float("nan")  # gaussian residual variance (MLE)

    @property
    def w_full(self) -> np.ndarray:
        if self.has_intercept:
            return np.concatenate([self.w, [self.intercept]])
        return self.w


def _glm_loglik(family: ef.ExpFamily, y: np.ndarray, eta: np.ndarray) -> float:
    return float(
        np.sum(ef.log_base_measure(family, y) + eta * y - ef.log_normalizer(family, eta))
    )


def _deviance(family: ef.ExpFamily, y: np.ndarray, eta: np.ndarray) -> float:
    tag = family.family_tag
    if tag == "bernoulli":
        sat = 0.0
    elif tag == "poisson":
        with np.errstate(divide="ignore", invalid="ignore"):
            ylogy = np.where(y > 0, y * np.log(y), 0.0)
        sat = float(np.sum(ef.log_base_measure(family, y) + ylogy - y))
    else:
        sat = float(np.sum(ef.log_base_measure(family, y) + 0.5 * y**2 / family.sigma2))
    return 2.0 * (sat - _glm_loglik(family, y, eta))


def fit_standard_glm(
    data: RegressionDataset,
    family: ef.ExpFamily,
    config: GlmConfig = DEFAULT_GLM_CONFIG,
) -> StandardGlmModel:
    """Maximum-likelihood GLM with canonical link via IRLS.

    Gaussian solves in one exact least-squares step (identical to OLS);
    logistic separation is reported via the ``diverged`` flag once the
    coefficient norm passes 1e6.
    """
    lp._check_family(family)
    validate_response(data.y, family)
    design = _design(data.X, config.intercept)
    _check_rank(design, config.ridge)
    y = data.y

    if family.family_tag == "gaussian_known_variance":
        # natural parameter eta = mu / sigma2; OLS on y gives mu = Xb, so the
        # coefficient vector in eta space is b / sigma2
        beta = _solve_lstsq(design, y, ridge=config.ridge)
        w_full = beta / family.sigma2
        eta = design @ w_full
        resid = y - design @ beta
        model_kwargs = dict(sigma2_hat=float(np.mean(resid**2)))
        loglik = _glm_loglik(family, y, eta)
        dev_trace = (_deviance(family, y, eta),)
        converged, diverged = True, False
    else:
        w_full = np.zeros(design.shape[1])
        eta = design @ w_full
        dev = _deviance(family, y, eta)
        dev_trace = [dev]
        converged = diverged = False
        for _ in range(config.max_irls_iters):
            mu = ef.log_normalizer_grad(family, eta)
            wts = ef.log_normalizer_hess(family, eta)
            wts = np.maximum(wts, 1e-10)
            z = eta + (y - mu) / wts
            proposal = _solve_lstsq(design, z, weights=wts, ridge=config.ridge)
            # step-halve until the deviance does not increase
            step = proposal - w_full
            for _ in range(40):
                cand = w_full + step
                cand_dev = _deviance(family, y, design @ cand)
                if cand_dev <= dev + 1e-12:
                    break
                step *= 0.5
            w_full = w_full + step
            eta = design @ w_full
            new_dev = _deviance(family, y, eta)
            dev_trace.append(new_dev)
            if np.linalg.norm(w_full) > SEPARATION_NORM:
                diverged = True
                warnings.warn("coefficients diverging (possible separation)", RuntimeWarning)
                break
            if abs(dev - new_dev) <= 1e-12 * (abs(dev) + 1.0):
                converged = True
                dev = new_dev
                break
            dev = new_dev
        if (
            not diverged
            and family.family_tag == "bernoulli"
            and dev < 1e-6
            and np.max(np.abs(eta)) > 30.0
        ):
            # perfect separation drives the deviance to underflow long before
            # the coefficient norm can reach the 1e6 detection threshold
            diverged = True
            warnings.warn("perfectly separated data (deviance underflow)", RuntimeWarning)
        loglik = _glm_loglik(family, y, eta)
        model_kwargs = dict(sigma2_hat=float("nan"))
        dev_trace = tuple(dev_trace)

    if config.intercept:
        w, b = w_full[:-1], float(w_full[-1])
    else:
        w, b = w_full, 0.0
    return StandardGlmModel(
        w=w,
        intercept=b,
        family=family,
        has_intercept=config.intercept,
        loglik=loglik,
        deviance_trace=dev_trace,
        converged=converged,
        diverged=diverged,
        **model_kwargs,
    )


# ---------------------------------------------------------------------------
# robust GLM: Laplace E-step + closed-form Gaussian M-step
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustGlmModel:
    w: np.ndarray
    intercept: float
    lambda2: float
    family: ef.ExpFamily
    has_intercept: bool
    elbo_trace: tuple
    converged: bool
    lambda2_clamped: bool = False
    elbo_decreased: bool = False   # any iteration dropping > 1e-3 relative
    n_iters: int = 0

    @property
    def w_full(self) -> np.ndarray:
        if self.has_intercept:
            return np.concatenate([self.w, [self.intercept]])
        return self.w


def _robust_elbo(family, y, m, v, prior_eta, lambda2):
    """Eq-style objective: E[eta] y - E[a(eta)] + E[log prior] + entropy."""
    e_a = lp.expected_log_normalizer_batch(m, v, family)
    prior_term = -0.5 * np.log(2.0 * np.pi * lambda2) - (v + (m - prior_eta) ** 2) / (2.0 * lambda2)
    entropy = 0.5 * np.log(2.0 * np.pi * np.e * v)
    return float(np.sum(m * y - e_a + prior_term + entropy))


def _working_residual_variance(family, y, eta):
    mu = ef.log_normalizer_grad(family, eta)
    wts = np.maximum(ef.log_normalizer_hess(family, eta), 1e-6)
    resid = (y - mu) / wts
    return float(np.var(resid))


def fit_robust_glm(
    data: RegressionDataset,
    family: ef.ExpFamily,
    config: GlmConfig = DEFAULT_GLM_CONFIG,
) -> RobustGlmModel:
    """Variational EM for the localized GLM.

    E-step: per-point Laplace approximation with prior N(w'x_i, lambda2).
    M-step: w by least squares of the variational means on the design, and
    lambda2 = mean(v_i + (m_i - w'x_i)^2), both closed form under the
    Gaussian prior.  The trace records the variational objective each
    iteration; because the E-step is approximate, small decreases are
    tolerated but flagged.
    """
    lp._check_family(family)
    validate_response(data.y, family)
    design = _design(data.X, config.intercept)
    _check_rank(design, config.ridge)
    y = data.y
    n = data.n

    start = fit_standard_glm(data, family, config)
    w_full = start.w_full.copy()
    if config.lambda2_init is not None:
        lambda2 = float(config.lambda2_init)
    else:
        # zero-residual data must start at the floor: the EM map only decays
        # harmonically toward the lambda2 = 0 boundary
        lambda2 = min(0.5 * _working_residual_variance(family, y, design @ w_full), 1e4)
    lambda2 = max(lambda2, LAMBDA2_FLOOR)

    trace = []
    converged = False
    clamped = lambda2 <= LAMBDA2_FLOOR
    decreased = False
    it = 0
    for it in range(1, config.max_iters + 1):
        prior_eta = design @ w_full
        m, v = lp.laplace_estep_batch(y, family, prior_eta, lambda2, config.laplace)
        w_full = _solve_lstsq(design, m, ridge=config.ridge)
        prior_eta = design @ w_full
        if not config.fix_lambda2:
            lambda2 = float(np.mean(v + (m - prior_eta) ** 2))
            if lambda2 < LAMBDA2_FLOOR:
                lambda2 = LAMBDA2_FLOOR
                clamped = True
        elbo = _robust_elbo(family, y, m, v, prior_eta, lambda2)
        if trace:
            drop = trace[-1] - elbo
            if drop > 1e-3 * abs(trace[-1]):
                decreased = True
        trace.append(elbo)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= config.tol * (abs(trace[-2]) + 1e-10):
            converged = True
            break

    if config.intercept:
        w, b = w_full[:-1], float(w_full[-1])
    else:
        w, b = w_full, 0.0
    return RobustGlmModel(
        w=w,
        intercept=b,
        lambda2=lambda2,
        family=family,
        has_intercept=config.intercept,
        elbo_trace=tuple(trace),
        converged=converged,
        lambda2_clamped=clamped,
        elbo_decreased=decreased,
        n_iters=it,
    )


# ---------------------------------------------------------------------------
# student-t linear regression (robust linear model) by exact-E-step EM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudentTRegressionModel:
    w: np.ndarray
    intercept: float
    s: float            # squared scale
    nu: float
    has_intercept: bool
    loglik_trace: tuple
    converged: bool
    degenerate_scale: bool = False

    @property
    def w_full(self) -> np.ndarray:
        if self.has_intercept:
            return np.concatenate([self.w, [self.intercept]])
        return self.w


NU_LO, NU_HI = 0.1, 1e6


def _t_reg_loglik(y, eta, s, nu):
    return float(np.sum(
        gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * np.log(np.pi * nu * s)
        - (nu + 1) / 2 * np.log1p((y - eta) ** 2 / (nu * s))
    ))


def fit_student_t_regression(
    data: RegressionDataset,
    config: GlmConfig = DEFAULT_GLM_CONFIG,
) -> StudentTRegressionModel:
    """EM for t-distributed residuals: weights, weighted LS, scale, then a
    1-D observed-likelihood search for the degrees of freedom."""
    design = _design(data.X, config.intercept)
    _check_rank(design, config.ridge)
    y = data.y
    n = data.n

    w_full = _solve_lstsq(design, y, ridge=config.ridge)
    resid = y - design @ w_full
    s = max(float(np.mean(resid**2)), 1e-300)
    nu = 4.0
    degenerate = False
    if s < 1e-14 * max(1.0, float(np.mean(y**2))):
        return StudentTRegressionModel(
            w=w_full[:-1] if config.intercept else w_full,
            intercept=float(w_full[-1]) if config.intercept else 0.0,
            s=max(s, 1e-300),
            nu=NU_HI,
            has_intercept=config.intercept,
            loglik_trace=(),
            converged=True,
            degenerate_scale=True,
        )

    from scipy.optimize import minimize_scalar

    trace = [_t_reg_loglik(y, design @ w_full, s, nu)]
    converged = False
    for _ in range(config.max_iters):
        eta = design @ w_full
        resid = y - eta
        gamma = (nu + 1.0) / (nu + resid**2 / s)
        w_full = _solve_lstsq(design, y, weights=gamma, ridge=config.ridge)
        resid = y - design @ w_full
        s_new = float(np.mean(gamma * resid**2))
        if s_new < 1e-14 * max(1.0, float(np.mean(y**2))):
            degenerate = True
            s = max(s_new, 1e-300)
            trace.append(_t_reg_loglik(y, design @ w_full, s, nu))
            break
        s = s_new

        # dof by direct 1-D maximization of the observed log likelihood
        eta = design @ w_full

        def neg_ll(log_nu):
            return -_t_reg_loglik(y, eta, s, float(np.exp(log_nu)))

        res = minimize_scalar(neg_ll, bounds=(np.log(NU_LO), np.log(NU_HI)), method="bounded",
                              options={"xatol": 1e-8})
        cand = float(np.exp(res.x))
        if _t_reg_loglik(y, eta, s, cand) >= _t_reg_loglik(y, eta, s, nu):
            nu = cand
        trace.append(_t_reg_loglik(y, eta, s, nu))
        if abs(trace[-1] - trace[-2]) <= EM_LL_TOL * (abs(trace[-2]) + 1e-10):
            converged = True
            break

    if config.intercept:
        w, b = w_full[:-1], float(w_full[-1])
    else:
        w, b = w_full, 0.0
    return StudentTRegressionModel(
        w=w,
        intercept=b,
        s=s,
        nu=nu,
        has_intercept=config.intercept,
        loglik_trace=tuple(trace),
        converged=converged or degenerate,
        degenerate_scale=degenerate,
    )


# ---------------------------------------------------------------------------
# negative binomial regression (mean-one gamma noise, EB shape)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NegBinRegressionModel:
    w: np.ndarray
    intercept: float
    r: float
    has_intercept: bool
    loglik_trace: tuple
    converged: bool
    poisson_equivalent: bool = False

    @property
    def w_full(self) -> np.ndarray:
        if self.has_intercept:
            return np.concatenate([self.w, [self.intercept]])
        return self.w


def nb_loglik(y, eta, r):
    mu = np.exp(eta)
    return float(np.sum(
        gammaln(y + r) - gammaln(r) - gammaln(y + 1.0)
        + r * np.log(r / (r + mu)) + y * (eta - np.log(r + mu))
    ))


def _nb_shape_newton(y, mu, r0):
    """Guarded Newton for the shape on log r, capped at NB_SHAPE_CAP."""
    t = np.log(np.clip(r0, 1e-3, NB_SHAPE_CAP))
    eta = np.log(mu)

    def ll(r):
        return nb_loglik(y, eta, r)

    def dll_dr(r):
        return float(np.sum(psi(y + r) - psi(r) + np.log(r) + 1.0 - np.log(r + mu) - (y + r) / (r + mu)))

    best = ll(np.exp(t))
    for _ in range(60):
        r = float(np.exp(t))
        g = dll_dr(r) * r
        if abs(g) < 1e-10 * max(1.0, y.size):
            break
        d2 = float(np.sum(
            polygamma(1, y + r) - polygamma(1, r) + 1.0 / r - 2.0 / (r + mu) + (y + r) / (r + mu) ** 2
        ))
        curv = d2 * r * r + g  # chain rule to log space
        step = -g / curv if curv < 0 else np.sign(g)
        step = float(np.clip(step, -3.0, 3.0))
        moved = False
        for _ in range(30):
            cand_t = float(np.clip(t + step, np.log(1e-3), np.log(NB_SHAPE_CAP)))
            if cand_t == t:
                break
            val = ll(np.exp(cand_t))
            if val >= best:
                t, best, moved = cand_t, val, True
                break
            step *= 0.5
        if not moved:
            break
    return float(np.exp(t))


def fit_negative_binomial(
    data: RegressionDataset,
    config: GlmConfig = DEFAULT_GLM_CONFIG,
) -> NegBinRegressionModel:
    """Alternate IRLS for w (fixed shape) with Newton for the shape.

    Mean-one gamma convention: eps ~ Gamma(r, r), so exp(w'x) keeps the
    Poisson mean interpretation.  Monotone log likelihood via step halving;
    r -> infinity is capped and flagged Poisson-equivalent.
    """
    validate_response(data.y, ef.poisson())
    design = _design(data.X, config.intercept)
    _check_rank(design, config.ridge)
    y = data.y

    start = fit_standard_glm(data, ef.poisson(), config)
    w_full = start.w_full.copy()
    r = 10.0
    trace = [nb_loglik(y, design @ w_full, r)]
    converged = False
    for _ in range(config.max_iters):
        # IRLS step for w with the NB2 variance mu + mu^2 / r
        eta = design @ w_full
        mu = np.exp(eta)
        wts = mu * r / (r + mu)
        z = eta + (y - mu) / np.maximum(mu, 1e-10)
        proposal = _solve_lstsq(design, z, weights=np.maximum(wts, 1e-10), ridge=config.ridge)
        step = proposal - w_full
        cur = nb_loglik(y, eta, r)
        for _ in range(40):
            cand = w_full + step
            if nb_loglik(y, design @ cand, r) >= cur - 1e-12:
                break
            step *= 0.5
        w_full = w_full + step
        mu = np.exp(design @ w_full)
        r = _nb_shape_newton(y, mu, r)
        trace.append(nb_loglik(y, np.log(mu), r))
        if abs(trace[-1] - trace[-2]) <= EM_LL_TOL * (abs(trace[-2]) + 1e-10):
            converged = True
            break

    if config.intercept:
        w, b = w_full[:-1], float(w_full[-1])
    else:
        w, b = w_full, 0.0
    return NegBinRegressionModel(
        w=w,
        intercept=b,
        r=r,
        has_intercept=config.intercept,
        loglik_trace=tuple(trace),
        converged=converged,
        poisson_equivalent=r >= NB_SHAPE_CAP * (1 - 1e-9),
    )


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictiveSummary:
    """Per-row predictive quantities; fields not meaningful for a model are NaN."""

    point: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    prob1: np.ndarray
    class1: np.ndarray


def _linear_predictor(model, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    expected = model.w.shape[0]
    if X.shape[1] != expected:
        raise InvalidDataError(f"expected {expected} covariates, got {X.shape[1]}")
    return X @ model.w + model.intercept


def _gh_mean(fn, means, lambda2, nodes=GH_NODES):
    t, wts = np.polynomial.hermite.hermgauss(nodes)
    eta = means[:, None] + np.sqrt(max(2.0 * lambda2, 0.0)) * t[None, :]
    return (fn(eta) @ wts) / np.sqrt(np.pi)


def predict(model, X_new: np.ndarray) -> PredictiveSummary:
    """Predictive summary on new covariate rows (without intercept column)."""
    eta = _linear_predictor(model, X_new)
    n = eta.shape[0]
    nan = np.full(n, np.nan)

    if isinstance(model, StudentTRegressionModel):
        point = eta
        var = np.full(n, model.s * model.nu / (model.nu - 2.0) if model.nu > 2 else np.inf)
        return PredictiveSummary(point=point, mean=eta, variance=var, prob1=nan, class1=nan)

    if isinstance(model, StandardGlmModel):
        tag = model.family.family_tag
        if tag == "gaussian_known_variance":
            mean = model.family.sigma2 * eta  # mu = sigma2 * eta
            return PredictiveSummary(point=mean, mean=mean,
                                     variance=np.full(n, model.family.sigma2), prob1=nan, class1=nan)
        if tag == "bernoulli":
            p = np.asarray(ef.log_normalizer_grad(model.family, eta))
            return PredictiveSummary(point=(p >= 0.5).astype(float), mean=p,
                                     variance=p * (1 - p), prob1=p, class1=(p >= 0.5).astype(float))
        mu = np.exp(eta)
        return PredictiveSummary(point=mu, mean=mu, variance=mu, prob1=nan, class1=nan)

    if isinstance(model, NegBinRegressionModel):
        mu = np.exp(eta)
        return PredictiveSummary(point=mu, mean=mu, variance=mu + mu**2 / model.r, prob1=nan, class1=nan)

    if isinstance(model, RobustGlmModel):
        tag = model.family.family_tag
        l2 = model.lambda2
        if tag == "poisson":
            mean = np.exp(eta + l2 / 2.0)
            var = mean + (np.exp(l2) - 1.0) * np.exp(2.0 * eta + l2)
            return PredictiveSummary(point=mean, mean=mean, variance=var, prob1=nan, class1=nan)
        if tag == "bernoulli":
            if l2 <= LAMBDA2_FLOOR:
                p = np.asarray(ef.log_normalizer_grad(model.family, eta))
            else:
                p = _gh_mean(lambda e: 0.5 * (1.0 + np.tanh(0.5 * e)), eta, l2)
            return PredictiveSummary(point=(p >= 0.5).astype(float), mean=p,
                                     variance=p * (1 - p), prob1=p, class1=(p >= 0.5).astype(float))
        s2 = model.family.sigma2
        mean = s2 * eta
        var = np.full(n, s2 + s2**2 * l2)
        return PredictiveSummary(point=mean, mean=mean, variance=var, prob1=nan, class1=nan)

    raise InvalidParameterError(f"cannot predict with model type {type(model).__name__}")


def predictive_loglik(model, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row log predictive density/mass of the supplied responses."""
    eta = _linear_predictor(model, X)
    y = np.asarray(y, dtype=float).ravel()

    if isinstance(model, StudentTRegressionModel):
        return np.asarray(student_t_logpdf(y - eta, model.nu, 0.0, model.s))

    if isinstance(model, StandardGlmModel):
        tag = model.family.family_tag
        if tag == "gaussian_known_variance":
            s2 = model.sigma2_hat if np.isfinite(model.sigma2_hat) and model.sigma2_hat > 0 else model.family.sigma2
            mean = model.family.sigma2 * eta
            return -0.5 * np.log(2 * np.pi * s2) - (y - mean) ** 2 / (2 * s2)
        return ef.log_base_measure(model.family, y) + y * eta - np.asarray(ef.log_normalizer(model.family, eta))

    if isinstance(model, NegBinRegressionModel):
        mu = np.exp(eta)
        r = model.r
        return (gammaln(y + r) - gammaln(r) - gammaln(y + 1.0)
                + r * np.log(r / (r + mu)) + y * (eta - np.log(r + mu)))

    if isinstance(model, RobustGlmModel):
        tag = model.family.family_tag
        l2 = model.lambda2
        if tag == "gaussian_known_variance":
            s2 = model.family.sigma2
            mean = s2 * eta
            var = s2 + s2**2 * l2
            return -0.5 * np.log(2 * np.pi * var) - (y - mean) ** 2 / (2 * var)
        if l2 <= LAMBDA2_FLOOR:
            return ef.log_base_measure(model.family, y) + y * eta - np.asarray(ef.log_normalizer(model.family, eta))
        # log E_eta[p(y | eta)] by Gauss-Hermite in log space
        t, wts = np.polynomial.hermite.hermgauss(GH_NODES)
        nodes = eta[:, None] + np.sqrt(2.0 * l2) * t[None, :]
        loglik_nodes = (ef.log_base_measure(model.family, y)[:, None]
                        + y[:, None] * nodes - ef.log_normalizer(model.family, nodes))
        mx = loglik_nodes.max(axis=1, keepdims=True)
        return (mx[:, 0] + np.log(np.exp(loglik_nodes - mx) @ wts) - 0.5 * np.log(np.pi))

    raise InvalidParameterError(f"cannot score with model type {type(model).__name__}")
