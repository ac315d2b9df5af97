"""Exponential-family and conjugate-pair primitives.

Every observation family here writes its density as
``h(x) * exp(eta * t(x) - a(eta))`` with x its own sufficient statistic, and
pairs it with the conjugate prior ``p(eta | alpha) ~ exp(alpha1 * eta
- alpha2 * a(eta) - a_prior(alpha))``.  Posterior updates, integrated
likelihoods, and marginal log likelihoods then reduce to ratios of the prior
log normalizer evaluated at shifted hyperparameters.

Supported families:

* ``bernoulli`` -- a(eta) = log(1 + e^eta); conjugate prior is a Beta with
  shapes (alpha1, alpha2 - alpha1).
* ``poisson`` -- a(eta) = e^eta, h(x) = 1/x!; conjugate prior is a Gamma with
  shape alpha1 and rate alpha2 on the rate.
* ``gaussian_known_variance`` -- the observation variance sigma^2 is a fixed
  family constant; eta = mu / sigma^2 and a(eta) = sigma^2 eta^2 / 2.  The
  conjugate prior on eta is Gaussian; in mean space it is N(alpha1/alpha2,
  sigma^2/alpha2).
* ``categorical`` -- a(eta) = logsumexp(eta) over a fixed dimension; the
  conjugate prior is a Dirichlet with pseudo-counts alpha1, which ties
  alpha2 = sum(alpha1).

Scalar-family operations broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import gammaln, psi

from .errors import InvalidDataError, InvalidParameterError

__all__ = [
    "ExpFamily",
    "ConjugateHyper",
    "bernoulli",
    "poisson",
    "gaussian_known_variance",
    "categorical",
    "beta_hyper",
    "gamma_hyper",
    "gaussian_hyper",
    "log_normalizer",
    "log_normalizer_grad",
    "log_normalizer_hess",
    "log_base_measure",
    "validate_datum",
    "validate_hyper",
    "prior_log_normalizer",
    "prior_log_normalizer_grad",
    "conjugate_posterior_update",
    "log_integrated_likelihood",
    "integrated_likelihood",
    "marginal_loglik",
    "marginal_loglik_grad",
]

SCALAR_FAMILIES = ("bernoulli", "poisson", "gaussian_known_variance")
FAMILY_TAGS = SCALAR_FAMILIES + ("categorical",)


@dataclass(frozen=True)
class ExpFamily:
    """A likelihood family; ``sigma2`` is used by gaussian_known_variance only."""

    family_tag: str
    dimension: int = 1
    name: str = ""
    sigma2: float = 1.0

    def __post_init__(self):
        if self.family_tag not in FAMILY_TAGS:
            raise InvalidParameterError(f"unknown family tag {self.family_tag!r}")
        if self.dimension < 1:
            raise InvalidParameterError(f"{self.family_tag}: dimension must be >= 1")
        if self.family_tag != "categorical" and self.dimension != 1:
            raise InvalidParameterError(f"{self.family_tag}: dimension must be 1")
        if self.family_tag == "gaussian_known_variance" and not self.sigma2 > 0:
            raise InvalidParameterError(
                f"gaussian_known_variance: sigma2 must be > 0, got {self.sigma2}"
            )
        if not self.name:
            object.__setattr__(self, "name", self.family_tag)


def bernoulli() -> ExpFamily:
    return ExpFamily("bernoulli")


def poisson() -> ExpFamily:
    return ExpFamily("poisson")


def gaussian_known_variance(sigma2: float = 1.0) -> ExpFamily:
    return ExpFamily("gaussian_known_variance", sigma2=float(sigma2))


def categorical(dimension: int) -> ExpFamily:
    return ExpFamily("categorical", dimension=int(dimension))


@dataclass(frozen=True)
class ConjugateHyper:
    """Conjugate-prior natural parameters [alpha1, alpha2].

    ``alpha1`` is a float for the scalar families and a positive vector of
    Dirichlet pseudo-counts for the categorical family; ``alpha2`` is the
    pseudo-count scalar.
    """

    alpha1: Union[float, np.ndarray]
    alpha2: float

    def __post_init__(self):
        a1 = self.alpha1
        if isinstance(a1, (list, tuple, np.ndarray)):
            object.__setattr__(self, "alpha1", np.asarray(a1, dtype=float))
        else:
            object.__setattr__(self, "alpha1", float(a1))
        object.__setattr__(self, "alpha2", float(self.alpha2))


def beta_hyper(a: float, b: float) -> ConjugateHyper:
    """Beta(a, b) prior on the bernoulli mean, in natural coordinates."""
    return ConjugateHyper(alpha1=a, alpha2=a + b)


def gamma_hyper(shape: float, rate: float) -> ConjugateHyper:
    """Gamma(shape, rate) prior on the poisson rate, in natural coordinates."""
    return ConjugateHyper(alpha1=shape, alpha2=rate)


def gaussian_hyper(mu0: float, lambda2: float, sigma2: float = 1.0) -> ConjugateHyper:
    """N(mu0, lambda2) prior on the gaussian mean, in natural coordinates."""
    if not lambda2 > 0:
        raise InvalidParameterError(f"gaussian prior variance must be > 0, got {lambda2}")
    return ConjugateHyper(alpha1=mu0 * sigma2 / lambda2, alpha2=sigma2 / lambda2)


# ---------------------------------------------------------------------------
# data-likelihood log normalizer and friends
# ---------------------------------------------------------------------------

def _check_eta(family: ExpFamily, eta) -> np.ndarray:
    arr = np.asarray(eta, dtype=float)
    if family.family_tag == "categorical":
        if arr.shape[-1] != family.dimension:
            raise InvalidParameterError(
                f"categorical: eta must have dimension {family.dimension}, got shape {arr.shape}"
            )
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))
        raise InvalidParameterError(
            f"{family.family_tag}: eta must be finite (offending component {bad[0].tolist()})"
        )
    return arr


def log_normalizer(family: ExpFamily, eta):
    """a(eta).  E[t(x)] = a'(eta) and Var[t(x)] = a''(eta)."""
    eta = _check_eta(family, eta)
    tag = family.family_tag
    if tag == "bernoulli":
        return np.logaddexp(0.0, eta)
    if tag == "poisson":
        return np.exp(eta)
    if tag == "gaussian_known_variance":
        return 0.5 * family.sigma2 * eta**2
    # categorical: logsumexp over the last axis
    m = np.max(eta, axis=-1, keepdims=True)
    return np.squeeze(m, -1) + np.log(np.sum(np.exp(eta - m), axis=-1))


def log_normalizer_grad(family: ExpFamily, eta):
    eta = _check_eta(family, eta)
    tag = family.family_tag
    if tag == "bernoulli":
        return _sigmoid(eta)
    if tag == "poisson":
        return np.exp(eta)
    if tag == "gaussian_known_variance":
        return family.sigma2 * eta
    p = np.exp(eta - np.max(eta, axis=-1, keepdims=True))
    return p / np.sum(p, axis=-1, keepdims=True)


def log_normalizer_hess(family: ExpFamily, eta):
    """Var[t(x)]: a scalar for scalar families, a matrix for categorical."""
    eta = _check_eta(family, eta)
    tag = family.family_tag
    if tag == "bernoulli":
        s = _sigmoid(eta)
        return s * (1.0 - s)
    if tag == "poisson":
        return np.exp(eta)
    if tag == "gaussian_known_variance":
        return family.sigma2 * np.ones_like(eta)
    p = log_normalizer_grad(family, eta)
    return np.diag(p) - np.outer(p, p)


def _sigmoid(t):
    # tanh form is overflow-safe for any real t
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=float)))


def log_base_measure(family: ExpFamily, x):
    """log h(x); nonzero for poisson (1/x!) and the gaussian quadratic factor."""
    x = np.asarray(x, dtype=float)
    tag = family.family_tag
    if tag == "poisson":
        return -gammaln(x + 1.0)
    if tag == "gaussian_known_variance":
        s2 = family.sigma2
        return -(x**2) / (2.0 * s2) - 0.5 * np.log(2.0 * np.pi * s2)
    return np.zeros_like(x)


def validate_datum(family: ExpFamily, x, index: int | None = None) -> None:
    """Raise InvalidDataError when ``x`` is outside the family's support."""
    tag = family.family_tag
    if tag == "bernoulli":
        if x not in (0, 1, 0.0, 1.0):
            raise InvalidDataError(f"bernoulli datum must be 0 or 1, got {x!r}", index)
    elif tag == "poisson":
        xf = float(x)
        if not (np.isfinite(xf) and xf >= 0 and xf == int(xf)):
            raise InvalidDataError(f"poisson datum must be a nonnegative integer, got {x!r}", index)
    elif tag == "gaussian_known_variance":
        if not np.isfinite(float(x)):
            raise InvalidDataError(f"gaussian datum must be finite, got {x!r}", index)
    else:
        xi = int(x)
        if xi != x or not 0 <= xi < family.dimension:
            raise InvalidDataError(
                f"categorical datum must be an integer in [0, {family.dimension}), got {x!r}",
                index,
            )


# ---------------------------------------------------------------------------
# conjugate prior: log normalizer, updates, predictive
# ---------------------------------------------------------------------------

def validate_hyper(family: ExpFamily, hyper: ConjugateHyper) -> None:
    """Check (alpha1, alpha2) lies where the prior log normalizer is finite."""
    tag = family.family_tag
    a1, a2 = hyper.alpha1, hyper.alpha2
    if tag == "categorical":
        a1 = np.asarray(a1, dtype=float)
        if a1.ndim != 1 or a1.shape[0] != family.dimension:
            raise InvalidParameterError(
                f"categorical: alpha1 must be a length-{family.dimension} vector"
            )
        if not np.all(a1 > 0):
            bad = int(np.argmin(a1))
            raise InvalidParameterError(
                f"categorical: alpha1 components must be > 0 (offending component {bad})"
            )
        total = float(np.sum(a1))
        if not np.isclose(a2, total, rtol=1e-9, atol=1e-12):
            raise InvalidParameterError(
                f"categorical: alpha2 must equal sum(alpha1)={total}, got {a2}"
            )
        return
    if not np.isfinite(a1) or not np.isfinite(a2):
        raise InvalidParameterError(f"{tag}: hyperparameters must be finite")
    if tag == "bernoulli":
        if not a1 > 0:
            raise InvalidParameterError(f"bernoulli: alpha1 must be > 0, got {a1}")
        if not a2 - a1 > 0:
            raise InvalidParameterError(
                f"bernoulli: alpha2 - alpha1 must be > 0 (Beta shapes), got {a2 - a1}"
            )
    elif tag == "poisson":
        if not a1 > 0:
            raise InvalidParameterError(f"poisson: alpha1 must be > 0, got {a1}")
        if not a2 > 0:
            raise InvalidParameterError(f"poisson: alpha2 must be > 0, got {a2}")
    else:
        if not a2 > 0:
            raise InvalidParameterError(f"{tag}: alpha2 must be > 0, got {a2}")


def prior_log_normalizer(family: ExpFamily, hyper: ConjugateHyper) -> float:
    """a_prior(alpha), the log normalizer of the conjugate prior."""
    validate_hyper(family, hyper)
    tag = family.family_tag
    a1, a2 = hyper.alpha1, hyper.alpha2
    if tag == "bernoulli":
        return float(gammaln(a1) + gammaln(a2 - a1) - gammaln(a2))
    if tag == "poisson":
        return float(gammaln(a1) - a1 * np.log(a2))
    if tag == "gaussian_known_variance":
        s2 = family.sigma2
        return float(0.5 * np.log(2.0 * np.pi / (a2 * s2)) + a1**2 / (2.0 * a2 * s2))
    a1 = np.asarray(a1, dtype=float)
    return float(np.sum(gammaln(a1)) - gammaln(np.sum(a1)))


def prior_log_normalizer_grad(family: ExpFamily, hyper: ConjugateHyper):
    """Gradient of a_prior in (alpha1, alpha2).

    For the categorical family alpha2 is tied to sum(alpha1); the gradient is
    returned in alpha1 only, with None in the alpha2 slot.
    """
    validate_hyper(family, hyper)
    tag = family.family_tag
    a1, a2 = hyper.alpha1, hyper.alpha2
    if tag == "bernoulli":
        return float(psi(a1) - psi(a2 - a1)), float(psi(a2 - a1) - psi(a2))
    if tag == "poisson":
        return float(psi(a1) - np.log(a2)), float(-a1 / a2)
    if tag == "gaussian_known_variance":
        s2 = family.sigma2
        return float(a1 / (a2 * s2)), float(-0.5 / a2 - a1**2 / (2.0 * a2**2 * s2))
    a1 = np.asarray(a1, dtype=float)
    return psi(a1) - psi(np.sum(a1)), None


def _stat(family: ExpFamily, x):
    if family.family_tag == "categorical":
        onehot = np.zeros(family.dimension)
        onehot[int(x)] = 1.0
        return onehot
    return float(x)


def conjugate_posterior_update(
    family: ExpFamily, prior: ConjugateHyper, data: Sequence
) -> ConjugateHyper:
    """Posterior hyperparameters [alpha1 + sum_i t(x_i), alpha2 + n]."""
    validate_hyper(family, prior)
    total = np.zeros(family.dimension) if family.family_tag == "categorical" else 0.0
    n = 0
    for i, x in enumerate(data):
        validate_datum(family, x, index=i)
        total = total + _stat(family, x)
        n += 1
    return ConjugateHyper(alpha1=prior.alpha1 + total, alpha2=prior.alpha2 + n)


def log_integrated_likelihood(family: ExpFamily, prior: ConjugateHyper, x) -> float:
    """log p(x | alpha) = log h(x) + a_prior(alpha + [t(x), 1]) - a_prior(alpha).

    Computed entirely in log space.
    """
    validate_hyper(family, prior)
    validate_datum(family, x)
    post = ConjugateHyper(alpha1=prior.alpha1 + _stat(family, x), alpha2=prior.alpha2 + 1.0)
    return float(
        log_base_measure(family, x)
        + prior_log_normalizer(family, post)
        - prior_log_normalizer(family, prior)
    )


def integrated_likelihood(family: ExpFamily, prior: ConjugateHyper, x) -> float:
    """p(x | alpha), the closed-form predictive of the conjugate pair."""
    return float(np.exp(log_integrated_likelihood(family, prior, x)))


def marginal_loglik(family: ExpFamily, prior: ConjugateHyper, data: Sequence) -> float:
    """Sum of per-datum log integrated likelihoods under a shared prior."""
    return float(sum(log_integrated_likelihood(family, prior, x) for x in data))


def marginal_loglik_grad(family: ExpFamily, prior: ConjugateHyper, data: Sequence):
    """Analytic gradient of ``marginal_loglik`` in (alpha1, alpha2).

    Categorical gradients are reported in alpha1 only (alpha2 slot None),
    matching the Dirichlet tie alpha2 = sum(alpha1).
    """
    validate_hyper(family, prior)
    n = 0
    if family.family_tag == "categorical":
        g1 = np.zeros(family.dimension)
    else:
        g1 = 0.0
    g2 = 0.0
    for i, x in enumerate(data):
        validate_datum(family, x, index=i)
        post = ConjugateHyper(prior.alpha1 + _stat(family, x), prior.alpha2 + 1.0)
        d1, d2 = prior_log_normalizer_grad(family, post)
        g1 = g1 + d1
        if d2 is not None:
            g2 += d2
        n += 1
    p1, p2 = prior_log_normalizer_grad(family, prior)
    g1 = g1 - n * p1
    if family.family_tag == "categorical":
        return g1, None
    return float(g1), float(g2 - n * p2)
