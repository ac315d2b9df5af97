"""Per-data-point Laplace variational inference for localized natural parameters.

The optimal variational factor for a localized natural parameter eta with a
Gaussian prior is proportional to exp(f(eta)) with

    f(eta) = eta * y - a(eta) - (eta - prior_mean)^2 / (2 * prior_var) + const

which has no closed-form normalizer outside the Gaussian family.  The Laplace
approximation is N(m, v) with m the maximizer of f and v = -1/f''(m).  For
the families implemented here f is strictly concave, so the maximizer is
unique and a guarded Newton iteration finds it from any start.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expfam as ef
from .errors import ConvergenceError, InvalidParameterError

__all__ = [
    "VariationalGaussian",
    "LaplaceConfig",
    "laplace_estep",
    "laplace_estep_batch",
    "expected_log_normalizer",
    "expected_log_normalizer_method",
]

GLM_FAMILIES = ("bernoulli", "poisson", "gaussian_known_variance")


@dataclass(frozen=True)
class VariationalGaussian:
    """Gaussian factor q(eta) = N(m, v) for one data point."""

    m: float
    v: float

    def __post_init__(self):
        if not (np.isfinite(self.v) and self.v > 0):
            raise InvalidParameterError(f"variational variance must be finite and > 0, got {self.v}")


@dataclass(frozen=True)
class LaplaceConfig:
    max_newton_iters: int = 50
    grad_tol: float = 1e-10
    backtrack: float = 0.5
    max_step: float = 20.0

    def __post_init__(self):
        if self.max_newton_iters <= 0 or self.grad_tol <= 0 or self.max_step <= 0:
            raise InvalidParameterError("LaplaceConfig values must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise InvalidParameterError("backtracking shrink factor must lie in (0, 1)")


DEFAULT_CONFIG = LaplaceConfig()


def _check_family(family: ef.ExpFamily) -> None:
    if family.family_tag not in GLM_FAMILIES:
        raise InvalidParameterError(
            f"laplace_estep supports scalar families {GLM_FAMILIES}, got {family.family_tag}"
        )


def laplace_estep(
    y: float,
    family: ef.ExpFamily,
    prior_mean: float,
    prior_var: float,
    config: LaplaceConfig = DEFAULT_CONFIG,
) -> VariationalGaussian:
    """Fit q(eta) = N(m, v) with m the mode of f and v = 1/(a''(m) + 1/prior_var)."""
    _check_family(family)
    if not prior_var > 0:
        raise InvalidParameterError(f"prior_var must be > 0, got {prior_var}")
    ef.validate_datum(family, y)
    m, v = laplace_estep_batch(
        np.asarray([y], dtype=float), family, np.asarray([prior_mean], dtype=float),
        prior_var, config,
    )
    return VariationalGaussian(m=float(m[0]), v=float(v[0]))


def _family_funs(family: ef.ExpFamily):
    """Unvalidated (a, a', a'') closures for the Newton hot path."""
    tag = family.family_tag
    if tag == "bernoulli":
        def a(e):
            return np.logaddexp(0.0, e)

        def a1(e):
            return 0.5 * (1.0 + np.tanh(0.5 * e))

        def a2(e):
            s = 0.5 * (1.0 + np.tanh(0.5 * e))
            return s * (1.0 - s)

        return a, a1, a2
    if tag == "poisson":
        return np.exp, np.exp, np.exp
    s2 = family.sigma2

    def a(e):
        return 0.5 * s2 * e * e

    def a1(e):
        return s2 * e

    def a2(e):
        return s2 * np.ones_like(e)

    return a, a1, a2


def laplace_estep_batch(
    y: np.ndarray,
    family: ef.ExpFamily,
    prior_means: np.ndarray,
    prior_var: float,
    config: LaplaceConfig = DEFAULT_CONFIG,
):
    """Vectorized Newton solve of the per-point mode problems.

    All points share the prior variance (the robust-GLM E-step); returns the
    arrays (m, v).  Falls back to bisection on f' for any point Newton leaves
    unconverged.
    """
    _check_family(family)
    if not prior_var > 0:
        raise InvalidParameterError(f"prior_var must be > 0, got {prior_var}")
    y = np.asarray(y, dtype=float)
    mu0 = np.asarray(prior_means, dtype=float)
    a, a1, a2 = _family_funs(family)

    def fval(eta):
        return eta * y - a(eta) - (eta - mu0) ** 2 / (2.0 * prior_var)

    def fgrad(eta):
        return y - a1(eta) - (eta - mu0) / prior_var

    eta = mu0.copy()
    if family.family_tag == "poisson":
        # large counts make exp(eta) overflow from a flat start; log1p(y) is
        # near the likelihood mode, keep whichever scores higher
        alt = np.log1p(y)
        eta = np.where(fval(alt) > fval(eta), alt, eta)

    cur = fval(eta)
    for _ in range(config.max_newton_iters):
        g = fgrad(eta)
        active = np.abs(g) > config.grad_tol
        if not np.any(active):
            break
        step = np.where(active, g / (a2(eta) + 1.0 / prior_var), 0.0)
        step = np.clip(step, -config.max_step, config.max_step)
        # pure Newton is safe once steps are tiny; skip the line search
        needs_search = active & (np.abs(step) > 1e-9 * (1.0 + np.abs(eta)))
        if np.any(needs_search):
            slack = 1e-12 * (np.abs(cur) + 1.0)
            for _ in range(40):
                val = fval(eta + step)
                bad = needs_search & (val < cur - slack)
                if not np.any(bad):
                    break
                step = np.where(bad, step * config.backtrack, step)
        eta = eta + step
        cur = fval(eta)

    g = fgrad(eta)
    stubborn = np.flatnonzero(np.abs(g) > config.grad_tol)
    for i in stubborn:
        eta[i] = _bisect_root(
            lambda e: float(y[i] - a1(np.asarray(e)) - (e - mu0[i]) / prior_var),
            float(mu0[i]),
            config,
        )
    v = 1.0 / (a2(eta) + 1.0 / prior_var)
    return eta, v


def _bisect_root(gfun, center: float, config: LaplaceConfig) -> float:
    """Guarded bisection on the decreasing gradient gfun around ``center``."""
    width = 1.0
    lo, hi = center - width, center + width
    for _ in range(80):
        if gfun(lo) > 0 and gfun(hi) < 0:
            break
        width *= 2.0
        lo, hi = center - width, center + width
    else:
        raise ConvergenceError(
            f"could not bracket the stationary point around {center}",
            trace=[lo, hi],
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = gfun(mid)
        if abs(gm) <= config.grad_tol or hi - lo < 1e-15 * max(1.0, abs(mid)):
            return mid
        if gm > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def expected_log_normalizer(q: VariationalGaussian, family: ef.ExpFamily) -> float:
    """E_q[a(eta)]: exact for poisson and gaussian, delta method for bernoulli."""
    return float(expected_log_normalizer_batch(np.asarray([q.m]), np.asarray([q.v]), family)[0])


def expected_log_normalizer_batch(m: np.ndarray, v: np.ndarray, family: ef.ExpFamily):
    _check_family(family)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    tag = family.family_tag
    if tag == "poisson":
        # E[exp(eta)] is the log-normal mean
        return np.exp(m + v / 2.0)
    if tag == "gaussian_known_variance":
        return 0.5 * family.sigma2 * (m**2 + v)
    # bernoulli: second-order delta approximation a(m) + v a''(m) / 2
    return ef.log_normalizer(family, m) + 0.5 * v * ef.log_normalizer_hess(family, m)


def expected_log_normalizer_method(family: ef.ExpFamily) -> str:
    """Which path expected_log_normalizer takes: 'exact' or 'delta'."""
    _check_family(family)
    return "delta" if family.family_tag == "bernoulli" else "exact"
