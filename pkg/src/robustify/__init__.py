"""Robust Bayesian modeling via localization and empirical Bayes."""

__version__ = "0.1.0"
