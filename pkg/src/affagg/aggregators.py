"""Scikit-learn style front end for the aggregation procedures.

Each class holds its hyperparameters in ``__init__`` (so ``get_params`` /
``set_params`` / ``clone`` compose with the wider ecosystem), learns mixing
weights in ``fit``, and exposes the fitted vector plus a ``predict`` that
applies the learned affine mixture to new observations.

The sequence-model classes are fit on a single observation vector y; the
design-based classes take the usual (X, y) pair.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import procedures
from .criteria import Prior
from .estimators import EstimatorBank, mix
from .validation import as_vector


class _BankAggregator(BaseEstimator):
    """Shared fit/predict mechanics for aggregation over a fixed bank."""

    def __init__(self, estimators=None):
        self.estimators = estimators

    def _run(self, bank):  # pragma: no cover - overridden
        raise NotImplementedError

    def fit(self, y):
        if not self.estimators:
            raise ValueError("estimators must be a non-empty sequence of AffineEstimator")
        y = as_vector(y, "y")
        bank = EstimatorBank.build(self.estimators, y)
        output = self._run(bank)
        self.weights_ = output.theta.weights
        self.fitted_ = output.fitted
        self.solve_result_ = output.solve
        self.objective_kind_ = output.objective_kind
        self.mixture_ = mix(bank.estimators, self.weights_)
        return self

    def predict(self, y=None):
        """Apply the learned mixture; with no argument, return the in-sample fit."""
        if not hasattr(self, "fitted_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        if y is None:
            return self.fitted_
        return self.mixture_.apply(as_vector(y, "y", self.mixture_.dim))


class QAggregation(_BankAggregator):
    """Penalized aggregation of affine estimators with known noise variance."""

    def __init__(self, estimators=None, sigma2=1.0, tol=None, max_iter=None):
        super().__init__(estimators)
        self.sigma2 = sigma2
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, bank):
        return procedures.q_aggregate(bank, self.sigma2, tol=self.tol, max_iter=self.max_iter)


class PriorQAggregation(_BankAggregator):
    """Penalized aggregation with prior weights over the estimators."""

    def __init__(self, estimators=None, sigma2=1.0, prior=None, tol=None, max_iter=None):
        super().__init__(estimators)
        self.sigma2 = sigma2
        self.prior = prior
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, bank):
        prior = self.prior
        if prior is None:
            prior = Prior.uniform(bank.size)
        elif not isinstance(prior, Prior):
            prior = Prior(np.asarray(prior, dtype=float))
        return procedures.q_aggregate_prior(bank, self.sigma2, prior,
                                            tol=self.tol, max_iter=self.max_iter)


class PluginVarianceQAggregation(_BankAggregator):
    """Penalized aggregation with an estimated (plug-in) noise variance."""

    def __init__(self, estimators=None, sigma2_hat=1.0, tol=None, max_iter=None):
        super().__init__(estimators)
        self.sigma2_hat = sigma2_hat
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, bank):
        return procedures.q_aggregate_plugin_variance(bank, self.sigma2_hat,
                                                      tol=self.tol, max_iter=self.max_iter)


class CpAggregation(_BankAggregator):
    """Unpenalized risk-estimate minimization over the simplex."""

    def __init__(self, estimators=None, sigma2=1.0, tol=None, max_iter=None):
        super().__init__(estimators)
        self.sigma2 = sigma2
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, bank):
        return procedures.cp_minimize(bank, self.sigma2, tol=self.tol, max_iter=self.max_iter)


class CpSelection(_BankAggregator):
    """Single-estimator selection by the risk estimate (no mixing)."""

    def __init__(self, estimators=None, sigma2=1.0):
        super().__init__(estimators)
        self.sigma2 = sigma2

    def fit(self, y):
        if not self.estimators:
            raise ValueError("estimators must be a non-empty sequence of AffineEstimator")
        y = as_vector(y, "y")
        bank = EstimatorBank.build(self.estimators, y)
        self.selected_index_ = procedures.erm_cp_select(bank, self.sigma2)
        weights = np.zeros(bank.size)
        weights[self.selected_index_] = 1.0
        self.weights_ = weights
        self.fitted_ = bank.fits[self.selected_index_]
        self.mixture_ = bank.estimators[self.selected_index_]
        return self

    def predict(self, y=None):
        if not hasattr(self, "fitted_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        if y is None:
            return self.fitted_
        return self.mixture_.apply(as_vector(y, "y", self.mixture_.dim))


class ConvexGridQAggregation(_BankAggregator):
    """Aggregation over the sparse simplex grid, for the convex benchmark."""

    def __init__(self, estimators=None, sigma2=1.0, grid_cap=procedures.DEFAULT_GRID_CAP,
                 tol=None, max_iter=None):
        super().__init__(estimators)
        self.sigma2 = sigma2
        self.grid_cap = grid_cap
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, y):
        if not self.estimators:
            raise ValueError("estimators must be a non-empty sequence of AffineEstimator")
        y = as_vector(y, "y")
        bank = EstimatorBank.build(self.estimators, y)
        result = procedures.convex_aggregate(bank, self.sigma2, cap=self.grid_cap,
                                             tol=self.tol, max_iter=self.max_iter)
        self.weights_ = result.theta_original.weights
        self.grid_weights_ = result.output.theta.weights
        self.fitted_ = result.output.fitted
        self.solve_result_ = result.output.solve
        self.grid_ = result.grid
        self.mixture_ = mix(bank.estimators, self.weights_)
        return self


class KRegressorAggregation(BaseEstimator):
    """Aggregation of least-squares fits over all k-column subspaces."""

    def __init__(self, k=1, sigma2=1.0, support_cap=procedures.DEFAULT_SUPPORT_CAP,
                 tol=None, max_iter=None):
        self.k = k
        self.sigma2 = sigma2
        self.support_cap = support_cap
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        output = procedures.kregressor_aggregate(X, self.k, y, self.sigma2,
                                                 support_cap=self.support_cap,
                                                 tol=self.tol, max_iter=self.max_iter)
        self.weights_ = output.theta.weights
        self.fitted_ = output.fitted
        self.solve_result_ = output.solve
        return self

    def predict(self):
        if not hasattr(self, "fitted_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        return self.fitted_


class SparsityPatternAggregation(BaseEstimator):
    """Least-squares aggregation over sparsity patterns with the
    subgaussian-norm plug-in."""

    def __init__(self, khat2=1.0, k_max=None, support_cap=procedures.DEFAULT_SUPPORT_CAP,
                 tol=None, max_iter=None):
        self.khat2 = khat2
        self.k_max = k_max
        self.support_cap = support_cap
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        spec = procedures.SparsitySpec.build(X, self.khat2, k_max=self.k_max,
                                             support_cap=self.support_cap)
        output = procedures.sparsity_pattern_aggregate(spec, y, tol=self.tol,
                                                       max_iter=self.max_iter)
        self.spec_ = spec
        self.weights_ = output.theta.weights
        self.fitted_ = output.fitted
        self.solve_result_ = output.solve
        return self

    def predict(self):
        if not hasattr(self, "fitted_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        return self.fitted_
