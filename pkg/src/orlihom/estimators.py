"""scikit-learn style front end.

Rows of ``X`` are flattened ``N x d`` matrices (row-major); ``predict``
returns the homogenized density at each row.  ``fit`` only validates the
integrand, so a fitted estimator is cheap to clone into pipelines or grid
searches over ``n`` and solver settings.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .homogenize import gamma_cell, phi_estimate, zeta_estimate
from .integrand import IntegrandSpec, NonconvexSpec, validate_structure
from .solver import SolverConfig

__all__ = ["PeriodicHomogenizer", "StochasticHomogenizer", "check_sigma_rows"]


def check_sigma_rows(X, components: int) -> np.ndarray:
    """Validate ``X`` and reshape it to ``(n_samples, N, d)``."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] % components:
        raise ValueError(
            f"X has {X.shape[1]} columns, not a multiple of components={components}"
        )
    return X.reshape(X.shape[0], components, X.shape[1] // components)


def _validated(spec, sample_budget):
    base = spec.base if isinstance(spec, NonconvexSpec) else spec
    if not isinstance(base, IntegrandSpec):
        raise TypeError("integrand must be an IntegrandSpec or NonconvexSpec")
    report = validate_structure(base, sample_budget)
    if not report.passed:
        raise ValueError(f"integrand fails structural checks: {report.failures}")
    return report


class _SolverParams:
    def _config(self) -> SolverConfig:
        return SolverConfig(
            tol_g=self.tol_g,
            tol_e=self.tol_e,
            max_iter=self.max_iter,
            memory=self.memory,
            multistart_count=self.multistart_count,
        )


class PeriodicHomogenizer(_SolverParams, BaseEstimator):
    """Periodic cell-formula density ``Sigma -> gamma(Sigma)``.

    Parameters
    ----------
    integrand : IntegrandSpec or NonconvexSpec
        Density with periodic (or constant) coefficients.
    n : int
        Elements per unit length of the cell mesh.
    components : int
        Number of rows ``N`` of each ``Sigma``.
    """

    def __init__(
        self,
        integrand=None,
        n=16,
        components=1,
        tol_g=1e-8,
        tol_e=1e-12,
        max_iter=10000,
        memory=10,
        multistart_count=8,
        sample_budget=200,
    ):
        self.integrand = integrand
        self.n = n
        self.components = components
        self.tol_g = tol_g
        self.tol_e = tol_e
        self.max_iter = max_iter
        self.memory = memory
        self.multistart_count = multistart_count
        self.sample_budget = sample_budget

    def fit(self, X=None, y=None):
        self.validation_ = _validated(self.integrand, self.sample_budget)
        self.config_ = self._config()
        if X is not None:
            self.n_features_in_ = check_sigma_rows(X, self.components)[0].size
        return self

    def sample(self, X):
        """Full :class:`~orlihom.homogenize.HomogSample` per row."""
        check_is_fitted(self, "config_")
        sig = check_sigma_rows(X, self.components)
        return [gamma_cell(self.integrand, s, self.n, self.config_) for s in sig]

    def predict(self, X):
        return np.array([s.value for s in self.sample(X)])


class StochasticHomogenizer(_SolverParams, BaseEstimator):
    """Large-cube estimate of the stochastic homogenized density.

    Uses the convex driver for an :class:`IntegrandSpec` and the multistart
    driver for a :class:`NonconvexSpec` (whose predictions are upper bounds).
    """

    def __init__(
        self,
        integrand=None,
        t_list=(4, 8),
        seeds=(0, 1, 2, 3),
        n=2,
        components=1,
        tol_g=1e-8,
        tol_e=1e-12,
        max_iter=10000,
        memory=10,
        multistart_count=8,
        sample_budget=200,
        n_jobs=1,
    ):
        self.integrand = integrand
        self.t_list = t_list
        self.seeds = seeds
        self.n = n
        self.components = components
        self.tol_g = tol_g
        self.tol_e = tol_e
        self.max_iter = max_iter
        self.memory = memory
        self.multistart_count = multistart_count
        self.sample_budget = sample_budget
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        self.validation_ = _validated(self.integrand, self.sample_budget)
        self.config_ = self._config()
        if X is not None:
            self.n_features_in_ = check_sigma_rows(X, self.components)[0].size
        return self

    def estimate(self, X):
        check_is_fitted(self, "config_")
        driver = phi_estimate if isinstance(self.integrand, NonconvexSpec) else zeta_estimate
        return [
            driver(self.integrand, s, list(self.t_list), list(self.seeds), self.n, self.config_, self.n_jobs)
            for s in check_sigma_rows(X, self.components)
        ]

    def predict(self, X):
        return np.array([e.point_estimate for e in self.estimate(X)])
