"""scikit-learn estimator wrapper around :func:`jsrec.solver.solve`."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted, validate_data

from ._core import row_support
from .solver import SolverConfig, solve


class JointSparseRegressor(RegressorMixin, BaseEstimator):
    r"""Multi-output linear model with an l2,1 (row-sparsity) penalty.

    Minimizes

    .. math::

        \|W\|_{2,1} + \frac{\mu}{2} \|X W - Y\|_{F}^2

    over ``W`` of shape ``(n_features, n_targets)`` by forward-backward
    splitting, so all targets share one set of active features. ``X`` plays
    the role of the sensing matrix and each column of ``Y`` is one
    measurement channel. No intercept is fitted.

    Parameters
    ----------
    mu : float, default=1.0
        Weight of the least-squares term; larger values mean less shrinkage.
    tau : float or "auto", default="auto"
        Step size; "auto" uses ``1 / (mu * ||X^T X||)``.
    max_iter : int, default=100000
    tol : float, default=1e-12
        Relative fixed-point tolerance on ``||W^{k+1} - W^k||_F``.
    objective_tol : float or None, default=None
        Optional relative tolerance on the objective decrease.
    record : {"none", "norms", "full"}, default="norms"
    history_cap : int, default=200
    warm_start : bool, default=False
        Start from the previous solution when shapes match.
    random_state : int, default=0
        Seed of the power iteration that bounds ``||X^T X||``.

    Attributes
    ----------
    signal_ : ndarray of shape (n_features, n_targets)
        The solution matrix ``W``.
    coef_ : ndarray of shape (n_targets, n_features) or (n_features,)
        ``signal_`` in scikit-learn's orientation.
    intercept_ : float or ndarray
        Always zero.
    result_ : SolveResult
    n_iter_ : int
    tau_ : float
    """

    def __init__(self, mu=1.0, tau="auto", max_iter=100_000, tol=1e-12, objective_tol=None,
                 record="norms", history_cap=200, warm_start=False, random_state=0):
        self.mu = mu
        self.tau = tau
        self.max_iter = max_iter
        self.tol = tol
        self.objective_tol = objective_tol
        self.record = record
        self.history_cap = history_cap
        self.warm_start = warm_start
        self.random_state = random_state

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        tags.target_tags.single_output = True
        return tags

    def _config(self):
        return SolverConfig(tau=self.tau, mu=self.mu, max_iters=self.max_iter, tol=self.tol,
                            objective_tol=self.objective_tol, record=self.record,
                            history_cap=self.history_cap, seed=self.random_state)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True,
                             dtype=np.float64)
        single = y.ndim == 1
        Y = y[:, None] if single else y

        x0 = None
        prev = getattr(self, "signal_", None)
        if self.warm_start and prev is not None and prev.shape == (X.shape[1], Y.shape[1]):
            x0 = prev
        res = solve(X, Y, self._config(), x0)
        if not res.converged:
            warnings.warn(f"no convergence within {self.max_iter} iterations; "
                          "increase max_iter or relax tol", ConvergenceWarning)

        self.result_ = res
        self.signal_ = np.array(res.x)
        self.coef_ = self.signal_[:, 0].copy() if single else self.signal_.T.copy()
        self.intercept_ = 0.0 if single else np.zeros(Y.shape[1])
        self.n_iter_ = res.iterations
        self.tau_ = res.tau
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        out = X @ self.signal_
        return out[:, 0] if self.coef_.ndim == 1 else out

    @property
    def support_(self):
        """Indices of the nonzero rows of ``signal_``."""
        check_is_fitted(self)
        return row_support(self.signal_)
