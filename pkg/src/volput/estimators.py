"""Estimator-style wrappers around the closed-form pricers.

``fit`` solves the free-boundary problem for the constructor parameters
(``X`` and ``y`` are accepted for API compatibility and ignored);
``predict`` evaluates the value function at index levels.

    >>> pricer = CallablePutPricer(alpha=0.1, beta=0.1, k=0.5, r=0.05, strike=0.5, delta=0.05)
    >>> pricer.fit().predict([0.3, 0.5])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .pricing import solve_american, solve_callable, solve_knockout
from .validation import check_params, check_state


class _PutPricer(RegressorMixin, BaseEstimator):
    def __init__(self, alpha=0.1, beta=0.1, k=0.5, r=0.05, strike=0.5, delta=0.05):
        self.alpha = alpha
        self.beta = beta
        self.k = k
        self.r = r
        self.strike = strike
        self.delta = delta

    def _solve(self, params):
        raise NotImplementedError

    def fit(self, X=None, y=None):
        self.params_ = check_params(self.get_params())
        self.solution_ = self._solve(self.params_)
        self.boundary_ = float(self.solution_.boundary_s)
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        x = check_state(X)
        return np.asarray(self.solution_.value(x), dtype=float)

    def slope(self, X):
        """First derivative of the value function."""
        check_is_fitted(self, "solution_")
        return np.asarray(self.solution_.slope(check_state(X)), dtype=float)

    def to_dict(self) -> dict:
        check_is_fitted(self, "solution_")
        return self.solution_.to_dict()


class AmericanPutPricer(_PutPricer):
    """Perpetual American put; ``delta`` is ignored."""

    def _solve(self, params):
        return solve_american(params)


class KnockoutPutPricer(_PutPricer):
    """Perpetual put knocked out at the strike with rebate ``delta``."""

    def _solve(self, params):
        return solve_knockout(params)


class CallablePutPricer(_PutPricer):
    """Perpetual put the seller may cancel by paying ``(K - x)^+ + delta``.

    After ``fit`` the regime is in ``regime_`` and the cancellation
    threshold ``v_A(K)`` in ``delta_star_``.
    """

    def _solve(self, params):
        return solve_callable(params)

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.regime_ = self.solution_.regime.value
        self.delta_star_ = self.solution_.delta_star
        return self
