"""Binary logistic regression with gradient-descent and Newton solvers."""

import logging

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import InvalidCombinationError, ShapeError
from ._trace import LogisticSite, _hit

logger = logging.getLogger(__name__)

SOLVERS = ("gd", "newton")
PENALTIES = ("none", "l2", "l1")
SINGULAR_CONDITION = 1e12


class LogisticRegression(ClassifierMixin, BaseEstimator):
    """Regularized logistic regression on z-scored features.

    The objective is the mean log-loss plus ``||w||^2 / (2 C n)`` (``l2``) or
    ``||w||_1 / (C n)`` (``l1``, gradient descent only); the intercept is
    never penalized. Column means and scales are learned on the training
    rows and reused at prediction time.

    Parameters
    ----------
    solver : {"gd", "newton"}
        ``"gd"`` is full-batch (proximal) gradient descent with a fixed
        ``learning_rate``. ``"newton"`` takes damped Newton steps and falls
        back to gradient descent once the Hessian condition number exceeds
        1e12.
    penalty : {"none", "l2", "l1"}
    C : float
        Inverse regularization strength.
    tol : float
        Stop when the largest coordinate of the update (per unit step for
        gradient descent) falls to ``tol`` or below.
    max_iter : int
        Reaching it is not an error; the current weights are kept.
    fit_intercept : bool
    learning_rate : float
    random_state : None or int
        Accepted for interface parity; both solvers are deterministic.
    """

    def __init__(
        self,
        solver="gd",
        penalty="l2",
        C=1.0,
        tol=1e-4,
        max_iter=100,
        fit_intercept=True,
        learning_rate=0.5,
        random_state=None,
    ):
        self.solver = solver
        self.penalty = penalty
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.fit_intercept = fit_intercept
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _check_params(self):
        if self.solver not in SOLVERS:
            raise InvalidCombinationError(f"unknown solver {self.solver!r}")
        if self.penalty not in PENALTIES:
            raise InvalidCombinationError(f"unknown penalty {self.penalty!r}")
        if self.penalty == "l1" and self.solver == "newton":
            raise InvalidCombinationError("the newton solver does not support the l1 penalty")
        if not self.C > 0:
            raise InvalidCombinationError("C must be positive")
        if self.tol < 0:
            raise InvalidCombinationError("tol must be non-negative")
        if self.max_iter < 1:
            raise InvalidCombinationError("max_iter must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidCombinationError("learning_rate must be positive")

    def fit(self, X, y, trace=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self._check_params()
        if not np.isin(np.unique(y), (0, 1)).all():
            raise ValueError("LogisticRegression expects labels in {0, 1}")
        y = y.astype(np.float64)
        n, m = X.shape

        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        if (scale == 0).any():
            _hit(trace, LogisticSite.ZERO_VARIANCE_COLUMN)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        if self.fit_intercept:
            _hit(trace, LogisticSite.INTERCEPT_ON)
            Z = np.hstack([Z, np.ones((n, 1))])
        else:
            _hit(trace, LogisticSite.INTERCEPT_OFF)
        _hit(trace, {"none": LogisticSite.PENALTY_NONE, "l2": LogisticSite.PENALTY_L2,
                     "l1": LogisticSite.PENALTY_L1}[self.penalty])

        self._reg = 1.0 / (self.C * n)
        self._penalized = np.ones(Z.shape[1])
        if self.fit_intercept:
            self._penalized[-1] = 0.0

        w = np.zeros(Z.shape[1])
        self.loss_curve_ = [self._objective(Z, y, w)]
        solver = self.solver
        _hit(trace, LogisticSite.SOLVER_GD if solver == "gd" else LogisticSite.SOLVER_NEWTON)
        self.converged_ = False
        self.solver_fallback_ = False
        it = 0
        for it in range(1, self.max_iter + 1):
            if solver == "newton":
                step = self._newton_step(Z, y, w)
                if step is None:
                    logger.info("Hessian numerically singular, switching to gradient descent")
                    _hit(trace, LogisticSite.NEWTON_SINGULAR_FALLBACK)
                    self.solver_fallback_ = True
                    solver = "gd"
            if solver == "gd":
                new_w = self._gd_update(Z, y, w)
                step = new_w - w
                delta = np.abs(step).max() / self.learning_rate
            else:
                new_w = w + step
                delta = np.abs(step).max()
            loss = self._objective(Z, y, new_w)
            if loss > self.loss_curve_[-1]:
                _hit(trace, LogisticSite.LOSS_INCREASED)
            self.loss_curve_.append(loss)
            w = new_w
            if delta <= self.tol:
                self.converged_ = True
                _hit(trace, LogisticSite.CONVERGED_TOL)
                break
        else:
            _hit(trace, LogisticSite.HIT_MAX_ITER)
        self.n_iter_ = it

        if self.fit_intercept:
            self.coef_, self.intercept_ = w[:-1].copy(), float(w[-1])
        else:
            self.coef_, self.intercept_ = w.copy(), 0.0
        del self._reg, self._penalized
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = m
        return self

    def _objective(self, Z, y, w):
        z = Z @ w
        loss = np.mean(np.logaddexp(0.0, z) - y * z)
        if self.penalty == "l2":
            loss += 0.5 * self._reg * np.sum(self._penalized * w * w)
        elif self.penalty == "l1":
            loss += self._reg * np.sum(self._penalized * np.abs(w))
        return float(loss)

    def _gradient(self, Z, y, w):
        g = Z.T @ (expit(Z @ w) - y) / Z.shape[0]
        if self.penalty == "l2":
            g += self._reg * self._penalized * w
        return g

    def _gd_update(self, Z, y, w):
        lr = self.learning_rate
        new_w = w - lr * self._gradient(Z, y, w)
        if self.penalty == "l1":
            shrink = lr * self._reg * self._penalized
            new_w = np.sign(new_w) * np.maximum(np.abs(new_w) - shrink, 0.0)
        return new_w

    def _newton_step(self, Z, y, w):
        """Damped Newton direction, or ``None`` if the Hessian is singular."""
        p = expit(Z @ w)
        g = self._gradient(Z, y, w)
        H = (Z.T * (p * (1.0 - p))) @ Z / Z.shape[0]
        if self.penalty == "l2":
            H += np.diag(self._reg * self._penalized)
        if not np.isfinite(H).all() or np.linalg.cond(H) > SINGULAR_CONDITION:
            return None
        step = -np.linalg.solve(H, g)
        base = self._objective(Z, y, w)
        t = 1.0
        while t > 1e-8 and self._objective(Z, y, w + t * step) > base + 1e-4 * t * (g @ step):
            t *= 0.5
        return t * step

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {X.shape[1]} features, the model was fitted with {self.n_features_in_}"
            )
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "params": self.get_params(),
            "n_features_in": int(self.n_features_in_),
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
        }

    @classmethod
    def from_dict(cls, doc):
        est = cls(**doc["params"])
        est.n_features_in_ = doc["n_features_in"]
        est.classes_ = np.array([0, 1])
        est.mean_ = np.asarray(doc["mean"], dtype=np.float64)
        est.scale_ = np.asarray(doc["scale"], dtype=np.float64)
        est.coef_ = np.asarray(doc["coef"], dtype=np.float64)
        est.intercept_ = float(doc["intercept"])
        return est
