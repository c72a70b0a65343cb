"""Random forest built from :class:`~hpfair.learners.tree.DecisionTree`."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import InvalidCombinationError, ShapeError
from ._trace import ForestSite, _hit
from .tree import DecisionTree, stream_rng

TREE_PARAMS = (
    "criterion",
    "splitter",
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "min_weight_fraction_leaf",
    "max_features",
    "max_leaf_nodes",
)


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged ensemble of CART trees with averaged class probabilities.

    Tree ``i`` draws from stream ``i`` of ``random_state``; trees are
    fitted sequentially so results never depend on scheduling. ``max_samples``
    (fraction of rows per bootstrap draw) is only meaningful with
    ``bootstrap=True``; any value other than ``None``/``1.0`` without
    bootstrapping is rejected.
    """

    def __init__(
        self,
        n_estimators=10,
        bootstrap=True,
        max_samples=None,
        criterion="gini",
        splitter="best",
        max_depth=None,
        min_samples_split=2,
        min_samples_leaf=1,
        min_weight_fraction_leaf=0.0,
        max_features="sqrt",
        max_leaf_nodes=None,
        random_state=None,
    ):
        self.n_estimators = n_estimators
        self.bootstrap = bootstrap
        self.max_samples = max_samples
        self.criterion = criterion
        self.splitter = splitter
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.min_weight_fraction_leaf = min_weight_fraction_leaf
        self.max_features = max_features
        self.max_leaf_nodes = max_leaf_nodes
        self.random_state = random_state

    def fit(self, X, y, trace=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        if self.n_estimators < 1:
            raise InvalidCombinationError("n_estimators must be >= 1")
        if self.max_samples not in (None, 1.0):
            if not self.bootstrap:
                raise InvalidCombinationError("max_samples requires bootstrap=True")
            if not 0.0 < self.max_samples <= 1.0:
                raise InvalidCombinationError("max_samples must lie in (0, 1]")
        n = X.shape[0]
        n_draw = n if self.max_samples is None else max(1, int(round(self.max_samples * n)))
        _hit(trace, ForestSite.BOOTSTRAP_ON if self.bootstrap else ForestSite.BOOTSTRAP_OFF)

        tree_params = {k: getattr(self, k) for k in TREE_PARAMS}
        self.estimators_ = []
        for i in range(self.n_estimators):
            tree = DecisionTree(**tree_params, random_state=self.random_state)
            tree._stream = i
            if self.bootstrap:
                if n_draw < n:
                    _hit(trace, ForestSite.SUBSAMPLED)
                rows = stream_rng(self.random_state, i, purpose=1).integers(0, n, n_draw)
                tree.fit(X[rows], y[rows], trace=trace)
            else:
                tree.fit(X, y, trace=trace)
            _hit(trace, ForestSite.TREE_FITTED)
            self.estimators_.append(tree)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {X.shape[1]} features, the forest was fitted with {self.n_features_in_}"
            )
        return np.mean([t.predict_proba(X) for t in self.estimators_], axis=0).reshape(-1, 2)

    def predict(self, X):
        proba = self.predict_proba(X)
        return (proba[:, 1] > proba[:, 0]).astype(np.int64)

    def to_dict(self):
        check_is_fitted(self, "estimators_")
        return {
            "params": self.get_params(),
            "n_features_in": int(self.n_features_in_),
            "estimators": [t.to_dict() for t in self.estimators_],
        }

    @classmethod
    def from_dict(cls, doc):
        est = cls(**doc["params"])
        est.n_features_in_ = doc["n_features_in"]
        est.classes_ = np.array([0, 1])
        est.estimators_ = [DecisionTree.from_dict(t) for t in doc["estimators"]]
        return est
