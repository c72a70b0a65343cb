"""Binary CART decision tree with instrumented growth."""

import heapq
import math

import numpy as np
from scipy.special import xlogy
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import InvalidCombinationError, ShapeError
from ._trace import TreeSite, _hit

CRITERIA = ("gini", "entropy")
SPLITTERS = ("best", "random")


def resolve_max_features(max_features, n_features):
    """Number of candidate features examined at each node."""
    m = n_features
    if max_features in (None, "all", "auto"):
        return m
    if max_features == "sqrt":
        return max(1, min(m, math.ceil(math.sqrt(m))))
    if max_features == "log2":
        return max(1, min(m, math.ceil(math.log2(m)))) if m > 1 else 1
    if isinstance(max_features, (bool, np.bool_)):
        raise InvalidCombinationError(f"max_features={max_features!r} is not supported")
    if isinstance(max_features, (int, np.integer)):
        if max_features < 1:
            raise InvalidCombinationError("integer max_features must be >= 1")
        return min(int(max_features), m)
    if isinstance(max_features, float):
        if not 0.0 < max_features <= 1.0:
            raise InvalidCombinationError("fractional max_features must lie in (0, 1]")
        return max(1, min(m, math.ceil(max_features * m)))
    raise InvalidCombinationError(f"max_features={max_features!r} is not supported")


def stream_rng(random_state, stream=0, purpose=0):
    """Generator for tree ``stream`` of an ensemble seeded with ``random_state``.

    A stand-alone tree is stream 0, so a one-tree unbootstrapped forest draws
    exactly the same numbers as the tree it wraps.
    """
    return np.random.default_rng(np.random.SeedSequence(random_state, spawn_key=(stream, purpose)))


def _features_site(max_features):
    if max_features in (None, "all", "auto"):
        return TreeSite.FEATURES_ALL
    if max_features == "sqrt":
        return TreeSite.FEATURES_SQRT
    if max_features == "log2":
        return TreeSite.FEATURES_LOG2
    return TreeSite.FEATURES_FRACTION


def _impurity(pos, n, criterion):
    """Impurity of a single node with ``pos`` positives out of ``n > 0`` rows."""
    p = pos / n
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / np.log(2.0))


def _children_impurity(pos_left, n_left, pos_right, n_right, criterion):
    """Row-weighted impurity sum of two children; counts are arrays, n > 0."""
    if criterion == "gini":
        return 2.0 * (
            pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right
        )
    neg_left, neg_right = n_left - pos_left, n_right - pos_right
    nats = (
        xlogy(n_left, n_left) - xlogy(pos_left, pos_left) - xlogy(neg_left, neg_left)
        + xlogy(n_right, n_right) - xlogy(pos_right, pos_right) - xlogy(neg_right, neg_right)
    )
    return nats / np.log(2.0)


class DecisionTree(ClassifierMixin, BaseEstimator):
    """CART classifier for binary labels.

    Parameters follow the familiar scikit-learn names. ``max_features`` may be
    ``None``/``"all"``, ``"sqrt"``, ``"log2"`` (both rounded up), an ``int``
    or a fraction in ``(0, 1]``. Growth is depth-first unless
    ``max_leaf_nodes`` is set, in which case the node with the largest
    weighted impurity decrease is expanded first.

    Ties between equally good splits go to the lowest feature index and then
    the lowest threshold; a leaf with equal class counts predicts 0.
    """

    def __init__(
        self,
        criterion="gini",
        splitter="best",
        max_depth=None,
        min_samples_split=2,
        min_samples_leaf=1,
        min_weight_fraction_leaf=0.0,
        max_features=None,
        max_leaf_nodes=None,
        random_state=None,
    ):
        self.criterion = criterion
        self.splitter = splitter
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.min_weight_fraction_leaf = min_weight_fraction_leaf
        self.max_features = max_features
        self.max_leaf_nodes = max_leaf_nodes
        self.random_state = random_state

    def _check_params(self):
        if self.criterion not in CRITERIA:
            raise InvalidCombinationError(f"unknown criterion {self.criterion!r}")
        if self.splitter not in SPLITTERS:
            raise InvalidCombinationError(f"unknown splitter {self.splitter!r}")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidCombinationError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise InvalidCombinationError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise InvalidCombinationError("min_samples_leaf must be >= 1")
        if not 0.0 <= self.min_weight_fraction_leaf <= 0.5:
            raise InvalidCombinationError("min_weight_fraction_leaf must lie in [0, 0.5]")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise InvalidCombinationError("max_leaf_nodes must be >= 2")

    def fit(self, X, y, trace=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self._check_params()
        classes = np.unique(y)
        if not np.isin(classes, (0, 1)).all():
            raise ValueError("DecisionTree expects labels in {0, 1}")
        y = y.astype(np.int64)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.max_features_ = resolve_max_features(self.max_features, X.shape[1])
        rng = stream_rng(self.random_state, getattr(self, "_stream", 0))

        _hit(trace, TreeSite.CRITERION_GINI if self.criterion == "gini" else TreeSite.CRITERION_ENTROPY)
        _hit(trace, TreeSite.SPLITTER_BEST if self.splitter == "best" else TreeSite.SPLITTER_RANDOM)
        _hit(trace, _features_site(self.max_features))

        self._X, self._y, self._rng, self._trace = X, y, rng, trace
        self._min_weight_leaf = self.min_weight_fraction_leaf * X.shape[0]
        self._nodes = {
            "feature": [], "threshold": [], "left": [], "right": [],
            "value": [], "depth": [], "candidates": [],
        }
        try:
            if self.max_leaf_nodes is None:
                _hit(trace, TreeSite.GROW_DEPTH_FIRST)
                self._grow_depth_first()
            else:
                _hit(trace, TreeSite.GROW_BEST_FIRST)
                self._grow_best_first()
        finally:
            del self._X, self._y, self._rng, self._trace
        nodes = self._nodes
        del self._nodes
        self.tree_ = {
            "feature": np.asarray(nodes["feature"], dtype=np.int64),
            "threshold": np.asarray(nodes["threshold"], dtype=np.float64),
            "left": np.asarray(nodes["left"], dtype=np.int64),
            "right": np.asarray(nodes["right"], dtype=np.int64),
            "value": np.asarray(nodes["value"], dtype=np.float64).reshape(-1, 2),
            "depth": np.asarray(nodes["depth"], dtype=np.int64),
        }
        self.node_candidates_ = nodes["candidates"]
        return self

    # growth -----------------------------------------------------------------

    def _new_node(self, idx, depth):
        pos = int(self._y[idx].sum())
        nodes = self._nodes
        nodes["feature"].append(-1)
        nodes["threshold"].append(np.nan)
        nodes["left"].append(-1)
        nodes["right"].append(-1)
        nodes["value"].append((len(idx) - pos, pos))
        nodes["depth"].append(depth)
        nodes["candidates"].append(None)
        return len(nodes["feature"]) - 1

    def _set_split(self, node, split, left, right):
        feature, threshold, _, _, _, candidates = split
        nodes = self._nodes
        nodes["feature"][node] = feature
        nodes["threshold"][node] = threshold
        nodes["left"][node] = left
        nodes["right"][node] = right
        nodes["candidates"][node] = candidates

    def _grow_depth_first(self):
        root = self._new_node(np.arange(self._X.shape[0]), 0)
        stack = [(root, np.arange(self._X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            split = self._find_split(idx, depth)
            if split is None:
                continue
            _hit(self._trace, TreeSite.SPLIT_ACCEPTED)
            left_idx, right_idx = split[3], split[4]
            left = self._new_node(left_idx, depth + 1)
            right = self._new_node(right_idx, depth + 1)
            self._set_split(node, split, left, right)
            stack.append((right, right_idx, depth + 1))
            stack.append((left, left_idx, depth + 1))

    def _grow_best_first(self):
        n = self._X.shape[0]
        heap = []
        counter = 0

        def push(node, idx, depth):
            nonlocal counter
            split = self._find_split(idx, depth)
            if split is not None:
                heapq.heappush(heap, (-split[2] * len(idx) / n, counter, node, depth, split))
                counter += 1

        push(self._new_node(np.arange(n), 0), np.arange(n), 0)
        n_leaves = 1
        while heap:
            if n_leaves >= self.max_leaf_nodes:
                _hit(self._trace, TreeSite.LEAF_MAX_LEAF_NODES)
                break
            _, _, node, depth, split = heapq.heappop(heap)
            _hit(self._trace, TreeSite.SPLIT_ACCEPTED)
            left = self._new_node(split[3], depth + 1)
            right = self._new_node(split[4], depth + 1)
            self._set_split(node, split, left, right)
            n_leaves += 1
            push(left, split[3], depth + 1)
            push(right, split[4], depth + 1)

    def _find_split(self, idx, depth):
        """Best admissible split of the rows ``idx`` or ``None`` for a leaf.

        Returns ``(feature, threshold, gain, left_idx, right_idx, candidates)``.
        """
        trace = self._trace
        n_node = len(idx)
        y_node = self._y[idx]
        pos = int(y_node.sum())
        if pos == 0 or pos == n_node:
            _hit(trace, TreeSite.LEAF_PURE)
            return None
        if self.max_depth is not None and depth >= self.max_depth:
            _hit(trace, TreeSite.LEAF_MAX_DEPTH)
            return None
        if n_node < self.min_samples_split:
            _hit(trace, TreeSite.LEAF_MIN_SAMPLES_SPLIT)
            return None
        if n_node < 2 * self.min_samples_leaf:
            _hit(trace, TreeSite.LEAF_MIN_SAMPLES_LEAF)
            return None
        if n_node < 2 * self._min_weight_leaf:
            _hit(trace, TreeSite.LEAF_MIN_WEIGHT_FRACTION)
            return None

        m = self._X.shape[1]
        if self.max_features_ < m:
            feats = np.sort(self._rng.choice(m, size=self.max_features_, replace=False))
        else:
            feats = np.arange(m)
        Xs = self._X[idx] if len(feats) == m else self._X[idx][:, feats]
        min_leaf = max(self.min_samples_leaf, self._min_weight_leaf)
        parent = _impurity(pos, n_node, self.criterion)

        if self.splitter == "best":
            order = Xs.argsort(axis=0, kind="stable")
            cols = np.arange(len(feats))
            xs = Xs[order, cols]
            cum_pos = y_node[order].cumsum(axis=0)[:-1]
            n_left = np.arange(1.0, n_node)[:, None]
            n_right = n_node - n_left
            child = _children_impurity(cum_pos, n_left, pos - cum_pos, n_right, self.criterion)
            gain = parent - child / n_node
            distinct = xs[1:] > xs[:-1]
            ok = distinct & (n_left >= min_leaf) & (n_right >= min_leaf)
            if not ok.any():
                _hit(trace, TreeSite.CANDIDATE_CONSTANT_FEATURE if not distinct.any()
                     else TreeSite.CANDIDATE_REJECTED_LEAF_SIZE)
                _hit(trace, TreeSite.LEAF_NO_VALID_SPLIT)
                return None
            gain[~ok] = -np.inf
            best_row = gain.argmax(axis=0)
            best_gain = gain[best_row, cols]
            j = int(best_gain.argmax())
            r = best_row[j]
            lo, hi = xs[r, j], xs[r + 1, j]
            threshold = (lo + hi) / 2.0
            if not lo <= threshold < hi:
                threshold = lo
        else:
            lo, hi = Xs.min(axis=0), Xs.max(axis=0)
            draws = self._rng.uniform(lo, hi)
            thresholds = np.where(hi > lo, np.minimum(draws, np.nextafter(hi, -np.inf)), lo)
            go_left = Xs <= thresholds
            n_left = go_left.sum(axis=0).astype(np.float64)
            n_right = n_node - n_left
            pos_left = go_left[y_node == 1].sum(axis=0)
            ok = (hi > lo) & (n_left >= min_leaf) & (n_right >= min_leaf)
            if not ok.any():
                _hit(trace, TreeSite.CANDIDATE_CONSTANT_FEATURE if not (hi > lo).any()
                     else TreeSite.CANDIDATE_REJECTED_LEAF_SIZE)
                _hit(trace, TreeSite.LEAF_NO_VALID_SPLIT)
                return None
            with np.errstate(divide="ignore", invalid="ignore"):
                child = _children_impurity(pos_left, n_left, pos - pos_left, n_right, self.criterion)
            best_gain = np.where(ok, parent - child / n_node, -np.inf)
            j = int(best_gain.argmax())
            threshold = thresholds[j]

        feature = int(feats[j])
        mask = self._X[idx, feature] <= threshold
        return feature, float(threshold), float(best_gain[j]), idx[mask], idx[~mask], feats

    # inference --------------------------------------------------------------

    def apply(self, X):
        """Index of the leaf reached by each row."""
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {X.shape[1]} features, the tree was fitted with {self.n_features_in_}"
            )
        t = self.tree_
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            internal = t["feature"][node] >= 0
            if not internal.any():
                return node
            r, nd = rows[internal], node[internal]
            go_left = X[r, t["feature"][nd]] <= t["threshold"][nd]
            node[r] = np.where(go_left, t["left"][nd], t["right"][nd])

    def predict_proba(self, X):
        value = self.tree_["value"][self.apply(X)]
        total = value.sum(axis=1, keepdims=True)
        return value / np.where(total > 0, total, 1.0)

    def predict(self, X):
        value = self.tree_["value"][self.apply(X)]
        return (value[:, 1] > value[:, 0]).astype(np.int64)

    # introspection ----------------------------------------------------------

    def get_depth(self):
        check_is_fitted(self, "tree_")
        return int(self.tree_["depth"].max())

    def get_n_leaves(self):
        check_is_fitted(self, "tree_")
        return int((self.tree_["feature"] < 0).sum())

    def to_dict(self):
        check_is_fitted(self, "tree_")
        return {
            "params": self.get_params(),
            "n_features_in": int(self.n_features_in_),
            "tree": {
                k: [None if isinstance(x, float) and math.isnan(x) else x for x in v.tolist()]
                if k == "threshold" else v.tolist()
                for k, v in self.tree_.items()
            },
        }

    @classmethod
    def from_dict(cls, doc):
        est = cls(**doc["params"])
        est.n_features_in_ = doc["n_features_in"]
        est.classes_ = np.array([0, 1])
        est.max_features_ = resolve_max_features(est.max_features, est.n_features_in_)
        t = doc["tree"]
        est.tree_ = {
            "feature": np.asarray(t["feature"], dtype=np.int64),
            "threshold": np.asarray(
                [np.nan if v is None else v for v in t["threshold"]], dtype=np.float64
            ),
            "left": np.asarray(t["left"], dtype=np.int64),
            "right": np.asarray(t["right"], dtype=np.int64),
            "value": np.asarray(t["value"], dtype=np.float64).reshape(-1, 2),
            "depth": np.asarray(t["depth"], dtype=np.int64),
        }
        est.node_candidates_ = [None] * len(t["feature"])
        return est
