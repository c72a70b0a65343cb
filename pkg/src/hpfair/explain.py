"""Explain which hyperparameters separate low-bias from high-bias models.

Archived test cases are clustered in the (accuracy, bias) plane with
normalized spectral clustering, then a depth-capped CART classifier over the
raw hyperparameter values predicts the cluster label. The classifier's
predicates are the explanation. Explanations from many campaigns can be
aggregated with :func:`mine_frequent` to find parameters that keep showing up.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import KMeans

from .exceptions import ConfigurationError, DegenerateDataError, DegenerateGeometryError, SizeError

MAX_CLUSTERS = 3
MAX_DEPTH = 3
N_KMEANS_INIT = 10
MAX_RESEEDS = 10
# one percentage point; accuracy and bias are proportions
SCALE_FLOOR = 0.01
EXPLANATION_FORMAT = "hpfair-explanation"
MINING_FORMAT = "hpfair-mining"
FORMAT_VERSION = 1


# clustering ----------------------------------------------------------------------


@dataclass
class ClusterModel:
    k: int
    labels: np.ndarray
    embedding: np.ndarray
    seed: int


def _standardize(points):
    # an axis that barely moves is centered but not blown up to unit variance
    mean = points.mean(axis=0)
    std = points.std(axis=0)
    return (points - mean) / np.maximum(std, SCALE_FLOOR)


def spectral_embedding(points, k):
    """Row-normalized bottom-``k`` eigenvectors of the normalized Laplacian.

    The affinity is a Gaussian kernel whose bandwidth is the median pairwise
    distance between the standardized points.
    """
    dist = pdist(points)
    if not dist.size or not (dist > 0).any():
        raise DegenerateGeometryError("all points coincide; nothing to cluster")
    sigma = np.median(dist)
    if sigma == 0:
        sigma = dist[dist > 0].mean()
    W = np.exp(-squareform(dist) ** 2 / (2.0 * sigma**2))
    np.fill_diagonal(W, 0.0)
    d = W.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(d, np.finfo(float).tiny))
    L = np.eye(len(W)) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh(L)
    U = vecs[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return U / np.where(norms > 0, norms, 1.0)


def spectral_cluster(points, k, seed=0, max_clusters=MAX_CLUSTERS):
    """Cluster 2-D (accuracy, bias) points into ``k`` groups.

    Labels are renumbered so that cluster 0 has the lowest mean bias (second
    coordinate), then the lowest mean accuracy.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if not 2 <= k <= max_clusters:
        raise ConfigurationError(f"k must lie in [2, {max_clusters}], got {k}")
    n = len(points)
    if n < k:
        raise SizeError(f"cannot form {k} clusters from {n} points")
    if not np.isfinite(points).all():
        raise ValueError("points must be finite")
    Z = _standardize(points)
    U = spectral_embedding(Z, k)
    for attempt in range(MAX_RESEEDS):
        km = KMeans(n_clusters=k, init="k-means++", n_init=N_KMEANS_INIT,
                    random_state=seed + attempt)
        raw = km.fit_predict(U)
        if len(np.unique(raw)) == k:
            break
    else:
        raise DegenerateGeometryError(f"k-means kept producing empty clusters for k={k}")
    order = sorted(range(k), key=lambda c: (points[raw == c, 1].mean(), points[raw == c, 0].mean(), c))
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    return ClusterModel(k=k, labels=relabel[raw], embedding=Z, seed=seed)


class SpectralClustering(ClusterMixin, BaseEstimator):
    """Estimator wrapper around :func:`spectral_cluster`."""

    def __init__(self, n_clusters=2, random_state=0):
        self.n_clusters = n_clusters
        self.random_state = random_state

    def fit(self, X, y=None):
        model = spectral_cluster(X, self.n_clusters, seed=self.random_state)
        self.labels_ = model.labels
        self.embedding_ = model.embedding
        return self


# explanation trees -----------------------------------------------------------------


@dataclass
class Node:
    counts: list
    param: str = None
    op: str = None
    value: object = None
    true_branch: "Node" = None
    false_branch: "Node" = None

    @property
    def is_leaf(self):
        return self.param is None

    @property
    def label(self):
        return int(np.argmax(self.counts))

    def test(self, config):
        v = config[self.param]
        if self.op == "<=":
            return v <= self.value
        return v == self.value

    def walk(self, depth=0):
        yield self, depth
        if not self.is_leaf:
            yield from self.true_branch.walk(depth + 1)
            yield from self.false_branch.walk(depth + 1)


@dataclass
class ExplanationTree:
    root: Node
    n_classes: int
    params: list
    training_accuracy: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def depth(self):
        return max(d for _, d in self.root.walk())

    def internal_nodes(self):
        return [(n, d) for n, d in self.root.walk() if not n.is_leaf]

    def split_params(self, max_depth=None):
        """Parameters used by internal nodes, optionally only down to ``max_depth``."""
        return [n.param for n, d in self.internal_nodes() if max_depth is None or d <= max_depth]

    def predict_one(self, config):
        node = self.root
        while not node.is_leaf:
            node = node.true_branch if node.test(config) else node.false_branch
        return node.label

    def predict(self, configs):
        return np.array([self.predict_one(c) for c in configs], dtype=np.int64)

    def score(self, configs, labels):
        return float(np.mean(self.predict(configs) == np.asarray(labels)))

    def render(self):
        """Indented text, one node per line; ``T``/``F`` mark the branch taken."""
        lines = []

        def emit(node, depth, tag):
            prefix = "  " * depth + (f"{tag} " if tag else "")
            samples = "samples=[" + ", ".join(str(c) for c in node.counts) + "]"
            if node.is_leaf:
                lines.append(f"{prefix}leaf -> {node.label}  {samples}")
            else:
                lines.append(f"{prefix}{node.param} {node.op} {_fmt(node.value)}  {samples}")
                emit(node.true_branch, depth + 1, "T")
                emit(node.false_branch, depth + 1, "F")

        emit(self.root, 0, "")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        def enc(node):
            d = {"samples": list(node.counts)}
            if node.is_leaf:
                d["label"] = node.label
            else:
                d.update(param=node.param, op=node.op, value=node.value,
                         true=enc(node.true_branch), false=enc(node.false_branch))
            return d

        return {
            "format": EXPLANATION_FORMAT,
            "version": FORMAT_VERSION,
            **self.meta,
            "n_classes": self.n_classes,
            "params": list(self.params),
            "training_accuracy": self.training_accuracy,
            "tree": enc(self.root),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != EXPLANATION_FORMAT:
            raise ConfigurationError("not an explanation document")

        def dec(d):
            if "param" not in d:
                return Node(counts=list(d["samples"]))
            return Node(counts=list(d["samples"]), param=d["param"], op=d["op"], value=d["value"],
                        true_branch=dec(d["true"]), false_branch=dec(d["false"]))

        meta = {k: v for k, v in doc.items()
                if k not in ("format", "version", "n_classes", "params", "training_accuracy", "tree")}
        return cls(root=dec(doc["tree"]), n_classes=doc["n_classes"], params=doc["params"],
                   training_accuracy=doc["training_accuracy"], meta=meta)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_LINE = re.compile(
    r"^(?P<indent> *)(?:(?P<tag>[TF]) )?"
    r"(?:leaf -> (?P<label>\d+)|(?P<param>\S+) (?P<op><=|==) (?P<value>\S+))"
    r"  samples=\[(?P<samples>[0-9, ]*)\]$"
)


def parse_rendered(text, space):
    """Rebuild an :class:`ExplanationTree` from :meth:`ExplanationTree.render` output."""
    parsed = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _LINE.match(raw)
        if m is None:
            raise ConfigurationError(f"cannot parse explanation line {raw!r}")
        parsed.append(m)
    pos = 0

    def build(depth):
        nonlocal pos
        m = parsed[pos]
        if len(m["indent"]) != 2 * depth:
            raise ConfigurationError("inconsistent indentation in explanation text")
        pos += 1
        counts = [int(c) for c in m["samples"].split(",") if c.strip()]
        if m["label"] is not None:
            return Node(counts=counts)
        param = m["param"]
        kind = space[param].kind
        text_value = m["value"]
        if kind == "boolean":
            value = text_value == "true"
        elif kind == "integer" and m["op"] == "==":
            value = int(text_value)
        elif kind in ("integer", "real"):
            value = float(text_value)
        else:
            value = text_value
        node = Node(counts=counts, param=param, op=m["op"], value=value)
        node.true_branch = build(depth + 1)
        node.false_branch = build(depth + 1)
        return node

    root = build(0)
    return ExplanationTree(root=root, n_classes=len(root.counts), params=space.names)


def _gini(counts):
    """Gini impurity of each row of a class-count matrix."""
    total = counts.sum(axis=-1, keepdims=True)
    p = counts / np.where(total > 0, total, 1)
    return 1.0 - (p * p).sum(axis=-1)


def _candidate_splits(param, column):
    """Yield ``(op, value, mask)`` for every admissible predicate on one parameter."""
    if param.kind in ("integer", "real"):
        values = np.asarray(column, dtype=np.float64)
        distinct = np.unique(values)
        for lo, hi in zip(distinct[:-1], distinct[1:]):
            t = (lo + hi) / 2.0
            if not lo <= t < hi:
                t = lo
            yield "<=", float(t), values <= t
    else:
        for v in param.values:
            mask = np.array([c == v for c in column])
            if 0 < mask.sum() < len(mask):
                yield "==", v, mask


def fit_cart(configs, labels, space, max_depth=MAX_DEPTH):
    """Greedy Gini CART over hyperparameter values.

    Numeric parameters split at midpoints between sorted distinct values;
    categorical and boolean ones use one-vs-rest equality predicates. A node
    only splits when impurity strictly decreases. Ties go to the parameter
    declared first in ``space``, then to the lowest threshold or category.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(configs) != len(labels):
        raise ValueError("configs and labels differ in length")
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("explanation needs at least two distinct cluster labels")
    n_classes = int(labels.max()) + 1
    columns = {p.name: [c[p.name] for c in configs] for p in space.params}
    onehot = np.eye(n_classes, dtype=np.int64)[labels]

    def grow(rows, depth):
        counts = onehot[rows].sum(axis=0)
        node = Node(counts=counts.tolist())
        if depth >= max_depth or (counts > 0).sum() < 2:
            return node
        parent = _gini(counts) * len(rows)
        best = None
        for p in space.params:
            col = [columns[p.name][i] for i in rows]
            for op, value, mask in _candidate_splits(p, col):
                left = onehot[rows[mask]].sum(axis=0)
                right = counts - left
                child = _gini(left) * mask.sum() + _gini(right) * (~mask).sum()
                gain = parent - child
                if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
                    best = (gain, p.name, op, value, mask)
        if best is None:
            return node
        _, name, op, value, mask = best
        node.param, node.op, node.value = name, op, value
        node.true_branch = grow(rows[mask], depth + 1)
        node.false_branch = grow(rows[~mask], depth + 1)
        return node

    tree = ExplanationTree(root=grow(np.arange(len(labels)), 0), n_classes=n_classes,
                           params=space.names)
    tree.training_accuracy = tree.score(configs, labels)
    return tree


def choose_cluster_count(points, configs, space, seed=0, max_clusters=MAX_CLUSTERS):
    """Cluster with k=2 and k=3 and keep k=3 only if its CART is strictly more accurate.

    Returns ``(ClusterModel, ExplanationTree)``.
    """
    if len(points) < 3:
        raise SizeError(f"need at least 3 cases to explain, got {len(points)}")
    best = None
    for k in range(2, max_clusters + 1):
        clusters = spectral_cluster(points, k, seed=seed, max_clusters=max_clusters)
        tree = fit_cart(configs, clusters.labels, space)
        if best is None or tree.training_accuracy > best[1].training_accuracy:
            best = (clusters, tree)
    return best


def explain_corpus(cases, space, seed=0, metric="aod", max_clusters=MAX_CLUSTERS):
    """Cluster and explain archived :class:`~hpfair.search.TestCase` objects."""
    points = np.array([[c.accuracy, getattr(c, metric)] for c in cases], dtype=np.float64)
    configs = [c.config for c in cases]
    return choose_cluster_count(points, configs, space, seed=seed, max_clusters=max_clusters)


# mining -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamFrequency:
    parameter: str
    appearances: int
    dataset_count: int
    flagged: bool


def mine_frequent(trees, overall_threshold=50, dataset_threshold=3, count="nodes"):
    """Count how often each parameter appears in a collection of explanations.

    Parameters
    ----------
    trees : iterable of (ExplanationTree, dataset_id)
    overall_threshold, dataset_threshold : int
        A parameter is flagged when its appearance count and its number of
        distinct datasets both exceed these values strictly.
    count : {"nodes", "trees"}
        ``"nodes"`` counts every internal node naming the parameter;
        ``"trees"`` counts each explanation at most once.

    Returns
    -------
    list of ParamFrequency, most frequent first.
    """
    if count not in ("trees", "nodes"):
        raise ValueError("count must be 'trees' or 'nodes'")
    appearances = Counter()
    datasets = {}
    for tree, dataset_id in trees:
        used = tree.split_params()
        appearances.update(set(used) if count == "trees" else used)
        for name in set(used):
            datasets.setdefault(name, set()).add(dataset_id)
    rows = [
        ParamFrequency(
            parameter=name,
            appearances=appearances[name],
            dataset_count=len(datasets[name]),
            flagged=appearances[name] > overall_threshold
            and len(datasets[name]) > dataset_threshold,
        )
        for name in appearances
    ]
    return sorted(rows, key=lambda r: (-r.appearances, -r.dataset_count, r.parameter))


def write_mining_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {MINING_FORMAT} v{FORMAT_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "appearances", "dataset_count", "flagged"])
        for r in report:
            writer.writerow([r.parameter, r.appearances, r.dataset_count, str(r.flagged).lower()])


def save_explanation(tree, path):
    Path(path).write_text(json.dumps(tree.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_explanation(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read explanation {path}: {exc}") from None
    return ExplanationTree.from_dict(doc)
