"""Subject learners and the glue between configurations and estimators."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from ._trace import SITE_TABLES, ForestSite, LogisticSite, TraceLog, TreeSite
from .forest import RandomForest
from .logistic import LogisticRegression
from .tree import DecisionTree, resolve_max_features

__all__ = [
    "DecisionTree",
    "RandomForest",
    "LogisticRegression",
    "TraceLog",
    "TreeSite",
    "ForestSite",
    "LogisticSite",
    "SITE_TABLES",
    "TrainedModel",
    "canonical_name",
    "make_estimator",
    "train",
    "predict",
    "save_model",
    "load_model",
    "resolve_max_features",
]

ESTIMATORS = {
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "logistic_regression": LogisticRegression,
}
_ALIASES = {"dt": "decision_tree", "rf": "random_forest", "lr": "logistic_regression"}

MODEL_FORMAT = "hpfair-model"
MODEL_VERSION = 1


def canonical_name(learner):
    name = _ALIASES.get(learner, learner)
    if name not in ESTIMATORS:
        raise ConfigurationError(
            f"unknown learner {learner!r}; choose from {sorted(ESTIMATORS) + sorted(_ALIASES)}"
        )
    return name


def config_to_params(learner, config):
    """Translate a search configuration into estimator keyword arguments.

    ``max_features`` is categorical in the spaces (``all``, ``sqrt``,
    ``log2``, ``fraction``); ``fraction`` takes its value from the companion
    ``max_features_fraction`` parameter.
    """
    params = dict(config)
    fraction = params.pop("max_features_fraction", None)
    if "max_features" in params:
        mf = params["max_features"]
        if mf == "all":
            params["max_features"] = None
        elif mf == "fraction":
            if fraction is None:
                raise ConfigurationError("max_features=fraction needs max_features_fraction")
            params["max_features"] = float(fraction)
    valid = ESTIMATORS[canonical_name(learner)]().get_params()
    unknown = set(params) - set(valid)
    if unknown:
        raise ConfigurationError(f"{learner} has no parameter(s) {sorted(unknown)}")
    return params


def make_estimator(learner, config, seed=0):
    params = config_to_params(learner, config)
    params.setdefault("random_state", seed)
    return ESTIMATORS[canonical_name(learner)](**params)


@dataclass
class TrainedModel:
    learner: str
    config: dict
    estimator: object

    def predict(self, X):
        return predict(self, X)


def train(learner, config, train_data, trace=None, seed=0):
    """Fit ``learner`` under ``config`` on a :class:`~hpfair.data.Dataset`.

    Returns ``(TrainedModel, TraceLog)``. When no ``trace`` sink is passed the
    returned log is empty. Incompatible parameter combinations raise
    :class:`~hpfair.exceptions.InvalidCombinationError`.
    """
    name = canonical_name(learner)
    est = make_estimator(name, config, seed=seed)
    est.fit(train_data.X, train_data.y, trace=trace)
    model = TrainedModel(learner=name, config=dict(config), estimator=est)
    return model, trace if trace is not None else TraceLog()


def predict(model, features):
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, model.estimator.n_features_in_)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D row matrix, got shape {X.shape}")
    return model.estimator.predict(X)


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "learner": model.learner,
        "config": model.config,
        "estimator": model.estimator.to_dict(),
    }


def model_from_dict(doc):
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ConfigurationError("not a version-1 hpfair model document")
    cls = ESTIMATORS[canonical_name(doc["learner"])]
    return TrainedModel(
        learner=doc["learner"], config=doc["config"], estimator=cls.from_dict(doc["estimator"])
    )


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
