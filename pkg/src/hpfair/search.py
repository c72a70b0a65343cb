"""Search for configurations on both ends of the accuracy/bias trade-off.

Three strategies share one loop. ``random`` draws each configuration
uniformly from the space. ``blackbox`` picks an archived configuration,
favoring recent ones, and mutates one parameter. ``graybox`` does the same
and additionally archives configurations whose training took a previously
unseen code path, provided their accuracy stays within ``epsilon`` of the
default configuration.

A candidate enters the archive when, for EOD or for AOD, no archived case
with strictly higher accuracy has a strictly different bias value, i.e. it is
neither fairness- nor bias-dominated under that metric. The archive is only
ever appended to.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .data import Dataset, split_dataset
from .exceptions import (
    ConfigurationError,
    InvalidCombinationError,
    SearchStateError,
    SetupError,
    UndefinedMetricError,
)
from .learners import TraceLog, canonical_name, train
from .metrics import evaluate
from .space import HyperparameterSpace, mutate_config, sample_uniform

logger = logging.getLogger(__name__)

SEARCH_TYPES = ("random", "blackbox", "graybox")
CORPUS_FORMAT = "hpfair-corpus"
CORPUS_VERSION = 1
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SearchSettings:
    search_type: str = "blackbox"
    timeout_seconds: float = None
    epsilon: float = 0.01
    seed: int = 0
    max_evals: int = None

    def __post_init__(self):
        if self.search_type not in SEARCH_TYPES:
            raise ConfigurationError(f"search_type must be one of {SEARCH_TYPES}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in [0, 1)")
        if self.timeout_seconds is not None and not self.timeout_seconds > 0:
            raise ConfigurationError("timeout_seconds must be positive")
        if self.max_evals is not None and self.max_evals < 0:
            raise ConfigurationError("max_evals must be non-negative")
        if self.timeout_seconds is None and self.max_evals is None:
            raise ConfigurationError("set timeout_seconds, max_evals or both")

    @property
    def deterministic(self):
        """Stopping depends only on the evaluation count."""
        return self.timeout_seconds is None


@dataclass
class TestCase:
    __test__ = False  # not a pytest class

    config: dict
    accuracy: float
    eod: float
    aod: float
    path_sig: int = None
    eval_index: int = 0
    wall_time: float = None

    def metric(self, name):
        return getattr(self, name)


@dataclass
class TestCorpus:
    __test__ = False

    cases: list = field(default_factory=list)
    seen_paths: set = field(default_factory=set)
    n_evals: int = 0
    n_invalid: int = 0
    n_undefined: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    @property
    def default_case(self):
        if not self.cases:
            raise SearchStateError("corpus is empty")
        return self.cases[0]

    @property
    def default_accuracy(self):
        return self.default_case.accuracy

    def add(self, case):
        if self.cases and case.eval_index <= self.cases[-1].eval_index:
            raise SearchStateError("eval_index must increase strictly")
        self.cases.append(case)
        if case.path_sig is not None:
            self.seen_paths.add(case.path_sig)

    def column(self, name):
        return np.array([getattr(c, name) for c in self.cases], dtype=np.float64)

    def valid_cases(self, epsilon=0.01):
        """Cases whose accuracy is at least the default's minus ``epsilon``."""
        floor = self.default_accuracy - epsilon
        return [c for c in self.cases if c.accuracy >= floor]


def weighted_pick(corpus, rng):
    """Configuration at 1-based position ``i`` with probability ``2i / (n(n+1))``."""
    n = len(corpus)
    if n == 0:
        raise SearchStateError("cannot pick from an empty corpus")
    r = int(rng.integers(n * (n + 1) // 2))
    # smallest i with i(i+1)/2 > r
    i = (math.isqrt(8 * r + 1) - 1) // 2 + 1
    return corpus.cases[i - 1].config


def _mix64(x):
    """splitmix64 finalizer: a fixed 64-bit hash of an integer site id."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def path_signature(trace):
    """Order- and multiplicity-independent xor of the visited sites' hashes."""
    sig = 0
    for site in set(trace):
        sig ^= _mix64(int(site) & _MASK64)
    return sig


def _dominated(candidate, accuracy, values, metric):
    """Whether any archived case fairness- or bias-dominates the candidate."""
    better = accuracy > candidate.accuracy
    f = candidate.metric(metric)
    fairness_dominated = bool(np.any(better & (values < f)))
    bias_dominated = bool(np.any(better & (values > f)))
    return fairness_dominated or bias_dominated


def is_promising(candidate, corpus, epsilon=0.01, graybox=None):
    """Decide whether ``candidate`` joins the corpus.

    Returns ``(accepted, reason)``; ``reason`` is ``"pareto-eod"``,
    ``"pareto-aod"``, ``"new-path"`` or ``"dominated"``. ``graybox``
    defaults to whether the candidate carries a path signature.
    """
    if graybox is None:
        graybox = candidate.path_sig is not None
    if len(corpus) == 0:
        return True, "pareto-eod"
    accuracy = corpus.column("accuracy")
    for metric in ("eod", "aod"):
        if not _dominated(candidate, accuracy, corpus.column(metric), metric):
            return True, f"pareto-{metric}"
    if (
        graybox
        and candidate.path_sig is not None
        and candidate.path_sig not in corpus.seen_paths
        and candidate.accuracy >= corpus.default_accuracy - epsilon
    ):
        return True, "new-path"
    return False, "dominated"


def _evaluate_config(learner, config, split, settings, graybox):
    trace = TraceLog() if graybox else None
    model, _ = train(learner, config, split.train, trace=trace, seed=settings.seed)
    report = evaluate(model, split.validation)
    return report, (path_signature(trace) if graybox else None)


def run_search(learner, space, split, settings, initial=None, callback=None):
    """Run one search campaign and return its :class:`TestCorpus`.

    Parameters
    ----------
    learner : str
    space : HyperparameterSpace
    split : DataSplit
    settings : SearchSettings
    initial : TestCorpus, optional
        Resume from an existing corpus instead of seeding with the default.
    callback : callable, optional
        Called as ``callback(case, accepted, reason)`` after each evaluation.
    """
    learner = canonical_name(learner)
    graybox = settings.search_type == "graybox"
    rng = np.random.default_rng(settings.seed)
    start = time.perf_counter()

    if initial is None:
        corpus = TestCorpus()
        default = space.default()
        try:
            report, sig = _evaluate_config(learner, default, split, settings, graybox)
        except (InvalidCombinationError, UndefinedMetricError) as exc:
            raise SetupError(f"default configuration cannot be evaluated: {exc}") from exc
        corpus.add(
            TestCase(
                config=default,
                accuracy=report.accuracy,
                eod=report.eod,
                aod=report.aod,
                path_sig=sig,
                eval_index=0,
                wall_time=time.perf_counter() - start,
            )
        )
        if sig is not None:
            corpus.seen_paths.add(sig)
        next_index = 1
    else:
        corpus = initial
        if len(corpus) == 0:
            raise SearchStateError("cannot resume from an empty corpus")
        next_index = max(corpus.n_evals, corpus.cases[-1].eval_index) + 1
    corpus.meta.update(
        learner=learner,
        search_type=settings.search_type,
        seed=settings.seed,
        epsilon=settings.epsilon,
    )

    done = 0
    while True:
        if settings.max_evals is not None and done >= settings.max_evals:
            break
        if (
            settings.timeout_seconds is not None
            and time.perf_counter() - start >= settings.timeout_seconds
        ):
            break
        done += 1
        index = next_index
        next_index += 1
        if settings.search_type == "random":
            config = sample_uniform(space, rng)
        else:
            config = mutate_config(weighted_pick(corpus, rng), space, rng)
        try:
            report, sig = _evaluate_config(learner, config, split, settings, graybox)
        except InvalidCombinationError as exc:
            corpus.n_invalid += 1
            logger.debug("eval %d discarded: %s", index, exc)
            continue
        except UndefinedMetricError as exc:
            corpus.n_undefined += 1
            logger.debug("eval %d has undefined metrics: %s", index, exc)
            continue
        case = TestCase(
            config=config,
            accuracy=report.accuracy,
            eod=report.eod,
            aod=report.aod,
            path_sig=sig,
            eval_index=index,
            wall_time=time.perf_counter() - start,
        )
        accepted, reason = is_promising(case, corpus, settings.epsilon, graybox=graybox)
        if accepted:
            corpus.add(case)
        if sig is not None:
            corpus.seen_paths.add(sig)
        if callback is not None:
            callback(case, accepted, reason)
    corpus.n_evals = next_index - 1
    return corpus


# persistence -------------------------------------------------------------------


def _case_to_json(case, timing):
    return {
        "eval_index": case.eval_index,
        "config": case.config,
        "accuracy": case.accuracy,
        "eod": case.eod,
        "aod": case.aod,
        "path_sig": None if case.path_sig is None else f"{case.path_sig:016x}",
        "wall_time": case.wall_time if timing else None,
    }


def dump_corpus(corpus, path, timing=False):
    """Write the corpus as JSON Lines, header record first.

    Wall-clock times are only written when ``timing`` is true so that
    deterministic runs produce byte-identical files.
    """
    header = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        **corpus.meta,
        "default_accuracy": corpus.default_accuracy,
        "n_evals": corpus.n_evals,
        "n_invalid": corpus.n_invalid,
        "n_undefined": corpus.n_undefined,
        "seen_paths": sorted(f"{s:016x}" for s in corpus.seen_paths),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        for case in corpus.cases:
            fh.write(json.dumps(_case_to_json(case, timing)) + "\n")


_HEADER_FIELDS = (
    "format", "version", "default_accuracy", "n_evals", "n_invalid", "n_undefined", "seen_paths",
)


def load_corpus(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ConfigurationError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("format") != CORPUS_FORMAT or header.get("version") != CORPUS_VERSION:
        raise ConfigurationError(f"{path} is not a version-{CORPUS_VERSION} corpus file")
    corpus = TestCorpus(
        n_evals=header.get("n_evals", 0),
        n_invalid=header.get("n_invalid", 0),
        n_undefined=header.get("n_undefined", 0),
        meta={k: v for k, v in header.items() if k not in _HEADER_FIELDS},
    )
    for line in lines[1:]:
        rec = json.loads(line)
        corpus.add(
            TestCase(
                config=rec["config"],
                accuracy=rec["accuracy"],
                eod=rec["eod"],
                aod=rec["aod"],
                path_sig=None if rec["path_sig"] is None else int(rec["path_sig"], 16),
                eval_index=rec["eval_index"],
                wall_time=rec.get("wall_time"),
            )
        )
    corpus.seen_paths.update(int(s, 16) for s in header.get("seen_paths", ()))
    return corpus


# estimator facade --------------------------------------------------------------


class FairnessSearch(BaseEstimator):
    """Estimator-style wrapper around :func:`run_search`.

    ``fit`` takes a feature matrix, labels and protected-group indices,
    splits them 75/25 with ``random_state`` (unless validation arrays are
    given) and leaves the archive in ``corpus_``.

    Parameters
    ----------
    learner : str
    space : HyperparameterSpace or None
        ``None`` uses the space bundled for ``learner``.
    search : {"random", "blackbox", "graybox"}
    epsilon : float
    max_evals : int or None
    timeout : float or None
    favorable_label : int
    random_state : int
    """

    def __init__(
        self,
        learner="decision_tree",
        space=None,
        search="blackbox",
        epsilon=0.01,
        max_evals=100,
        timeout=None,
        favorable_label=1,
        random_state=0,
    ):
        self.learner = learner
        self.space = space
        self.search = search
        self.epsilon = epsilon
        self.max_evals = max_evals
        self.timeout = timeout
        self.favorable_label = favorable_label
        self.random_state = random_state

    def fit(self, X, y, groups, X_val=None, y_val=None, groups_val=None):
        from .space import builtin_space

        n_groups = int(max(np.max(groups), np.max(groups_val) if groups_val is not None else 0)) + 1
        names = [f"x{j}" for j in range(np.asarray(X).shape[1])]
        gnames = [f"g{g}" for g in range(max(n_groups, 2))]
        data = Dataset(X, y, groups, names, gnames, self.favorable_label)
        if X_val is None:
            split = split_dataset(data, self.random_state)
        else:
            from .data import DataSplit

            val = Dataset(X_val, y_val, groups_val, names, gnames, self.favorable_label)
            split = DataSplit(data, val, self.random_state, np.arange(len(data)), np.arange(len(val)))
        space = self.space if isinstance(self.space, HyperparameterSpace) else builtin_space(self.learner)
        settings = SearchSettings(
            search_type=self.search,
            timeout_seconds=self.timeout,
            epsilon=self.epsilon,
            seed=self.random_state,
            max_evals=self.max_evals,
        )
        self.corpus_ = run_search(self.learner, space, split, settings)
        self.space_ = space
        self.default_case_ = self.corpus_.default_case
        return self

    def valid_cases(self):
        return self.corpus_.valid_cases(self.epsilon)
