"""Decision-site tracing for gray-box search.

Each learner declares a static table of integer site identifiers placed at
its branch points (solver chosen, stopping rule hit, split accepted, ...).
Training appends the visited sites to a :class:`TraceLog` when one is given.
"""

from enum import IntEnum


class TraceLog:
    __slots__ = ("sites",)

    def __init__(self, sites=None):
        self.sites = list(sites or ())

    def hit(self, site):
        self.sites.append(int(site))

    def __iter__(self):
        return iter(self.sites)

    def __len__(self):
        return len(self.sites)

    def __repr__(self):
        return f"TraceLog({self.sites!r})"


def _hit(trace, site):
    if trace is not None:
        trace.hit(site)


class TreeSite(IntEnum):
    CRITERION_GINI = 0x0101
    CRITERION_ENTROPY = 0x0102
    SPLITTER_BEST = 0x0103
    SPLITTER_RANDOM = 0x0104
    FEATURES_ALL = 0x0110
    FEATURES_SQRT = 0x0111
    FEATURES_LOG2 = 0x0112
    FEATURES_FRACTION = 0x0113
    GROW_DEPTH_FIRST = 0x0120
    GROW_BEST_FIRST = 0x0121
    SPLIT_ACCEPTED = 0x0130
    LEAF_PURE = 0x0131
    LEAF_MAX_DEPTH = 0x0132
    LEAF_MIN_SAMPLES_SPLIT = 0x0133
    LEAF_MIN_SAMPLES_LEAF = 0x0134
    LEAF_MIN_WEIGHT_FRACTION = 0x0135
    LEAF_NO_VALID_SPLIT = 0x0136
    LEAF_MAX_LEAF_NODES = 0x0137
    CANDIDATE_REJECTED_LEAF_SIZE = 0x0140
    CANDIDATE_CONSTANT_FEATURE = 0x0141


class ForestSite(IntEnum):
    BOOTSTRAP_ON = 0x0201
    BOOTSTRAP_OFF = 0x0202
    SUBSAMPLED = 0x0203
    TREE_FITTED = 0x0204


class LogisticSite(IntEnum):
    SOLVER_GD = 0x0301
    SOLVER_NEWTON = 0x0302
    PENALTY_NONE = 0x0303
    PENALTY_L2 = 0x0304
    PENALTY_L1 = 0x0305
    INTERCEPT_ON = 0x0306
    INTERCEPT_OFF = 0x0307
    CONVERGED_TOL = 0x0310
    HIT_MAX_ITER = 0x0311
    NEWTON_SINGULAR_FALLBACK = 0x0312
    LOSS_INCREASED = 0x0313
    ZERO_VARIANCE_COLUMN = 0x0314


SITE_TABLES = {
    "decision_tree": frozenset(TreeSite),
    "random_forest": frozenset(TreeSite) | frozenset(ForestSite),
    "logistic_regression": frozenset(LogisticSite),
}
