"""Per-group confusion counts, accuracy and the EOD/AOD group-fairness gaps.

"Positive" always means equal to the dataset's favorable label. With more
than two protected groups both gaps take the maximum over all group pairs.
Groups whose true-positive (or false-positive) rate has a zero denominator
are left out of the pairwise maximum.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError, UndefinedMetricError


@dataclass(frozen=True)
class GroupStats:
    """Confusion counts for each protected group (arrays indexed by group)."""

    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray

    @property
    def n_groups(self):
        return len(self.tp)

    @property
    def size(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self):
        """True-positive rate per group, NaN where the group has no actual positives."""
        return _rate(self.tp, self.tp + self.fn)

    @property
    def fpr(self):
        """False-positive rate per group, NaN where the group has no actual negatives."""
        return _rate(self.fp, self.fp + self.tn)

    @property
    def tpr_defined(self):
        return (self.tp + self.fn) > 0

    @property
    def fpr_defined(self):
        return (self.fp + self.tn) > 0

    def to_dict(self):
        return {
            "tp": self.tp.tolist(),
            "fp": self.fp.tolist(),
            "tn": self.tn.tolist(),
            "fn": self.fn.tolist(),
        }


def _rate(num, den):
    out = np.full(len(num), np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True)
class FairnessReport:
    accuracy: float
    eod: float
    aod: float
    group_stats: GroupStats


def group_confusion(predicted, actual, protected, favorable_label=1, n_groups=None):
    predicted = np.asarray(predicted).ravel()
    actual = np.asarray(actual).ravel()
    protected = np.asarray(protected, dtype=np.int64).ravel()
    if not len(predicted) == len(actual) == len(protected):
        raise ShapeError(
            f"length mismatch: {len(predicted)} predictions, {len(actual)} labels, "
            f"{len(protected)} group indices"
        )
    if n_groups is None:
        n_groups = int(protected.max()) + 1 if len(protected) else 0
    pred_pos = predicted == favorable_label
    act_pos = actual == favorable_label

    def count(mask):
        return np.bincount(protected[mask], minlength=n_groups).astype(np.int64)

    return GroupStats(
        tp=count(pred_pos & act_pos),
        fp=count(pred_pos & ~act_pos),
        tn=count(~pred_pos & ~act_pos),
        fn=count(~pred_pos & act_pos),
    )


def _max_pair_gap(values):
    # max over pairs of |v_i - v_j| is just the range
    return float(values.max() - values.min())


def eod(stats):
    """Largest true-positive-rate gap between any two groups."""
    tpr = stats.tpr[stats.tpr_defined]
    if len(tpr) < 2:
        raise UndefinedMetricError("EOD needs at least two groups with actual positives")
    return _max_pair_gap(tpr)


def aod(stats):
    """Largest average of the TPR and FPR gaps over any pair of groups."""
    ok = stats.tpr_defined & stats.fpr_defined
    if ok.sum() < 2:
        raise UndefinedMetricError(
            "AOD needs at least two groups with both actual positives and negatives"
        )
    tpr, fpr = stats.tpr[ok], stats.fpr[ok]
    gaps = (np.abs(tpr[:, None] - tpr[None, :]) + np.abs(fpr[:, None] - fpr[None, :])) / 2.0
    return float(gaps.max())


def fairness_report(predicted, actual, protected, favorable_label=1, n_groups=None):
    predicted = np.asarray(predicted).ravel()
    actual = np.asarray(actual).ravel()
    if len(actual) == 0:
        raise UndefinedMetricError("cannot evaluate on an empty validation set")
    stats = group_confusion(predicted, actual, protected, favorable_label, n_groups)
    return FairnessReport(
        accuracy=float(np.mean(predicted == actual)),
        eod=eod(stats),
        aod=aod(stats),
        group_stats=stats,
    )


def evaluate(model, validation):
    """Score a trained model on a validation :class:`~hpfair.data.Dataset`."""
    from .learners import predict

    predicted = predict(model, validation.X)
    return fairness_report(
        predicted,
        validation.y,
        validation.protected,
        validation.favorable_label,
        validation.n_groups,
    )
