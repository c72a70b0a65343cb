"""Independent reference implementations used by several test modules.

They are deliberately written as plain loops over rows / pairs so that they
share no code path with the package.
"""

from fractions import Fraction
from itertools import combinations


def brute_force_report(predicted, actual, protected, favorable, n_groups):
    """Accuracy, EOD and AOD by explicit per-row counting and pair enumeration."""
    counts = [{"tp": 0, "fp": 0, "tn": 0, "fn": 0} for _ in range(n_groups)]
    correct = 0
    for p, a, g in zip(predicted, actual, protected):
        correct += p == a
        pp, ap = p == favorable, a == favorable
        key = ("t" if pp == ap else "f") + ("p" if pp else "n")
        counts[g][key] += 1
    tpr, fpr = {}, {}
    for g, c in enumerate(counts):
        if c["tp"] + c["fn"]:
            tpr[g] = Fraction(c["tp"], c["tp"] + c["fn"])
        if c["fp"] + c["tn"]:
            fpr[g] = Fraction(c["fp"], c["fp"] + c["tn"])
    eod_pairs = [abs(tpr[i] - tpr[j]) for i, j in combinations(sorted(tpr), 2)]
    both = sorted(set(tpr) & set(fpr))
    aod_pairs = [(abs(tpr[i] - tpr[j]) + abs(fpr[i] - fpr[j])) / 2 for i, j in combinations(both, 2)]
    return {
        "accuracy": Fraction(correct, len(actual)),
        "eod": max(eod_pairs) if eod_pairs else None,
        "aod": max(aod_pairs) if aod_pairs else None,
        "counts": counts,
    }


def brute_force_promising(candidate, cases, epsilon, graybox, seen_paths, default_accuracy):
    """Scan every (member, metric, direction) triple."""
    for metric in ("eod", "aod"):
        f = getattr(candidate, metric)
        dominated = False
        for g in cases:
            for direction in ("fairness", "bias"):
                if candidate.accuracy < g.accuracy:
                    other = getattr(g, metric)
                    if direction == "fairness" and f > other:
                        dominated = True
                    if direction == "bias" and f < other:
                        dominated = True
        if not dominated:
            return True
    if graybox and candidate.path_sig is not None and candidate.path_sig not in seen_paths:
        return candidate.accuracy >= default_accuracy - epsilon
    return False
