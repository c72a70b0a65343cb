from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpfair.exceptions import ShapeError, UndefinedMetricError
from hpfair.metrics import GroupStats, aod, eod, fairness_report, group_confusion

from oracles import brute_force_report


def stats_from_rates(tpr, fpr=None, n=10):
    """GroupStats whose rates are exactly the given multiples of 1/n."""
    fpr = fpr if fpr is not None else [0.0] * len(tpr)
    tp = np.array([round(t * n) for t in tpr])
    fp = np.array([round(f * n) for f in fpr])
    return GroupStats(tp=tp, fp=fp, tn=n - fp, fn=n - tp)


def test_hand_counted_group():
    s = group_confusion([1, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 0], n_groups=1)
    assert (s.tp[0], s.fp[0], s.fn[0], s.tn[0]) == (1, 1, 1, 1)
    assert s.tpr[0] == 0.5 and s.fpr[0] == 0.5


def test_all_correct():
    y = np.array([1, 0, 1, 0, 1, 0])
    s = group_confusion(y, y, [0, 0, 0, 1, 1, 1])
    assert s.tpr.tolist() == [1.0, 1.0]
    assert s.fpr.tolist() == [0.0, 0.0]


def test_undefined_tpr_flagged():
    s = group_confusion([0, 1, 0], [0, 0, 1], [0, 0, 1])
    assert not s.tpr_defined[0]
    assert np.isnan(s.tpr[0])


def test_favorable_zero_counts_zero_as_positive():
    s = group_confusion([0, 0, 1], [0, 1, 1], [0, 0, 0], favorable_label=0)
    assert (s.tp[0], s.fp[0], s.tn[0]) == (1, 1, 1)


def test_length_mismatch():
    with pytest.raises(ShapeError):
        group_confusion([1, 0], [1], [0, 0])


@pytest.mark.parametrize(
    "tpr, expected",
    [((0.8, 0.8), 0.0), ((0.8, 0.6), 0.2), ((0.9, 0.5, 0.7), 0.4)],
)
def test_eod_examples(tpr, expected):
    assert eod(stats_from_rates(tpr)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "tpr, fpr, expected",
    [((0.8, 0.6), (0.3, 0.1), 0.2), ((0.8, 0.6), (0.3, 0.3), 0.1), ((0.5, 0.5), (0.2, 0.2), 0.0)],
)
def test_aod_examples(tpr, fpr, expected):
    assert aod(stats_from_rates(tpr, fpr)) == pytest.approx(expected, abs=1e-12)


def test_metric_needs_two_defined_groups():
    s = group_confusion([1, 0, 0], [1, 0, 0], [0, 1, 1])
    with pytest.raises(UndefinedMetricError):
        eod(s)
    with pytest.raises(UndefinedMetricError):
        aod(s)


def test_perfect_and_constant_predictors():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    g = rng.integers(0, 3, 200)
    r = fairness_report(y, y, g)
    assert (r.accuracy, r.eod, r.aod) == (1.0, 0.0, 0.0)
    r = fairness_report(np.ones(200, dtype=int), y, g)
    assert r.eod == 0.0 and r.aod == 0.0


def test_empty_validation_is_undefined():
    with pytest.raises(UndefinedMetricError):
        fairness_report([], [], [])


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        n = int(rng.integers(2, 60))
        G = int(rng.integers(2, 4))
        p, a, g = rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, G, n)
        fav = int(rng.integers(0, 2))
        ref = brute_force_report(p.tolist(), a.tolist(), g.tolist(), fav, G)
        if ref["eod"] is None or ref["aod"] is None:
            with pytest.raises(UndefinedMetricError):
                fairness_report(p, a, g, fav, G)
            continue
        r = fairness_report(p, a, g, fav, G)
        assert abs(r.accuracy - float(ref["accuracy"])) <= 1e-12
        assert abs(r.eod - float(ref["eod"])) <= 1e-12
        assert abs(r.aod - float(ref["aod"])) <= 1e-12
        for k in ("tp", "fp", "tn", "fn"):
            assert getattr(r.group_stats, k).tolist() == [c[k] for c in ref["counts"]]


def test_exact_rational_agreement():
    # integer-count arithmetic vs the floating point path
    rng = np.random.default_rng(5)
    p, a, g = rng.integers(0, 2, 997), rng.integers(0, 2, 997), rng.integers(0, 3, 997)
    s = group_confusion(p, a, g)
    tpr = [Fraction(int(s.tp[i]), int(s.tp[i] + s.fn[i])) for i in range(3)]
    fpr = [Fraction(int(s.fp[i]), int(s.fp[i] + s.tn[i])) for i in range(3)]
    exact_eod = max(tpr) - min(tpr)
    exact_aod = max((abs(tpr[i] - tpr[j]) + abs(fpr[i] - fpr[j])) / 2 for i in range(3) for j in range(3))
    assert abs(eod(s) - float(exact_eod)) <= 1e-12
    assert abs(aod(s) - float(exact_aod)) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(
    data=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2)), min_size=12, max_size=80),
    perm=st.permutations([0, 1, 2]),
)
def test_group_permutation_invariance(data, perm):
    p, a, g = (np.array(c) for c in zip(*data))
    try:
        base = fairness_report(p, a, g, n_groups=3)
    except UndefinedMetricError:
        return
    g2 = np.array(perm)[g]
    moved = fairness_report(p, a, g2, n_groups=3)
    assert moved.eod == pytest.approx(base.eod, abs=1e-12)
    assert moved.aod == pytest.approx(base.aod, abs=1e-12)
    for k in ("tp", "fp", "tn", "fn"):
        assert getattr(moved.group_stats, k)[list(perm)].tolist() == getattr(base.group_stats, k).tolist()


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=8, max_size=80))
def test_two_group_aod_at_least_half_eod(data):
    p, a, g = (np.array(c) for c in zip(*data))
    try:
        r = fairness_report(p, a, g, n_groups=2)
    except UndefinedMetricError:
        return
    assert r.aod >= r.eod / 2 - 1e-12
    assert 0 <= r.eod <= 1 and 0 <= r.aod <= 1 and 0 <= r.accuracy <= 1
