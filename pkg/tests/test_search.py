import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hpfair.exceptions import ConfigurationError, SearchStateError, SetupError
from hpfair.learners import TraceLog
from hpfair.search import (
    FairnessSearch,
    SearchSettings,
    TestCase,
    TestCorpus,
    dump_corpus,
    is_promising,
    load_corpus,
    path_signature,
    run_search,
    weighted_pick,
)
from hpfair.space import parse_space_text

from oracles import brute_force_promising


def case(acc, eod, aod=None, i=0, sig=None):
    return TestCase(config={"i": i}, accuracy=acc, eod=eod, aod=eod if aod is None else aod,
                    path_sig=sig, eval_index=i)


def corpus_of(*cases):
    c = TestCorpus()
    for i, x in enumerate(cases):
        x.eval_index = i
        c.add(x)
    return c


# is_promising -------------------------------------------------------------------


def test_better_accuracy_is_accepted():
    assert is_promising(case(0.85, 0.02), corpus_of(case(0.80, 0.05)))[0]


def test_worse_accuracy_different_bias_is_rejected():
    accepted, reason = is_promising(case(0.70, 0.10), corpus_of(case(0.80, 0.05)))
    assert not accepted and reason == "dominated"


def test_equal_accuracy_never_dominates():
    assert is_promising(case(0.80, 0.99), corpus_of(case(0.80, 0.05)))[0]


def test_worse_accuracy_equal_bias_is_accepted():
    assert is_promising(case(0.70, 0.05), corpus_of(case(0.80, 0.05)))[0]


def test_either_metric_suffices():
    # EOD differs from the member (dominated), AOD matches it (not dominated)
    accepted, reason = is_promising(case(0.7, 0.3, aod=0.1), corpus_of(case(0.8, 0.1, aod=0.1)))
    assert accepted and reason == "pareto-aod"


def test_empty_corpus_accepts():
    assert is_promising(case(0.1, 0.9), TestCorpus())[0]


def test_graybox_new_path_needs_accuracy_margin():
    corpus = corpus_of(case(0.80, 0.05, sig=1))
    corpus.seen_paths.add(1)
    assert is_promising(case(0.795, 0.2, sig=2), corpus, epsilon=0.01)[1] == "new-path"
    assert not is_promising(case(0.78, 0.2, sig=2), corpus, epsilon=0.01)[0]
    # seen path: no bonus
    assert not is_promising(case(0.795, 0.2, sig=1), corpus, epsilon=0.01)[0]
    # blackbox ignores signatures
    assert not is_promising(case(0.795, 0.2, sig=2), corpus, epsilon=0.01, graybox=False)[0]


def _random_corpus(rng, n):
    # coarse grids make ties on both axes common
    acc = rng.integers(0, 6, n) / 5
    eod = rng.integers(0, 4, n) / 3
    aod = rng.integers(0, 4, n) / 3
    sigs = rng.integers(0, 5, n)
    cases = [
        TestCase({"k": i}, float(a), float(e), float(o), int(s), i)
        for i, (a, e, o, s) in enumerate(zip(acc, eod, aod, sigs))
    ]
    c = TestCorpus()
    for x in cases:
        c.add(x)
    return c


def test_is_promising_matches_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(500):
        corpus = _random_corpus(rng, int(rng.integers(1, 201)))
        corpus.seen_paths.update(int(s) for s in rng.integers(0, 5, 2))
        cand = _random_corpus(rng, 1).cases[0]
        graybox = bool(rng.integers(2))
        eps = float(rng.choice([0.0, 0.2]))
        got = is_promising(cand, corpus, eps, graybox=graybox)[0]
        want = brute_force_promising(cand, corpus.cases, eps, graybox, corpus.seen_paths,
                                     corpus.default_accuracy)
        assert got == want, trial


# weighted_pick ------------------------------------------------------------------


def _positions(n, draws, seed=0):
    corpus = corpus_of(*[case(0.5, 0.0) for _ in range(n)])
    for i, c in enumerate(corpus.cases):
        c.config = {"pos": i + 1}
    rng = np.random.default_rng(seed)
    return np.array([weighted_pick(corpus, rng)["pos"] for _ in range(draws)])


def test_weighted_pick_single_member():
    assert set(_positions(1, 50)) == {1}


def test_weighted_pick_three_members():
    draws = _positions(3, 30000)
    counts = np.bincount(draws, minlength=4)[1:]
    assert stats.chisquare(counts, 30000 * np.array([1, 2, 3]) / 6).pvalue > 0.01


def test_weighted_pick_empty_corpus():
    with pytest.raises(SearchStateError):
        weighted_pick(TestCorpus(), np.random.default_rng(0))


def test_weighted_pick_inverse_cdf_is_exact():
    # every integer r in [0, n(n+1)/2) maps to position i exactly i times
    n = 40
    corpus = corpus_of(*[case(0.5, 0.0) for _ in range(n)])
    for i, c in enumerate(corpus.cases):
        c.config = {"pos": i + 1}

    class Counter:
        r = -1

        def integers(self, hi):
            self.r += 1
            return self.r

    fake = Counter()
    picks = [weighted_pick(corpus, fake)["pos"] for _ in range(n * (n + 1) // 2)]
    assert np.array_equal(np.bincount(picks)[1:], np.arange(1, n + 1))


# path_signature -----------------------------------------------------------------


def test_path_signature_rules():
    assert path_signature(TraceLog()) == 0
    assert path_signature([0x101, 0x102]) == path_signature([0x102, 0x101])
    assert path_signature([0x101, 0x101, 0x102]) == path_signature([0x101, 0x102])
    assert path_signature([0x101]) != path_signature([0x102])


@given(st.lists(st.integers(0, 0xFFFF), max_size=30), st.randoms())
def test_path_signature_depends_only_on_site_set(sites, rnd):
    shuffled = list(sites) * 2
    rnd.shuffle(shuffled)
    assert path_signature(sites) == path_signature(shuffled)
    assert 0 <= path_signature(sites) < 2**64


# run_search ---------------------------------------------------------------------


SMALL_SPACE = """hpfair-space 1
[space]
learner = decision_tree
[param max_depth]
kind = integer
lo = 1
hi = 8
default = 8
[param min_weight_fraction_leaf]
kind = real
lo = 0.0
hi = 0.5
step = 0.05
default = 0.0
[param max_features]
kind = categorical
categories = all, sqrt
default = all
"""


@pytest.fixture(scope="module")
def small_space():
    return parse_space_text(SMALL_SPACE)


def test_max_evals_zero_keeps_only_default(planted_split, small_space):
    corpus = run_search("dt", small_space, planted_split, SearchSettings(max_evals=0))
    assert len(corpus) == 1
    assert corpus.default_case.config == small_space.default()
    assert corpus.n_evals == 0


@pytest.mark.parametrize("search", ["random", "blackbox", "graybox"])
def test_same_seed_gives_byte_identical_corpus(planted_split, small_space, tmp_path, search):
    paths = []
    for k in range(2):
        s = SearchSettings(search_type=search, seed=4, max_evals=50)
        corpus = run_search("dt", small_space, planted_split, s)
        paths.append(tmp_path / f"{k}.jsonl")
        dump_corpus(corpus, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("search", ["random", "blackbox", "graybox"])
def test_corpus_replays_as_promising(planted_split, small_space, search):
    sizes = []
    corpus = run_search(
        "dt", small_space, planted_split, SearchSettings(search_type=search, seed=1, max_evals=60),
        callback=lambda c, accepted, reason: sizes.append(accepted),
    )
    assert len(sizes) == 60
    assert len(corpus) == 1 + sum(sizes)
    replay = TestCorpus()
    replay.add(corpus.cases[0])
    for c in corpus.cases[1:]:
        assert is_promising(c, replay, 0.01, graybox=search == "graybox")[0]
        # the replay only knows the signatures of accepted cases, a weaker
        # condition than the run had, so acceptance must still hold
        replay.add(c)
    idx = [c.eval_index for c in corpus.cases]
    assert idx == sorted(set(idx))


def test_graybox_records_signatures(planted_split, small_space):
    corpus = run_search("dt", small_space, planted_split,
                        SearchSettings(search_type="graybox", max_evals=20))
    assert all(c.path_sig is not None for c in corpus.cases)
    assert {c.path_sig for c in corpus.cases} <= corpus.seen_paths


def test_recorded_metrics_match_reevaluation(planted_split, small_space):
    from hpfair.learners import train
    from hpfair.metrics import evaluate

    corpus = run_search("dt", small_space, planted_split, SearchSettings(seed=2, max_evals=30))
    for c in corpus.cases:
        model, _ = train("dt", c.config, planted_split.train, seed=2)
        r = evaluate(model, planted_split.validation)
        assert (r.accuracy, r.eod, r.aod) == (c.accuracy, c.eod, c.aod)


def test_jsonl_round_trip_and_resume(planted_split, small_space, tmp_path):
    s = SearchSettings(seed=3, max_evals=30)
    corpus = run_search("dt", small_space, planted_split, s)
    path = tmp_path / "c.jsonl"
    dump_corpus(corpus, path)
    back = load_corpus(path)
    assert [c.config for c in back.cases] == [c.config for c in corpus.cases]
    assert back.column("eod").tolist() == corpus.column("eod").tolist()
    assert back.meta["search_type"] == "blackbox"
    resumed = run_search("dt", small_space, planted_split, s, initial=back)
    assert resumed.cases[: len(corpus)] == back.cases[: len(corpus)]
    assert all(c.eval_index > 30 for c in resumed.cases[len(corpus):])
    assert resumed.n_evals == 60


def test_resume_from_empty_corpus_fails(planted_split, small_space):
    with pytest.raises(SearchStateError):
        run_search("dt", small_space, planted_split, SearchSettings(max_evals=1), initial=TestCorpus())


def test_timing_is_opt_in(planted_split, small_space, tmp_path):
    corpus = run_search("dt", small_space, planted_split, SearchSettings(max_evals=3))
    dump_corpus(corpus, tmp_path / "a.jsonl")
    dump_corpus(corpus, tmp_path / "b.jsonl", timing=True)
    assert '"wall_time": null' in (tmp_path / "a.jsonl").read_text()
    assert load_corpus(tmp_path / "b.jsonl").cases[0].wall_time is not None


def test_timeout_mode_stops(planted_split, small_space):
    corpus = run_search("dt", small_space, planted_split, SearchSettings(timeout_seconds=0.3))
    assert corpus.n_evals >= 1


def test_untrainable_default_is_a_setup_error(planted_split):
    space = parse_space_text(
        "hpfair-space 1\n[space]\nlearner = logistic_regression\n"
        "[param penalty]\nkind = categorical\ncategories = l1, l2\ndefault = l1\n"
        "[param solver]\nkind = categorical\ncategories = newton, gd\ndefault = newton\n"
    )
    with pytest.raises(SetupError):
        run_search("lr", space, planted_split, SearchSettings(max_evals=1))


@pytest.mark.parametrize(
    "kwargs",
    [dict(search_type="annealing", max_evals=1), dict(epsilon=1.0, max_evals=1),
     dict(timeout_seconds=0), dict(max_evals=-1), dict()],
)
def test_settings_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SearchSettings(**kwargs)


def test_valid_cases_filter():
    corpus = corpus_of(case(0.80, 0.1), case(0.795, 0.2), case(0.78, 0.3))
    assert [c.eod for c in corpus.valid_cases(0.01)] == [0.1, 0.2]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 3)), min_size=1, max_size=40))
def test_archive_only_grows_and_stays_non_dominated(points):
    corpus = TestCorpus()
    sizes = []
    for i, (a, e) in enumerate(points):
        c = case(a / 4, e / 3, i=i)
        if is_promising(c, corpus)[0]:
            corpus.add(c)
        sizes.append(len(corpus))
    assert sizes == sorted(sizes)
    # nothing accepted was dominated by an earlier member
    for k, c in enumerate(corpus.cases):
        earlier = corpus.cases[:k]
        assert not any(g.accuracy > c.accuracy and g.eod != c.eod for g in earlier)


def test_fairness_search_estimator(planted_split):
    data = planted_split.train
    est = FairnessSearch(max_evals=15, random_state=1).fit(data.X, data.y, data.protected)
    assert len(est.corpus_) >= 1
    assert est.default_case_ is est.corpus_.cases[0]
    assert est.get_params()["max_evals"] == 15
    assert all(c.accuracy >= est.default_case_.accuracy - 0.01 for c in est.valid_cases())
    val = planted_split.validation
    est2 = FairnessSearch(max_evals=5).fit(data.X, data.y, data.protected, val.X, val.y, val.protected)
    assert len(est2.corpus_) >= 1
