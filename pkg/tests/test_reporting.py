import csv
import json
import math
import statistics

import numpy as np
import pytest

from hpfair.reporting import (
    RUN_COLUMNS,
    choose_mitigation,
    confidence_interval,
    run_statistics,
    summarize_runs,
    write_runs_csv,
    write_summary_csv,
)
from hpfair.search import TestCase, TestCorpus, dump_corpus, load_corpus

# two-sided 97.5% quantiles of Student's t, from printed tables
T975 = {1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 9: 2.262, 29: 2.045}


def corpus_of(rows):
    c = TestCorpus()
    for i, (acc, eod, aod) in enumerate(rows):
        c.add(TestCase({"i": i}, acc, eod, aod, eval_index=i))
    return c


@pytest.mark.parametrize("n", [2, 3, 5, 10, 30])
def test_confidence_interval_matches_textbook_formula(n):
    values = list(np.random.default_rng(n).normal(0.3, 0.1, n))
    mean, hw = confidence_interval(values)
    assert mean == pytest.approx(statistics.fmean(values), abs=1e-12)
    s = statistics.stdev(values)
    crit = T975[n - 1] if n < 30 else 1.95996
    assert hw == pytest.approx(crit * s / math.sqrt(n), rel=2e-4)


def test_confidence_interval_edge_cases():
    assert math.isnan(confidence_interval([0.4])[1])
    assert confidence_interval([0.4])[0] == 0.4
    assert all(math.isnan(x) for x in confidence_interval([]))
    assert confidence_interval([0.2, 0.2, 0.2])[1] == pytest.approx(0.0, abs=1e-15)


def test_run_statistics_uses_valid_cases_only():
    corpus = corpus_of([(0.80, 0.10, 0.05), (0.85, 0.30, 0.20), (0.78, 0.90, 0.90), (0.845, 0.05, 0.01)])
    stats = run_statistics(corpus, epsilon=0.01)
    assert stats["n_valid"] == 3
    assert stats["eod_min"] == 0.05 and stats["eod_max"] == 0.30
    assert stats["eod_range"] == pytest.approx(0.25)
    assert stats["accuracy_min"] == 0.80
    # top band: accuracy >= 0.85 - 0.01
    assert (stats["eod_top_min"], stats["eod_top_max"]) == (0.05, 0.30)
    assert (stats["aod_top_min"], stats["aod_top_max"]) == (0.01, 0.20)
    assert set(stats) == set(RUN_COLUMNS)


def test_summary_recomputed_from_corpus_files(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for r in range(4):
        rows = [(float(a), float(e), float(o)) for a, e, o in rng.random((12, 3))]
        rows[0] = (0.5, rows[0][1], rows[0][2])
        paths.append(tmp_path / f"run-{r}.jsonl")
        dump_corpus(corpus_of(rows), paths[-1])
    per_run = [run_statistics(load_corpus(p)) for p in paths]
    write_summary_csv(summarize_runs(per_run), tmp_path / "summary.csv")
    with open(tmp_path / "summary.csv") as fh:
        assert fh.readline().startswith("# hpfair-summary")
        table = {row["statistic"]: row for row in csv.DictReader(fh)}
    # independent recomputation with plain Python
    for col in ("eod_range", "aod_max", "accuracy_min"):
        vals = []
        for p in paths:
            lines = p.read_text().splitlines()[1:]
            cases = [json.loads(x) for x in lines]
            floor = cases[0]["accuracy"] - 0.01
            valid = [c for c in cases if c["accuracy"] >= floor]
            key = col.split("_")[0]
            xs = [c[key] for c in valid]
            vals.append({"range": max(xs) - min(xs), "max": max(xs), "min": min(xs)}[col.split("_")[1]])
        mean = statistics.fmean(vals)
        hw = T975[3] * statistics.stdev(vals) / 2
        assert float(table[col]["mean"]) == pytest.approx(mean, abs=1e-9)
        assert float(table[col]["half_width"]) == pytest.approx(hw, rel=2e-4)
        assert float(table[col]["ci_low"]) == pytest.approx(mean - hw, rel=2e-4)
        assert table[col]["n_runs"] == "4"


def test_single_run_summary_has_no_interval(tmp_path):
    per_run = [run_statistics(corpus_of([(0.8, 0.1, 0.1), (0.9, 0.2, 0.1)]))]
    write_summary_csv(summarize_runs(per_run), tmp_path / "s.csv")
    rows = list(csv.DictReader(tmp_path.joinpath("s.csv").read_text().splitlines()[1:]))
    assert rows[0]["half_width"] == "n/a" and rows[0]["mean"] != "n/a"


def test_runs_csv(tmp_path):
    per_run = [run_statistics(corpus_of([(0.8, 0.1, 0.1)])), None]
    write_runs_csv(per_run, [7, 8], tmp_path / "runs.csv")
    lines = tmp_path.joinpath("runs.csv").read_text().splitlines()
    assert lines[0] == "# hpfair-runs v1"
    assert lines[1].startswith("run,seed,n_valid")
    assert lines[3].startswith("1,8,n/a")


# mitigation -------------------------------------------------------------------------


def test_mitigation_prefers_lowest_primary_then_secondary_then_accuracy():
    corpus = corpus_of([
        (0.80, 0.20, 0.20),  # default
        (0.81, 0.05, 0.10),
        (0.82, 0.05, 0.05),
        (0.83, 0.05, 0.05),
        (0.70, 0.00, 0.00),  # invalid: too inaccurate
    ])
    m = choose_mitigation(corpus)
    assert m.improved and m.chosen.eval_index == 3
    assert choose_mitigation(corpus, primary="aod").chosen.eval_index == 3


def test_mitigation_breaks_full_ties_by_earliest_case():
    corpus = corpus_of([(0.80, 0.20, 0.20), (0.81, 0.05, 0.05), (0.81, 0.05, 0.05)])
    assert choose_mitigation(corpus).chosen.eval_index == 1


def test_mitigation_without_improvement_returns_default():
    corpus = corpus_of([(0.80, 0.05, 0.05), (0.85, 0.10, 0.01)])
    m = choose_mitigation(corpus)
    assert not m.improved and m.chosen is m.default
    assert choose_mitigation(corpus, primary="aod").improved
    doc = m.to_dict()
    assert doc["format"] == "hpfair-mitigation" and doc["improved"] is False
    with pytest.raises(ValueError):
        choose_mitigation(corpus, primary="spd")
