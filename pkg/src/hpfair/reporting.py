"""Per-run statistics, cross-run confidence intervals and mitigation choice."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

SUMMARY_FORMAT = "hpfair-summary"
RUNS_FORMAT = "hpfair-runs"
FORMAT_VERSION = 1
TOP_BAND = 0.01
# below this many runs the interval uses Student's t, otherwise the normal quantile
T_DIST_BELOW = 30

RUN_COLUMNS = [
    "n_valid",
    "accuracy_min",
    "accuracy_max",
    "aod_min",
    "aod_max",
    "aod_top_min",
    "aod_top_max",
    "eod_min",
    "eod_max",
    "eod_top_min",
    "eod_top_max",
    "aod_range",
    "eod_range",
]


def run_statistics(corpus, epsilon=0.01, top_band=TOP_BAND):
    """Summary numbers for one corpus, computed over its valid cases.

    The "top" statistics look only at cases whose accuracy is within
    ``top_band`` of the best accuracy in the corpus. Returns ``None`` when
    no case is valid.
    """
    valid = corpus.valid_cases(epsilon)
    if not valid:
        return None
    acc = np.array([c.accuracy for c in valid])
    aod = np.array([c.aod for c in valid])
    eod = np.array([c.eod for c in valid])
    top = acc >= max(c.accuracy for c in corpus.cases) - top_band
    if not top.any():
        top = acc >= acc.max() - top_band
    return {
        "n_valid": len(valid),
        "accuracy_min": float(acc.min()),
        "accuracy_max": float(acc.max()),
        "aod_min": float(aod.min()),
        "aod_max": float(aod.max()),
        "aod_top_min": float(aod[top].min()),
        "aod_top_max": float(aod[top].max()),
        "eod_min": float(eod.min()),
        "eod_max": float(eod.max()),
        "eod_top_min": float(eod[top].min()),
        "eod_top_max": float(eod[top].max()),
        "aod_range": float(aod.max() - aod.min()),
        "eod_range": float(eod.max() - eod.min()),
    }


def confidence_interval(values, level=0.95):
    """Mean and half-width of a two-sided interval for the mean.

    Uses ``t(level, n-1) * s / sqrt(n)`` for fewer than 30 values and the
    normal quantile otherwise. The half-width is NaN for a single value.
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    if n == 1:
        return mean, math.nan
    q = 0.5 + level / 2.0
    crit = stats.t.ppf(q, n - 1) if n < T_DIST_BELOW else stats.norm.ppf(q)
    return mean, float(crit * x.std(ddof=1) / math.sqrt(n))


@dataclass
class SummaryRow:
    statistic: str
    mean: float
    half_width: float
    n_runs: int


def summarize_runs(per_run):
    """Aggregate :func:`run_statistics` outputs (``None`` entries are skipped)."""
    usable = [r for r in per_run if r is not None]
    rows = []
    for col in RUN_COLUMNS:
        mean, hw = confidence_interval([r[col] for r in usable])
        rows.append(SummaryRow(col, mean, hw, len(usable)))
    return rows


def _num(x):
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_summary_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {SUMMARY_FORMAT} v{FORMAT_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "mean", "ci_low", "ci_high", "half_width", "n_runs"])
        for r in rows:
            if r.n_runs == 0:
                w.writerow([r.statistic, "n/a", "n/a", "n/a", "n/a", 0])
                continue
            lo = r.mean - r.half_width
            hi = r.mean + r.half_width
            w.writerow([r.statistic, _num(r.mean), _num(lo), _num(hi), _num(r.half_width), r.n_runs])


def write_runs_csv(per_run, seeds, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {RUNS_FORMAT} v{FORMAT_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "seed"] + RUN_COLUMNS)
        for i, (r, seed) in enumerate(zip(per_run, seeds)):
            if r is None:
                w.writerow([i, seed] + ["n/a"] * len(RUN_COLUMNS))
            else:
                w.writerow([i, seed] + [r[c] if c == "n_valid" else repr(r[c]) for c in RUN_COLUMNS])


# mitigation --------------------------------------------------------------------


@dataclass
class Mitigation:
    chosen: object
    default: object
    improved: bool
    primary: str

    def to_dict(self):
        def case(c):
            return {
                "eval_index": c.eval_index,
                "config": c.config,
                "accuracy": c.accuracy,
                "eod": c.eod,
                "aod": c.aod,
            }

        return {
            "format": "hpfair-mitigation",
            "version": FORMAT_VERSION,
            "primary": self.primary,
            "improved": self.improved,
            "default": case(self.default),
            "chosen": case(self.chosen),
        }


def choose_mitigation(corpus, epsilon=0.01, primary="eod"):
    """Least-biased valid case of a corpus.

    Cases are ranked by the primary gap, then the other gap, then higher
    accuracy, then earlier evaluation. ``improved`` is false when the winner
    does not strictly beat the default on the primary gap.
    """
    if primary not in ("eod", "aod"):
        raise ValueError("primary must be 'eod' or 'aod'")
    secondary = "aod" if primary == "eod" else "eod"
    default = corpus.default_case
    valid = corpus.valid_cases(epsilon) or [default]
    chosen = min(
        valid,
        key=lambda c: (getattr(c, primary), getattr(c, secondary), -c.accuracy, c.eval_index),
    )
    improved = getattr(chosen, primary) < getattr(default, primary)
    if not improved:
        chosen = default
    return Mitigation(chosen=chosen, default=default, improved=improved, primary=primary)
