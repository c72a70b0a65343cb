"""Command-line campaign runner.

Four modes share one entry point:

``search``
    Repeated seeded searches; one corpus file per run plus summary tables.
``explain``
    Cluster and explain the valid cases of one or more corpus files.
``mitigate``
    One black-box search, then pick the least-biased valid configuration.
``mine``
    Count parameters across many explanation files.

Settings may come from a JSON campaign file (``--config``); explicit flags
win over it. ``PARFAIT_SEED`` in the environment overrides ``--seed``.
"""

import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .benchmarks import planted_bias
from .data import load_dataset, load_schema, split_dataset
from .exceptions import ConfigurationError, DegenerateDataError, HPFairError
from .explain import (
    MAX_CLUSTERS,
    explain_corpus,
    load_explanation,
    mine_frequent,
    save_explanation,
    write_mining_csv,
)
from .learners import canonical_name
from .reporting import (
    choose_mitigation,
    run_statistics,
    summarize_runs,
    write_runs_csv,
    write_summary_csv,
)
from .search import SearchSettings, dump_corpus, load_corpus, run_search
from .space import builtin_space, parse_space

logger = logging.getLogger("hpfair")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_RUNTIME = 4

SEED_ENV = "PARFAIT_SEED"
BUILTIN_PREFIX = "builtin:"


@dataclass
class Campaign:
    dataset: str
    learner: str
    schema: str = None
    space: str = None
    protected: str = None
    search: str = "blackbox"
    timeout: float = None
    max_evals: int = None
    epsilon: float = 0.01
    seed: int = 0
    reps: int = 10
    out: str = "."

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigurationError("reps must be at least 1")
        self.learner = canonical_name(self.learner)
        if not self.dataset.startswith(BUILTIN_PREFIX):
            if not Path(self.dataset).is_file():
                raise ConfigurationError(f"dataset file {self.dataset} does not exist")
            if self.schema is None:
                guess = Path(self.dataset).with_suffix(".schema.json")
                if not guess.is_file():
                    raise ConfigurationError(f"no --schema given and {guess} does not exist")
                self.schema = str(guess)
        if self.space is not None and not Path(self.space).is_file():
            raise ConfigurationError(f"space file {self.space} does not exist")

    @property
    def dataset_id(self):
        return self.dataset if self.dataset.startswith(BUILTIN_PREFIX) else Path(self.dataset).stem

    def load_data(self):
        if self.dataset.startswith(BUILTIN_PREFIX):
            return _builtin_dataset(self.dataset[len(BUILTIN_PREFIX):])
        schema = load_schema(self.schema)
        if self.protected is not None:
            schema = {**schema, "protected": self.protected}
        return load_dataset(self.dataset, schema)

    def load_space(self):
        return parse_space(self.space) if self.space else builtin_space(self.learner)

    def settings(self, seed, search=None):
        return SearchSettings(
            search_type=search or self.search,
            timeout_seconds=self.timeout,
            epsilon=self.epsilon,
            seed=seed,
            max_evals=self.max_evals,
        )


def _builtin_dataset(spec):
    name, _, arg = spec.partition(":")
    if name != "planted":
        raise ConfigurationError(f"unknown built-in dataset {name!r}; available: planted")
    try:
        seed = int(arg) if arg else 0
    except ValueError:
        raise ConfigurationError(f"bad seed in builtin:{spec}") from None
    return planted_bias(seed=seed)


def _setup_logging(out, verbose):
    logger.setLevel(logging.DEBUG)
    logger.handlers.clear()
    fh = logging.FileHandler(Path(out) / "hpfair.log", encoding="utf-8")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setLevel(logging.DEBUG if verbose else logging.WARNING)
    sh.setFormatter(logging.Formatter("hpfair: %(message)s"))
    logger.addHandler(sh)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _run_one(campaign, data, space, run, seed, search=None):
    try:
        split = split_dataset(data, seed)
        corpus = run_search(campaign.learner, space, split, campaign.settings(seed, search))
    except HPFairError as exc:
        raise type(exc)(f"run {run}: {exc}") from exc
    corpus.meta.update(dataset=campaign.dataset_id, run=run)
    logger.info(
        "run %d seed %d: %d evaluations, %d cases, %d invalid, %d undefined",
        run, seed, corpus.n_evals, len(corpus), corpus.n_invalid, corpus.n_undefined,
    )
    return corpus


def cmd_search(campaign):
    data, space = campaign.load_data(), campaign.load_space()
    out = Path(campaign.out)
    per_run, seeds = [], []
    for run in range(campaign.reps):
        seed = campaign.seed + run
        corpus = _run_one(campaign, data, space, run, seed)
        dump_corpus(corpus, out / f"run-{run:02d}.corpus.jsonl")
        stats = run_statistics(corpus, campaign.epsilon)
        if stats is None:
            logger.warning("run %d has no valid cases; its summary entries are n/a", run)
        per_run.append(stats)
        seeds.append(seed)
    write_runs_csv(per_run, seeds, out / "runs.csv")
    write_summary_csv(summarize_runs(per_run), out / "summary.csv")
    return per_run


def _explain_one(path, out, seed, metric, max_clusters, epsilon):
    corpus = load_corpus(path)
    space = space_for_corpus(corpus)
    valid = corpus.valid_cases(corpus.meta.get("epsilon", epsilon))
    clusters, tree = explain_corpus(valid, space, seed=seed, metric=metric, max_clusters=max_clusters)
    stem = Path(path).name.split(".")[0]
    tree.meta = {
        "dataset": corpus.meta.get("dataset", stem),
        "corpus": Path(path).name,
        "learner": corpus.meta.get("learner"),
        "metric": metric,
        "k": clusters.k,
        "seed": seed,
    }
    save_explanation(tree, out / f"{stem}.tree.json")
    (out / f"{stem}.tree.txt").write_text(tree.render(), encoding="utf-8")
    with open(out / f"{stem}.clusters.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# hpfair-clusters v1\n")
        fh.write("eval_index,cluster\n")
        for case, label in zip(valid, clusters.labels):
            fh.write(f"{case.eval_index},{label}\n")
    with open(out / f"{stem}.scatter.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# hpfair-scatter v1\n")
        fh.write("accuracy,aod,eod,cluster\n")
        for case, label in zip(valid, clusters.labels):
            fh.write(f"{case.accuracy!r},{case.aod!r},{case.eod!r},{label}\n")
    logger.info("%s: k=%d, tree accuracy %.4f", path, clusters.k, tree.training_accuracy)
    return clusters, tree


def space_for_corpus(corpus, space_path=None):
    if space_path:
        return parse_space(space_path)
    learner = corpus.meta.get("learner")
    if learner is None:
        raise ConfigurationError("corpus has no learner recorded; pass --space")
    return builtin_space(learner)


def cmd_explain(corpus_paths, out, seed=0, metric="aod", max_clusters=MAX_CLUSTERS, epsilon=0.01):
    if not corpus_paths:
        raise ConfigurationError("explain mode needs at least one --corpus file")
    return [_explain_one(p, Path(out), seed, metric, max_clusters, epsilon) for p in corpus_paths]


def cmd_mitigate(campaign, primary="eod"):
    data, space = campaign.load_data(), campaign.load_space()
    corpus = _run_one(campaign, data, space, 0, campaign.seed, search="blackbox")
    out = Path(campaign.out)
    dump_corpus(corpus, out / "mitigate.corpus.jsonl")
    result = choose_mitigation(corpus, campaign.epsilon, primary=primary)
    _write_json(out / "mitigation.json", result.to_dict())
    if not result.improved:
        logger.warning("no valid configuration beats the default on %s; returning the default", primary)
    return result


def cmd_mine(tree_paths, out, overall_threshold=50, dataset_threshold=3, count="nodes"):
    if not tree_paths:
        raise ConfigurationError("mine mode needs at least one --trees file")
    trees = []
    for p in tree_paths:
        try:
            tree = load_explanation(p)
        except (ConfigurationError, KeyError, TypeError) as exc:
            raise ConfigurationError(f"cannot use explanation file {p}: {exc}") from None
        trees.append((tree, tree.meta.get("dataset", str(p))))
    report = mine_frequent(trees, overall_threshold, dataset_threshold, count=count)
    write_mining_csv(report, Path(out) / "mining.csv")
    return report


def _campaign_from(options, file_config):
    merged = dict(file_config)
    merged.update({k: v for k, v in options.items() if v is not None})
    if "algorithm" in merged:
        merged["learner"] = merged.pop("algorithm")
    for key in ("dataset", "learner"):
        if key not in merged:
            raise ConfigurationError(f"--{'algorithm' if key == 'learner' else key} is required")
    known = set(Campaign.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise ConfigurationError(f"unknown campaign setting(s): {sorted(unknown)}")
    return Campaign(**merged)


def _resolve_seed(seed):
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env!r}") from None


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--mode", type=click.Choice(["search", "explain", "mitigate", "mine"]), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON campaign file.")
@click.option("--algorithm", help="decision_tree, random_forest, logistic_regression (or dt, rf, lr).")
@click.option("--dataset", help="CSV file, or builtin:planted[:SEED].")
@click.option("--schema", help="JSON schema for the CSV (default: <dataset>.schema.json).")
@click.option("--space", help="Hyperparameter space file (default: bundled space).")
@click.option("--protected", help="Protected attribute column, overriding the schema.")
@click.option("--search", type=click.Choice(["random", "blackbox", "graybox"]))
@click.option("--timeout", type=float, help="Wall-clock budget per run, in seconds.")
@click.option("--max-evals", type=int, help="Evaluation budget per run.")
@click.option("--epsilon", type=float, help="Accuracy margin below the default [0.01].")
@click.option("--clusters-max", type=click.IntRange(2, MAX_CLUSTERS), default=MAX_CLUSTERS, show_default=True)
@click.option("--seed", type=int, help="Base seed; run r uses seed + r [0].")
@click.option("--reps", type=int, help="Independent runs in search mode [10].")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory [.].")
@click.option("--corpus", "corpus_paths", multiple=True, help="Corpus file to explain (repeatable).")
@click.option("--trees", "tree_paths", multiple=True, help="Explanation JSON to mine (repeatable).")
@click.option("--metric", type=click.Choice(["aod", "eod"]), default="aod", show_default=True,
              help="Bias axis used for clustering.")
@click.option("--primary", type=click.Choice(["eod", "aod"]), default="eod", show_default=True,
              help="Gap minimized first in mitigate mode.")
@click.option("--overall-threshold", type=int, default=50, show_default=True)
@click.option("--dataset-threshold", type=int, default=3, show_default=True)
@click.option("--count", type=click.Choice(["nodes", "trees"]), default="nodes", show_default=True,
              help="Count every tree node, or each tree once, when mining.")
@click.option("-v", "--verbose", is_flag=True)
def main(mode, config_path, corpus_paths, tree_paths, metric, primary, clusters_max,
         overall_threshold, dataset_threshold, count, verbose, **options):
    """Search hyperparameter spaces for fairness bugs and explain them."""
    try:
        file_config = {}
        if config_path:
            try:
                file_config = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read campaign file {config_path}: {exc}") from None
            if not isinstance(file_config, dict):
                raise ConfigurationError("campaign file must hold a JSON object")
        seed = _resolve_seed(options["seed"] if options["seed"] is not None else file_config.get("seed", 0))
        options["seed"] = seed
        out = Path(options["out"] or file_config.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        options["out"] = str(out)
        _setup_logging(out, verbose)

        if mode == "explain":
            results = cmd_explain(corpus_paths, out, seed, metric, clusters_max,
                                  options["epsilon"] or file_config.get("epsilon", 0.01))
            for (clusters, tree), path in zip(results, corpus_paths):
                click.echo(f"{path}: k={clusters.k}, tree accuracy {tree.training_accuracy:.4f}")
                click.echo(tree.render(), nl=False)
        elif mode == "mine":
            report = cmd_mine(tree_paths, out, overall_threshold, dataset_threshold, count)
            for r in report:
                flag = "  flagged" if r.flagged else ""
                click.echo(f"{r.parameter}: {r.appearances} appearances, {r.dataset_count} datasets{flag}")
        else:
            campaign = _campaign_from(options, file_config)
            if campaign.max_evals is None and campaign.timeout is None:
                raise ConfigurationError("give --max-evals and/or --timeout")
            if mode == "search":
                per_run = cmd_search(campaign)
                n_valid = [r["n_valid"] for r in per_run if r is not None]
                click.echo(f"{len(per_run)} runs written to {out}; valid cases per run: {n_valid}")
            else:
                res = cmd_mitigate(campaign, primary)
                tag = "" if res.improved else " (no improvement over default)"
                click.echo(
                    f"default: accuracy {res.default.accuracy:.4f} eod {res.default.eod:.4f} "
                    f"aod {res.default.aod:.4f}\n"
                    f"chosen:  accuracy {res.chosen.accuracy:.4f} eod {res.chosen.eod:.4f} "
                    f"aod {res.chosen.aod:.4f}{tag}\n"
                    f"config:  {json.dumps(res.chosen.config, sort_keys=True)}"
                )
    except ConfigurationError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DegenerateDataError as exc:
        click.echo(f"degenerate data: {exc}", err=True)
        sys.exit(EXIT_DEGENERATE)
    except HPFairError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
