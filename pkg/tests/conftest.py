import json

import numpy as np
import pytest

from hpfair.benchmarks import planted_bias
from hpfair.data import split_dataset


@pytest.fixture
def write_csv(tmp_path):
    """Write a CSV and its schema, returning both paths."""

    def _write(text, schema, name="data"):
        csv_path = tmp_path / f"{name}.csv"
        csv_path.write_text(text, encoding="utf-8")
        schema_path = tmp_path / f"{name}.schema.json"
        schema_path.write_text(json.dumps(schema), encoding="utf-8")
        return csv_path, schema_path

    return _write


@pytest.fixture(scope="session")
def planted_split():
    return split_dataset(planted_bias(n_rows=400, seed=3), 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
