import os
from pathlib import Path

import numpy as np
import pytest

from aftrend.series import load_csv

DATASET_ENV = "AFTREND_DATASET"
DEFAULT_DATASET = Path(__file__).parent / "data" / "vanmarle_af.csv"


def dataset_path():
    env = os.environ.get(DATASET_ENV)
    if env:
        return Path(env)
    return DEFAULT_DATASET if DEFAULT_DATASET.exists() else None


@pytest.fixture(scope="session")
def published_bundle():
    """The six published AF series, when a copy has been supplied."""
    path = dataset_path()
    if path is None or not path.exists():
        pytest.skip(f"AF dataset not supplied (set {DATASET_ENV} or add {DEFAULT_DATASET})")
    bundle = load_csv(path)
    if len(bundle.labels) < 6:
        pytest.skip(f"{path} does not label all six series (gcp_raw, gcp_filter, hn_raw, ...)")
    return bundle


@pytest.fixture
def rng():
    return np.random.default_rng(20221017)


def write_csv_text(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
