import os
from pathlib import Path

import numpy as np
import pytest

from autosvd import dataset

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("AUTOSVD_DATA", ROOT / "data"))

ML100K = DATA_DIR / "ml-100k"
ML1M = DATA_DIR / "ml-1m"
MOVIETWEETINGS = DATA_DIR / "movietweetings"


def require(*paths):
    """Fail (not skip) when a benchmark dataset is missing."""
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        pytest.fail(f"dataset file(s) not found: {', '.join(missing)}. "
                    "ML-100K can be rebuilt with `python tools/fetch_ml100k.py`; "
                    "see README for the other datasets.", pytrace=False)


@pytest.fixture(scope="session")
def ml100k():
    require(ML100K / "u.data")
    return dataset.load_ratings(ML100K / "u.data", "ml100k_tab")


@pytest.fixture(scope="session")
def ml100k_content(ml100k):
    require(ML100K / "u.item")
    with pytest.warns(dataset.DataWarning):
        return dataset.load_item_content(ML100K / "u.item", "ml100k_item", ml100k.item_ids)


@pytest.fixture
def write_lines(tmp_path):
    def write(name, lines, encoding="utf-8"):
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines), encoding=encoding)
        return path
    return write


@pytest.fixture
def make_ratings():
    """Factory for random rating sets without duplicate (user, item) pairs."""
    def make(n_users, n_items, n_ratings, seed=0, scale=(1, 5)):
        rng = np.random.default_rng(seed)
        cells = np.sort(rng.choice(n_users * n_items, size=n_ratings, replace=False))
        users, items = np.divmod(cells, n_items)
        ratings = rng.integers(scale[0], scale[1] + 1, size=n_ratings).astype(float)
        return dataset.RatingsDataset.from_arrays(users, items, ratings,
                                                  n_users=n_users, n_items=n_items)
    return make


ACCEPTANCE_LINES = []


def verdict(number, checks):
    """Record and print one pass/fail line for an acceptance criterion, then
    fail the test if any ``(name, ok, detail)`` check failed."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({text})" for name, good, text in checks)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    if not ok:
        pytest.fail(line, pytrace=False)


def missing(*paths):
    return [str(p) for p in paths if not Path(p).exists()]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
