"""Shared fixtures and instance generators."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from discreteclf import dataset_from_arrays

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "datasets"
CONFIGS = ROOT / "configs"


def random_instance(rng: np.random.Generator, n_lo: int = 8, n_hi: int = 30, p_hi: int = 4, noisy_rule: bool = False):
    """Small integer-featured dataset with both classes present."""
    N = int(rng.integers(n_lo, n_hi + 1))
    P = int(rng.integers(1, p_hi + 1))
    X = rng.integers(-3, 4, size=(N, P)).astype(float)
    if noisy_rule:
        w0 = rng.integers(-2, 3, size=P)
        y = np.where(X @ w0 + rng.normal(0, 0.3, N) >= 0.5, 1, -1)
    else:
        y = rng.choice([-1, 1], size=N)
    if len(set(y.tolist())) < 2:
        y[0] = -y[0]
    return dataset_from_arrays(X, y)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def breastcancer_csv() -> Path:
    return DATA / "breastcancer.csv"


@pytest.fixture(scope="session")
def breastcancer_schema() -> Path:
    return DATA / "breastcancer.schema.yaml"


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    """Store and print one PASS/FAIL line for the acceptance summary."""
    line = f"criterion {number} [{name}]: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
