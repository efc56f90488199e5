"""Shared fixtures: the digit corpus and a few cheap datasets/models.

The corpus is written once per checkout into .cache/synth-mnist (the stamp
file makes later sessions a no-op) unless MNIST_DIR points at an existing
IDX directory, in which case that one is used untouched.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

from evolab.data import Dataset, load_mnist_dir
from evolab.nn.model import ModelConfig, build_model

from synth_digits import write_corpus_dir

REPO_ROOT = Path(__file__).resolve().parent.parent

TINY_CONFIG = ModelConfig(latent_maps=2, linear_width=4)


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    env = os.environ.get("MNIST_DIR")
    if env:
        return Path(env)
    root = REPO_ROOT / ".cache" / "synth-mnist"
    write_corpus_dir(root)
    return root


@pytest.fixture(scope="session")
def mnist(mnist_dir) -> tuple[Dataset, Dataset]:
    return load_mnist_dir(mnist_dir)


@pytest.fixture(scope="session")
def train_data(mnist) -> Dataset:
    return mnist[0]


@pytest.fixture(scope="session")
def test_data(mnist) -> Dataset:
    return mnist[1]


def balanced_subset(data: Dataset, per_class: int) -> Dataset:
    """First ``per_class`` samples of every class, in index order."""
    picks = [np.flatnonzero(data.labels == c)[:per_class] for c in range(10)]
    return data.take(np.sort(np.concatenate(picks)))


@pytest.fixture(scope="session")
def small_train(train_data) -> Dataset:
    """512 samples, roughly class-balanced, for cheap behavioral tests."""
    return balanced_subset(train_data, 52).take(np.arange(512))


@pytest.fixture(scope="session")
def small_test(test_data) -> Dataset:
    return balanced_subset(test_data, 26).take(np.arange(256))


@pytest.fixture(scope="session")
def tiny_model():
    return build_model(TINY_CONFIG, 3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance suite's per-criterion lines after the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
