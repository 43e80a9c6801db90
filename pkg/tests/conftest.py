import os

# single-threaded BLAS so repeated runs are bitwise comparable
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

from dcdsr.data import RawDataset, split_train_test  # noqa: E402
from dcdsr.graph import InteractionGraph, SocialNetwork  # noqa: E402

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_graphs(rng, n_users=12, n_items=15, density=0.3, social_density=0.25):
    mask = rng.random((n_users, n_items)) < density
    mask[np.arange(n_users), rng.integers(0, n_items, n_users)] = True
    mask[rng.integers(0, n_users, n_items), np.arange(n_items)] = True
    inter = np.argwhere(mask)
    pairs = np.argwhere(np.triu(rng.random((n_users, n_users)) < social_density, k=1))
    return InteractionGraph(inter, n_users, n_items), SocialNetwork(pairs, n_users)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def graphs(rng):
    return random_graphs(rng)


@pytest.fixture
def small_split():
    rng = np.random.default_rng(5)
    inter = np.argwhere(rng.random((30, 40)) < 0.25)
    social = np.argwhere(np.triu(rng.random((30, 30)) < 0.15, k=1))
    return split_train_test(RawDataset(inter, social), ratio=0.8, seed=0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
