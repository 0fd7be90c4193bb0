import os

# Pin BLAS pools before numpy's first import so the harness's thread axis
# is the only parallelism in timed code.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

import kgebench as kb
from kgebench.training import TrainConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training or timing test")


@pytest.fixture(scope="session")
def ring50():
    return kb.generate_synthetic(50, 1, "ring", 0)


@pytest.fixture(scope="session")
def ring50_trained_transe(ring50):
    cfg = TrainConfig(model="transe", dim=16, epochs=200, eta=2, n_batches=5,
                      threads=1, seed=0)
    params, timings = kb.train(ring50, cfg)
    return params, timings


@pytest.fixture
def dataset_dir(tmp_path):
    """Write a small three-split dataset and return its directory."""

    def make(train, valid=(), test=()):
        for name, rows in (("train.txt", train), ("valid.txt", valid), ("test.txt", test)):
            with open(tmp_path / name, "w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write("\t".join(row) + "\n")
        return tmp_path

    return make


@pytest.fixture(scope="session")
def physical_cores():
    try:
        import psutil

        cores = psutil.cpu_count(logical=False)
        if cores:
            return cores
    except ImportError:
        pass
    return os.cpu_count() or 1
