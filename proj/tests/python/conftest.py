import os
from pathlib import Path

import pytest

import nsn

ROOT = Path(__file__).resolve().parents[2]
MNIST = ROOT / "tests" / "data" / "mnist-2500-images-idx3-ubyte.gz"


@pytest.fixture(scope="session")
def digits():
    return nsn.load_idx(str(MNIST), 120)


@pytest.fixture(scope="session")
def small_net(digits):
    return nsn.train(digits, seed=3, max_iters=8)


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("NSN_CLI")
    if not path or not Path(path).exists():
        pytest.skip("NSN_CLI not set")
    return path
