"""Session fixtures: the digit corpus directory used by the training-harness
and acceptance tests.

Real MNIST is used when available (SCSP_MNIST_DIR env var, or ./data/mnist);
otherwise a deterministic synthetic IDX corpus is generated once per session,
and every loader/CLI code path runs on it unchanged.
"""

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `import helpers`

from scsp import data, synth


def _real_mnist_dir():
    candidates = []
    if os.environ.get("SCSP_MNIST_DIR"):
        candidates.append(Path(os.environ["SCSP_MNIST_DIR"]))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "mnist")
    for directory in candidates:
        try:
            for stem in (data.TRAIN_IMAGES, data.TRAIN_LABELS, data.TEST_IMAGES, data.TEST_LABELS):
                if not (directory / stem).exists() and not (directory / (stem + ".gz")).exists():
                    raise FileNotFoundError
            return directory
        except FileNotFoundError:
            continue
    return None


@pytest.fixture(scope="session")
def digits_dir(tmp_path_factory):
    """Directory with the four IDX files: real MNIST if present, else the
    synthetic stand-in corpus."""
    real = _real_mnist_dir()
    if real is not None:
        print(f"\n[data] using real MNIST from {real}")
        return real
    directory = tmp_path_factory.mktemp("synth-digits")
    synth.write_synthetic_mnist(directory, n_train=10000, n_test=10000, seed=0)
    print(f"\n[data] real MNIST not found; using deterministic synthetic corpus at {directory}")
    return directory


@pytest.fixture(scope="session")
def mnist_is_real():
    return _real_mnist_dir() is not None


@pytest.fixture(scope="session")
def small_digits_dir(tmp_path_factory):
    """A small synthetic corpus for fast CLI/driver tests."""
    directory = tmp_path_factory.mktemp("synth-digits-small")
    synth.write_synthetic_mnist(directory, n_train=768, n_test=384, seed=7)
    return directory
