import os
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent

FETCH_HINT = "run scripts/convert_datasets.py --help for download and conversion steps"


def data_dir() -> Path:
    return Path(os.environ.get("ELM_DATA_DIR", REPO_ROOT / "data"))


def dataset_paths(name: str) -> dict:
    root = data_dir()
    layouts = {
        "pendigits": {"train": root / "pendigits.tra", "test": root / "pendigits.tes"},
        "usps": {"train": root / "usps_train.csv", "test": root / "usps_test.csv"},
        "fontdigits": {"train": root / "fontdigits_train.csv", "test": root / "fontdigits_test.csv"},
        "mnist": {
            "train_images": root / "train-images-idx3-ubyte",
            "train_labels": root / "train-labels-idx1-ubyte",
            "test_images": root / "t10k-images-idx3-ubyte",
            "test_labels": root / "t10k-labels-idx1-ubyte",
        },
    }
    return layouts[name]


def require_dataset(name: str) -> dict:
    paths = dataset_paths(name)
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        pytest.skip(f"{name} files not found ({missing[0]}, ...); {FETCH_HINT}")
    return paths


@pytest.fixture
def pendigits_paths():
    return require_dataset("pendigits")


@pytest.fixture
def usps_paths():
    return require_dataset("usps")


@pytest.fixture
def mnist_paths():
    return require_dataset("mnist")
