import os
import sys

import pytest

# Same mechanism as app.py: library modules are imported by flat name.
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "libs"))
sys.path.insert(0, ROOT)

from hypervectors import Rng  # noqa: E402


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def root_dir():
    return ROOT


@pytest.fixture
def test_data_dir():
    return os.path.join(ROOT, "test_data")
