import sys
from pathlib import Path

# Put the project root on sys.path so tests can import 'meterguard'
project_root = str(Path(__file__).parent.parent)
if project_root not in sys.path:
    sys.path.insert(0, project_root)

import pytest

from meterguard.services.synthetic import synthesize_normal_profiles
from tests.helpers import blob_dataset, tiny_cnn, tiny_fnn, tiny_rnn


@pytest.fixture
def fnn_model():
    return tiny_fnn()


@pytest.fixture
def cnn_model():
    return tiny_cnn()


@pytest.fixture
def rnn_model():
    return tiny_rnn()


@pytest.fixture
def blobs():
    return blob_dataset()


@pytest.fixture(scope="session")
def genuine_profiles():
    """300 synthetic genuine profiles from 60 meters."""
    return synthesize_normal_profiles(300, seed=11)
