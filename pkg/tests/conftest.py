import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedph.mathcore import RngStream
from fedph.paillier import keygen


@pytest.fixture(scope="session")
def keypair_512():
    """One 512-bit keypair (m=5, k=3) shared across crypto tests."""
    return keygen(512, 5, 3, RngStream(20240601, 1))
