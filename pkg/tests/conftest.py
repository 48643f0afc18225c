import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from psiauth import keygen, keypair_from_primes


@pytest.fixture
def rng():
    return random.Random(0xBEEF)


@pytest.fixture
def tiny_keypair():
    """n = 15: the smallest valid parameters, checkable by hand."""
    return keypair_from_primes(3, 5, insecure_test_mode=True)


@pytest.fixture(scope="session")
def kp128():
    return keygen(128, random.Random(0xA11CE))


@pytest.fixture(scope="session")
def kp512():
    return keygen(512, random.Random(0xB0B))
