import numpy as np
import pytest

from hesvm.ckks import CkksEngine, CkksParams, _profile_primes
from hesvm.ring import RingParams


def build_engine(n, pattern, special_bits, delta=2.0**20):
    primes, special = _profile_primes(n, tuple(pattern), special_bits)
    return CkksEngine(CkksParams(RingParams(n, primes), special, delta=delta))


@pytest.fixture(scope="session")
def small_engine():
    # fast profile for unit tests: same depth as the default chain
    return build_engine(2048, (44, 21, 21, 21), 50)


@pytest.fixture(scope="session")
def small_keys(small_engine):
    rng = np.random.default_rng(1234)
    return small_engine.keygen(rng)
