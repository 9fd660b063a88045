import pytest
from hypothesis import HealthCheck, settings

from valprobe import crypto
from valprobe.zones import MisconfigKind, apply_misconfiguration, generate_zone_pair

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

EPOCH = 1_700_000_000
PARENT = "dnssec-test.example."


@pytest.fixture(scope="session")
def epoch():
    return EPOCH


def _pairs(algorithm):
    out = {}
    for kind in MisconfigKind:
        pair = generate_zone_pair(PARENT, f"{kind.label}.{PARENT}", EPOCH, algorithm=algorithm, seed=7)
        out[kind] = apply_misconfiguration(pair, kind)
    return out


@pytest.fixture(scope="session")
def ecdsa_pairs():
    return _pairs(crypto.ECDSAP256SHA256)


@pytest.fixture(scope="session")
def sim_pairs():
    return _pairs(crypto.KEYED_DIGEST)
