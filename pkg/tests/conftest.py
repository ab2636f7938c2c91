import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twinforge import cofactor, twin
from twinforge.profiles import Profile

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def compound():
    U1, U2 = twin.compound_pair(0.9, 1.1)
    return U1, U2, twin.analyze_pair(U1, U2)


@pytest.fixture(scope="session")
def super_I():
    U1, U2, s = cofactor.supercompatible_example("I")
    return U1, U2, s


@pytest.fixture(scope="session")
def super_II():
    U1, U2, s = cofactor.supercompatible_example("II")
    return U1, U2, s


@pytest.fixture(scope="session")
def family_I(super_I):
    U1, _, s = super_I
    return cofactor.build_typeI_family(U1, s.b, s.m)


@pytest.fixture(scope="session")
def family_II(super_II):
    U1, _, s = super_II
    return cofactor.build_typeII_family(U1, s.b, s.m)


@pytest.fixture(scope="session")
def type1_fields(family_I):
    """Sine-profile type I fixtures keyed by grid size."""
    from twinforge.mask import gen_typeI_curved

    return {n: gen_typeI_curved(family_I, Profile.sine(), (n, n, n)) for n in (16, 32)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
