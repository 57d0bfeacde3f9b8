import math

import pytest
from hypothesis import HealthCheck, settings

from systolica.constructors import RandomProfileParams, random_admissible_profile

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def random_profiles():
    """A small fixed zoo of generated profiles, keyed by (e, seed)."""
    return {(e, s): random_admissible_profile(RandomProfileParams(e, seed=s)) for e in (1, 2, 3, 5) for s in range(4)}


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
