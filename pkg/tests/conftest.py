import os

import pytest
from hypothesis import HealthCheck, settings

from latinforge.core import group_square

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def l4():
    return group_square(2, 2)


@pytest.fixture(scope="session")
def l8():
    return group_square(2, 3)


@pytest.fixture(scope="session")
def l9():
    return group_square(3, 2)


@pytest.fixture(scope="session")
def l16():
    return group_square(2, 4)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
