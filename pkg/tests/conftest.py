import sys

import pytest

from cee import load_taxonomy, resolve_taxonomy


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts where output capture can't hide them."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None) if mod else None
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)

TOY_FOOD = """\
!root\tthing
food\tthing
animal\tthing
pasta\tfood
dog\tanimal
"""

# leaf -> mid -> root chain for depth-sensitive cost checks
CHAIN = """\
!root\troot
mid\troot
leaf\tmid
"""


@pytest.fixture(scope="session")
def clevr():
    return resolve_taxonomy("clevr")


@pytest.fixture(scope="session")
def street():
    return resolve_taxonomy("street")


@pytest.fixture(scope="session")
def toy_food():
    return load_taxonomy(TOY_FOOD)


@pytest.fixture(scope="session")
def chain():
    return load_taxonomy(CHAIN)
