"""Shared pytest fixtures for jetcartan tests."""

import sys
from pathlib import Path

import pytest

# Add project root to path so tests can import the jetcartan package
sys.path.insert(0, str(Path(__file__).parent.parent))

PROJECT_ROOT = Path(__file__).parent.parent


@pytest.fixture
def fixtures_dir():
    """Directory holding the example .jc documents."""
    return PROJECT_ROOT / "fixtures"


@pytest.fixture
def oracle_dir():
    """Directory holding the frozen residual-template fixtures."""
    return PROJECT_ROOT / "fixtures" / "oracles"


@pytest.fixture
def settings(oracle_dir):
    """CheckSettings with few trials, reading the committed oracle fixtures."""
    from jetcartan.checks import CheckSettings

    return CheckSettings(trials=6, oracle_directory=oracle_dir)


@pytest.fixture
def context(settings):
    """A CheckContext without a document."""
    from jetcartan.checks import CheckContext

    return CheckContext(document=None, seed=7, settings=settings)


@pytest.fixture
def plane():
    """The chart (t, x) on [-1, 1]²."""
    from jetcartan.geometry import Chart

    return Chart("P", ("t", "x"))


@pytest.fixture
def minimal_text():
    """Smallest complete document."""
    return "chart M dim 2 coords x y\nmetric g on M { [1, 0; 0, 1] }\n"
