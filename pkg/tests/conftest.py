from pathlib import Path

import pytest

from celab.games import load_game

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def chicken():
    return load_game(FIXTURES / "chicken.json")


@pytest.fixture(scope="session")
def mirror():
    return load_game(FIXTURES / "mirror_2x2.json")


@pytest.fixture(scope="session")
def dominant():
    return load_game(FIXTURES / "dominant_2x2.json")


@pytest.fixture(scope="session")
def coordination():
    return load_game(FIXTURES / "coordination_2x2.json")


@pytest.fixture(scope="session")
def three_player():
    return load_game(FIXTURES / "three_player.json")


@pytest.fixture(scope="session")
def stalled_three_player():
    return load_game(FIXTURES / "stalled_three_player.json")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
