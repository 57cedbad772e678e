"""Shared fixtures: a hand-checkable film graph and a generated toy world."""

import pytest

from convqa.context import load_ned_file
from convqa.kg import load_kg_lines
from convqa.toydata import build_toy_world
from convqa.user_sim import load_dataset_obj

# Two facts about one film: a plain one and one carrying two qualifiers.
# Small enough that every compiled edge can be enumerated by hand.
FILM_FACT_LINES = [
    "f1\tavengers-endgame|Avengers: Endgame\tP58|after a work by\tstan-lee|Stan Lee",
    "f2\tavengers-endgame|Avengers: Endgame\tP179|part of the series"
    "\tmcu|Marvel Cinematic Universe"
    "\tP156|followed by|spider-man-ffh|Spider-Man: Far from Home"
    "\tP1545|series ordinal|lit:22|22",
]


@pytest.fixture()
def film_kg():
    return load_kg_lines(FILM_FACT_LINES)


@pytest.fixture(scope="session")
def toy_world():
    return build_toy_world(seed=11, conversations=20)


@pytest.fixture(scope="session")
def toy_kg(toy_world):
    return load_kg_lines(toy_world.kg_lines)


@pytest.fixture(scope="session")
def toy_dataset(toy_world):
    return load_dataset_obj(toy_world.dataset)


@pytest.fixture(scope="session")
def toy_ned_path(toy_world, tmp_path_factory):
    path = tmp_path_factory.mktemp("ned") / "toy.ned.tsv"
    path.write_text(toy_world.ned_text(), encoding="utf-8")
    return path


@pytest.fixture()
def toy_ned(toy_ned_path):
    return load_ned_file(toy_ned_path)
