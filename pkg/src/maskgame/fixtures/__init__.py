"""Bundled game files: four small benchmark games with known exact values and the case-study game."""

import json
from importlib import resources

from maskgame.game import GameSpec, game_from_dict

NAMES = ("table1-n2m2", "table1-n4", "table1-n5", "table1-n6", "case-study")


def fixture_path(name: str):
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return resources.files(__name__) / f"{name}.json"


def load_fixture(name: str) -> GameSpec:
    return game_from_dict(json.loads(fixture_path(name).read_text()))
