import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from levelforge import store
from levelforge.engine import LevelGrid
from levelforge.sprites import ALL_SPRITES

# Fig-style pair: the win rule is satisfied at the start of the first level
# and must be completed by pushing the FLAG word in the second.
FIG_SATISFIED = "\n".join([
    "B12F13.",
    ".b..f..",
    ".......",
    ".......",
    ".......",
    ".......",
    ".......",
])

FIG_DISPLACED = "\n".join([
    "B12....",
    "bF...13",
    ".......",
    "...f...",
    ".......",
    ".......",
    ".......",
])


def grid(text: str) -> LevelGrid:
    return store.decode(text.strip("\n"))


@pytest.fixture
def fig_satisfied() -> LevelGrid:
    return grid(FIG_SATISFIED)


@pytest.fixture
def fig_displaced() -> LevelGrid:
    return grid(FIG_DISPLACED)


def random_level_text(rng: random.Random, width=None, height=None, density=0.25) -> str:
    """Random design-time level: sprinkled sprites over an empty grid."""
    width = width or rng.randint(5, 12)
    height = height or rng.randint(5, 12)
    rows = []
    for _ in range(height):
        row = []
        for _ in range(width):
            if rng.random() < density:
                row.append(store.SPRITE_TO_CHAR[rng.choice(ALL_SPRITES)])
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows)
