"""Sprite alphabet shared by the engine, the text codec and the evolver.

32 non-empty sprites: 11 object classes, 11 matching noun words, the IS
connector and 9 property words.  A cell may also be empty, which the text
codec writes as '.'.
"""

from __future__ import annotations

OBJECT_CLASSES = (
    "baba", "keke", "flag", "rock", "wall", "water",
    "skull", "lava", "grass", "love", "floor",
)

NOUN_WORDS = tuple(c.upper() for c in OBJECT_CLASSES)

IS_WORD = "IS"

PROPERTY_WORDS = ("YOU", "WIN", "PUSH", "STOP", "MOVE", "KILL", "SINK", "HOT", "MELT")

WORD_SPRITES = NOUN_WORDS + (IS_WORD,) + PROPERTY_WORDS
ALL_SPRITES = OBJECT_CLASSES + WORD_SPRITES

_OBJECTS = frozenset(OBJECT_CLASSES)
_NOUNS = frozenset(NOUN_WORDS)
_PROPERTIES = frozenset(PROPERTY_WORDS)
_WORDS = frozenset(WORD_SPRITES)

NOUN_TO_CLASS = dict(zip(NOUN_WORDS, OBJECT_CLASSES))
CLASS_TO_NOUN = dict(zip(OBJECT_CLASSES, NOUN_WORDS))

# Canonical rank used whenever a deterministic ordering over classes is needed.
CLASS_ORDER = {c: i for i, c in enumerate(OBJECT_CLASSES)}

EMPTY_CHAR = "."

_OBJECT_CHARS = "bkfrwaslgvt"
_NOUN_CHARS = _OBJECT_CHARS.upper()
_PROPERTY_CHARS = "234567890"  # YOU WIN PUSH STOP MOVE KILL SINK HOT MELT

SPRITE_TO_CHAR: dict[str, str] = {}
SPRITE_TO_CHAR.update(zip(OBJECT_CLASSES, _OBJECT_CHARS))
SPRITE_TO_CHAR.update(zip(NOUN_WORDS, _NOUN_CHARS))
SPRITE_TO_CHAR[IS_WORD] = "1"
SPRITE_TO_CHAR.update(zip(PROPERTY_WORDS, _PROPERTY_CHARS))

CHAR_TO_SPRITE = {ch: sp for sp, ch in SPRITE_TO_CHAR.items()}


def is_object(sprite: str) -> bool:
    return sprite in _OBJECTS


def is_noun(sprite: str) -> bool:
    return sprite in _NOUNS


def is_property(sprite: str) -> bool:
    return sprite in _PROPERTIES


def is_word(sprite: str) -> bool:
    return sprite in _WORDS
