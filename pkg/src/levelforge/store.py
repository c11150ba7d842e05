"""Level text codec, snapshot persistence and the bundled seed corpus.

Levels travel as newline-separated rows of single-character sprite codes:

    '.' empty | b k f r w a s l g v t objects (baba keke flag rock wall
    water skull lava grass love floor) | B K F R W A S L G V T the matching
    noun words | 1 IS | 2 YOU | 3 WIN | 4 PUSH | 5 STOP | 6 MOVE | 7 KILL |
    8 SINK | 9 HOT | 0 MELT

Design-time grids hold at most one sprite per cell; stacks only arise
during play and are never persisted.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .engine import LevelGrid
from .sprites import CHAR_TO_SPRITE, EMPTY_CHAR, SPRITE_TO_CHAR, is_word

SNAPSHOT_VERSION = 1

MIN_SIDE = 5
MAX_SIDE = 20

SOLUTION_ALPHABET = frozenset("UDLRW")


class CodecError(ValueError):
    """Malformed level text; carries the offending position when known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class SnapshotError(ValueError):
    """Unreadable or inconsistent archive snapshot."""


def decode(text: str) -> LevelGrid:
    """Parse level text into a grid.  Objects spawn facing right."""
    rows = text.splitlines()
    while rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise CodecError("empty level text")
    width = len(rows[0])
    stacks = []
    for y, line in enumerate(rows):
        if len(line) != width:
            raise CodecError(f"ragged row: row {y} has width {len(line)}, expected {width}", row=y)
        row = []
        for x, ch in enumerate(line):
            if ch == EMPTY_CHAR:
                row.append(())
            else:
                sprite = CHAR_TO_SPRITE.get(ch)
                if sprite is None:
                    raise CodecError(f"unknown character {ch!r} at row {y}, column {x}", row=y, col=x)
                row.append(((sprite, None if is_word(sprite) else "R"),))
        stacks.append(row)
    return LevelGrid.from_stacks(stacks)


def encode(grid: LevelGrid) -> str:
    """Inverse of decode; rejects stacked cells (play states are not
    persisted)."""
    lines = []
    for y, row in enumerate(grid.cells):
        chars = []
        for x, cell in enumerate(row):
            if len(cell) > 1:
                raise CodecError(f"stacked cell at row {y}, column {x} is not encodable", row=y, col=x)
            chars.append(EMPTY_CHAR if not cell else SPRITE_TO_CHAR[cell[0][0]])
        lines.append("".join(chars))
    return "\n".join(lines)


def validate_design_bounds(grid: LevelGrid) -> None:
    """Design-time size limits; the engine itself accepts smaller grids."""
    if not (MIN_SIDE <= grid.width <= MAX_SIDE and MIN_SIDE <= grid.height <= MAX_SIDE):
        raise CodecError(
            f"level must be {MIN_SIDE}-{MAX_SIDE} cells per side, got {grid.width}x{grid.height}"
        )


def validate_solution(solution: str) -> None:
    for i, ch in enumerate(solution):
        if ch not in SOLUTION_ALPHABET:
            raise CodecError(f"unknown action {ch!r} at position {i}", col=i)


@dataclass
class ArchiveSnapshot:
    """Plain-data image of the archive, as stored on disk."""

    version: int = SNAPSHOT_VERSION
    records: list = field(default_factory=list)
    events: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)   # str(key) -> {"rated": [...], "elite": ...}
    seed_corpus: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "records": self.records,
            "events": self.events,
            "cells": self.cells,
            "seed_corpus": self.seed_corpus,
        }


_RECORD_FIELDS = (
    "id", "author", "grid", "solution", "start_flags", "end_flags",
    "cell", "scores", "created_at", "provenance",
)


def save_snapshot(snapshot: ArchiveSnapshot, path: str | Path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(snapshot.to_json(), fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_snapshot(path: str | Path) -> ArchiveSnapshot:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SnapshotError("snapshot root must be an object")
    version = data.get("version")
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version!r}, expected {SNAPSHOT_VERSION}")
    snapshot = ArchiveSnapshot(
        version=version,
        records=data.get("records", []),
        events=data.get("events", []),
        cells=data.get("cells", {}),
        seed_corpus=data.get("seed_corpus", []),
    )
    _check_integrity(snapshot)
    return snapshot


def _check_integrity(snapshot: ArchiveSnapshot) -> None:
    ids = set()
    for rec in snapshot.records:
        missing = [f for f in _RECORD_FIELDS if f not in rec]
        if missing:
            raise SnapshotError(f"record {rec.get('id', '?')} missing fields {missing}")
        ids.add(rec["id"])
    if len(ids) != len(snapshot.records):
        raise SnapshotError("duplicate record ids")
    for key, cell in snapshot.cells.items():
        for rid in cell.get("rated", []):
            if rid not in ids:
                raise SnapshotError(f"cell {key} references unknown record {rid!r}")
        elite = cell.get("elite")
        if elite is not None and elite not in cell.get("rated", []):
            raise SnapshotError(f"cell {key} elite {elite!r} is not in its rated table")
    for ev in snapshot.events:
        for side in ("level_a", "level_b"):
            if ev.get(side) not in ids:
                raise SnapshotError(f"rating event references unknown record {ev.get(side)!r}")
        if ev.get("harder_winner") not in (ev.get("level_a"), ev.get("level_b")):
            raise SnapshotError("rating event harder_winner is not one of its levels")
        if ev.get("design_winner") not in (ev.get("level_a"), ev.get("level_b")):
            raise SnapshotError("rating event design_winner is not one of its levels")


def seed_manifest(corpus: list) -> list:
    return [
        {"name": name, "sha256": hashlib.sha256(text.encode()).hexdigest()}
        for name, text in corpus
    ]


def load_seed_corpus() -> list:
    """Bundled reference levels: list of (name, level text)."""
    corpus = []
    root = resources.files("levelforge").joinpath("seeds")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".lvl"):
            corpus.append((entry.name[:-4], entry.read_text().rstrip("\n")))
    return corpus
