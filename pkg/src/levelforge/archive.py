"""Quality-diversity level repository.

Levels are indexed by an 18-bit behavior key: which of the nine tracked
rule mechanics were active when their verified solution started and when
it ended.  Each populated cell keeps every verified level (the rated
table) and at most one promoted elite.  Pairwise ratings score a level
1, 3 or 5 per comparison; elites need an average of at least 3.5 over at
least five ratings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional

from . import store
from .engine import FLAG_NAMES, RuleFlags, replay
from .store import ArchiveSnapshot, CodecError

KEY_BITS = 18
KEY_SPACE = 1 << KEY_BITS

PROVENANCES = ("user", "evolver", "mixed")

ELITE_MIN_RATINGS = 5
ELITE_MIN_AVERAGE = 3.5

DEFAULT_SAMPLE_COUNT = 50


class ArchiveError(Exception):
    """Base for archive rejections; ``code`` mirrors the API error codes."""

    code = "conflict"


class InvalidSubmission(ArchiveError):
    code = "invalid_level"


class UnverifiedSubmission(ArchiveError):
    code = "unverified"


class DuplicateSubmission(ArchiveError):
    code = "conflict"


class UnknownRecord(ArchiveError):
    code = "not_found"


def behavior_key(start: RuleFlags, end: RuleFlags) -> int:
    """Pack start flags into bits 0-8 and end flags into bits 9-17."""
    key = 0
    for i, bit in enumerate(start):
        if bit:
            key |= 1 << i
    for i, bit in enumerate(end):
        if bit:
            key |= 1 << (9 + i)
    return key


def split_key(key: int) -> tuple:
    start = tuple(bool(key >> i & 1) for i in range(9))
    end = tuple(bool(key >> (9 + i) & 1) for i in range(9))
    return start, end


def describe_key(key: int) -> list:
    """Human-readable goal list: rule name plus start/end qualifier."""
    start, end = split_key(key)
    goals = [{"rule": FLAG_NAMES[i], "when": "start"} for i, b in enumerate(start) if b]
    goals += [{"rule": FLAG_NAMES[i], "when": "end"} for i, b in enumerate(end) if b]
    return goals


@dataclass
class RatingEvent:
    level_a: str
    level_b: str
    harder_winner: str
    design_winner: str
    rater: str
    timestamp: str


@dataclass
class LevelRecord:
    id: str
    author: str
    grid_text: str
    solution: str
    start_flags: RuleFlags
    end_flags: RuleFlags
    cell: int
    created_at: str
    provenance: str
    scores: list = field(default_factory=list)   # one 1/3/5 entry per rating event

    @property
    def rating_sum(self) -> int:
        return sum(self.scores)

    @property
    def rating_count(self) -> int:
        return len(self.scores)

    @property
    def average_rating(self) -> Optional[float]:
        return self.rating_sum / self.rating_count if self.scores else None


@dataclass
class Cell:
    key: int
    rated: list = field(default_factory=list)    # record ids, insertion order
    elite: Optional[str] = None


@dataclass(frozen=True)
class GoalSpec:
    key: int
    goals: tuple


class Archive:
    """In-memory archive with snapshot persistence."""

    def __init__(self, clock: Optional[Callable[[], str]] = None):
        self.records: dict[str, LevelRecord] = {}
        self.cells: dict[int, Cell] = {}
        self.events: list[RatingEvent] = []
        self._clock = clock or (lambda: datetime.now(timezone.utc).isoformat())
        self._next_id = 1

    # -- submission ---------------------------------------------------

    def submit(self, grid_text: str, solution: str, author: str = "",
               provenance: str = "user") -> LevelRecord:
        """Verify the solution by replay, then file the level in its cell."""
        if provenance not in PROVENANCES:
            raise InvalidSubmission(f"unknown provenance {provenance!r}")
        try:
            grid = store.decode(grid_text)
            store.validate_design_bounds(grid)
            store.validate_solution(solution)
        except CodecError as exc:
            raise InvalidSubmission(str(exc)) from exc
        canonical = store.encode(grid)
        outcome = replay(grid, solution)
        if not outcome.won:
            raise UnverifiedSubmission("solution does not win the level")
        key = behavior_key(outcome.start_flags, outcome.end_flags)
        cell = self.cells.get(key)
        if cell is not None:
            for rid in cell.rated:
                if self.records[rid].grid_text == canonical:
                    raise DuplicateSubmission(f"duplicate of {rid} in cell {key}")
        record = LevelRecord(
            id=f"lvl-{self._next_id:04d}",
            author=author,
            grid_text=canonical,
            solution=solution,
            start_flags=outcome.start_flags,
            end_flags=outcome.end_flags,
            cell=key,
            created_at=self._clock(),
            provenance=provenance,
        )
        self._next_id += 1
        self.records[record.id] = record
        self.cells.setdefault(key, Cell(key)).rated.append(record.id)
        return record

    def get(self, record_id: str) -> LevelRecord:
        try:
            return self.records[record_id]
        except KeyError:
            raise UnknownRecord(f"unknown level {record_id!r}") from None

    # -- rating -------------------------------------------------------

    def record_rating(self, level_a: str, level_b: str, harder_winner: str,
                      design_winner: str, rater: str = "") -> tuple:
        """Score both levels of a comparison: 1 plus 2 per category won."""
        if level_a == level_b:
            raise ArchiveError("cannot compare a level with itself")
        rec_a = self.get(level_a)
        rec_b = self.get(level_b)
        if harder_winner not in (level_a, level_b):
            raise ArchiveError("harder_winner must be one of the compared levels")
        if design_winner not in (level_a, level_b):
            raise ArchiveError("design_winner must be one of the compared levels")
        event = RatingEvent(level_a, level_b, harder_winner, design_winner,
                            rater, self._clock())
        self.events.append(event)
        for rec in (rec_a, rec_b):
            wins = (harder_winner == rec.id) + (design_winner == rec.id)
            rec.scores.append(1 + 2 * wins)
        self.promote_elite(rec_a.cell)
        if rec_b.cell != rec_a.cell:
            self.promote_elite(rec_b.cell)
        return rec_a, rec_b

    def sample_rating_pair(self, seed: Optional[int] = None) -> tuple:
        """Uniform pair from the whole rated population, cells ignored."""
        if len(self.records) < 2:
            raise ArchiveError("need at least two levels to rate")
        rng = random.Random(seed)
        return tuple(rng.sample(sorted(self.records), 2))

    def promote_elite(self, key: int) -> Optional[str]:
        """Re-evaluate a cell's elite: best qualifying average, replaced
        only by a strictly higher one."""
        cell = self.cells.get(key)
        if cell is None:
            return None
        qualified = [
            rid for rid in cell.rated
            if self.records[rid].rating_count >= ELITE_MIN_RATINGS
            and self.records[rid].average_rating >= ELITE_MIN_AVERAGE
        ]
        incumbent = cell.elite
        if incumbent is not None and incumbent in qualified:
            best = max(qualified, key=lambda rid: self.records[rid].average_rating)
            if self.records[best].average_rating > self.records[incumbent].average_rating:
                cell.elite = best
        else:
            cell.elite = max(qualified, key=lambda rid: self.records[rid].average_rating,
                             default=None)
        return cell.elite

    # -- browsing -----------------------------------------------------

    def cell_summary(self, key: int) -> dict:
        start, end = split_key(key)
        cell = self.cells.get(key)
        return {
            "key": key,
            "start_flags": list(start),
            "end_flags": list(end),
            "popcount": bin(key).count("1"),
            "populated": cell is not None,
            "record_count": len(cell.rated) if cell else 0,
            "elite": cell.elite if cell else None,
            "goals": describe_key(key),
        }

    def sample_cells(self, count: int = DEFAULT_SAMPLE_COUNT, flag_filter: str = "",
                     sort: str = "random", seed: Optional[int] = None,
                     populated_only: bool = False) -> list:
        """Uniform sample without replacement over cells matching the
        filter; unpopulated cells are fair game unless excluded."""
        require, forbid = parse_filter(flag_filter)
        rng = random.Random(seed)
        if populated_only:
            pool = sorted(k for k in self.cells if k & require == require and k & forbid == 0)
            keys = pool if len(pool) <= count else rng.sample(pool, count)
        else:
            free_bits = [b for b in range(KEY_BITS) if not (require | forbid) >> b & 1]
            total = 1 << len(free_bits)
            if total <= count:
                picks = range(total)
            else:
                picks = rng.sample(range(total), count)
            keys = [_spread(i, free_bits) | require for i in picks]
        if sort == "simplicity":
            keys.sort(key=lambda k: (bin(k).count("1"), k))
        elif sort != "random":
            raise ValueError(f"unknown sort {sort!r}")
        return [self.cell_summary(k) for k in keys]

    def suggest_goals(self, k: int = 10) -> list:
        """The k simplest unpopulated cells, as goal specs."""
        out = []
        for pc in range(KEY_BITS + 1):
            if len(out) >= k:
                break
            level_keys = sorted(
                sum(1 << b for b in combo) for combo in combinations(range(KEY_BITS), pc)
            )
            for key in level_keys:
                if key not in self.cells:
                    out.append(GoalSpec(key=key, goals=tuple(
                        (g["rule"], g["when"]) for g in describe_key(key)
                    )))
                    if len(out) >= k:
                        break
        return out

    # -- maintenance --------------------------------------------------

    def verify_all(self) -> list:
        """Replay every stored solution; return [(id, problem)] failures."""
        failures = []
        for rid, rec in sorted(self.records.items()):
            try:
                outcome = replay(store.decode(rec.grid_text), rec.solution)
            except (CodecError, ValueError) as exc:
                failures.append((rid, f"replay error: {exc}"))
                continue
            if not outcome.won:
                failures.append((rid, "solution no longer wins"))
            elif behavior_key(outcome.start_flags, outcome.end_flags) != rec.cell:
                failures.append((rid, "cell key does not match replay flags"))
        return failures

    def stats(self) -> dict:
        histogram = {
            name: {"start": 0, "end": 0} for name in FLAG_NAMES
        }
        for rec in self.records.values():
            for i, bit in enumerate(rec.start_flags):
                if bit:
                    histogram[FLAG_NAMES[i]]["start"] += 1
            for i, bit in enumerate(rec.end_flags):
                if bit:
                    histogram[FLAG_NAMES[i]]["end"] += 1
        provenance = {p: 0 for p in PROVENANCES}
        for rec in self.records.values():
            provenance[rec.provenance] += 1
        return {
            "records": len(self.records),
            "populated_cells": len(self.cells),
            "rating_events": len(self.events),
            "provenance": provenance,
            "rule_histogram": histogram,
        }

    def elite_grids(self) -> list:
        return [self.records[c.elite].grid_text for c in self.cells.values()
                if c.elite is not None]

    # -- persistence --------------------------------------------------

    def to_snapshot(self) -> ArchiveSnapshot:
        records = [
            {
                "id": r.id,
                "author": r.author,
                "grid": r.grid_text,
                "solution": r.solution,
                "start_flags": list(r.start_flags),
                "end_flags": list(r.end_flags),
                "cell": r.cell,
                "scores": list(r.scores),
                "created_at": r.created_at,
                "provenance": r.provenance,
            }
            for _, r in sorted(self.records.items())
        ]
        events = [
            {
                "level_a": e.level_a,
                "level_b": e.level_b,
                "harder_winner": e.harder_winner,
                "design_winner": e.design_winner,
                "rater": e.rater,
                "timestamp": e.timestamp,
            }
            for e in self.events
        ]
        cells = {
            str(c.key): {"rated": list(c.rated), "elite": c.elite}
            for c in self.cells.values()
        }
        return ArchiveSnapshot(
            records=records,
            events=events,
            cells=cells,
            seed_corpus=store.seed_manifest(store.load_seed_corpus()),
        )

    @classmethod
    def from_snapshot(cls, snapshot: ArchiveSnapshot,
                      clock: Optional[Callable[[], str]] = None) -> "Archive":
        archive = cls(clock=clock)
        for rec in snapshot.records:
            record = LevelRecord(
                id=rec["id"],
                author=rec["author"],
                grid_text=rec["grid"],
                solution=rec["solution"],
                start_flags=tuple(bool(b) for b in rec["start_flags"]),
                end_flags=tuple(bool(b) for b in rec["end_flags"]),
                cell=rec["cell"],
                created_at=rec["created_at"],
                provenance=rec["provenance"],
                scores=list(rec["scores"]),
            )
            archive.records[record.id] = record
        for key_str, cell in snapshot.cells.items():
            key = int(key_str)
            archive.cells[key] = Cell(key=key, rated=list(cell["rated"]),
                                      elite=cell.get("elite"))
        archive.events = [RatingEvent(**e) for e in snapshot.events]
        numbers = [int(rid.split("-")[1]) for rid in archive.records
                   if rid.startswith("lvl-")]
        archive._next_id = max(numbers, default=0) + 1
        return archive

    def save(self, path: str | Path) -> None:
        store.save_snapshot(self.to_snapshot(), path)

    @classmethod
    def load(cls, path: str | Path,
             clock: Optional[Callable[[], str]] = None) -> "Archive":
        return cls.from_snapshot(store.load_snapshot(path), clock=clock)


def parse_filter(spec: str) -> tuple:
    """Parse filter tokens like "s2,e5,!s0" into (require, forbid) masks
    over the 18-bit key.  's'/'start' pick start flags, 'e'/'end' end
    flags; a '!' prefix forbids instead of requires."""
    require = 0
    forbid = 0
    if not spec:
        return require, forbid
    for raw in spec.split(","):
        token = raw.strip()
        if not token:
            continue
        negate = token.startswith("!")
        if negate:
            token = token[1:]
        side = token.rstrip("0123456789").lower()
        digits = token[len(side):]
        if side in ("s", "start"):
            base = 0
        elif side in ("e", "end"):
            base = 9
        else:
            raise ValueError(f"bad filter token {raw!r}")
        if not digits.isdigit() or not 0 <= int(digits) <= 8:
            raise ValueError(f"bad filter token {raw!r}: flag index must be 0-8")
        bit = 1 << (base + int(digits))
        if negate:
            forbid |= bit
        else:
            require |= bit
    if require & forbid:
        raise ValueError("filter requires and forbids the same flag")
    return require, forbid


def _spread(index: int, free_bits: list) -> int:
    key = 0
    for i, bit in enumerate(free_bits):
        if index >> i & 1:
            key |= 1 << bit
    return key
