"""Deterministic simulation of the word-rule grid puzzle.

Rules are re-derived from word placements every turn, so pushing words
around changes what the objects do.  A turn runs a fixed phase sequence:

    1. move every YOU-governed object one cell in the input direction,
       resolving push chains (word sprites are always pushable)
    2. move every MOVE-governed object along its facing, reversing once
       and retrying when blocked
    3. rescan rules
    4. apply noun transformations (simultaneous, one target per class)
    5. resolve interactions: SINK, then KILL, then HOT/MELT
    6. rescan rules and set the game status

All public values are immutable; ``step`` returns a fresh state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .sprites import (
    CLASS_ORDER,
    IS_WORD,
    NOUN_TO_CLASS,
    is_noun,
    is_property,
    is_word,
)

ACTIONS = ("U", "D", "L", "R", "W")
DIRECTIONS = ("U", "D", "L", "R")

_DELTAS = {"U": (0, -1), "D": (0, 1), "L": (-1, 0), "R": (1, 0)}
_OPPOSITE = {"U": "D", "D": "U", "L": "R", "R": "L"}

PLAYING = "playing"
WON = "won"
NO_YOU = "no_you"

REPLAY_ACTION_LIMIT = 1000

# Canonical order of the nine tracked rule flags.
FLAG_NAMES = (
    "X-IS-X",
    "X-IS-Y",
    "X-IS-PUSH",
    "X-IS-MOVE",
    "X-IS-STOP",
    "X-IS-KILL",
    "X-IS-SINK",
    "X-IS-HOT & X-IS-MELT",
    "X,Y-IS-YOU",
)

RuleFlags = tuple  # nine booleans in FLAG_NAMES order

# A placed sprite: (sprite, facing).  Words carry facing None; objects carry
# one of "U"/"D"/"L"/"R" and spawn facing "R".
Piece = tuple


class EngineError(ValueError):
    """Malformed input or an illegal operation on a game state."""


@dataclass(frozen=True)
class LevelGrid:
    """Rectangular grid of per-cell sprite stacks (``cells[y][x]``)."""

    width: int
    height: int
    cells: tuple

    @staticmethod
    def from_stacks(stacks: Sequence[Sequence[Iterable[Piece]]]) -> "LevelGrid":
        height = len(stacks)
        if height == 0 or len(stacks[0]) == 0:
            raise EngineError("grid must be at least 1x1")
        width = len(stacks[0])
        if any(len(row) != width for row in stacks):
            raise EngineError("grid rows must have equal width")
        cells = tuple(tuple(tuple(cell) for cell in row) for row in stacks)
        return LevelGrid(width, height, cells)

    def stack(self, x: int, y: int) -> tuple:
        return self.cells[y][x]

    def pieces(self) -> Iterator[tuple]:
        """Yield (x, y, piece) over all placed sprites in scan order."""
        for y, row in enumerate(self.cells):
            for x, cell in enumerate(row):
                for piece in cell:
                    yield x, y, piece


@dataclass(frozen=True)
class RuleSet:
    """Active rules of a grid plus derived lookup tables."""

    rules: frozenset
    props: Mapping[str, frozenset]   # object class -> active property words
    transforms: Mapping[str, str]    # object class -> transformation target
    frozen_classes: frozenset        # classes protected by a reflexive rule

    @staticmethod
    def from_rules(rules: Iterable[tuple]) -> "RuleSet":
        rules = frozenset(rules)
        props: dict[str, set] = {}
        targets: dict[str, list] = {}
        frozen = set()
        for subject, complement in rules:
            cls = NOUN_TO_CLASS[subject]
            if is_property(complement):
                props.setdefault(cls, set()).add(complement)
            elif complement == subject:
                frozen.add(cls)
            else:
                targets.setdefault(cls, []).append(NOUN_TO_CLASS[complement])
        transforms = {}
        for cls, tgts in targets.items():
            if cls in frozen:
                continue
            # several X-IS-Y rules for one X: take the lowest-ranked target so
            # transformation stays one-to-one and object count is conserved
            transforms[cls] = min(tgts, key=CLASS_ORDER.__getitem__)
        return RuleSet(
            rules=rules,
            props={c: frozenset(p) for c, p in props.items()},
            transforms=transforms,
            frozen_classes=frozenset(frozen),
        )

    def classes_with(self, prop: str) -> frozenset:
        return frozenset(c for c, ps in self.props.items() if prop in ps)

    def has_prop(self, cls: str, prop: str) -> bool:
        return prop in self.props.get(cls, ())


@dataclass(frozen=True)
class GameState:
    grid: LevelGrid
    rules: RuleSet
    turn: int
    status: str


@dataclass(frozen=True)
class StepTrace:
    """What a single step destroyed and transformed (for audits)."""

    destroyed: tuple   # sprites removed by SINK/KILL/HOT-MELT
    transformed: tuple  # (old_class, new_class) pairs applied in phase 4


@dataclass(frozen=True)
class ReplayOutcome:
    won: bool
    start_flags: RuleFlags
    end_flags: RuleFlags
    steps_used: int
    final: GameState


def scan_rules(grid: LevelGrid) -> RuleSet:
    """Read every NOUN-IS-(NOUN|PROPERTY) triple, left-to-right and
    top-to-bottom.  Overlapping triples all count; duplicates collapse."""
    words = [[None] * grid.width for _ in range(grid.height)]
    for y, row in enumerate(grid.cells):
        for x, cell in enumerate(row):
            ws = [p[0] for p in cell if is_word(p[0])]
            if ws:
                words[y][x] = ws
    rules = set()
    for y in range(grid.height):
        wrow = words[y]
        for x in range(grid.width - 2):
            _match_triples(wrow[x], wrow[x + 1], wrow[x + 2], rules)
    for x in range(grid.width):
        for y in range(grid.height - 2):
            _match_triples(words[y][x], words[y + 1][x], words[y + 2][x], rules)
    return RuleSet.from_rules(rules)


def _match_triples(c0, c1, c2, rules: set) -> None:
    if not (c0 and c1 and c2) or IS_WORD not in c1:
        return
    for subject in c0:
        if not is_noun(subject):
            continue
        for complement in c2:
            if is_noun(complement) or is_property(complement):
                rules.add((subject, complement))


def rule_flags(rules: RuleSet) -> RuleFlags:
    """Condense a rule set into the nine tracked booleans."""
    reflexive = False
    transform = False
    by_prop = {p: set() for p in ("PUSH", "MOVE", "STOP", "KILL", "SINK", "HOT", "MELT", "YOU")}
    for subject, complement in rules.rules:
        if is_noun(complement):
            if complement == subject:
                reflexive = True
            else:
                transform = True
        elif complement in by_prop:
            by_prop[complement].add(subject)
    return (
        reflexive,
        transform,
        bool(by_prop["PUSH"]),
        bool(by_prop["MOVE"]),
        bool(by_prop["STOP"]),
        bool(by_prop["KILL"]),
        bool(by_prop["SINK"]),
        bool(by_prop["HOT"]) and bool(by_prop["MELT"]),
        len(by_prop["YOU"]) >= 2,
    )


def move_order(direction: str, width: int, height: int) -> list:
    """Cell visit order for a movement phase: opposite to the direction of
    travel, so a chain advances exactly one cell per turn."""
    if direction not in _DELTAS:
        raise EngineError(f"unknown direction {direction!r}")
    xs = range(width - 1, -1, -1) if direction == "R" else range(width)
    ys = range(height - 1, -1, -1) if direction == "D" else range(height)
    if direction in ("L", "R"):
        return [(x, y) for x in xs for y in ys]
    return [(x, y) for y in ys for x in xs]


class _Ent:
    """Mutable per-step entity with identity semantics."""

    __slots__ = ("sprite", "facing")

    def __init__(self, sprite: str, facing: Optional[str]):
        self.sprite = sprite
        self.facing = facing


def new_game(grid: LevelGrid) -> GameState:
    rules = scan_rules(grid)
    return GameState(grid, rules, 0, _evaluate_status(grid.cells, rules))


def step(state: GameState, action: str) -> GameState:
    return step_traced(state, action)[0]


def step_traced(state: GameState, action: str) -> tuple:
    """Like ``step`` but also returns a StepTrace of destructions and
    transformations, letting callers audit conservation."""
    if action not in ACTIONS:
        raise EngineError(f"unknown action {action!r}")
    if state.status == WON:
        raise EngineError("cannot step a won state")

    grid = state.grid
    w, h = grid.width, grid.height
    rows = [[list(_thaw(cell)) for cell in row] for row in grid.cells]
    pos: dict = {}
    for y, row in enumerate(rows):
        for x, cell in enumerate(row):
            for ent in cell:
                pos[ent] = (x, y)

    rules = state.rules

    # phase 1: player-governed movement
    if action != "W":
        movers = []
        for x, y in move_order(action, w, h):
            for ent in rows[y][x]:
                if ent.facing is not None and rules.has_prop(ent.sprite, "YOU"):
                    movers.append(ent)
        for ent in movers:
            _try_move(rows, pos, ent, action, rules, w, h)

    # phase 2: autonomous movers, row-major snapshot
    movers = [ent for row in rows for cell in row for ent in cell
              if ent.facing is not None and rules.has_prop(ent.sprite, "MOVE")]
    for ent in movers:
        if not _try_move(rows, pos, ent, ent.facing, rules, w, h):
            ent.facing = _OPPOSITE[ent.facing]
            _try_move(rows, pos, ent, ent.facing, rules, w, h)

    # phase 3 + 4: rescan, then transform simultaneously on pre-phase classes
    rules = _scan_mutable(rows, w, h)
    transformed = []
    if rules.transforms:
        for row in rows:
            for cell in row:
                for ent in cell:
                    if ent.facing is None:
                        continue
                    target = rules.transforms.get(ent.sprite)
                    if target is not None and target != ent.sprite:
                        transformed.append((ent.sprite, target))
                        ent.sprite = target

    # phase 5: interactions, SINK then KILL then HOT/MELT
    destroyed = []
    destroyed += _apply_sink(rows, pos, rules)
    destroyed += _apply_contact(rows, pos, rules, "KILL", "YOU")
    destroyed += _apply_contact(rows, pos, rules, "HOT", "MELT")

    # phase 6: final rescan and status
    rules = _scan_mutable(rows, w, h)
    cells = tuple(
        tuple(tuple((e.sprite, e.facing) for e in cell) for cell in row)
        for row in rows
    )
    new_grid = LevelGrid(w, h, cells)
    status = _evaluate_status(cells, rules)
    new_state = GameState(new_grid, rules, state.turn + 1, status)
    return new_state, StepTrace(tuple(destroyed), tuple(transformed))


def _thaw(cell: tuple) -> Iterator[_Ent]:
    for sprite, facing in cell:
        yield _Ent(sprite, facing)


def _scan_mutable(rows, w: int, h: int) -> RuleSet:
    words = [[None] * w for _ in range(h)]
    for y, row in enumerate(rows):
        for x, cell in enumerate(row):
            ws = [e.sprite for e in cell if e.facing is None]
            if ws:
                words[y][x] = ws
    rules = set()
    for y in range(h):
        wrow = words[y]
        for x in range(w - 2):
            _match_triples(wrow[x], wrow[x + 1], wrow[x + 2], rules)
    for x in range(w):
        for y in range(h - 2):
            _match_triples(words[y][x], words[y + 1][x], words[y + 2][x], rules)
    return RuleSet.from_rules(rules)


def _try_move(rows, pos, ent, direction: str, rules: RuleSet, w: int, h: int) -> bool:
    """Move ent one cell, pushing what is pushable.  Word sprites always
    push; STOP-governed objects and the border block the whole chain."""
    dx, dy = _DELTAS[direction]
    chain = [ent]
    x, y = pos[ent]
    cx, cy = x + dx, y + dy
    while True:
        if not (0 <= cx < w and 0 <= cy < h):
            return False
        cell = rows[cy][cx]
        blocked = False
        pushed = []
        for e in cell:
            if e.facing is not None and rules.has_prop(e.sprite, "STOP"):
                blocked = True
                break
            if e.facing is None or rules.has_prop(e.sprite, "PUSH"):
                pushed.append(e)
        if blocked:
            return False
        if not pushed:
            break
        chain.extend(pushed)
        cx += dx
        cy += dy
    # farthest cell first so each entity lands in a vacated cell; the sort is
    # stable, keeping stack order within a cell
    for e in sorted(chain, key=lambda e: -(pos[e][0] * dx + pos[e][1] * dy)):
        ex, ey = pos[e]
        rows[ey][ex].remove(e)
        rows[ey + dy][ex + dx].append(e)
        pos[e] = (ex + dx, ey + dy)
    return True


def _apply_sink(rows, pos, rules: RuleSet) -> list:
    """A SINK-governed object co-occupying with anything destroys the whole
    stack, itself included.  Simultaneous across cells."""
    doomed = []
    for row in rows:
        for cell in row:
            if len(cell) < 2:
                continue
            if any(e.facing is not None and rules.has_prop(e.sprite, "SINK") for e in cell):
                doomed.extend(cell)
    return _destroy(rows, pos, doomed)


def _apply_contact(rows, pos, rules: RuleSet, killer_prop: str, victim_prop: str) -> list:
    """Destroy victim-governed objects sharing a cell with a distinct
    killer-governed object (KILL vs YOU, HOT vs MELT)."""
    doomed = []
    for row in rows:
        for cell in row:
            if len(cell) < 2:
                continue
            killers = [e for e in cell
                       if e.facing is not None and rules.has_prop(e.sprite, killer_prop)]
            if not killers:
                continue
            for e in cell:
                if e.facing is None or not rules.has_prop(e.sprite, victim_prop):
                    continue
                if any(k is not e for k in killers):
                    doomed.append(e)
    return _destroy(rows, pos, doomed)


def _destroy(rows, pos, doomed) -> list:
    sprites = []
    seen = set()
    for ent in doomed:
        if id(ent) in seen:
            continue
        seen.add(id(ent))
        x, y = pos.pop(ent)
        rows[y][x].remove(ent)
        sprites.append(ent.sprite)
    return sprites


def _evaluate_status(cells, rules: RuleSet) -> str:
    you = rules.classes_with("YOU")
    win = rules.classes_with("WIN")
    any_you_instance = False
    for row in cells:
        for cell in row:
            has_you = False
            has_win = False
            for sprite, facing in cell:
                if facing is None:
                    continue
                if sprite in you:
                    has_you = True
                    any_you_instance = True
                if sprite in win:
                    has_win = True
            if has_you and has_win:
                return WON
    if not you or not any_you_instance:
        return NO_YOU
    return PLAYING


def state_signature(state: GameState) -> tuple:
    """Canonical signature for duplicate detection: stacks plus status."""
    return (state.grid.cells, state.status)


def replay(grid: LevelGrid, actions: Sequence[str]) -> ReplayOutcome:
    """Re-simulate an action sequence and report start/end rule flags."""
    if len(actions) > REPLAY_ACTION_LIMIT:
        raise EngineError(f"replay limited to {REPLAY_ACTION_LIMIT} actions")
    for a in actions:
        if a not in ACTIONS:
            raise EngineError(f"unknown action {a!r}")
    state = new_game(grid)
    start_flags = rule_flags(state.rules)
    steps = 0
    for a in actions:
        if state.status == WON:
            break
        state = step(state, a)
        steps += 1
    return ReplayOutcome(
        won=state.status == WON,
        start_flags=start_flags,
        end_flags=rule_flags(state.rules),
        steps_used=steps,
        final=state,
    )


def object_count(grid: LevelGrid) -> int:
    return sum(1 for _, _, (sprite, facing) in grid.pieces() if facing is not None)


def entity_count(grid: LevelGrid) -> int:
    return sum(len(cell) for row in grid.cells for cell in row)
