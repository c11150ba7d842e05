"""Best-first automated playtester.

Nodes are ordered by a heuristic averaging three Manhattan distances from
the player-governed objects: to the nearest winning object, to the nearest
word sprite, and to the nearest pushable entity.  Expansion is counted at
node pop and hard-capped, so an unsolved result is a budget report, not a
proof of unsolvability.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .engine import (
    ACTIONS,
    REPLAY_ACTION_LIMIT,
    WON,
    EngineError,
    GameState,
    LevelGrid,
    RuleFlags,
    new_game,
    replay,
    state_signature,
    step,
)

DEFAULT_MAX_EXPANSIONS = 10000

_CHILD_ACTIONS = ACTIONS  # U, D, L, R, W


@dataclass(frozen=True)
class SolverBudget:
    max_expansions: int = DEFAULT_MAX_EXPANSIONS


@dataclass(frozen=True)
class Solution:
    actions: str
    start_flags: RuleFlags
    end_flags: RuleFlags


@dataclass(frozen=True)
class SolveResult:
    solved: bool
    solution: Solution | None
    expansions: int


def heuristic(state: GameState) -> float:
    """(n + w + p) / 3 over minimum Manhattan distances from YOU-governed
    objects to WIN-governed objects, word sprites, and pushable entities.
    A missing group contributes width + height."""
    grid = state.grid
    fallback = grid.width + grid.height
    you = state.rules.classes_with("YOU")
    win = state.rules.classes_with("WIN")
    push = state.rules.classes_with("PUSH")

    you_at = []
    win_at = []
    words_at = []
    push_at = []
    for x, y, (sprite, facing) in grid.pieces():
        if facing is None:
            words_at.append((x, y))
            push_at.append((x, y))
            continue
        if sprite in you:
            you_at.append((x, y))
        if sprite in win:
            win_at.append((x, y))
        if sprite in push:
            push_at.append((x, y))

    if not you_at:
        return float(fallback)
    n = _nearest(you_at, win_at, fallback)
    w = _nearest(you_at, words_at, fallback)
    p = _nearest(you_at, push_at, fallback)
    return (n + w + p) / 3


def _nearest(sources: list, targets: list, fallback: int) -> int:
    if not targets:
        return fallback
    return min(abs(sx - tx) + abs(sy - ty)
               for sx, sy in sources for tx, ty in targets)


def solve(grid: LevelGrid, budget: SolverBudget | None = None) -> SolveResult:
    """Best-first search over action strings.  Ties break by depth, then by
    insertion order; duplicate states are pruned at pop."""
    budget = budget or SolverBudget()
    if budget.max_expansions < 1:
        raise EngineError("budget must allow at least one expansion")

    start = new_game(grid)
    serial = 0
    heap = [(heuristic(start), 0, serial, start, "")]
    seen = set()
    expansions = 0
    while heap and expansions < budget.max_expansions:
        h, depth, _, state, actions = heapq.heappop(heap)
        expansions += 1
        sig = state_signature(state)
        if sig in seen:
            continue
        seen.add(sig)
        if state.status == WON:
            outcome = replay(grid, actions)
            assert outcome.won
            return SolveResult(
                solved=True,
                solution=Solution(actions, outcome.start_flags, outcome.end_flags),
                expansions=expansions,
            )
        if depth >= REPLAY_ACTION_LIMIT:  # keep solutions replayable
            continue
        for action in _CHILD_ACTIONS:
            child = step(state, action)
            serial += 1
            heapq.heappush(heap, (heuristic(child), depth + 1, serial, child, actions + action))
    return SolveResult(solved=False, solution=None, expansions=expansions)
