"""Independent reference implementations used to validate the real ones.

Everything here is deliberately naive: exhaustive breadth-first search,
cell-by-cell distance scans, direct window enumeration.  None of it shares
code with the modules under test beyond the engine's step function (the
solver oracle needs *some* simulator, and the engine itself is validated
by hand-simulated fixtures elsewhere).
"""

from __future__ import annotations

from collections import deque

from levelforge.engine import (
    ACTIONS,
    WON,
    GameState,
    LevelGrid,
    new_game,
    state_signature,
    step,
)


def bfs_solve(grid: LevelGrid, max_depth: int) -> str | None:
    """Exhaustive breadth-first search; returns a shortest winning action
    string within max_depth, or None."""
    start = new_game(grid)
    if start.status == WON:
        return ""
    seen = {state_signature(start)}
    queue = deque([(start, "")])
    while queue:
        state, actions = queue.popleft()
        if len(actions) >= max_depth:
            continue
        for action in ACTIONS:
            child = step(state, action)
            sig = state_signature(child)
            if sig in seen:
                continue
            seen.add(sig)
            if child.status == WON:
                return actions + action
            queue.append((child, actions + action))
    return None


def brute_heuristic(state: GameState) -> float:
    """Distance average recomputed straight off the cells, one full grid
    scan per group, no shared position indexing."""
    grid = state.grid
    fallback = grid.width + grid.height

    def positions(pred):
        found = []
        for y in range(grid.height):
            for x in range(grid.width):
                for sprite, facing in grid.cells[y][x]:
                    if pred(sprite, facing):
                        found.append((x, y))
                        break
        return found

    def governed(prop):
        classes = state.rules.classes_with(prop)
        return positions(lambda s, f: f is not None and s in classes)

    you = positions(
        lambda s, f: f is not None and s in state.rules.classes_with("YOU")
    )
    if not you:
        return float(fallback)

    def best(targets):
        if not targets:
            return fallback
        return min(abs(ax - bx) + abs(ay - by) for ax, ay in you for bx, by in targets)

    words = positions(lambda s, f: f is None)
    push_classes = state.rules.classes_with("PUSH")
    pushable = positions(lambda s, f: f is None or s in push_classes)
    return (best(governed("WIN")) + best(words) + best(pushable)) / 3


def enumerate_windows(grid: LevelGrid, size: int = 3) -> dict:
    """Direct sliding-window count over topmost-sprite characters."""
    from levelforge.sprites import EMPTY_CHAR, SPRITE_TO_CHAR

    table: dict = {}
    for y in range(grid.height - size + 1):
        for x in range(grid.width - size + 1):
            key = []
            for dy in range(size):
                for dx in range(size):
                    cell = grid.cells[y + dy][x + dx]
                    key.append(SPRITE_TO_CHAR[cell[-1][0]] if cell else EMPTY_CHAR)
            key = "".join(key)
            table[key] = table.get(key, 0) + 1
    return table


def enumerate_rule_triples(grid: LevelGrid) -> set:
    """Hand-style rule scan: slide a 3-window over rows, then columns."""
    from levelforge.sprites import is_noun, is_property

    def words_at(x, y):
        return [s for s, f in grid.cells[y][x] if f is None]

    found = set()
    for y in range(grid.height):
        for x in range(grid.width - 2):
            for a in words_at(x, y):
                for b in words_at(x + 1, y):
                    for c in words_at(x + 2, y):
                        if is_noun(a) and b == "IS" and (is_noun(c) or is_property(c)):
                            found.add((a, c))
    for x in range(grid.width):
        for y in range(grid.height - 2):
            for a in words_at(x, y):
                for b in words_at(x, y + 1):
                    for c in words_at(x, y + 2):
                        if is_noun(a) and b == "IS" and (is_noun(c) or is_property(c)):
                            found.add((a, c))
    return found
