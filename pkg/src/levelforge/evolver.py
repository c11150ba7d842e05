"""Interactive 2+2 evolution strategy over level grids.

Fitness (minimized) is the smoothed, symmetrized KL divergence between
3x3 tile-pattern distributions of the candidate and its closest reference
level, plus penalties for unnecessary objects, unplayability and empty
space:

    fitness = min_ref kl(ref, candidate) + u + (1 - p) + 0.1 * s

Mutation resamples a few cells from the references' single-tile marginal
and occasionally pastes a whole reference pattern.  Everything is
reproducible from the generator-state seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import EngineError, LevelGrid, scan_rules
from .sprites import CLASS_TO_NOUN, EMPTY_CHAR, SPRITE_TO_CHAR, is_object

PATTERN_WINDOW = 3

INIT_MODES = ("random-marginal", "copy-reference", "from-editor")


@dataclass(frozen=True)
class PatternDistribution:
    counts: dict            # 9-char pattern key -> occurrences
    total: int
    window: int = PATTERN_WINDOW


@dataclass
class EvolverParams:
    epsilon: float = 1e-6
    mutation_rate: float = 2.0
    pattern_paste_prob: float = 0.3
    max_iterations: int = 100
    target_fitness: Optional[float] = None
    init_mode: str = "random-marginal"

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.pattern_paste_prob <= 1:
            raise ValueError("pattern_paste_prob must be in [0, 1]")
        if self.mutation_rate < 1:
            raise ValueError("mutation_rate must be at least 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown init_mode {self.init_mode!r}")


@dataclass
class EvolverState:
    population: list                 # exactly 2 (grid, fitness) pairs
    references: list                 # non-empty list of LevelGrid
    iteration: int
    seed: int
    rng: np.random.Generator
    paused: bool = False
    trace: list = field(default_factory=list)   # best fitness after each generation
    _ref_dists: list = field(default_factory=list)
    _marginal: tuple = ()

    def best(self) -> tuple:
        return min(self.population, key=lambda pair: pair[1])


def flat_chars(grid: LevelGrid) -> list:
    """Row-major topmost-sprite characters; empty stacks map to '.'."""
    out = []
    for row in grid.cells:
        for cell in row:
            out.append(SPRITE_TO_CHAR[cell[-1][0]] if cell else EMPTY_CHAR)
    return out


def extract_patterns(grid: LevelGrid) -> PatternDistribution:
    """Count every fully-inside 3x3 window, stacks flattened to their
    topmost sprite."""
    if grid.width < PATTERN_WINDOW or grid.height < PATTERN_WINDOW:
        raise EngineError(
            f"grid must be at least {PATTERN_WINDOW}x{PATTERN_WINDOW} for pattern extraction"
        )
    chars = flat_chars(grid)
    w = grid.width
    counts: dict = {}
    for y in range(grid.height - PATTERN_WINDOW + 1):
        base = y * w
        for x in range(w - PATTERN_WINDOW + 1):
            i = base + x
            key = "".join(
                chars[i] + chars[i + 1] + chars[i + 2]
                for i in (i, i + w, i + 2 * w)
            )
            counts[key] = counts.get(key, 0) + 1
    return PatternDistribution(counts=counts, total=sum(counts.values()))


def kl_divergence(p: PatternDistribution, q: PatternDistribution, epsilon: float = 1e-6) -> float:
    """Symmetrized KL over the union support with epsilon smoothing."""
    if p.total <= 0 or q.total <= 0:
        raise EngineError("cannot compare empty pattern distributions")
    support = set(p.counts) | set(q.counts)
    denom_p = p.total + epsilon * len(support)
    denom_q = q.total + epsilon * len(support)
    total = 0.0
    for key in support:
        ph = (p.counts.get(key, 0) + epsilon) / denom_p
        qh = (q.counts.get(key, 0) + epsilon) / denom_q
        log = math.log(ph / qh)
        total += 0.5 * ph * log - 0.5 * qh * log
    return total


def unnecessary_ratio(grid: LevelGrid) -> float:
    """Share of objects whose noun word is absent from the grid."""
    nouns_present = set()
    objects = []
    for _, _, (sprite, facing) in grid.pieces():
        if facing is None:
            nouns_present.add(sprite)
        else:
            objects.append(sprite)
    if not objects:
        return 0.0
    orphans = sum(1 for cls in objects if CLASS_TO_NOUN[cls] not in nouns_present)
    return orphans / len(objects)


def playability_flag(grid: LevelGrid) -> int:
    """1 iff some X-IS-YOU rule is formed and a WIN word exists anywhere."""
    has_win_word = any(
        sprite == "WIN" for _, _, (sprite, facing) in grid.pieces() if facing is None
    )
    if not has_win_word:
        return 0
    rules = scan_rules(grid)
    return 1 if any(comp == "YOU" for _, comp in rules.rules) else 0


def emptiness_ratio(grid: LevelGrid) -> float:
    empty = sum(1 for row in grid.cells for cell in row if not cell)
    return empty / (grid.width * grid.height)


def fitness(
    candidate: LevelGrid,
    references: Sequence[LevelGrid],
    params: EvolverParams,
    ref_dists: Optional[Sequence[PatternDistribution]] = None,
) -> float:
    """Distance to the closest reference plus the three penalty terms.
    Unplayability is the penalty, hence the (1 - p) term."""
    if not references:
        raise EngineError("fitness needs at least one reference level")
    if ref_dists is None:
        ref_dists = [extract_patterns(ref) for ref in references]
    cand = extract_patterns(candidate)
    kl = min(kl_divergence(rd, cand, params.epsilon) for rd in ref_dists)
    u = unnecessary_ratio(candidate)
    p = playability_flag(candidate)
    s = emptiness_ratio(candidate)
    return kl + u + (1 - p) + 0.1 * s


def _marginal_from(references: Sequence[LevelGrid]) -> tuple:
    counts: dict = {}
    for ref in references:
        for ch in flat_chars(ref):
            counts[ch] = counts.get(ch, 0) + 1
    chars = sorted(counts)
    weights = np.array([counts[c] for c in chars], dtype=float)
    return chars, weights / weights.sum()


def _grid_from_chars(chars: list, width: int, height: int) -> LevelGrid:
    from .sprites import CHAR_TO_SPRITE

    stacks = []
    for y in range(height):
        row = []
        for x in range(width):
            ch = chars[y * width + x]
            if ch == EMPTY_CHAR:
                row.append(())
            else:
                sprite = CHAR_TO_SPRITE[ch]
                row.append(((sprite, "R" if is_object(sprite) else None),))
        stacks.append(row)
    return LevelGrid.from_stacks(stacks)


def mutate(grid: LevelGrid, params: EvolverParams, rng: np.random.Generator,
           marginal: Optional[tuple] = None,
           references: Optional[Sequence[LevelGrid]] = None) -> LevelGrid:
    """Resample 1 + Poisson(rate - 1) cells from the reference marginal;
    with pattern_paste_prob also stamp one reference 3x3 pattern at a
    uniform in-bounds anchor."""
    if marginal is None:
        if not references:
            raise EngineError("mutate needs references or a precomputed marginal")
        marginal = _marginal_from(references)
    chars, probs = marginal
    cells = flat_chars(grid)
    w, h = grid.width, grid.height

    m = 1 + int(rng.poisson(params.mutation_rate - 1))
    for _ in range(m):
        x = int(rng.integers(w))
        y = int(rng.integers(h))
        cells[y * w + x] = chars[int(rng.choice(len(chars), p=probs))]

    if references and rng.random() < params.pattern_paste_prob:
        anchors = [
            (ref, ax, ay)
            for ref in references
            if ref.width >= PATTERN_WINDOW and ref.height >= PATTERN_WINDOW
            for ay in range(ref.height - PATTERN_WINDOW + 1)
            for ax in range(ref.width - PATTERN_WINDOW + 1)
        ]
        if anchors and w >= PATTERN_WINDOW and h >= PATTERN_WINDOW:
            ref, ax, ay = anchors[int(rng.integers(len(anchors)))]
            ref_chars = flat_chars(ref)
            tx = int(rng.integers(w - PATTERN_WINDOW + 1))
            ty = int(rng.integers(h - PATTERN_WINDOW + 1))
            for dy in range(PATTERN_WINDOW):
                for dx in range(PATTERN_WINDOW):
                    cells[(ty + dy) * w + tx + dx] = ref_chars[(ay + dy) * ref.width + ax + dx]
    return _grid_from_chars(cells, w, h)


def init_state(
    references: Sequence[LevelGrid],
    params: EvolverParams,
    seed: int,
    editor_grid: Optional[LevelGrid] = None,
) -> EvolverState:
    params.validate()
    if not references:
        raise EngineError("evolver needs at least one reference level")
    rng = np.random.default_rng(seed)
    marginal = _marginal_from(references)
    parents = []
    for _ in range(2):
        if params.init_mode == "from-editor":
            if editor_grid is None:
                raise EngineError("init_mode from-editor needs a starting grid")
            parents.append(editor_grid)
        elif params.init_mode == "copy-reference":
            parents.append(references[int(rng.integers(len(references)))])
        else:  # random-marginal
            template = references[int(rng.integers(len(references)))]
            w, h = template.width, template.height
            chars, probs = marginal
            picks = rng.choice(len(chars), size=w * h, p=probs)
            parents.append(_grid_from_chars([chars[int(i)] for i in picks], w, h))
    ref_dists = [extract_patterns(ref) for ref in references]
    population = [
        (g, fitness(g, references, params, ref_dists)) for g in parents
    ]
    state = EvolverState(
        population=population,
        references=list(references),
        iteration=0,
        seed=seed,
        rng=rng,
        _ref_dists=ref_dists,
        _marginal=marginal,
    )
    state.trace.append(state.best()[1])
    return state


def evolve_step(state: EvolverState, params: EvolverParams) -> EvolverState:
    """One 2+2 generation: both parents spawn, best two of four survive.
    Ties keep the elders."""
    if state.paused:
        raise EngineError("evolver session is paused")
    pool = []
    for age, (grid, fit) in enumerate(state.population):
        pool.append((fit, age, grid))
    for age, (grid, _) in enumerate(list(state.population), start=2):
        child = mutate(grid, params, state.rng,
                       marginal=state._marginal, references=state.references)
        pool.append((fitness(child, state.references, params, state._ref_dists), age, child))
    pool.sort(key=lambda entry: (entry[0], entry[1]))
    state.population = [(grid, fit) for fit, _, grid in pool[:2]]
    state.iteration += 1
    state.trace.append(state.best()[1])
    return state


def run(state: EvolverState, params: EvolverParams) -> EvolverState:
    """Iterate until max_iterations, the fitness target, or a pause."""
    while state.iteration < params.max_iterations and not state.paused:
        if params.target_fitness is not None and state.best()[1] <= params.target_fitness:
            break
        evolve_step(state, params)
    return state
