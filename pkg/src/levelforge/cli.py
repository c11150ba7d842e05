"""Batch tooling: solve, evolve, archive maintenance, serve.

Exit codes for `solve`: 0 solved, 2 unsolved within budget, 1 invalid
input.  All other subcommands use 0/1.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evolver as evolver_mod
from . import solver as solver_mod
from . import store
from .archive import Archive
from .engine import FLAG_NAMES
from .store import CodecError, SnapshotError


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelforge",
        description="Grid puzzle level workbench: solver, evolver, archive, service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a level file with the best-first playtester")
    p_solve.add_argument("level_file", type=Path)
    p_solve.add_argument("--max-expansions", type=int, default=solver_mod.DEFAULT_MAX_EXPANSIONS)
    p_solve.set_defaults(func=_cmd_solve)

    p_evolve = sub.add_parser("evolve", help="run the 2+2 evolution strategy")
    p_evolve.add_argument("--refs", type=Path, default=None,
                          help="directory of .lvl reference levels (default: bundled seeds)")
    p_evolve.add_argument("--iters", type=int, default=100)
    p_evolve.add_argument("--seed", type=int, default=0)
    p_evolve.add_argument("--init", choices=evolver_mod.INIT_MODES, default="random-marginal")
    p_evolve.add_argument("--target-fitness", type=float, default=None)
    p_evolve.add_argument("--out", type=Path, default=None)
    p_evolve.set_defaults(func=_cmd_evolve)

    p_archive = sub.add_parser("archive", help="inspect or verify an archive data directory")
    p_archive.add_argument("action", choices=("stats", "verify", "goals"))
    p_archive.add_argument("--data", type=Path, required=True)
    p_archive.add_argument("-k", type=int, default=10, help="number of goal suggestions")
    p_archive.set_defaults(func=_cmd_archive)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--data", type=Path, default=None)
    p_serve.add_argument("--config", type=Path, default=None)
    p_serve.add_argument("--webui", type=Path, default=None)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def _cmd_solve(args) -> int:
    budget = max(1, min(args.max_expansions, solver_mod.DEFAULT_MAX_EXPANSIONS))
    try:
        text = args.level_file.read_text()
        grid = store.decode(text)
    except (OSError, CodecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = solver_mod.solve(grid, solver_mod.SolverBudget(max_expansions=budget))
    if result.solved:
        print(result.solution.actions)
        print(f"expansions: {result.expansions}")
        return 0
    print(f"unsolved after {result.expansions} expansions (budget {budget})")
    return 2


def _load_refs(refs_dir: Path | None) -> list:
    if refs_dir is None:
        return [store.decode(text) for _, text in store.load_seed_corpus()]
    files = sorted(refs_dir.glob("*.lvl"))
    if not files:
        raise CodecError(f"no .lvl files in {refs_dir}")
    return [store.decode(f.read_text()) for f in files]


def _cmd_evolve(args) -> int:
    try:
        references = _load_refs(args.refs)
    except (OSError, CodecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    params = evolver_mod.EvolverParams(
        max_iterations=args.iters,
        target_fitness=args.target_fitness,
        init_mode=args.init,
    )
    state = evolver_mod.init_state(references, params, seed=args.seed)
    evolver_mod.run(state, params)
    best_grid, best_fit = state.best()
    for i, value in enumerate(state.trace):
        print(f"iter {i}: best fitness {value:.6f}")
    text = store.encode(best_grid)
    if args.out:
        args.out.write_text(text + "\n")
        print(f"best grid ({best_fit:.6f}) written to {args.out}")
    else:
        print(text)
    return 0


def _cmd_archive(args) -> int:
    snapshot_path = args.data / "snapshot.json"
    try:
        archive = Archive.load(snapshot_path) if snapshot_path.exists() else Archive()
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.action == "stats":
        stats = archive.stats()
        print(f"records: {stats['records']}")
        print(f"populated cells: {stats['populated_cells']}")
        print(f"rating events: {stats['rating_events']}")
        prov = stats["provenance"]
        print("provenance: " + ", ".join(f"{k}={v}" for k, v in prov.items()))
        print("rule activation histogram (start/end):")
        for name in FLAG_NAMES:
            row = stats["rule_histogram"][name]
            print(f"  {name}: start={row['start']} end={row['end']}")
        return 0

    if args.action == "verify":
        failures = archive.verify_all()
        if failures:
            for rid, problem in failures:
                print(f"FAIL {rid}: {problem}")
            return 1
        print(f"verified {len(archive.records)} records: all solutions replay to a win")
        return 0

    for goal in archive.suggest_goals(args.k):
        if goal.goals:
            text = "; ".join(f"{rule} at {when}" for rule, when in goal.goals)
        else:
            text = "no required rules"
        print(f"cell {goal.key}: {text}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        config = ServiceConfig.load(
            config_file=args.config,
            port=args.port,
            data_dir=args.data,
            webui_dir=args.webui,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    app = create_app(config)
    try:
        uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
    except OSError as exc:
        print(f"error: cannot bind port {config.port}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
