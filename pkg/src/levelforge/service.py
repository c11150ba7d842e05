"""HTTP API over the engine, solver, evolver sessions and archive.

The archive is the only durable state (snapshot in the data directory,
saved after every mutation).  Evolver sessions live in memory and expire
after a configurable idle time.  Every failure maps to one machine code:
invalid_level, unverified, not_found, budget_exhausted or conflict.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import archive as archive_mod
from . import evolver as evolver_mod
from . import solver as solver_mod
from . import store
from .archive import Archive, ArchiveError
from .engine import EngineError, replay
from .store import CodecError

API_VERSION = "1"

ENV_PREFIX = "LEVELFORGE_"


@dataclass
class ServiceConfig:
    port: int = 8000
    data_dir: Path = Path("data")
    budget_cap: int = solver_mod.DEFAULT_MAX_EXPANSIONS
    session_ttl_minutes: float = 30.0
    webui_dir: Optional[Path] = None

    @classmethod
    def load(cls, config_file: Optional[str | Path] = None, env: Optional[dict] = None,
             **overrides) -> "ServiceConfig":
        """File values, then environment, then explicit overrides."""
        values: dict = {}
        if config_file:
            with open(config_file) as fh:
                raw = json.load(fh)
            unknown = set(raw) - {f for f in cls.__dataclass_fields__}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        env = os.environ if env is None else env
        for key, cast in (("port", int), ("data_dir", str), ("budget_cap", int),
                          ("session_ttl_minutes", float), ("webui_dir", str)):
            raw_val = env.get(ENV_PREFIX + key.upper())
            if raw_val is not None:
                values[key] = cast(raw_val)
        values.update({k: v for k, v in overrides.items() if v is not None})
        config = cls(**values)
        config.data_dir = Path(config.data_dir)
        if config.webui_dir is not None:
            config.webui_dir = Path(config.webui_dir)
        return config

    @property
    def snapshot_path(self) -> Path:
        return self.data_dir / "snapshot.json"


@dataclass
class EvolverSession:
    id: str
    params: evolver_mod.EvolverParams
    state: evolver_mod.EvolverState
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, position: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.position = position


def _codec_error(exc: CodecError) -> ApiError:
    position = None
    if exc.row is not None or exc.col is not None:
        position = {"row": exc.row, "col": exc.col}
    return ApiError(400, "invalid_level", str(exc), position)


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    config.data_dir.mkdir(parents=True, exist_ok=True)

    if config.snapshot_path.exists():
        archive = Archive.load(config.snapshot_path)
    else:
        archive = Archive()

    app = FastAPI(title="levelforge", version=API_VERSION)
    app.state.config = config
    app.state.archive = archive
    app.state.archive_lock = threading.Lock()
    app.state.sessions: dict[str, EvolverSession] = {}
    app.state.sessions_lock = threading.Lock()
    app.state.idempotency: dict[str, dict] = {}

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        body = {"error": {"code": exc.code, "message": exc.message}}
        if exc.position:
            body["error"]["position"] = exc.position
        return JSONResponse(status_code=exc.status, content=body)

    def _persist():
        archive.save(config.snapshot_path)

    def _expire_sessions():
        ttl = config.session_ttl_minutes * 60
        now = time.monotonic()
        with app.state.sessions_lock:
            for sid in [s for s, sess in app.state.sessions.items()
                        if now - sess.last_access > ttl]:
                del app.state.sessions[sid]

    def _session(session_id: str) -> EvolverSession:
        _expire_sessions()
        sess = app.state.sessions.get(session_id)
        if sess is None:
            raise ApiError(404, "not_found", f"unknown evolver session {session_id!r}")
        sess.last_access = time.monotonic()
        return sess

    def _record_view(record: archive_mod.LevelRecord) -> dict:
        return {
            "id": record.id,
            "author": record.author,
            "grid": record.grid_text,
            "solution": record.solution,
            "start_flags": list(record.start_flags),
            "end_flags": list(record.end_flags),
            "cell": record.cell,
            "provenance": record.provenance,
            "created_at": record.created_at,
            "rating_count": record.rating_count,
            "average_rating": record.average_rating,
        }

    def _session_view(sess: EvolverSession) -> dict:
        best_grid, best_fit = sess.state.best()
        return {
            "id": sess.id,
            "iteration": sess.state.iteration,
            "paused": sess.state.paused,
            "seed": sess.state.seed,
            "population": [
                {"grid": store.encode(g), "fitness": f} for g, f in sess.state.population
            ],
            "best": {"grid": store.encode(best_grid), "fitness": best_fit},
            "trace": list(sess.state.trace),
        }

    @app.get("/health")
    def health():
        return {"status": "ok", "version": API_VERSION}

    @app.get("/cells")
    def cells(count: int = Query(archive_mod.DEFAULT_SAMPLE_COUNT, ge=1, le=500),
              filter: str = "", sort: str = "random",
              seed: Optional[int] = None, populated: bool = False):
        try:
            summaries = archive.sample_cells(count=count, flag_filter=filter,
                                             sort=sort, seed=seed,
                                             populated_only=populated)
        except ValueError as exc:
            raise ApiError(400, "conflict", str(exc))
        return {"cells": summaries}

    @app.get("/goals")
    def goals(k: int = Query(10, ge=1, le=200)):
        return {"goals": [
            {"key": g.key, "goals": [{"rule": rule, "when": when} for rule, when in g.goals]}
            for g in archive.suggest_goals(k)
        ]}

    @app.get("/levels")
    def levels(limit: int = Query(100, ge=1, le=1000)):
        views = [_record_view(r) for _, r in sorted(archive.records.items())]
        return {"levels": views[:limit], "total": len(archive.records)}

    @app.get("/levels/{level_id}")
    def get_level(level_id: str):
        try:
            return _record_view(archive.get(level_id))
        except ArchiveError as exc:
            raise ApiError(404, "not_found", str(exc))

    @app.get("/cells/{key}/levels")
    def cell_levels(key: int):
        if not 0 <= key < archive_mod.KEY_SPACE:
            raise ApiError(404, "not_found", f"cell key {key} outside the 18-bit key space")
        cell = archive.cells.get(key)
        ids = cell.rated if cell else []
        return {
            "cell": archive.cell_summary(key),
            "levels": [_record_view(archive.records[rid]) for rid in ids],
        }

    @app.post("/levels", status_code=201)
    def submit_level(body: dict = Body(...)):
        token = body.get("client_token")
        if token and token in app.state.idempotency:
            return app.state.idempotency[token]
        try:
            with app.state.archive_lock:
                record = archive.submit(
                    grid_text=body.get("grid", ""),
                    solution=body.get("solution", ""),
                    author=body.get("author", ""),
                    provenance=body.get("provenance", "user"),
                )
                _persist()
        except archive_mod.InvalidSubmission as exc:
            raise ApiError(400, "invalid_level", str(exc))
        except archive_mod.UnverifiedSubmission as exc:
            raise ApiError(422, "unverified", str(exc))
        except archive_mod.DuplicateSubmission as exc:
            raise ApiError(409, "conflict", str(exc))
        view = _record_view(record)
        if token:
            app.state.idempotency[token] = view
        return view

    @app.post("/solve")
    def solve_level(body: dict = Body(...)):
        grid_text = body.get("grid", "")
        requested = body.get("max_expansions", config.budget_cap)
        capped = min(int(requested), config.budget_cap)
        try:
            grid = store.decode(grid_text)
        except CodecError as exc:
            raise _codec_error(exc)
        result = solver_mod.solve(grid, solver_mod.SolverBudget(max_expansions=capped))
        if result.solved:
            return {
                "solved": True,
                "solution": result.solution.actions,
                "expansions": result.expansions,
                "start_flags": list(result.solution.start_flags),
                "end_flags": list(result.solution.end_flags),
            }
        return {
            "solved": False,
            "code": "budget_exhausted",
            "expansions": result.expansions,
            "max_expansions": capped,
        }

    @app.post("/replay")
    def replay_level(body: dict = Body(...)):
        """Server-side simulation for the web client: it renders states and
        never re-implements rule semantics."""
        try:
            grid = store.decode(body.get("grid", ""))
        except CodecError as exc:
            raise _codec_error(exc)
        actions = body.get("actions", "")
        try:
            store.validate_solution(actions)
            outcome = replay(grid, actions)
        except (CodecError, EngineError) as exc:
            raise ApiError(400, "invalid_level", str(exc))
        final = outcome.final
        return {
            "won": outcome.won,
            "status": final.status,
            "steps_used": outcome.steps_used,
            "start_flags": list(outcome.start_flags),
            "end_flags": list(outcome.end_flags),
            "stacks": [
                [[piece[0] for piece in cell] for cell in row]
                for row in final.grid.cells
            ],
        }

    @app.post("/ratings")
    def post_rating(body: dict = Body(...)):
        token = body.get("client_token")
        if token and token in app.state.idempotency:
            return app.state.idempotency[token]
        try:
            with app.state.archive_lock:
                rec_a, rec_b = archive.record_rating(
                    level_a=body.get("level_a", ""),
                    level_b=body.get("level_b", ""),
                    harder_winner=body.get("harder_winner", ""),
                    design_winner=body.get("design_winner", ""),
                    rater=body.get("rater", ""),
                )
                _persist()
        except archive_mod.UnknownRecord as exc:
            raise ApiError(404, "not_found", str(exc))
        except ArchiveError as exc:
            raise ApiError(409, "conflict", str(exc))
        view = {
            "levels": {
                rec.id: {"score": rec.scores[-1], "average_rating": rec.average_rating,
                         "rating_count": rec.rating_count}
                for rec in (rec_a, rec_b)
            }
        }
        if token:
            app.state.idempotency[token] = view
        return view

    @app.get("/ratings/pair")
    def rating_pair(seed: Optional[int] = None):
        try:
            a, b = archive.sample_rating_pair(seed)
        except ArchiveError as exc:
            raise ApiError(409, "conflict", str(exc))
        return {"level_a": _record_view(archive.records[a]),
                "level_b": _record_view(archive.records[b])}

    @app.post("/evolve", status_code=201)
    def create_session(body: dict = Body(default={})):
        _expire_sessions()
        params_in = dict(body.get("params") or {})
        init_grid_text = body.get("init_grid")
        if init_grid_text and "init_mode" not in params_in:
            params_in["init_mode"] = "from-editor"
        try:
            params = evolver_mod.EvolverParams(**params_in)
            params.validate()
        except (TypeError, ValueError) as exc:
            raise ApiError(400, "conflict", f"bad evolver params: {exc}")
        try:
            refs_text = body.get("references")
            if refs_text:
                references = [store.decode(t) for t in refs_text]
            else:
                elites = archive.elite_grids()
                texts = elites or [t for _, t in store.load_seed_corpus()]
                references = [store.decode(t) for t in texts]
            editor_grid = store.decode(init_grid_text) if init_grid_text else None
            seed = body.get("seed")
            seed = int(seed) if seed is not None else int.from_bytes(os.urandom(4), "big")
            state = evolver_mod.init_state(references, params, seed, editor_grid)
        except CodecError as exc:
            raise _codec_error(exc)
        except EngineError as exc:
            raise ApiError(400, "invalid_level", str(exc))
        sess = EvolverSession(id=uuid.uuid4().hex[:12], params=params, state=state)
        with app.state.sessions_lock:
            app.state.sessions[sess.id] = sess
        return _session_view(sess)

    @app.get("/evolve/{session_id}")
    def get_session(session_id: str):
        return _session_view(_session(session_id))

    @app.post("/evolve/{session_id}/step")
    def step_session(session_id: str, n: int = Query(1, ge=1, le=1000)):
        sess = _session(session_id)
        if not sess.lock.acquire(blocking=False):
            raise ApiError(409, "conflict", "a step is already running for this session")
        try:
            if sess.state.paused:
                raise ApiError(409, "conflict", "session is paused")
            for _ in range(n):
                evolver_mod.evolve_step(sess.state, sess.params)
        finally:
            sess.lock.release()
        return _session_view(sess)

    @app.post("/evolve/{session_id}/pause")
    def pause_session(session_id: str, body: dict = Body(default={})):
        sess = _session(session_id)
        sess.state.paused = bool(body.get("paused", True))
        return _session_view(sess)

    @app.post("/evolve/{session_id}/export")
    def export_session(session_id: str):
        sess = _session(session_id)
        best_grid, best_fit = sess.state.best()
        return {"grid": store.encode(best_grid), "fitness": best_fit}

    @app.delete("/evolve/{session_id}")
    def stop_session(session_id: str):
        _session(session_id)
        with app.state.sessions_lock:
            app.state.sessions.pop(session_id, None)
        return {"stopped": session_id}

    if config.webui_dir and Path(config.webui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(config.webui_dir), html=True), name="webui")

    return app
