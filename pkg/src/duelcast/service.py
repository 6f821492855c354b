"""HTTP session service for live interactive play.

A session owns a ground-truth simulation that the client advances step by
step with its intended controls; every step response carries the re-anchored
prediction fan, the selected candidate label, and the horizon estimate. The
stream endpoint mirrors step responses as server-sent events.

The service is client-clocked and fully deterministic: responses are a pure
function of (configs, seed, submitted control sequence).
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import dynamics
from .dynamics import GameDefinition, History, ReactionSpec, scenario
from .errors import (
    AllCandidatesFailed,
    BadParams,
    DuelcastError,
    NonFiniteState,
    UnknownScenario,
)
from .inversion import InversionSettings
from .numerics import TimeGrid
from .predictor import ControlPlan, HorizonSpec, SurrogateSpec, estimate_horizon, predict
from .probes import canonical_probe_set, generate_library
from .selection import CandidateSet, Pool, select_best

_MAX_STEPS_PER_CALL = 1000


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field_path: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path

    def body(self) -> dict:
        payload = {"code": self.code, "message": self.message}
        if self.field_path is not None:
            payload["field"] = self.field_path
        return payload


def _need(payload: dict, key: str, path: str):
    if key not in payload:
        raise ApiError(400, "validation", f"missing field {path or key}", path or key)
    return payload[key]


def _vector(raw, length: int, path: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != length:
        raise ApiError(400, "validation", f"{path} must be a list of {length} numbers", path)
    try:
        vec = np.asarray([float(x) for x in raw])
    except (TypeError, ValueError):
        raise ApiError(400, "validation", f"{path} must contain numbers", path) from None
    if not np.all(np.isfinite(vec)):
        raise ApiError(400, "validation", f"{path} must be finite", path)
    return vec


@dataclass
class SessionConfig:
    scenario_name: str
    scenario_params: dict
    h: float
    warmup_steps: int
    warmup_uo: np.ndarray
    dt: float
    blend: float
    predict_T: float
    selection_mode: str  # "none" | "pool"
    pool_size: int
    seed: int
    evolve: bool
    horizon: Optional[HorizonSpec]


@dataclass
class Session:
    sid: str
    config: SessionConfig
    game: GameDefinition
    reactions: ReactionSpec
    history: History
    pool: Optional[Pool]
    step_counter: int = 0
    status: str = "active"
    subscribers: list = field(default_factory=list)

    @property
    def delay_steps(self) -> int:
        return int(round(self.config.dt / self.config.h))


def _parse_session_config(payload: dict) -> SessionConfig:
    name = _need(payload, "scenario", "scenario")
    try:
        game, _ = scenario(name, payload.get("params", {}))
    except UnknownScenario as exc:
        raise ApiError(400, "validation", str(exc), "scenario") from None
    except BadParams as exc:
        raise ApiError(400, "validation", str(exc), "params") from None

    h = float(payload.get("h", 0.02))
    if h <= 0:
        raise ApiError(400, "validation", "h must be positive", "h")
    predictor_cfg = payload.get("predictor", {})
    dt = float(predictor_cfg.get("dt", 0.1))
    blend = float(predictor_cfg.get("blend", 1.0))
    predict_T = float(predictor_cfg.get("T", 0.5))
    if dt <= 0:
        raise ApiError(400, "validation", "predictor.dt must be positive", "predictor.dt")
    if not 0.0 <= blend <= 1.0:
        raise ApiError(400, "validation", "predictor.blend must lie in [0,1]", "predictor.blend")
    if predict_T < 0:
        raise ApiError(400, "validation", "predictor.T must be non-negative", "predictor.T")
    delay_steps = dt / h
    if abs(delay_steps - round(delay_steps)) > 1e-6 or round(delay_steps) < 1:
        raise ApiError(
            400, "validation", "predictor.dt must be a positive multiple of h", "predictor.dt"
        )
    min_warmup = int(round(delay_steps)) + 2
    warmup_steps = int(payload.get("warmup_steps", max(min_warmup, 3 * int(round(delay_steps)))))
    if warmup_steps < min_warmup:
        raise ApiError(
            400,
            "validation",
            f"warmup_steps must be at least delay_steps + 2 = {min_warmup}",
            "warmup_steps",
        )
    warmup_uo = payload.get("warmup_uo")
    if warmup_uo is None:
        warmup_vec = np.asarray(dynamics.DEFAULT_INTENDED[name], dtype=float)
    else:
        warmup_vec = _vector(warmup_uo, game.d, "warmup_uo")

    selection_cfg = payload.get("selection", {"mode": "none"})
    mode = selection_cfg.get("mode", "none")
    if mode not in ("none", "pool"):
        raise ApiError(400, "validation", f"unknown selection mode {mode!r}", "selection.mode")
    pool_size = int(selection_cfg.get("size", 3))
    if mode == "pool" and pool_size < 2:
        raise ApiError(400, "validation", "selection.size must be at least 2", "selection.size")

    horizon_cfg = payload.get("horizon")
    horizon = None
    if horizon_cfg is not None:
        for key in ("dt1", "dt2", "theta", "t_max"):
            if key not in horizon_cfg:
                raise ApiError(400, "validation", f"missing horizon.{key}", f"horizon.{key}")
        try:
            horizon = HorizonSpec(
                dt1=float(horizon_cfg["dt1"]),
                dt2=float(horizon_cfg["dt2"]),
                theta=float(horizon_cfg["theta"]),
                t_max=float(horizon_cfg["t_max"]),
            )
        except BadParams as exc:
            raise ApiError(400, "validation", str(exc), "horizon") from None

    return SessionConfig(
        scenario_name=name,
        scenario_params=payload.get("params", {}),
        h=h,
        warmup_steps=warmup_steps,
        warmup_uo=warmup_vec,
        dt=dt,
        blend=blend,
        predict_T=predict_T,
        selection_mode=mode,
        pool_size=pool_size,
        seed=int(payload.get("seed", 0)),
        evolve=bool(selection_cfg.get("evolve", False)),
        horizon=horizon,
    )


def _state_snapshot(session: Session) -> dict:
    history = session.history
    k = history.grid.count - 1
    return {
        "t": history.grid.time_at(k),
        "phi": history.phi[k].tolist(),
        "u": history.u_realized[k].tolist(),
        "uo": history.u_intended[k].tolist(),
        "sample_count": history.grid.count,
    }


def _scenario_meta(session: Session) -> dict:
    return {
        "name": session.config.scenario_name,
        "state_dim": session.game.state_dim,
        "control_dims": list(session.game.control_dims),
        "h": session.config.h,
        "render": "plane" if session.config.scenario_name == "planar-pursuit" else "state-vs-time",
    }


def _candidates(session: Session) -> list[CandidateSet]:
    if session.pool is not None:
        return list(session.pool.candidates)
    game = session.game
    pset = canonical_probe_set(game.d, game.state_dim)
    from .selection import CandidateLabel

    return [CandidateSet(CandidateLabel.finite(0), pset)]


def _step_payload(session: Session, advanced: dict) -> dict:
    """Run selection, the prediction fan, and the horizon for the current anchor.

    Predictions only need a bounded tail of the history (frame bases differ by
    an orthogonal factor under re-windowing, which inversion is covariant to),
    so the working window is capped to keep step latency flat as play goes on.
    """
    config = session.config
    game = session.game
    window = 4 * session.delay_steps + 16
    history = session.history.suffix(window)
    t0 = history.grid.t_end
    candidates = _candidates(session)
    template = SurrogateSpec(
        probe_set=candidates[0].pset,
        dt=config.dt,
        blend=config.blend,
        plan=ControlPlan.hold_last(),
        inversion=InversionSettings(),
    )

    best_index = 0
    scores = None
    if session.pool is not None:
        try:
            report = select_best(game, history, candidates, t0, template)
            best_index = report.best_index
            scores = list(report.scores)
        except AllCandidatesFailed:
            scores = [math.inf] * len(candidates)

    fan = []
    for i, cand in enumerate(candidates):
        spec = replace(template, probe_set=cand.pset)
        prediction = predict(game, history, t0, spec, config.predict_T)
        score = None if scores is None else scores[i]
        fan.append(
            {
                "label": str(cand.label),
                "best": i == best_index,
                # infinite backtest scores (truncated candidates) are not JSON
                # representable; null marks them on the wire
                "score": score if score is not None and math.isfinite(score) else None,
                "prediction": prediction.to_json_dict(),
            }
        )

    horizon_t1 = None
    if config.horizon is not None:
        spec = replace(template, probe_set=candidates[best_index].pset)
        horizon_t1 = estimate_horizon(game, history, t0, spec, config.horizon)

    return {
        "session_id": session.sid,
        "step_counter": session.step_counter,
        "status": session.status,
        "anchor": t0,
        "state": _state_snapshot(session),
        "advanced": advanced,
        "fan": fan,
        "mu": str(candidates[best_index].label),
        "horizon_t1": horizon_t1,
        "scenario": _scenario_meta(session),
    }


def create_app() -> FastAPI:
    app = FastAPI(title="duelcast session service")
    sessions: dict[str, Session] = {}
    counter = {"next": 0}

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    def get_session(sid: str) -> Session:
        session = sessions.get(sid)
        if session is None:
            raise ApiError(404, "UnknownSession", f"no session {sid!r}")
        return session

    async def broadcast(session: Session, payload: dict) -> None:
        for queue in list(session.subscribers):
            queue.put_nowait(payload)

    @app.get("/health")
    async def health():
        return {"ok": True}

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            raise ApiError(400, "validation", "request body must be JSON") from None
        config = _parse_session_config(payload)
        game, reactions = scenario(config.scenario_name, config.scenario_params)
        grid = TimeGrid(0.0, config.h, config.warmup_steps + 1)
        try:
            history = dynamics.simulate(
                game,
                reactions,
                dynamics.constant_schedule(config.warmup_uo),
                grid,
                np.asarray(dynamics.DEFAULT_PHI0[config.scenario_name], dtype=float),
            )
        except NonFiniteState as exc:
            raise ApiError(422, "NonFiniteState", str(exc)) from None

        pool = None
        if config.selection_mode == "pool":
            lib = generate_library(game.d, game.state_dim)
            pool = Pool.seeded(lib, config.pool_size, seed=config.seed)
            pool.candidates[0] = CandidateSet(
                pool.candidates[0].label, canonical_probe_set(game.d, game.state_dim)
            )

        sid = f"sess-{counter['next']:04d}"
        counter["next"] += 1
        session = Session(
            sid=sid,
            config=config,
            game=game,
            reactions=reactions,
            history=history,
            pool=pool,
        )
        sessions[sid] = session
        return {
            "session_id": sid,
            "state": _state_snapshot(session),
            "scenario": _scenario_meta(session),
            "pool_size": len(pool.candidates) if pool is not None else 1,
        }

    @app.post("/sessions/{sid}/step")
    async def step_session(sid: str, request: Request):
        session = get_session(sid)
        if session.status != "active":
            raise ApiError(409, "SessionTerminated", "session hit a terminal state")
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            raise ApiError(400, "validation", "request body must be JSON") from None

        steps = payload.get("steps", 1)
        if not isinstance(steps, int) or steps < 0 or steps > _MAX_STEPS_PER_CALL:
            raise ApiError(
                400, "validation", f"steps must be an integer in [0, {_MAX_STEPS_PER_CALL}]", "steps"
            )
        game = session.game
        d1 = game.control_dims[0]
        if "u_intended" in payload:
            uo = _vector(payload["u_intended"], game.d, "u_intended")
        elif "u1_intended" in payload:
            u1 = _vector(payload["u1_intended"], d1, "u1_intended")
            uo = np.concatenate([u1, session.config.warmup_uo[d1:]])
        else:
            uo = session.config.warmup_uo

        advanced = {"t": [], "phi": [], "u": [], "uo": []}
        if steps > 0:
            try:
                new_history = dynamics.extend_history(
                    game,
                    session.reactions,
                    session.history,
                    dynamics.constant_schedule(uo),
                    steps,
                )
            except NonFiniteState as exc:
                session.status = "terminated"
                raise ApiError(422, "NonFiniteState", str(exc)) from None
            old_count = session.history.grid.count
            session.history = new_history
            times = new_history.grid.times()
            sl = slice(old_count, new_history.grid.count)
            advanced = {
                "t": times[sl].tolist(),
                "phi": new_history.phi[sl].tolist(),
                "u": new_history.u_realized[sl].tolist(),
                "uo": new_history.u_intended[sl].tolist(),
            }
        session.step_counter += 1
        response = _step_payload(session, advanced)
        await broadcast(session, response)
        return response

    @app.delete("/sessions/{sid}")
    async def close_session(sid: str):
        session = get_session(sid)
        for queue in list(session.subscribers):
            queue.put_nowait(None)  # sentinel closes streams
        del sessions[sid]
        return {"closed": True, "session_id": sid}

    @app.get("/sessions/{sid}/stream")
    async def stream_session(sid: str, request: Request, max_events: Optional[int] = None):
        session = get_session(sid)
        queue: asyncio.Queue = asyncio.Queue()
        session.subscribers.append(queue)

        async def event_source():
            sent = 0
            try:
                while max_events is None or sent < max_events:
                    item = await queue.get()
                    if item is None:
                        break
                    yield f"event: step\ndata: {json.dumps(item)}\n\n"
                    sent += 1
            finally:
                if queue in session.subscribers:
                    session.subscribers.remove(queue)

        return StreamingResponse(event_source(), media_type="text/event-stream")

    return app
