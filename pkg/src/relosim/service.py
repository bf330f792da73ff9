"""HTTP facade over scenario running and what-if exploration.

Sessions are in-memory: each holds a converged baseline (immutable once
computed) plus named what-if results.  Requests within a session are
serialized; distinct sessions are independent.  Payload geometry uses the
same JSON feature format as the input bundles.
"""

import os
import threading
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import simulation
from .errors import EvictionError, ValidationError
from .geodata import _polygon_geometry

# Sessions above this agent count run in a background thread and must be
# polled; below it, creation blocks until the baseline has converged.
SYNC_AGENT_THRESHOLD = 50_000


class CreateSession(BaseModel):
    scenario_path: str | None = None
    scenario: dict | None = None
    base_dir: str | None = None


class WhatifRequest(BaseModel):
    name: str
    interventions: list


class Session:
    def __init__(self, session_id: str, scenario):
        self.session_id = session_id
        self.scenario = scenario
        self.lock = threading.Lock()
        self.state = None
        self.summary = None
        self.error = None
        self.whatifs = {}  # name -> payload

    @property
    def ready(self) -> bool:
        return self.summary is not None


def _run_baseline(session: Session):
    try:
        world = simulation.World.from_scenario(session.scenario)
        state = simulation.run_to_convergence(world)
        session.state = state
        session.summary = simulation.summarize(state)
    except Exception as exc:  # surfaced on the next poll
        session.error = str(exc)


def _layers_payload(world, summary) -> dict:
    metrics = {u["id"]: u for u in summary["units"]}
    features = []
    for geoid, bg in world.model.block_groups.items():
        props = {
            "id": geoid,
            "kind": "block_group",
            "city": bg.city,
            "has_T": bg.has_T,
            "has_bus": bg.has_bus,
            "profile_percent": summary["block_group_profile_percent"].get(geoid, {}),
        }
        props.update(metrics.get(geoid, {}))
        features.append(
            {"type": "Feature", "id": geoid, "properties": props,
             "geometry": _polygon_geometry(bg.geometry)}
        )
    for bid, b in world.model.buildings.items():
        props = {
            "id": bid,
            "kind": "building",
            "usage": b.usage,
            "block_group": b.associated_block_group,
        }
        props.update(metrics.get(bid, {}))
        features.append(
            {"type": "Feature", "id": bid, "properties": props,
             "geometry": _polygon_geometry(b.geometry)}
        )
    return {"type": "FeatureCollection", "crs": "local-meters", "features": features}


def create_app(static_dir: str | None = None,
               sync_threshold: int = SYNC_AGENT_THRESHOLD) -> FastAPI:
    app = FastAPI(title="relosim service")
    sessions: dict = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def require_ready(session: Session) -> Session:
        if session.error:
            raise HTTPException(status_code=500, detail=session.error)
        if not session.ready:
            raise HTTPException(status_code=409, detail="baseline still computing")
        return session

    @app.post("/sessions")
    def create_session(body: CreateSession):
        try:
            if body.scenario_path:
                scenario = simulation.load_scenario(body.scenario_path)
            elif body.scenario is not None:
                scenario = simulation.scenario_from_dict(
                    body.scenario, body.base_dir or os.getcwd()
                )
            else:
                raise ValidationError(["scenario_path or scenario document required"])
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.messages)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=422, detail=[str(exc)])

        session = Session(uuid.uuid4().hex, scenario)
        with registry_lock:
            sessions[session.session_id] = session

        if scenario.n_agents > sync_threshold:
            threading.Thread(target=_run_baseline, args=(session,), daemon=True).start()
            return JSONResponse(
                status_code=202,
                content={"session_id": session.session_id, "status": "running"},
            )
        try:
            with session.lock:
                world = simulation.World.from_scenario(scenario)
                state = simulation.run_to_convergence(world)
                session.state = state
                session.summary = simulation.summarize(state)
        except ValidationError as exc:
            with registry_lock:
                sessions.pop(session.session_id, None)
            raise HTTPException(status_code=422, detail=exc.messages)
        return {"session_id": session.session_id, "summary": session.summary}

    @app.get("/sessions/{session_id}/summary")
    def get_summary(session_id: str):
        session = get_session(session_id)
        if session.error:
            raise HTTPException(status_code=500, detail=session.error)
        if not session.ready:
            return JSONResponse(status_code=202, content={"status": "running"})
        return session.summary

    @app.get("/sessions/{session_id}/layers")
    def get_layers(session_id: str, whatif: str | None = None):
        session = require_ready(get_session(session_id))
        with session.lock:
            if whatif is None:
                return _layers_payload(session.state.world, session.summary)
            payload = session.whatifs.get(whatif)
            if payload is None:
                raise HTTPException(status_code=404, detail=f"unknown what-if {whatif!r}")
            return _layers_payload(session.state.world, payload["summary"])

    @app.post("/sessions/{session_id}/whatifs")
    def post_whatif(session_id: str, body: WhatifRequest):
        session = require_ready(get_session(session_id))
        with session.lock:
            try:
                interventions = [
                    simulation.Intervention.from_dict(d) for d in body.interventions
                ]
                variant = simulation.whatif_run(session.state, interventions)
            except EvictionError as exc:
                raise HTTPException(status_code=409, detail=exc.messages)
            except ValidationError as exc:
                raise HTTPException(status_code=422, detail=exc.messages)
            variant_summary = simulation.summarize(variant)
            payload = {
                "name": body.name,
                "interventions": [iv.to_dict() for iv in interventions],
                "summary": variant_summary,
                "deltas": simulation.compare_summaries(session.summary, variant_summary),
            }
            session.whatifs[body.name] = payload
            return payload

    @app.get("/sessions/{session_id}/whatifs/{name}")
    def get_whatif(session_id: str, name: str):
        session = require_ready(get_session(session_id))
        with session.lock:
            payload = session.whatifs.get(name)
        if payload is None:
            raise HTTPException(status_code=404, detail=f"unknown what-if {name!r}")
        return payload

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def main():  # pragma: no cover - convenience launcher
    import uvicorn

    static = os.environ.get("RELOSIM_UI_DIR")
    uvicorn.run(create_app(static_dir=static), host="127.0.0.1", port=8000)


if __name__ == "__main__":  # pragma: no cover
    main()
