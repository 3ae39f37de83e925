"""WebSocket/HTTP API exposing the session workflow.

Protocol (version 1). Client commands:
  {"v":1,"cmd":"create","config":{...}}
  {"v":1,"cmd":"record","frames":[...],"target":{...}|[...]}
  {"v":1,"cmd":"train","hyperparams":{...}}
  {"v":1,"cmd":"predict","frames":[...]}
  {"v":1,"cmd":"frame","frame":{...}}           # live path, latest-wins
  {"v":1,"cmd":"propose"} / {"cmd":"guiding","sign":1|-1} / {"cmd":"zone"}
  {"v":1,"cmd":"save"} / {"cmd":"load","id":"..."}

Server events: state, features, params, proposal, unit, error. `params`
is rate-limited to at most 60 messages/s on the live path; newer frames
simply supersede older ones.
"""

import contextlib
import time

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .errors import ProtocolError, SchemaError, SonomapError
from .features import Window
from .ingest import _frame_from_obj
from .session import Session, SessionStore, load_mapping

PROTOCOL_VERSION = 1
PARAMS_MAX_RATE_HZ = 60.0


def _state_event(session):
    return {
        "v": PROTOCOL_VERSION,
        "evt": "state",
        "session": session.id,
        "mode": session.mode,
        "phase": session.phase,
        "synthesis": session.synthesis,
        "n_examples": len(session.examples),
        "proposal_id": (session.agent.proposal_count if session.agent else None),
        "step_size": (session.agent.step_size if session.agent else None),
    }


def _error_event(exc):
    event = {"v": PROTOCOL_VERSION, "evt": "error", "error": str(exc)}
    if isinstance(exc, ProtocolError) and exc.legal_actions:
        event["legal"] = list(exc.legal_actions)
    return event


def _params_event(result):
    event = {"v": PROTOCOL_VERSION, "evt": "params",
             "values": np.asarray(result.params, dtype=float).tolist()}
    if result.preset is not None:
        event["preset"] = result.preset.to_json_dict()
    return event


def _unit_event(unit):
    return {"v": PROTOCOL_VERSION, "evt": "unit",
            "source_id": unit.source_id, "start": unit.start,
            "length": unit.length}


class _LiveBuffer:
    """Rolling frame window for the live `frame` path."""

    def __init__(self, size):
        self.size = max(size, 1)
        self.frames = []
        self.kind = None

    def push(self, obj):
        frame = _frame_from_obj(obj)
        kind = obj["kind"]
        if self.kind is None:
            self.kind = kind
        elif kind != self.kind:
            raise SchemaError(f"mixed frame kinds on live path: {kind} vs {self.kind}")
        if self.frames and frame.t <= self.frames[-1].t:
            self.frames.clear()  # client restarted its clock
        self.frames.append(frame)
        if len(self.frames) > self.size:
            self.frames = self.frames[-self.size:]

    def window(self):
        if len(self.frames) < 2:
            return None
        times = [f.t for f in self.frames]
        dts = np.diff(times)
        rate = 1.0 / float(np.median(dts)) if np.all(dts > 0) else 60.0
        return Window(self.kind, rate, tuple(self.frames))


def _window_from_frames(frames, kind_hint=None):
    parsed = [_frame_from_obj(obj) for obj in frames]
    if not parsed:
        raise SchemaError("no frames supplied")
    kinds = {obj["kind"] for obj in frames}
    if len(kinds) != 1:
        raise SchemaError(f"mixed frame kinds: {sorted(kinds)}")
    times = [f.t for f in parsed]
    if len(parsed) == 1:
        rate = 60.0
    else:
        dts = np.diff(times)
        if np.any(dts <= 0):
            raise SchemaError("frame timestamps must be strictly increasing")
        rate = 1.0 / float(np.median(dts))
    return Window(kinds.pop(), rate, tuple(parsed))


def create_app(store_dir=".sonomap-sessions", ui_dir=None):
    store = SessionStore(store_dir)

    @contextlib.asynccontextmanager
    async def lifespan(app):
        yield
        # graceful shutdown: runnable sessions persist as mapping records
        for session in app.state.sessions.values():
            if session.phase in ("trained", "running"):
                try:
                    store.save(session.save_mapping())
                except SonomapError:
                    continue

    app = FastAPI(title="sonomap", version=__version__, lifespan=lifespan)
    app.state.store = store
    app.state.sessions = {}

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions")
    def create_session_http(config: dict = None):
        try:
            session = Session(config or {})
        except SonomapError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        app.state.sessions[session.id] = session
        return {"id": session.id, "phase": session.phase, "mode": session.mode}

    @app.get("/mappings")
    def list_mappings():
        return store.list()

    @app.get("/mappings/{record_id}")
    def get_mapping(record_id: str):
        try:
            record = store.load(record_id)
        except SonomapError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        return record.to_json_dict()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = None
        live = None
        last_params_emit = 0.0
        while True:
            try:
                msg = await ws.receive_json()
            except WebSocketDisconnect:
                break
            try:
                if msg.get("v") != PROTOCOL_VERSION:
                    raise SchemaError(
                        f"unsupported protocol version {msg.get('v')!r}; "
                        f"expected {PROTOCOL_VERSION}"
                    )
                cmd = msg.get("cmd")
                if cmd == "create":
                    session = Session(msg.get("config") or {})
                    app.state.sessions[session.id] = session
                    live = _LiveBuffer(session.extractor.window)
                    await ws.send_json(_state_event(session))
                    continue
                if cmd == "load":
                    record = store.load(msg.get("id", ""))
                    session = load_mapping(record)
                    app.state.sessions[session.id] = session
                    live = _LiveBuffer(session.extractor.window)
                    await ws.send_json(_state_event(session))
                    continue
                if session is None:
                    raise ProtocolError(
                        "no session bound to this socket",
                        legal_actions=("create", "load"),
                    )
                if cmd == "record":
                    window = _window_from_frames(msg.get("frames") or [])
                    fv = session.record_example(window, msg.get("target"))
                    event = _state_event(session)
                    event["features"] = {"names": list(fv.names),
                                         "values": fv.values.tolist()}
                    await ws.send_json(event)
                elif cmd == "train":
                    losses = session.train(msg.get("hyperparams"))
                    event = _state_event(session)
                    event["final_loss"] = losses[-1] if losses else None
                    await ws.send_json(event)
                elif cmd == "predict":
                    window = _window_from_frames(msg.get("frames") or [])
                    result = session.predict(window)
                    await ws.send_json(_params_event(result))
                    if result.unit is not None:
                        await ws.send_json(_unit_event(result.unit))
                elif cmd == "frame":
                    live.push(msg.get("frame") or {})
                    window = live.window()
                    if window is None or session.model is None:
                        continue
                    now = time.monotonic()
                    if now - last_params_emit < 1.0 / PARAMS_MAX_RATE_HZ:
                        continue  # newer frames will supersede this one
                    last_params_emit = now
                    result = session.predict(window)
                    fv = result.features
                    await ws.send_json({
                        "v": PROTOCOL_VERSION, "evt": "features",
                        "names": list(fv.names), "values": fv.values.tolist(),
                    })
                    await ws.send_json(_params_event(result))
                    if result.unit is not None:
                        await ws.send_json(_unit_event(result.unit))
                elif cmd == "propose":
                    proposal = session.aiml_step("propose")
                    await ws.send_json({
                        "v": PROTOCOL_VERSION, "evt": "proposal",
                        "id": proposal.id, "points": proposal.points.tolist(),
                        "presets": (None if proposal.presets is None
                                    else proposal.presets.tolist()),
                    })
                    await ws.send_json(_state_event(session))
                elif cmd == "guiding":
                    session.aiml_step("guiding", int(msg.get("sign", 0)))
                    await ws.send_json(_state_event(session))
                elif cmd == "zone":
                    session.aiml_step("zone")
                    await ws.send_json(_state_event(session))
                elif cmd == "save":
                    record = session.save_mapping()
                    store.save(record)
                    event = _state_event(session)
                    event["mapping"] = record.id
                    await ws.send_json(event)
                else:
                    raise SchemaError(f"unknown command {cmd!r}")
            except WebSocketDisconnect:
                break
            except SonomapError as exc:
                await ws.send_json(_error_event(exc))

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
