"""HTTP service: compile scenarios and facilitate sessions over JSON.

Catalogs and compiled scenarios are content-addressed immutable files;
session logs are append-only. Every session mutation goes through the
runtime state machine under a per-session lock, so a crash can always be
recovered by replaying the log.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import runtime
from .catalog import load_catalog, serialize_catalog
from .compiler import MeasuredScenario, compile_scenario
from .emitter import emit_interchange, emit_ttx, load_interchange
from .errors import (AlreadyFiredError, BadStateError, ForgeError,
                     NotFoundError, UnknownRefError, WrongThreadError)
from .runtime import DebriefReport, Session
from .specdsl import parse_spec

DEFAULT_PORT = 8321


def _short_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class _SessionSlot:
    session: Session
    scenario_id: str
    applied_client_seqs: set[int]
    lock: threading.Lock


class Store:
    """File-backed store: catalogs/, scenarios/, sessions/<id>.log."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("catalogs", "scenarios", "sessions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._scenarios: dict[str, MeasuredScenario] = {}
        self._sessions: dict[str, _SessionSlot] = {}
        self._registry_lock = threading.Lock()

    # catalogs ---------------------------------------------------------------

    def put_catalog(self, document_text: str) -> str:
        catalog = load_catalog(document_text)
        canonical = serialize_catalog(catalog)
        catalog_id = "cat-" + _short_digest(canonical)
        path = self.root / "catalogs" / f"{catalog_id}.json"
        if not path.exists():
            path.write_text(canonical, "utf-8")
        return catalog_id

    def get_catalog_text(self, catalog_id: str) -> str:
        path = self.root / "catalogs" / f"{catalog_id}.json"
        if not path.exists():
            raise NotFoundError(f"unknown catalog id '{catalog_id}'")
        return path.read_text("utf-8")

    # scenarios --------------------------------------------------------------

    def put_scenario(self, interchange_text: str) -> str:
        scenario_id = "scn-" + _short_digest(interchange_text)
        path = self.root / "scenarios" / f"{scenario_id}.json"
        if not path.exists():  # immutable once written
            path.write_text(interchange_text, "utf-8")
        return scenario_id

    def get_scenario_text(self, scenario_id: str) -> str:
        path = self.root / "scenarios" / f"{scenario_id}.json"
        if not path.exists():
            raise NotFoundError(f"unknown scenario id '{scenario_id}'")
        return path.read_text("utf-8")

    def get_scenario(self, scenario_id: str) -> MeasuredScenario:
        if scenario_id not in self._scenarios:
            self._scenarios[scenario_id] = load_interchange(
                self.get_scenario_text(scenario_id))
        return self._scenarios[scenario_id]

    # sessions ---------------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.log"

    def _append(self, session_id: str, record: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def create_session(self, scenario_id: str, roster: list[str]) -> Session:
        scenario = self.get_scenario(scenario_id)
        session = runtime.open_session(scenario, roster)
        record = runtime.genesis_record(session, scenario_id=scenario_id)
        record["at"] = _now()
        self._append(session.id, record)
        with self._registry_lock:
            self._sessions[session.id] = _SessionSlot(
                session=session, scenario_id=scenario_id,
                applied_client_seqs=set(), lock=threading.Lock())
        return session

    def _load_slot(self, session_id: str) -> _SessionSlot:
        path = self._log_path(session_id)
        if not path.exists():
            raise NotFoundError(f"unknown session id '{session_id}'")
        log_text = path.read_text("utf-8")
        genesis = json.loads(log_text.splitlines()[0])
        scenario_id = genesis.get("cmd", {}).get("scenario_id")
        scenario = self.get_scenario(scenario_id)
        session = runtime.replay(log_text, scenario)
        applied = set()
        for line in log_text.splitlines()[1:]:
            if line.strip():
                record = json.loads(line)
                if "client_seq" in record:
                    applied.add(record["client_seq"])
        return _SessionSlot(session=session, scenario_id=scenario_id,
                            applied_client_seqs=applied, lock=threading.Lock())

    def get_slot(self, session_id: str) -> _SessionSlot:
        with self._registry_lock:
            slot = self._sessions.get(session_id)
            if slot is None:
                slot = self._load_slot(session_id)
                self._sessions[session_id] = slot
            return slot

    def apply(self, session_id: str, cmd: dict,
              client_seq: int | None = None) -> Session:
        """Apply one mutating command under the session's lock, at most once
        per (session, client_seq)."""
        slot = self.get_slot(session_id)
        with slot.lock:
            if client_seq is not None and client_seq in slot.applied_client_seqs:
                return slot.session
            session = runtime.apply_command(slot.session, cmd)
            record = runtime.command_record(session.clock, cmd)
            record["at"] = _now()
            if client_seq is not None:
                record["client_seq"] = client_seq
                slot.applied_client_seqs.add(client_seq)
            self._append(session_id, record)
            slot.session = session
            return session


# --- JSON views ----------------------------------------------------------------

def _trace_view(scenario: MeasuredScenario) -> list[dict]:
    labels = {o.id: o.label for o in scenario.objectives}
    return [
        {"objective": e.objective_id, "label": labels.get(e.objective_id, ""),
         "triggers": list(e.triggers), "threads": list(e.threads)}
        for e in scenario.objective_trace
    ]


def _event_view(session: Session) -> dict | None:
    if session.state != runtime.IN_EVENT:
        return None
    thread = session.current_thread()
    questions = [{"id": q.id, "prompt": q.prompt, "source": "primary"}
                 for q in thread.questions]
    for inject in thread.injects:
        if inject.id in session.fired_injects and inject.question is not None:
            questions.append({"id": inject.question.id,
                              "prompt": inject.question.prompt,
                              "source": inject.id})
    return {
        "synopsis": thread.synopsis_ref,
        "narrative": thread.narrative,
        "questions": questions,
        "available_injects": [
            {"id": i.id, "narrative": i.narrative,
             "condition_note": i.condition_note,
             "question": None if i.question is None
             else {"id": i.question.id, "prompt": i.question.prompt}}
            for i in thread.injects if i.id not in session.fired_injects
        ],
    }


def session_view(session: Session, scenario_id: str) -> dict:
    return {
        "id": session.id,
        "scenario_id": scenario_id,
        "scenario_title": session.scenario.title,
        "scenario_digest": session.scenario_digest,
        "state": session.state,
        "thread_index": session.thread_index,
        "thread_count": len(session.scenario.threads),
        "roster": list(session.roster),
        "clock": session.clock,
        "fired_injects": sorted(session.fired_injects),
        "responses": [
            {"question_id": r.question_id, "respondent": r.respondent,
             "text": r.text, "seq": r.seq}
            for r in session.responses
        ],
        "scores": [
            {"measure_id": s.measure_id, "rating": s.rating, "note": s.note}
            for s in session.scores
        ],
        "action_items": [
            {"text": a.text, "owner": a.owner,
             "objective_refs": list(a.objective_refs)}
            for a in session.action_items
        ],
        "objective_trace": _trace_view(session.scenario),
        "event": _event_view(session),
        "measures": [
            {"id": m.id, "attached_to": m.attached_to,
             "target_response": m.target_response,
             "objective_refs": list(m.objective_refs)}
            for m in session.scenario.measures
        ],
    }


def debrief_view(report: DebriefReport) -> dict:
    return {
        "session_id": report.session_id,
        "scenario_title": report.scenario_title,
        "state": report.state,
        "objectives": [
            {
                "objective": o.objective_id,
                "label": o.label,
                "threads": list(o.threads),
                "measures": list(o.measure_ids),
                "mean_score": "unscored" if o.mean_score is None else o.mean_score,
                "unanswered_questions": list(o.unanswered_questions),
                "unfired_injects": list(o.unfired_injects),
            }
            for o in report.objectives
        ],
        "action_items": [
            {"text": a.text, "owner": a.owner,
             "objective_refs": list(a.objective_refs)}
            for a in report.action_items
        ],
        "questions_total": report.questions_total,
        "questions_answered": report.questions_answered,
        "injects_total": report.injects_total,
        "injects_fired": report.injects_fired,
    }


# --- request plumbing -------------------------------------------------------------

class _BadRequestError(ForgeError):
    code = "bad-request"


def _status_for(exc: ForgeError) -> int:
    if isinstance(exc, _BadRequestError):
        return 400
    if isinstance(exc, (NotFoundError, UnknownRefError)):
        return 404
    if isinstance(exc, (BadStateError, AlreadyFiredError, WrongThreadError)):
        return 409
    return 422


def _require(body: dict, name: str, kind: type):
    if not isinstance(body, dict) or name not in body:
        raise _BadRequestError(f"request body is missing field '{name}'")
    value = body[name]
    if not isinstance(value, kind):
        raise _BadRequestError(f"request field '{name}' must be {kind.__name__}")
    return value


def create_app(store_root: str | Path) -> FastAPI:
    app = FastAPI(title="irforge", docs_url=None, redoc_url=None)
    store = Store(store_root)
    app.state.store = store

    @app.exception_handler(ForgeError)
    def _forge_error(_request: Request, exc: ForgeError):
        return JSONResponse(status_code=_status_for(exc),
                            content={"error": exc.code, "detail": exc.message})

    @app.exception_handler(RequestValidationError)
    def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "bad-request", "detail": str(exc)})

    # catalogs ----------------------------------------------------------------

    @app.post("/catalogs", status_code=201)
    def post_catalog(body: dict = Body(...)):
        catalog_id = store.put_catalog(json.dumps(body))
        catalog = load_catalog(store.get_catalog_text(catalog_id))
        return {"id": catalog_id, "issues": len(catalog.issues),
                "triggers": len(catalog.triggers)}

    @app.get("/catalogs/{catalog_id}")
    def get_catalog(catalog_id: str):
        return Response(content=store.get_catalog_text(catalog_id),
                        media_type="application/json")

    # compilation ----------------------------------------------------------------

    @app.post("/compile", status_code=201)
    def post_compile(body: dict = Body(...)):
        catalog_id = _require(body, "catalog_id", str)
        spec_text = _require(body, "spec_text", str)
        catalog = load_catalog(store.get_catalog_text(catalog_id))
        spec = parse_spec(spec_text)
        scenario = compile_scenario(spec, catalog)
        scenario_id = store.put_scenario(emit_interchange(scenario))
        return {"id": scenario_id, "title": scenario.title,
                "objective_trace": _trace_view(scenario)}

    @app.get("/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        return Response(content=store.get_scenario_text(scenario_id),
                        media_type="application/json")

    @app.get("/scenarios/{scenario_id}/ttx")
    def get_scenario_ttx(scenario_id: str, participant: bool = False):
        scenario = store.get_scenario(scenario_id)
        return PlainTextResponse(emit_ttx(scenario, participant_mode=participant))

    # sessions ---------------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def post_session(body: dict = Body(...)):
        scenario_id = _require(body, "scenario_id", str)
        roster = _require(body, "roster", list)
        session = store.create_session(scenario_id, roster)
        return session_view(session, scenario_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        slot = store.get_slot(session_id)
        return session_view(slot.session, slot.scenario_id)

    def _mutate(session_id: str, cmd: dict, client_seq) -> dict:
        if client_seq is not None and not isinstance(client_seq, int):
            raise _BadRequestError("request field 'client_seq' must be int")
        session = store.apply(session_id, cmd, client_seq=client_seq)
        return session_view(session, store.get_slot(session_id).scenario_id)

    @app.post("/sessions/{session_id}/advance")
    def post_advance(session_id: str, body: dict | None = Body(default=None)):
        client_seq = (body or {}).get("client_seq")
        return _mutate(session_id, {"type": "advance"}, client_seq)

    @app.post("/sessions/{session_id}/injects/{inject_id}")
    def post_fire_inject(session_id: str, inject_id: str,
                         body: dict | None = Body(default=None)):
        client_seq = (body or {}).get("client_seq")
        return _mutate(session_id, {"type": "fire_inject", "inject_id": inject_id},
                       client_seq)

    @app.post("/sessions/{session_id}/responses")
    def post_response(session_id: str, body: dict = Body(...)):
        cmd = {
            "type": "record_response",
            "question_id": _require(body, "question_id", str),
            "respondent": _require(body, "respondent", str),
            "text": _require(body, "text", str),
        }
        return _mutate(session_id, cmd, body.get("client_seq"))

    @app.post("/sessions/{session_id}/scores")
    def post_scores(session_id: str, body: list = Body(...)):
        scores = []
        for item in body:
            scores.append({
                "measure_id": _require(item, "measure_id", str),
                "rating": _require(item, "rating", str),
                "note": str(item.get("note", "")),
            })
        return _mutate(session_id, {"type": "score", "scores": scores}, None)

    @app.post("/sessions/{session_id}/debrief")
    def post_debrief(session_id: str, body: dict = Body(...)):
        items = _require(body, "action_items", list)
        for item in items:
            _require(item, "text", str)
            _require(item, "owner", str)
        cmd = {"type": "debrief", "action_items": items}
        store.apply(session_id, cmd, client_seq=body.get("client_seq"))
        slot = store.get_slot(session_id)
        return debrief_view(runtime.build_debrief(slot.session))

    @app.get("/sessions/{session_id}/debrief")
    def get_debrief(session_id: str):
        slot = store.get_slot(session_id)
        return debrief_view(runtime.build_debrief(slot.session))

    return app


def serve(store_root: str | None = None, port: int | None = None,
          host: str = "127.0.0.1") -> None:
    """Run the HTTP service; honors FORGE_STORE and FORGE_PORT."""
    import uvicorn

    root = store_root or os.environ.get("FORGE_STORE", "./forge-store")
    chosen_port = port if port is not None else int(
        os.environ.get("FORGE_PORT", str(DEFAULT_PORT)))
    app = create_app(root)
    uvicorn.run(app, host=host, port=chosen_port, log_level="warning")
