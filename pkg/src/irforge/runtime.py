"""Live exercise sessions: a linear state machine over the compiled threads,
driven by commands, persisted as an append-only log, and reconstructable by
a deterministic replay of that log."""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, replace

from .compiler import EventThread, Inject, MeasuredScenario
from .emitter import emit_interchange
from .errors import (AlreadyClosedError, AlreadyFiredError, BadStateError,
                     CorruptLogError, EmptyRosterError, ForgeError,
                     InvariantError, SchemaError, UnknownRefError,
                     WrongThreadError)

CREATED = "created"
BRIEFING = "briefing"
IN_EVENT = "in-event"
DEBRIEF = "debrief"
CLOSED = "closed"

RATING_VALUES = {"yes": 1.0, "partial": 0.5, "no": 0.0}


@dataclass(frozen=True)
class ResponseRecord:
    question_id: str
    respondent: str
    text: str
    seq: int


@dataclass(frozen=True)
class MeasureScore:
    measure_id: str
    rating: str  # yes | partial | no
    note: str = ""


@dataclass(frozen=True)
class ActionItem:
    text: str
    owner: str
    objective_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Session:
    id: str
    scenario: MeasuredScenario
    scenario_digest: str
    roster: tuple[str, ...]
    state: str = CREATED
    thread_index: int | None = None
    fired_injects: frozenset[str] = frozenset()
    responses: tuple[ResponseRecord, ...] = ()
    scores: tuple[MeasureScore, ...] = ()
    action_items: tuple[ActionItem, ...] = ()
    clock: int = 0

    def current_thread(self) -> EventThread:
        if self.state != IN_EVENT or self.thread_index is None:
            raise BadStateError(f"session {self.id} is not in an event")
        return self.scenario.threads[self.thread_index]

    def state_label(self) -> str:
        if self.state == IN_EVENT:
            return f"{IN_EVENT}({self.thread_index})"
        return self.state


def scenario_digest(scenario: MeasuredScenario) -> str:
    return hashlib.sha256(emit_interchange(scenario).encode("utf-8")).hexdigest()


def open_session(scenario: MeasuredScenario, roster: list[str] | tuple[str, ...],
                 session_id: str | None = None) -> Session:
    """Start a session in Created with a fresh id and clock 0 (the genesis)."""
    roster = tuple(roster)
    if not roster or any(not label for label in roster):
        raise EmptyRosterError("roster must list at least one nonempty participant")
    return Session(
        id=session_id or "ses-" + uuid.uuid4().hex[:12],
        scenario=scenario,
        scenario_digest=scenario_digest(scenario),
        roster=roster,
    )


def _tick(session: Session, **changes) -> Session:
    return replace(session, clock=session.clock + 1, **changes)


def advance(session: Session) -> Session:
    """Move to the next state in the fixed Created -> Briefing -> InEvent(0..n-1)
    -> Debrief -> Closed order."""
    if session.state == CLOSED:
        raise AlreadyClosedError(f"session {session.id} is closed")
    if session.state == CREATED:
        return _tick(session, state=BRIEFING)
    if session.state == BRIEFING:
        return _tick(session, state=IN_EVENT, thread_index=0)
    if session.state == IN_EVENT:
        next_index = (session.thread_index or 0) + 1
        if next_index < len(session.scenario.threads):
            return _tick(session, thread_index=next_index)
        return _tick(session, state=DEBRIEF, thread_index=None)
    return _tick(session, state=CLOSED)


def _find_inject(scenario: MeasuredScenario, inject_id: str) -> tuple[int, Inject]:
    for index, thread in enumerate(scenario.threads):
        for inject in thread.injects:
            if inject.id == inject_id:
                return index, inject
    raise UnknownRefError(f"unknown inject id '{inject_id}'", ref=inject_id)


def fire_inject(session: Session, inject_id: str) -> Session:
    if session.state != IN_EVENT:
        raise BadStateError(
            f"cannot fire injects in state {session.state_label()}")
    thread_index, _ = _find_inject(session.scenario, inject_id)
    if thread_index != session.thread_index:
        raise WrongThreadError(
            f"inject {inject_id} belongs to event {thread_index}, session is "
            f"in event {session.thread_index}")
    if inject_id in session.fired_injects:
        raise AlreadyFiredError(f"inject {inject_id} was already fired")
    return _tick(session, fired_injects=session.fired_injects | {inject_id})


def _question_available(session: Session, question_id: str) -> bool:
    thread = session.current_thread()
    if any(q.id == question_id for q in thread.questions):
        return True
    for inject in thread.injects:
        if inject.question is not None and inject.question.id == question_id:
            return inject.id in session.fired_injects
    return False


def record_response(session: Session, question_id: str, respondent: str,
                    text: str) -> Session:
    if session.state != IN_EVENT:
        raise BadStateError(
            f"cannot record responses in state {session.state_label()}")
    if question_id not in session.scenario.question_ids():
        raise UnknownRefError(f"unknown question id '{question_id}'",
                              ref=question_id)
    if not _question_available(session, question_id):
        raise BadStateError(
            f"question {question_id} is not answerable now: it belongs to "
            f"another event or to an unfired inject")
    if not text:
        raise InvariantError("response text must be nonempty")
    if not respondent:
        raise InvariantError("respondent label must be nonempty")
    record = ResponseRecord(question_id=question_id, respondent=respondent,
                            text=text, seq=session.clock + 1)
    return _tick(session, responses=session.responses + (record,))


def score_session(session: Session, scores: list[MeasureScore]) -> Session:
    """Store measure ratings in Debrief; re-scoring a measure replaces it."""
    if session.state != DEBRIEF:
        raise BadStateError(f"cannot score in state {session.state_label()}")
    for score in scores:
        session.scenario.measure(score.measure_id)  # raises UnknownRefError
        if score.rating not in RATING_VALUES:
            raise InvariantError(
                f"unknown rating '{score.rating}' (expected one of "
                f"{', '.join(RATING_VALUES)})")
    merged = list(session.scores)
    for score in scores:
        for i, existing in enumerate(merged):
            if existing.measure_id == score.measure_id:
                merged[i] = score
                break
        else:
            merged.append(score)
    return _tick(session, scores=tuple(merged))


def record_action_items(session: Session, items: list[ActionItem]) -> Session:
    if session.state != DEBRIEF:
        raise BadStateError(
            f"cannot record action items in state {session.state_label()}")
    for item in items:
        if not item.text or not item.owner:
            raise InvariantError("action items need nonempty text and owner")
        for ref in item.objective_refs:
            if not any(o.id == ref or ref in o.issues
                       for o in session.scenario.objectives):
                raise UnknownRefError(
                    f"action item references unknown objective '{ref}'", ref=ref)
    return _tick(session, action_items=tuple(items))


# --- debrief -------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveDebrief:
    objective_id: str
    label: str
    threads: tuple[int, ...]
    measure_ids: tuple[str, ...]
    mean_score: float | None  # None renders as "unscored"
    unanswered_questions: tuple[str, ...]
    unfired_injects: tuple[str, ...]


@dataclass(frozen=True)
class DebriefReport:
    session_id: str
    scenario_title: str
    state: str
    objectives: tuple[ObjectiveDebrief, ...]
    action_items: tuple[ActionItem, ...]
    questions_total: int
    questions_answered: int
    injects_total: int
    injects_fired: int


def _objective_measures(session: Session, objective_id: str,
                        issues: tuple[str, ...]) -> list[str]:
    wanted = {objective_id, *issues}
    return [m.id for m in session.scenario.measures
            if wanted & set(m.objective_refs)]


def build_debrief(session: Session,
                  action_items: list[ActionItem] | None = None) -> DebriefReport:
    """Summarise the run per objective: coverage, scores, and every question
    and inject disposition. Passing action items records them first (Debrief
    state only)."""
    if session.state not in (DEBRIEF, CLOSED):
        raise BadStateError(
            f"debrief is only available from Debrief or Closed, session is "
            f"{session.state_label()}")
    if action_items is not None:
        session = record_action_items(session, action_items)

    scenario = session.scenario
    answered = {r.question_id for r in session.responses}
    ratings = {s.measure_id: s.rating for s in session.scores}
    threads_by_ref = {t.synopsis_ref: t for t in scenario.threads}

    entries = []
    for objective in scenario.objectives:
        trace = scenario.trace_for(objective.id)
        unanswered: list[str] = []
        unfired: list[str] = []
        for ref in trace.threads:
            thread = threads_by_ref[ref]
            for question in thread.all_questions():
                if question.id not in answered and question.id not in unanswered:
                    unanswered.append(question.id)
            for inject in thread.injects:
                if inject.id not in session.fired_injects and inject.id not in unfired:
                    unfired.append(inject.id)
        measure_ids = _objective_measures(session, objective.id, objective.issues)
        scored = [RATING_VALUES[ratings[m]] for m in measure_ids if m in ratings]
        mean = sum(scored) / len(scored) if scored else None
        entries.append(ObjectiveDebrief(
            objective_id=objective.id,
            label=objective.label,
            threads=trace.threads,
            measure_ids=tuple(measure_ids),
            mean_score=mean,
            unanswered_questions=tuple(unanswered),
            unfired_injects=tuple(unfired),
        ))

    all_questions = [q for t in scenario.threads for q in t.all_questions()]
    all_injects = [i for t in scenario.threads for i in t.injects]
    return DebriefReport(
        session_id=session.id,
        scenario_title=scenario.title,
        state=session.state,
        objectives=tuple(entries),
        action_items=session.action_items,
        questions_total=len(all_questions),
        questions_answered=sum(1 for q in all_questions if q.id in answered),
        injects_total=len(all_injects),
        injects_fired=len(session.fired_injects),
    )


# --- command log ----------------------------------------------------------------

def apply_command(session: Session, cmd: dict) -> Session:
    """Apply one logged command; the session state is a pure fold of these."""
    kind = cmd.get("type")
    if kind == "advance":
        return advance(session)
    if kind == "fire_inject":
        return fire_inject(session, cmd["inject_id"])
    if kind == "record_response":
        return record_response(session, cmd["question_id"], cmd["respondent"],
                               cmd["text"])
    if kind == "score":
        return score_session(session, [
            MeasureScore(measure_id=s["measure_id"], rating=s["rating"],
                         note=s.get("note", ""))
            for s in cmd["scores"]])
    if kind == "debrief":
        return record_action_items(session, [
            ActionItem(text=i["text"], owner=i["owner"],
                       objective_refs=tuple(i.get("objective_refs", [])))
            for i in cmd["action_items"]])
    raise SchemaError(f"unknown command type '{kind}'")


def genesis_record(session: Session, scenario_id: str | None = None) -> dict:
    cmd = {
        "type": "open",
        "session_id": session.id,
        "scenario_digest": session.scenario_digest,
        "roster": list(session.roster),
    }
    if scenario_id is not None:
        cmd["scenario_id"] = scenario_id
    return {"seq": 0, "cmd": cmd}


def command_record(seq: int, cmd: dict) -> dict:
    return {"seq": seq, "cmd": cmd}


def replay(log_text: str, scenario: MeasuredScenario) -> Session:
    """Rebuild a session from its log; any gap, digest mismatch, or invalid
    transition is a CorruptLogError."""
    records = []
    for lineno, line in enumerate(log_text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CorruptLogError(
                f"log line {lineno} is not valid JSON: {exc.msg}") from exc
    if not records:
        raise CorruptLogError("log has no genesis record")
    genesis = records[0]
    cmd = genesis.get("cmd", {})
    if genesis.get("seq") != 0 or cmd.get("type") != "open":
        raise CorruptLogError("log does not begin with an open record at seq 0")
    digest = scenario_digest(scenario)
    if cmd.get("scenario_digest") != digest:
        raise CorruptLogError(
            "scenario digest mismatch: the log was recorded against a "
            "different scenario version")
    session = open_session(scenario, cmd.get("roster", ()),
                           session_id=cmd.get("session_id"))
    for record in records[1:]:
        seq = record.get("seq")
        if seq != session.clock + 1:
            raise CorruptLogError(
                f"sequence gap: expected {session.clock + 1}, found {seq}")
        try:
            session = apply_command(session, record.get("cmd", {}))
        except ForgeError as exc:
            raise CorruptLogError(
                f"invalid command at seq {seq}: {exc.message}") from exc
    return session
