"""Render compiled scenarios: facilitator/participant TTX text and the
lossless JSON interchange format (version "fss-1")."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .compiler import (Backstory, EventSynopsis, EventThread, ExtraDetail,
                       Inject, Measure, MeasuredScenario, OperationalEffect,
                       Question, ScenarioElements, ScenarioPlan, Threat,
                       ThreatActorDetail, TraceEntry, check_scenario)
from .errors import ParseError, SchemaError, VersionError
from .specdsl import ObjectiveEntry

INTERCHANGE_VERSION = "fss-1"

_ORDINALS = ("First", "Second", "Third", "Fourth", "Fifth",
             "Sixth", "Seventh", "Eighth", "Ninth", "Tenth")


def section_heading(position: int) -> str:
    """1-based section heading: ordinals up to ten, numeric after."""
    if 1 <= position <= len(_ORDINALS):
        return f"{_ORDINALS[position - 1]} Scenario"
    return f"Scenario {position}"


@dataclass(frozen=True)
class TtxSection:
    heading: str
    narrative: str
    questions: tuple[Question, ...]
    injects: tuple[Inject, ...]


@dataclass(frozen=True)
class TtxDocument:
    title: str
    preamble: str
    sections: tuple[TtxSection, ...]
    appendix: str  # facilitator notes; empty in participant mode


def build_ttx_document(scenario: MeasuredScenario,
                       participant_mode: bool = False) -> TtxDocument:
    preamble = (scenario.backstory.background_internal + "\n\n"
                + scenario.backstory.background_external)
    sections = []
    for position, thread in enumerate(scenario.threads, start=1):
        sections.append(TtxSection(
            heading=section_heading(position),
            narrative=thread.narrative,
            questions=thread.questions,
            injects=thread.injects,
        ))
    appendix = "" if participant_mode else _facilitator_appendix(scenario)
    return TtxDocument(title=scenario.title, preamble=preamble,
                       sections=tuple(sections), appendix=appendix)


def _facilitator_appendix(scenario: MeasuredScenario) -> str:
    elements = scenario.elements
    effect = elements.operational_effect
    lines = [
        "### Scenario Elements",
        "",
        f"- Intent: {elements.intent}",
        f"- Threat: {elements.threat.actor_class}; methods: "
        f"{elements.threat.methods}; sponsorship: {elements.threat.sponsorship}",
        f"- Target: {elements.target}",
        f"- Operational effect: confidentiality {effect.confidentiality}, "
        f"integrity {effect.integrity}, availability {effect.availability} "
        f"({effect.note})",
        f"- Business impact: {elements.business_impact}",
    ]
    if elements.extra_details:
        lines += ["", "### Extra Storyline Details", ""]
        lines += [f"- {d.element}: {d.detail}" for d in elements.extra_details]
    actor = scenario.backstory.threat_actor
    lines += [
        "",
        "### Backstory",
        "",
        f"- Threat actor: motive {actor.motive}; expertise {actor.expertise}",
        f"- Internal: {scenario.backstory.background_internal}",
        f"- External: {scenario.backstory.background_external}",
    ]
    preamble_synopsis = scenario.plan.preamble()
    if preamble_synopsis is not None:
        lines += ["", "### Preamble Context (hidden from participants)", ""]
        lines += [f"- {beat}" for beat in preamble_synopsis.storyline_beats]
    if scenario.measures:
        lines += ["", "### Measures and Target Responses", ""]
        for measure in scenario.measures:
            refs = ", ".join(measure.objective_refs)
            lines.append(f"- {measure.id} (attached to {measure.attached_to}; "
                         f"objectives {refs}): {measure.target_response}")
    return "\n".join(lines)


def render_ttx(document: TtxDocument, participant_mode: bool = False) -> str:
    lines = [f"# {document.title}", "", "## Preamble", ""]
    lines += document.preamble.split("\n")
    for section in document.sections:
        lines += ["", f"## {section.heading}", "", section.narrative]
        for question in section.questions:
            lines += ["", f"**Question:** {question.prompt}"]
        for inject in section.injects:
            lines += ["", f"Optional inject: {inject.narrative}"]
            if not participant_mode and inject.condition_note:
                lines += ["", f"Facilitator note (condition): {inject.condition_note}"]
            if inject.question is not None:
                lines += ["", f"**Question:** {inject.question.prompt}"]
    if not participant_mode and document.appendix:
        lines += ["", "## Facilitator Appendix", "", document.appendix]
    return "\n".join(lines) + "\n"


def emit_ttx(scenario: MeasuredScenario, participant_mode: bool = False) -> str:
    """Facilitator-facing exercise text; participant mode redacts target
    responses and inject conditions. Deterministic."""
    document = build_ttx_document(scenario, participant_mode)
    return render_ttx(document, participant_mode)


# --- interchange ---------------------------------------------------------------

def _question_doc(question: Question | None):
    if question is None:
        return None
    return {"id": question.id, "prompt": question.prompt}


def emit_interchange(scenario: MeasuredScenario) -> str:
    """Complete lossless serialization with stable key order."""
    doc = {
        "version": INTERCHANGE_VERSION,
        "title": scenario.title,
        "objectives": [
            {"id": o.id, "label": o.label, "issues": list(o.issues)}
            for o in scenario.objectives
        ],
        "elements": {
            "intent": scenario.elements.intent,
            "threat": {
                "actor_class": scenario.elements.threat.actor_class,
                "methods": scenario.elements.threat.methods,
                "sponsorship": scenario.elements.threat.sponsorship,
            },
            "target": scenario.elements.target,
            "operational_effect": {
                "confidentiality": scenario.elements.operational_effect.confidentiality,
                "integrity": scenario.elements.operational_effect.integrity,
                "availability": scenario.elements.operational_effect.availability,
                "note": scenario.elements.operational_effect.note,
            },
            "business_impact": scenario.elements.business_impact,
            "extra_details": [
                {"element": d.element, "detail": d.detail}
                for d in scenario.elements.extra_details
            ],
        },
        "backstory": {
            "threat_actor": {
                "motive": scenario.backstory.threat_actor.motive,
                "expertise": scenario.backstory.threat_actor.expertise,
            },
            "background_internal": scenario.backstory.background_internal,
            "background_external": scenario.backstory.background_external,
        },
        "plan": {
            "preamble_synopsis": scenario.plan.preamble_synopsis,
            "synopses": [
                {
                    "id": s.id,
                    "triggers": list(s.trigger_refs),
                    "beats": list(s.storyline_beats),
                    "simultaneity": [sorted(g) for g in s.simultaneity_groups],
                }
                for s in scenario.plan.synopses
            ],
        },
        "threads": [
            {
                "synopsis": t.synopsis_ref,
                "narrative": t.narrative,
                "questions": [_question_doc(q) for q in t.questions],
                "injects": [
                    {
                        "id": i.id,
                        "narrative": i.narrative,
                        "condition_note": i.condition_note,
                        "optional": i.optional,
                        "question": _question_doc(i.question),
                    }
                    for i in t.injects
                ],
            }
            for t in scenario.threads
        ],
        "measures": [
            {
                "id": m.id,
                "attached_to": m.attached_to,
                "target_response": m.target_response,
                "objective_refs": list(m.objective_refs),
            }
            for m in scenario.measures
        ],
        "objective_trace": [
            {
                "objective": e.objective_id,
                "triggers": list(e.triggers),
                "threads": list(e.threads),
            }
            for e in scenario.objective_trace
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _need(doc: dict, key: str, where: str):
    if key not in doc:
        raise SchemaError(f"interchange {where} is missing field '{key}'")
    return doc[key]


def _load_question(doc) -> Question | None:
    if doc is None:
        return None
    return Question(id=_need(doc, "id", "question"),
                    prompt=_need(doc, "prompt", "question"))


def load_interchange(text: str | bytes) -> MeasuredScenario:
    """Parse interchange text back into a MeasuredScenario, enforcing every
    scenario invariant."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"interchange is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("malformed interchange document: " + exc.msg,
                         line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("interchange document must be a JSON object")
    version = doc.get("version")
    if version != INTERCHANGE_VERSION:
        raise VersionError(f"unknown interchange version '{version}' "
                           f"(expected '{INTERCHANGE_VERSION}')")
    try:
        elements_doc = _need(doc, "elements", "document")
        threat_doc = _need(elements_doc, "threat", "elements")
        effect_doc = _need(elements_doc, "operational_effect", "elements")
        backstory_doc = _need(doc, "backstory", "document")
        actor_doc = _need(backstory_doc, "threat_actor", "backstory")
        plan_doc = _need(doc, "plan", "document")
        scenario = MeasuredScenario(
            title=_need(doc, "title", "document"),
            objectives=tuple(
                ObjectiveEntry(id=o["id"], label=o["label"],
                               issues=tuple(o["issues"]))
                for o in _need(doc, "objectives", "document")),
            elements=ScenarioElements(
                intent=_need(elements_doc, "intent", "elements"),
                threat=Threat(
                    actor_class=_need(threat_doc, "actor_class", "threat"),
                    methods=_need(threat_doc, "methods", "threat"),
                    sponsorship=_need(threat_doc, "sponsorship", "threat"),
                ),
                target=_need(elements_doc, "target", "elements"),
                operational_effect=OperationalEffect(
                    confidentiality=_need(effect_doc, "confidentiality", "effect"),
                    integrity=_need(effect_doc, "integrity", "effect"),
                    availability=_need(effect_doc, "availability", "effect"),
                    note=effect_doc.get("note", ""),
                ),
                business_impact=_need(elements_doc, "business_impact", "elements"),
                extra_details=tuple(
                    ExtraDetail(element=d["element"], detail=d["detail"])
                    for d in elements_doc.get("extra_details", [])),
            ),
            backstory=Backstory(
                threat_actor=ThreatActorDetail(
                    motive=_need(actor_doc, "motive", "threat_actor"),
                    expertise=_need(actor_doc, "expertise", "threat_actor"),
                ),
                background_internal=_need(backstory_doc, "background_internal",
                                          "backstory"),
                background_external=_need(backstory_doc, "background_external",
                                          "backstory"),
            ),
            plan=ScenarioPlan(
                preamble_synopsis=plan_doc.get("preamble_synopsis"),
                synopses=tuple(
                    EventSynopsis(
                        id=int(s["id"]),
                        trigger_refs=tuple(s["triggers"]),
                        storyline_beats=tuple(s.get("beats", [])),
                        simultaneity_groups=tuple(
                            frozenset(g) for g in s.get("simultaneity", [])),
                    )
                    for s in _need(plan_doc, "synopses", "plan")),
            ),
            threads=tuple(
                EventThread(
                    synopsis_ref=int(_need(t, "synopsis", "thread")),
                    narrative=_need(t, "narrative", "thread"),
                    questions=tuple(_load_question(q)
                                    for q in _need(t, "questions", "thread")),
                    injects=tuple(
                        Inject(
                            id=_need(i, "id", "inject"),
                            narrative=_need(i, "narrative", "inject"),
                            condition_note=i.get("condition_note", ""),
                            optional=bool(i.get("optional", True)),
                            question=_load_question(i.get("question")),
                        )
                        for i in t.get("injects", [])),
                )
                for t in _need(doc, "threads", "document")),
            measures=tuple(
                Measure(id=m["id"], attached_to=m["attached_to"],
                        target_response=m["target_response"],
                        objective_refs=tuple(m["objective_refs"]))
                for m in doc.get("measures", [])),
            objective_trace=tuple(
                TraceEntry(objective_id=e["objective"],
                           triggers=tuple(e["triggers"]),
                           threads=tuple(int(x) for x in e["threads"]))
                for e in doc.get("objective_trace", [])),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"interchange document is malformed: {exc}") from exc
    check_scenario(scenario)  # raises InvariantError
    return scenario
