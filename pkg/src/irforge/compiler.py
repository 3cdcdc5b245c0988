"""Scenario compiler: trigger selection, storyline assembly, synopsis
clustering, event crafting, walkthrough lint, and measure attachment.

The pipeline is a pure composition: spec + catalog in, measured scenario
out. Fixture plans reproduce hand-authored exercises exactly; auto plans
cluster triggers by shared cohesion tags.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

from .catalog import Catalog, triggers_for
from .errors import (CompileStageError, FixtureMismatchError, ForgeError,
                     InfeasiblePlanError, InvariantError, MissingFragmentError,
                     TemplateError, UncoverableObjectiveError, UnknownRefError,
                     UntracedObjectiveError)
from .specdsl import (FixturePlan, ObjectiveEntry, ObjectiveSet, PlanMode,
                      ScenarioSpec, resolve_objectives)

DEFAULT_PROMPT = "How would you respond?"
MAX_SYNOPSIS_SIZE = 5

ACTOR_CLASSES = ("apt", "insider", "low-skill")
EFFECT_LEVELS = ("none", "degraded", "total-loss")
EXPERTISE_LEVELS = ("low", "medium", "high", "very-high")


# --- domain types -------------------------------------------------------------

@dataclass(frozen=True)
class ExclusionJustification:
    trigger_id: str
    # (issue id, triggers that keep it covered) for each issue the exclusion touches
    kept_coverage: tuple[tuple[str, tuple[str, ...]], ...]


@dataclass(frozen=True)
class TriggerSelection:
    selected: tuple[str, ...]
    excluded: frozenset[str]
    justification: tuple[ExclusionJustification, ...]


@dataclass(frozen=True)
class Threat:
    actor_class: str
    methods: str
    sponsorship: str


@dataclass(frozen=True)
class OperationalEffect:
    confidentiality: str
    integrity: str
    availability: str
    note: str


@dataclass(frozen=True)
class ExtraDetail:
    element: str
    detail: str


@dataclass(frozen=True)
class ScenarioElements:
    intent: str
    threat: Threat
    target: str
    operational_effect: OperationalEffect
    business_impact: str
    extra_details: tuple[ExtraDetail, ...] = ()


@dataclass(frozen=True)
class ThreatActorDetail:
    motive: str
    expertise: str


@dataclass(frozen=True)
class Backstory:
    threat_actor: ThreatActorDetail
    background_internal: str
    background_external: str


@dataclass(frozen=True)
class EventSynopsis:
    id: int
    trigger_refs: tuple[str, ...]
    storyline_beats: tuple[str, ...] = ()
    simultaneity_groups: tuple[frozenset[int], ...] = ()


@dataclass(frozen=True)
class ScenarioPlan:
    synopses: tuple[EventSynopsis, ...]
    preamble_synopsis: int | None = None

    def trigger_union(self) -> set[str]:
        union: set[str] = set()
        for synopsis in self.synopses:
            union.update(synopsis.trigger_refs)
        return union

    def event_synopses(self) -> tuple[EventSynopsis, ...]:
        """Synopses that become live event threads (preamble excluded)."""
        return tuple(s for s in self.synopses if s.id != self.preamble_synopsis)

    def preamble(self) -> EventSynopsis | None:
        for synopsis in self.synopses:
            if synopsis.id == self.preamble_synopsis:
                return synopsis
        return None


@dataclass(frozen=True)
class Question:
    id: str
    prompt: str


@dataclass(frozen=True)
class Inject:
    id: str
    narrative: str
    condition_note: str = ""
    optional: bool = True
    question: Question | None = None


@dataclass(frozen=True)
class EventThread:
    synopsis_ref: int
    narrative: str
    questions: tuple[Question, ...]
    injects: tuple[Inject, ...] = ()

    def all_questions(self) -> tuple[Question, ...]:
        extra = tuple(i.question for i in self.injects if i.question is not None)
        return self.questions + extra


@dataclass(frozen=True)
class Measure:
    id: str
    attached_to: str  # question id or inject id
    target_response: str
    objective_refs: tuple[str, ...]


@dataclass(frozen=True)
class TraceEntry:
    objective_id: str
    triggers: tuple[str, ...]
    threads: tuple[int, ...]


@dataclass(frozen=True)
class MeasuredScenario:
    title: str
    objectives: tuple[ObjectiveEntry, ...]
    elements: ScenarioElements
    backstory: Backstory
    plan: ScenarioPlan
    threads: tuple[EventThread, ...]
    measures: tuple[Measure, ...] = ()
    objective_trace: tuple[TraceEntry, ...] = ()

    def thread(self, synopsis_ref: int) -> EventThread:
        for thread in self.threads:
            if thread.synopsis_ref == synopsis_ref:
                return thread
        raise UnknownRefError(f"no thread for synopsis {synopsis_ref}",
                              ref=str(synopsis_ref))

    def question_ids(self) -> set[str]:
        ids: set[str] = set()
        for thread in self.threads:
            ids.update(q.id for q in thread.all_questions())
        return ids

    def inject_ids(self) -> set[str]:
        return {i.id for t in self.threads for i in t.injects}

    def measure(self, measure_id: str) -> Measure:
        for measure in self.measures:
            if measure.id == measure_id:
                return measure
        raise UnknownRefError(f"unknown measure id '{measure_id}'", ref=measure_id)

    def trace_for(self, objective_id: str) -> TraceEntry:
        for entry in self.objective_trace:
            if entry.objective_id == objective_id:
                return entry
        raise UnknownRefError(f"no trace entry for objective '{objective_id}'",
                              ref=objective_id)


@dataclass(frozen=True)
class LintFinding:
    severity: str  # "error" | "warning" | "info"
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class LintReport:
    findings: tuple[LintFinding, ...]

    def worst_severity(self) -> str | None:
        for severity in ("error", "warning", "info"):
            if any(f.severity == severity for f in self.findings):
                return severity
        return None


# --- packaged data --------------------------------------------------------------

def _data_root():
    return resources.files("irforge") / "data"


@lru_cache(maxsize=None)
def load_fragment(trigger_id: str) -> dict:
    path = _data_root() / "fragments" / f"{trigger_id}.json"
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError:
        raise MissingFragmentError(
            f"no narrative fragment for trigger '{trigger_id}'") from None
    return json.loads(text)


@lru_cache(maxsize=None)
def load_plan_fixture(name: str) -> dict:
    path = _data_root() / "plans" / f"{name}.json"
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError:
        raise FixtureMismatchError(f"unknown plan fixture '{name}'") from None
    return json.loads(text)


@lru_cache(maxsize=None)
def load_measure_set(name: str) -> tuple[Measure, ...]:
    path = _data_root() / "measures" / f"{name}.json"
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError:
        raise UnknownRefError(f"unknown measure set '{name}'", ref=name) from None
    doc = json.loads(text)
    return tuple(
        Measure(id=m["id"], attached_to=m["attached_to"],
                target_response=m["target_response"],
                objective_refs=tuple(m["objective_refs"]))
        for m in doc["measures"])


# --- step 2: trigger selection ---------------------------------------------------

def select_triggers(objectives: ObjectiveSet, catalog: Catalog,
                    exclude_hints: set[str] | tuple[str, ...] = ()) -> TriggerSelection:
    """Select the triggers needed to cover every objective issue.

    All exclusion hints are honored together; if honoring them leaves any
    objective issue uncovered the whole selection fails, naming that
    objective. Hints naming triggers no objective needs are ignored.
    """
    hints = set(exclude_hints)
    for hint in hints:
        catalog.trigger(hint)  # raises UnknownRefError

    need: list[tuple[ObjectiveEntry, str]] = []
    issue_order: list[str] = []
    for entry in objectives.entries:
        for issue_id in entry.issues:
            need.append((entry, issue_id))
            if issue_id not in issue_order:
                issue_order.append(issue_id)

    base: set[str] = set()
    for issue_id in issue_order:
        base.update(triggers_for(catalog, issue_id))
    selected = tuple(sorted(base - hints))
    selected_set = set(selected)

    for entry, issue_id in need:
        if not triggers_for(catalog, issue_id) & selected_set:
            raise UncoverableObjectiveError(
                f"objective '{entry.id}' ({entry.label}) cannot be covered: "
                f"issue {issue_id} has no remaining trigger after exclusions",
                objective=entry.id)

    justification = []
    for trigger_id in sorted(base & hints):
        kept = []
        for issue_id in issue_order:
            issue_triggers = triggers_for(catalog, issue_id)
            if trigger_id in issue_triggers:
                kept.append((issue_id, tuple(sorted(issue_triggers & selected_set))))
        justification.append(ExclusionJustification(
            trigger_id=trigger_id, kept_coverage=tuple(kept)))

    return TriggerSelection(selected=selected, excluded=frozenset(base & hints),
                            justification=tuple(justification))


# --- step 3: storyline -----------------------------------------------------------

_RND_TEMPLATE = "rnd-apt"
_GENERIC_TEMPLATE = "generic"

_TEMPLATE_REQUIRED_KEYS = {
    _RND_TEMPLATE: ("sector",),
    _GENERIC_TEMPLATE: (),
}


def _rnd_storyline(profile_get) -> tuple[ScenarioElements, Backstory]:
    sector = profile_get("sector")
    elements = ScenarioElements(
        intent=("Walk a prolonged, targeted intrusion through the organisation "
                "to surface weaknesses across its people, processes, and "
                "technology, and give the response team a safe setting to "
                "practise against them."),
        threat=Threat(
            actor_class="apt",
            methods=("known exploits and zero-day attacks, applied patiently "
                     "over a prolonged campaign"),
            sponsorship=("nation-state sponsored, with interests aligned to a "
                         "competitor of the organisation"),
        ),
        target=("the organisation's intellectual property, reached through "
                "intermediary services, servers, shadow IT, and business assets"),
        operational_effect=OperationalEffect(
            confidentiality="total-loss",
            integrity="none",
            availability="degraded",
            note=("theft of intellectual property is the primary effect; "
                  "disruption of IT services is a secondary vector"),
        ),
        business_impact=("loss of the organisation's intellectual property "
                         "would be catastrophic, destroying its competitive "
                         "advantage at the least"),
    )
    backstory = Backstory(
        threat_actor=ThreatActorDetail(
            motive=("steal the organisation's intellectual property for "
                    "financial or commercial advantage"),
            expertise="very-high",
        ),
        background_internal=(
            f"The organisation is in a period of considerable growth: its "
            f"{sector} operation has expanded significantly and remains busy, "
            f"so it is employing new staff across the board and hiring "
            f"contractors to upgrade systems in a timely manner to ensure "
            f"minimal downtime."),
        background_external=(
            f"There is plenty of outside interest in the organisation's newest "
            f"{sector} developments, from competitors and potential buyers "
            f"alike. At the same time the threat landscape is evolving rapidly, "
            f"with highly skilled attackers increasingly going undetected."),
    )
    return elements, backstory


def _generic_storyline(profile_get) -> tuple[ScenarioElements, Backstory]:
    elements = ScenarioElements(
        intent=("Exercise the organisation's incident response end to end "
                "against a sustained intrusion, exposing weak points in "
                "people, process, and technology."),
        threat=Threat(
            actor_class="apt",
            methods="a mix of commodity attacks and targeted exploitation",
            sponsorship="organised and well resourced; sponsorship unclear",
        ),
        target=("the organisation's most valuable information assets and the "
                "services around them"),
        operational_effect=OperationalEffect(
            confidentiality="degraded",
            integrity="none",
            availability="degraded",
            note="data exposure, with service disruption used as cover",
        ),
        business_impact=("a sustained compromise would erode customer trust "
                         "and interrupt the organisation's ability to deliver "
                         "its core services"),
    )
    backstory = Backstory(
        threat_actor=ThreatActorDetail(
            motive="profit from stolen data and access",
            expertise="high",
        ),
        background_internal=("The organisation is midway through routine "
                             "growth and change; several teams are stretched "
                             "and systems are being upgraded."),
        background_external=("Sector peers have reported intrusions in recent "
                             "months, and attackers are growing more patient "
                             "and better resourced."),
    )
    return elements, backstory


_TEMPLATES = {
    _RND_TEMPLATE: _rnd_storyline,
    _GENERIC_TEMPLATE: _generic_storyline,
}


def _pick_template(spec: ScenarioSpec) -> str:
    explicit = spec.profile_get("template")
    if explicit is not None:
        if explicit not in _TEMPLATES:
            raise TemplateError(f"unknown storyline template '{explicit}'")
        return explicit
    sector = (spec.profile_get("sector") or "").lower()
    if "r&d" in sector or "research" in sector:
        return _RND_TEMPLATE
    return _GENERIC_TEMPLATE


def build_storyline(spec: ScenarioSpec,
                    selection: TriggerSelection) -> tuple[ScenarioElements, Backstory]:
    """Fill scenario elements and backstory from the profile-driven template."""
    del selection  # templates are profile-driven; the plan consumes the selection
    template = _pick_template(spec)
    for key in _TEMPLATE_REQUIRED_KEYS[template]:
        if spec.profile_get(key) is None:
            raise TemplateError(
                f"storyline template '{template}' requires profile key '{key}'")
    elements, backstory = _TEMPLATES[template](spec.profile_get)
    _check_elements(elements)
    _check_backstory(backstory)
    return elements, backstory


def _check_elements(elements: ScenarioElements) -> None:
    if not elements.intent or not elements.target or not elements.business_impact:
        raise InvariantError("scenario elements incomplete: intent, target, and "
                             "business impact must be nonempty")
    if elements.threat.actor_class not in ACTOR_CLASSES:
        raise InvariantError(
            f"unknown threat actor class '{elements.threat.actor_class}'")
    effect = elements.operational_effect
    for dim, value in (("confidentiality", effect.confidentiality),
                       ("integrity", effect.integrity),
                       ("availability", effect.availability)):
        if value not in EFFECT_LEVELS:
            raise InvariantError(f"operational effect {dim} has unknown level '{value}'")
    if {effect.confidentiality, effect.integrity, effect.availability} == {"none"}:
        raise InvariantError("at least one operational effect dimension must "
                             "differ from 'none'")


def _check_backstory(backstory: Backstory) -> None:
    if not (backstory.threat_actor.motive and backstory.background_internal
            and backstory.background_external):
        raise InvariantError("backstory fields must be nonempty")
    if backstory.threat_actor.expertise not in EXPERTISE_LEVELS:
        raise InvariantError(
            f"unknown expertise level '{backstory.threat_actor.expertise}'")


# --- step 4.1: synopsis clustering -----------------------------------------------

def _phase_key(catalog: Catalog):
    return lambda trigger_id: (catalog.trigger(trigger_id).phase, trigger_id)


def _excludes_violated(catalog: Catalog, trigger_ids) -> tuple[str, str] | None:
    ids = list(trigger_ids)
    for i, a in enumerate(ids):
        excludes = catalog.trigger(a).excludes
        for b in ids[i + 1:]:
            if b in excludes:
                return (a, b)
    return None


def _check_synopsis(synopsis: EventSynopsis, catalog: Catalog) -> None:
    refs = synopsis.trigger_refs
    if not refs:
        raise InvariantError(f"synopsis {synopsis.id} has no triggers")
    if len(set(refs)) != len(refs):
        raise InvariantError(f"synopsis {synopsis.id} repeats a trigger")
    positions = list(range(len(refs)))
    grouped: dict[int, int] = {}
    for gi, group in enumerate(synopsis.simultaneity_groups):
        members = sorted(group)
        if len(members) < 2:
            raise InvariantError(
                f"synopsis {synopsis.id} simultaneity group needs two or more positions")
        if members != list(range(members[0], members[-1] + 1)):
            raise InvariantError(
                f"synopsis {synopsis.id} simultaneity group must cover adjacent positions")
        for pos in members:
            if pos not in positions:
                raise InvariantError(
                    f"synopsis {synopsis.id} simultaneity group names position "
                    f"{pos} outside the trigger list")
            if pos in grouped:
                raise InvariantError(
                    f"synopsis {synopsis.id} position {pos} is in two "
                    f"simultaneity groups")
            grouped[pos] = gi
    key = _phase_key(catalog)
    for pos in range(len(refs) - 1):
        same_group = grouped.get(pos) is not None and grouped.get(pos) == grouped.get(pos + 1)
        if same_group:
            continue
        if key(refs[pos]) > key(refs[pos + 1]):
            raise InvariantError(
                f"synopsis {synopsis.id} violates phase ordering between "
                f"{refs[pos]} and {refs[pos + 1]}")
    conflict = _excludes_violated(catalog, refs)
    if conflict:
        raise InvariantError(
            f"synopsis {synopsis.id} pairs mutually exclusive triggers "
            f"{conflict[0]} and {conflict[1]}")


def _load_fixture_plan(name: str, selection: TriggerSelection,
                       catalog: Catalog, max_incidents: int | None) -> ScenarioPlan:
    doc = load_plan_fixture(name)
    synopses = []
    for record in doc["synopses"]:
        synopses.append(EventSynopsis(
            id=int(record["id"]),
            trigger_refs=tuple(record["triggers"]),
            storyline_beats=tuple(record.get("beats", [])),
            simultaneity_groups=tuple(frozenset(g) for g in record.get("simultaneity", [])),
        ))
    plan = ScenarioPlan(synopses=tuple(synopses),
                        preamble_synopsis=doc.get("preamble_synopsis"))

    selected = set(selection.selected)
    union = plan.trigger_union()
    for synopsis in plan.synopses:
        for trigger_id in synopsis.trigger_refs:
            if trigger_id not in selected:
                raise FixtureMismatchError(
                    f"fixture '{name}' uses trigger {trigger_id} which is not "
                    f"in the selection")
    missing = selected - union
    if missing:
        raise FixtureMismatchError(
            f"fixture '{name}' leaves selected trigger(s) unused: "
            f"{', '.join(sorted(missing))}")
    if max_incidents is not None and len(plan.event_synopses()) > max_incidents:
        raise InfeasiblePlanError(
            f"fixture '{name}' has {len(plan.event_synopses())} event synopses, "
            f"over the max-incidents limit of {max_incidents}")
    if plan.preamble_synopsis is not None and plan.preamble() is None:
        raise FixtureMismatchError(
            f"fixture '{name}' names preamble synopsis "
            f"{plan.preamble_synopsis} which does not exist")
    for synopsis in plan.synopses:
        _check_synopsis(synopsis, catalog)
    return plan


def _cap_clusters(clusters: tuple[frozenset, ...], max_incidents: int,
                  compatible) -> tuple[frozenset, ...] | None:
    """Merge whole cohesion clusters until at most max_incidents remain.

    Smallest-pair-first with deterministic backtracking: a plain greedy can
    wall itself in even when a valid merge sequence exists. Infeasibility is
    judged relative to the cohesion clustering (clusters are never split).
    """
    seen: set[frozenset] = set()

    def search(state: tuple[frozenset, ...]):
        if len(state) <= max_incidents:
            return state
        key = frozenset(state)
        if key in seen:
            return None
        seen.add(key)
        candidates = []
        for i in range(len(state)):
            for j in range(i + 1, len(state)):
                if compatible(state[i] | state[j]):
                    candidates.append((len(state[i]) + len(state[j]),
                                       min(state[i]), min(state[j]), i, j))
        candidates.sort()
        for _, _, _, i, j in candidates:
            merged = state[i] | state[j]
            rest = [c for k, c in enumerate(state) if k not in (i, j)]
            result = search(tuple(sorted(rest + [merged], key=min)))
            if result is not None:
                return result
        return None

    return search(tuple(sorted(clusters, key=min)))


def _auto_plan(selection: TriggerSelection, catalog: Catalog,
               max_incidents: int | None) -> ScenarioPlan:
    triggers = sorted(selection.selected)
    tags = {t: catalog.trigger(t).cohesion_tags for t in triggers}

    parent = {t: t for t in triggers}

    def find(t: str) -> str:
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    members = {t: {t} for t in triggers}

    def compatible(group: set[str]) -> bool:
        return (len(group) <= MAX_SYNOPSIS_SIZE
                and _excludes_violated(catalog, group) is None)

    pairs = []
    for i, a in enumerate(triggers):
        for b in triggers[i + 1:]:
            overlap = len(tags[a] & tags[b])
            if overlap:
                pairs.append((-overlap, a, b))
    pairs.sort()

    for _, a, b in pairs:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        merged = members[ra] | members[rb]
        if not compatible(merged):
            continue
        root, other = sorted((ra, rb))
        parent[other] = root
        members[root] = merged

    clusters = sorted((frozenset(members[t]) for t in triggers if find(t) == t),
                      key=min)

    if max_incidents is not None and len(clusters) > max_incidents:
        capped = _cap_clusters(tuple(clusters), max_incidents, compatible)
        if capped is None:
            raise InfeasiblePlanError(
                f"cannot fit {len(clusters)} incident clusters within "
                f"max-incidents {max_incidents}: exclusion and size limits "
                f"block every merge of the cohesion clusters")
        clusters = list(capped)

    key = _phase_key(catalog)
    synopses = tuple(
        EventSynopsis(id=index, trigger_refs=tuple(sorted(cluster, key=key)))
        for index, cluster in enumerate(clusters))
    plan = ScenarioPlan(synopses=synopses, preamble_synopsis=None)
    for synopsis in plan.synopses:
        _check_synopsis(synopsis, catalog)
    return plan


def cluster_synopses(selection: TriggerSelection, catalog: Catalog,
                     plan_mode: PlanMode, max_incidents: int | None = None) -> ScenarioPlan:
    """Group the selected triggers into event synopses (one per cyber incident)."""
    if not selection.selected:
        raise InvariantError("cannot plan an empty trigger selection")
    if isinstance(plan_mode, FixturePlan):
        plan = _load_fixture_plan(plan_mode.name, selection, catalog, max_incidents)
    else:
        plan = _auto_plan(selection, catalog, max_incidents)
    if plan.trigger_union() != set(selection.selected):
        raise InvariantError("plan triggers do not match the selection")
    return plan


# --- step 4.2: event crafting ------------------------------------------------------

def _thread_from_fragments(synopsis: EventSynopsis, catalog: Catalog,
                           fragments: dict[str, dict] | None) -> EventThread:
    sentences: list[str] = []
    prompt = None
    injects: list[dict] = []
    for trigger_id in synopsis.trigger_refs:
        fragment = (fragments.get(trigger_id) if fragments is not None
                    else load_fragment(trigger_id))
        if fragment is None:
            raise MissingFragmentError(
                f"no narrative fragment for trigger '{trigger_id}'")
        sentences.append(fragment["narrative"])
        if prompt is None and fragment.get("prompt"):
            prompt = fragment["prompt"]
        injects.extend(fragment.get("injects", []))
    return _assemble_thread(synopsis.id, " ".join(sentences),
                            prompt or DEFAULT_PROMPT, injects)


def _assemble_thread(synopsis_id: int, narrative: str, prompt: str,
                     inject_records: list[dict]) -> EventThread:
    primary = Question(id=f"q{synopsis_id}-1", prompt=prompt)
    injects = []
    for j, record in enumerate(inject_records, start=1):
        question = None
        if record.get("question"):
            question = Question(id=f"q{synopsis_id}-{j + 1}",
                                prompt=record["question"])
        injects.append(Inject(
            id=f"inj-{synopsis_id}-{j}",
            narrative=record["narrative"],
            condition_note=record.get("condition_note", ""),
            optional=bool(record.get("optional", True)),
            question=question,
        ))
    return EventThread(synopsis_ref=synopsis_id, narrative=narrative,
                       questions=(primary,), injects=tuple(injects))


def craft_events(plan: ScenarioPlan, elements: ScenarioElements,
                 backstory: Backstory, catalog: Catalog,
                 overrides: dict[int, dict] | None = None,
                 fragments: dict[str, dict] | None = None) -> tuple[EventThread, ...]:
    """Craft one event thread per non-preamble synopsis.

    Fixture plans supply thread material (narrative, prompt, injects) as
    overrides; otherwise narratives are assembled from the per-trigger
    fragments. The preamble synopsis renders into backstory/preamble text
    downstream and produces no thread here.
    """
    del elements, backstory  # crafted text is fragment/override-driven
    threads = []
    for synopsis in plan.event_synopses():
        override = (overrides or {}).get(synopsis.id)
        if override is not None:
            threads.append(_assemble_thread(
                synopsis.id, override["narrative"],
                override.get("prompt") or DEFAULT_PROMPT,
                override.get("injects", [])))
        else:
            threads.append(_thread_from_fragments(synopsis, catalog, fragments))
    for thread in threads:
        if not thread.narrative:
            raise InvariantError(f"thread {thread.synopsis_ref} has an empty narrative")
    all_inject_ids = [i.id for t in threads for i in t.injects]
    if len(all_inject_ids) != len(set(all_inject_ids)):
        raise InvariantError("inject ids are not unique across the scenario")
    return tuple(threads)


# --- step 4.3: walkthrough lint ------------------------------------------------------

_LINT_STOPWORDS = frozenset({
    "the", "and", "with", "from", "that", "this", "have", "been", "its",
    "their", "they", "them", "for", "are", "was", "were", "will", "would",
    "organisation", "organisations", "team", "teams", "attack", "attacks",
    "attackers", "staff", "systems", "time", "over", "into", "than", "same",
})


def _content_words(text: str) -> set[str]:
    words = set()
    current: list[str] = []
    for ch in text.lower():
        if ch.isalpha():
            current.append(ch)
        else:
            if len(current) >= 4:
                words.add("".join(current))
            current = []
    if len(current) >= 4:
        words.add("".join(current))
    return words - _LINT_STOPWORDS


def walkthrough_lint(threads: tuple[EventThread, ...], elements: ScenarioElements,
                     backstory: Backstory,
                     measures: tuple[Measure, ...] = ()) -> LintReport:
    """Final-details walkthrough: surface gaps before the exercise runs."""
    del elements
    findings: list[LintFinding] = []
    if not threads:
        findings.append(LintFinding("error", "no-threads", "scenario",
                                    "no event threads"))
        return LintReport(findings=tuple(findings))

    measured: set[str] = {m.attached_to for m in measures}
    for thread in threads:
        for question in thread.questions:
            if question.id not in measured:
                findings.append(LintFinding(
                    "warning", "unmeasured-question", question.id,
                    f"question {question.id} has no target response"))
        for inject in thread.injects:
            question = inject.question
            if question is not None and question.id not in measured \
                    and inject.id not in measured:
                findings.append(LintFinding(
                    "warning", "unmeasured-question", question.id,
                    f"question {question.id} has no target response"))
    for thread in threads:
        for inject in thread.injects:
            if not inject.condition_note:
                findings.append(LintFinding(
                    "warning", "inject-without-condition", inject.id,
                    f"inject {inject.id} has no condition note"))

    narrative_words: set[str] = set()
    for thread in threads:
        narrative_words |= _content_words(thread.narrative)
        for inject in thread.injects:
            narrative_words |= _content_words(inject.narrative)
    backstory_details = (
        ("threat-actor-motive", backstory.threat_actor.motive),
        ("background-internal", backstory.background_internal),
        ("background-external", backstory.background_external),
    )
    for label, detail in backstory_details:
        if not _content_words(detail) & narrative_words:
            findings.append(LintFinding(
                "info", "unreferenced-backstory", label,
                f"backstory detail '{label}' is never referenced by any narrative"))

    for thread in threads:
        if len(thread.injects) > 3:
            findings.append(LintFinding(
                "info", "inject-pacing", f"thread-{thread.synopsis_ref}",
                f"thread {thread.synopsis_ref} has {len(thread.injects)} injects; "
                f"more than 3 risks pacing problems"))

    return LintReport(findings=tuple(findings))


# --- step 5 (design side): measures ---------------------------------------------------

def attach_measures(scenario: MeasuredScenario,
                    measure_defs: tuple[Measure, ...]) -> MeasuredScenario:
    """Attach performance measures to questions/injects.

    A non-empty measure set must observe every objective; the trace of
    objectives onto threads must already be total.
    """
    question_ids = scenario.question_ids()
    inject_ids = scenario.inject_ids()
    seen: set[str] = set()
    for measure in measure_defs:
        if measure.id in seen:
            raise InvariantError(f"duplicate measure id '{measure.id}'")
        seen.add(measure.id)
        if measure.attached_to not in question_ids | inject_ids:
            raise UnknownRefError(
                f"measure '{measure.id}' attaches to unknown point "
                f"'{measure.attached_to}'", ref=measure.attached_to)
        if not measure.objective_refs:
            raise InvariantError(f"measure '{measure.id}' references no objectives")
        known = {entry.id for entry in scenario.objectives} \
            | {i for entry in scenario.objectives for i in entry.issues}
        for ref in measure.objective_refs:
            if ref not in known:
                raise UnknownRefError(
                    f"measure '{measure.id}' references unknown objective '{ref}'",
                    ref=ref)

    unthreaded = tuple(entry.objective_id for entry in scenario.objective_trace
                       if not entry.threads)
    if unthreaded:
        raise UntracedObjectiveError(
            f"objective(s) exercised by no thread: {', '.join(unthreaded)}",
            objectives=unthreaded)
    if measure_defs:
        observed: set[str] = set()
        for measure in measure_defs:
            observed.update(measure.objective_refs)
        unobserved = tuple(
            entry.id for entry in scenario.objectives
            if entry.id not in observed and not set(entry.issues) & observed)
        if unobserved:
            raise UntracedObjectiveError(
                f"objective(s) observed by no measure: {', '.join(unobserved)}",
                objectives=unobserved)
    return replace(scenario, measures=tuple(measure_defs))


def _objective_trace(objectives: ObjectiveSet, catalog: Catalog,
                     plan: ScenarioPlan,
                     threads: tuple[EventThread, ...]) -> tuple[TraceEntry, ...]:
    plan_triggers = plan.trigger_union()
    thread_triggers = {
        t.synopsis_ref: set(next(s for s in plan.synopses
                                 if s.id == t.synopsis_ref).trigger_refs)
        for t in threads}
    entries = []
    for entry in objectives.entries:
        triggers: set[str] = set()
        for issue_id in entry.issues:
            triggers |= triggers_for(catalog, issue_id) & plan_triggers
        exercising = sorted(ref for ref, trigs in thread_triggers.items()
                            if trigs & triggers)
        entries.append(TraceEntry(objective_id=entry.id,
                                  triggers=tuple(sorted(triggers)),
                                  threads=tuple(exercising)))
    untraced = [e.objective_id for e in entries if not e.threads]
    if untraced:
        raise UntracedObjectiveError(
            f"objective(s) exercised by no thread: {', '.join(untraced)}",
            objectives=tuple(untraced))
    return tuple(entries)


# --- the pipeline -----------------------------------------------------------------------

@contextmanager
def _stage(name: str):
    try:
        yield
    except CompileStageError:
        raise
    except ForgeError as exc:
        raise CompileStageError(name, exc) from exc


def compile_scenario(spec: ScenarioSpec, catalog: Catalog,
                     measure_defs: tuple[Measure, ...] | None = None) -> MeasuredScenario:
    """Run the full pipeline: objectives, selection, storyline, plan, threads,
    trace, measures. Deterministic for fixed inputs."""
    with _stage("objectives"):
        objectives = resolve_objectives(spec, catalog)
    with _stage("selection"):
        selection = select_triggers(objectives, catalog, spec.exclude_hints)
    with _stage("storyline"):
        elements, backstory = build_storyline(spec, selection)
    with _stage("planning"):
        plan = cluster_synopses(selection, catalog, spec.plan_mode,
                                spec.max_incidents)
    overrides = None
    fixture_measures: tuple[Measure, ...] = ()
    if isinstance(spec.plan_mode, FixturePlan):
        doc = load_plan_fixture(spec.plan_mode.name)
        overrides = {int(k): v for k, v in doc.get("threads", {}).items()}
        if doc.get("measures"):
            fixture_measures = load_measure_set(doc["measures"])
    with _stage("crafting"):
        threads = craft_events(plan, elements, backstory, catalog,
                               overrides=overrides)
    with _stage("tracing"):
        trace = _objective_trace(objectives, catalog, plan, threads)
    scenario = MeasuredScenario(
        title=spec.title,
        objectives=objectives.entries,
        elements=elements,
        backstory=backstory,
        plan=plan,
        threads=threads,
        measures=(),
        objective_trace=trace,
    )
    defs = measure_defs if measure_defs is not None else fixture_measures
    with _stage("measures"):
        scenario = attach_measures(scenario, tuple(defs))
    return scenario


def check_scenario(scenario: MeasuredScenario) -> None:
    """Enforce every MeasuredScenario invariant; raises InvariantError."""
    if not scenario.plan.synopses:
        raise InvariantError("plan has no synopses")
    if not scenario.threads:
        raise InvariantError("scenario has no event threads")
    event_ids = {s.id for s in scenario.plan.event_synopses()}
    thread_ids = {t.synopsis_ref for t in scenario.threads}
    if event_ids != thread_ids:
        raise InvariantError("threads do not match the plan's event synopses")
    for thread in scenario.threads:
        if not thread.narrative:
            raise InvariantError(f"thread {thread.synopsis_ref} has an empty narrative")
        if not thread.questions:
            raise InvariantError(f"thread {thread.synopsis_ref} has no question")
    inject_ids = [i.id for t in scenario.threads for i in t.injects]
    if len(inject_ids) != len(set(inject_ids)):
        raise InvariantError("inject ids are not unique across the scenario")
    traced = {entry.objective_id for entry in scenario.objective_trace}
    declared = {entry.id for entry in scenario.objectives}
    if traced != declared or any(not e.threads for e in scenario.objective_trace):
        raise InvariantError("objective_trace not total")
    points = scenario.question_ids() | scenario.inject_ids()
    known_objectives = declared | {i for e in scenario.objectives for i in e.issues}
    for measure in scenario.measures:
        if measure.attached_to not in points:
            raise InvariantError(
                f"measure '{measure.id}' attaches to unknown point "
                f"'{measure.attached_to}'")
        for ref in measure.objective_refs:
            if ref not in known_objectives:
                raise InvariantError(
                    f"measure '{measure.id}' references unknown objective '{ref}'")
    _check_elements(scenario.elements)
    _check_backstory(scenario.backstory)
