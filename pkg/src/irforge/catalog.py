"""Knowledge base of IR issues and the trigger events that exercise them.

A catalog maps socio-technical incident-response issues to trigger events.
Most issues are covered directly by one or more triggers; a cross-cutting
issue has no dedicated trigger and is exercised through triggers listed in
its ``cross_cover_refs``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import DuplicateIdError, ParseError, SchemaError, UnknownRefError

CATALOG_VERSION = "cat-1"

DIRECT = "direct"
CROSS_CUTTING = "cross-cutting"

PHASE_MIN = 1  # access
PHASE_MAX = 5  # aftermath


@dataclass(frozen=True)
class IrIssue:
    id: str
    title: str
    description: str = ""
    coverage_mode: str = DIRECT
    cross_cover_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class TriggerEvent:
    id: str
    text: str
    issue_refs: tuple[str, ...]
    phase: int
    cohesion_tags: frozenset[str] = frozenset()
    excludes: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Catalog:
    version: str
    issues: tuple[IrIssue, ...]
    triggers: tuple[TriggerEvent, ...]

    def issue(self, issue_id: str) -> IrIssue:
        for issue in self.issues:
            if issue.id == issue_id:
                return issue
        raise UnknownRefError(f"unknown issue id '{issue_id}'", ref=issue_id)

    def trigger(self, trigger_id: str) -> TriggerEvent:
        for trigger in self.triggers:
            if trigger.id == trigger_id:
                return trigger
        raise UnknownRefError(f"unknown trigger id '{trigger_id}'", ref=trigger_id)

    def has_issue(self, issue_id: str) -> bool:
        return any(i.id == issue_id for i in self.issues)

    def has_trigger(self, trigger_id: str) -> bool:
        return any(t.id == trigger_id for t in self.triggers)


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def clean(self) -> bool:
        return not self.findings


@dataclass(frozen=True)
class CoverageEntry:
    issue_id: str
    covered: bool
    covering_triggers: frozenset[str]


@dataclass(frozen=True)
class CoverageMap:
    entries: tuple[CoverageEntry, ...]

    def entry(self, issue_id: str) -> CoverageEntry:
        for e in self.entries:
            if e.issue_id == issue_id:
                return e
        raise UnknownRefError(f"no coverage entry for issue '{issue_id}'", ref=issue_id)

    def covered_issues(self) -> set[str]:
        return {e.issue_id for e in self.entries if e.covered}

    def all_covered(self) -> bool:
        return all(e.covered for e in self.entries)


# --- loading ----------------------------------------------------------------

_ISSUE_FIELDS = {"id", "title", "description", "coverage_mode", "cross_cover_refs"}
_TRIGGER_FIELDS = {"id", "text", "issue_refs", "phase", "cohesion_tags", "excludes"}
_TOP_FIELDS = {"version", "issues", "triggers"}


def _require(record: dict, name: str, kind: str, subject: str):
    if name not in record:
        raise SchemaError(f"{kind} '{subject}' is missing field '{name}'")
    return record[name]


def _check_unknown(record: dict, allowed: set[str], kind: str, subject: str) -> None:
    unknown = set(record) - allowed
    if unknown:
        raise SchemaError(
            f"{kind} '{subject}' has unknown field(s): {', '.join(sorted(unknown))}")


def _id_ok(value: str) -> bool:
    return bool(value) and value.isascii() and not any(c.isspace() for c in value)


def parse_catalog(source: str | bytes) -> Catalog:
    """Parse catalog interchange text into a Catalog without enforcing invariants.

    Exclusion symmetry is completed here; everything else is left for
    validate_catalog so that `forge catalog validate` can report findings
    instead of stopping at the first defect.
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"catalog is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError("malformed catalog document: " + exc.msg,
                         line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("catalog document must be a JSON object")
    _check_unknown(doc, _TOP_FIELDS, "catalog", "document")
    version = _require(doc, "version", "catalog", "document")
    if version != CATALOG_VERSION:
        raise SchemaError(
            f"unsupported catalog version '{version}' (expected '{CATALOG_VERSION}')")

    issues = []
    for record in _require(doc, "issues", "catalog", "document"):
        if not isinstance(record, dict):
            raise SchemaError("issue records must be JSON objects")
        issue_id = str(_require(record, "id", "issue", "<missing id>"))
        _check_unknown(record, _ISSUE_FIELDS, "issue", issue_id)
        issues.append(IrIssue(
            id=issue_id,
            title=str(_require(record, "title", "issue", issue_id)),
            description=str(record.get("description", "")),
            coverage_mode=str(record.get("coverage_mode", DIRECT)),
            cross_cover_refs=tuple(record.get("cross_cover_refs", [])),
        ))

    triggers = []
    for record in _require(doc, "triggers", "catalog", "document"):
        if not isinstance(record, dict):
            raise SchemaError("trigger records must be JSON objects")
        trigger_id = str(_require(record, "id", "trigger", "<missing id>"))
        _check_unknown(record, _TRIGGER_FIELDS, "trigger", trigger_id)
        phase = _require(record, "phase", "trigger", trigger_id)
        if not isinstance(phase, int):
            raise SchemaError(f"trigger '{trigger_id}' phase must be an integer")
        triggers.append(TriggerEvent(
            id=trigger_id,
            text=str(_require(record, "text", "trigger", trigger_id)),
            issue_refs=tuple(_require(record, "issue_refs", "trigger", trigger_id)),
            phase=phase,
            cohesion_tags=frozenset(record.get("cohesion_tags", [])),
            excludes=frozenset(record.get("excludes", [])),
        ))

    for collection, kind in ((issues, "issue"), (triggers, "trigger")):
        seen = set()
        for item in collection:
            if item.id in seen:
                raise DuplicateIdError(f"duplicate {kind} id '{item.id}'")
            seen.add(item.id)

    return _complete_exclusion_symmetry(
        Catalog(version=version, issues=tuple(issues), triggers=tuple(triggers)))


def _complete_exclusion_symmetry(catalog: Catalog) -> Catalog:
    by_id = {t.id: set(t.excludes) for t in catalog.triggers}
    for trigger in catalog.triggers:
        for other in trigger.excludes:
            if other in by_id:
                by_id[other].add(trigger.id)
    triggers = tuple(
        TriggerEvent(id=t.id, text=t.text, issue_refs=t.issue_refs, phase=t.phase,
                     cohesion_tags=t.cohesion_tags, excludes=frozenset(by_id[t.id]))
        for t in catalog.triggers)
    return Catalog(version=catalog.version, issues=catalog.issues, triggers=triggers)


def load_catalog(source: str | bytes) -> Catalog:
    """Parse and fully validate catalog text; reject anything with findings."""
    catalog = parse_catalog(source)
    report = validate_catalog(catalog)
    if report.clean:
        return catalog
    for finding in report.findings:
        if finding.code == "dangling-ref":
            raise UnknownRefError(finding.message, ref=finding.subject)
        if finding.code == "duplicate-id":
            raise DuplicateIdError(finding.message)
    raise SchemaError(report.findings[0].message)


def validate_catalog(catalog: Catalog) -> ValidationReport:
    """Check every catalog invariant; findings are data, not failures."""
    findings: list[Finding] = []

    def err(code: str, subject: str, message: str) -> None:
        findings.append(Finding("error", code, subject, message))

    issue_ids = [i.id for i in catalog.issues]
    trigger_ids = [t.id for t in catalog.triggers]
    for ids, kind in ((issue_ids, "issue"), (trigger_ids, "trigger")):
        seen: set[str] = set()
        for item_id in ids:
            if item_id in seen:
                err("duplicate-id", item_id, f"duplicate {kind} id '{item_id}'")
            seen.add(item_id)
    known_issues = set(issue_ids)
    known_triggers = set(trigger_ids)

    directly_covered: dict[str, set[str]] = {i: set() for i in issue_ids}
    for trigger in catalog.triggers:
        for ref in trigger.issue_refs:
            if ref in directly_covered:
                directly_covered[ref].add(trigger.id)

    for issue in catalog.issues:
        if not _id_ok(issue.id):
            err("bad-id", issue.id, f"issue id '{issue.id}' must be ASCII without whitespace")
        if not issue.title:
            err("empty-title", issue.id, f"issue '{issue.id}' has an empty title")
        if issue.coverage_mode == DIRECT:
            if issue.cross_cover_refs:
                err("stray-cross-refs", issue.id,
                    f"direct issue '{issue.id}' must not carry cross_cover_refs")
            if not directly_covered.get(issue.id):
                err("uncovered-issue", issue.id,
                    f"issue {issue.id} has no covering trigger")
        elif issue.coverage_mode == CROSS_CUTTING:
            if not issue.cross_cover_refs:
                err("empty-cross-refs", issue.id,
                    f"cross-cutting issue '{issue.id}' has empty cross_cover_refs")
            for ref in issue.cross_cover_refs:
                if ref not in known_triggers:
                    err("dangling-ref", issue.id,
                        f"issue '{issue.id}' cross_cover_refs names unknown trigger '{ref}'")
        else:
            err("bad-coverage-mode", issue.id,
                f"issue '{issue.id}' has unknown coverage_mode '{issue.coverage_mode}'")

    exclude_sets = {t.id: t.excludes for t in catalog.triggers}
    for trigger in catalog.triggers:
        if not _id_ok(trigger.id):
            err("bad-id", trigger.id,
                f"trigger id '{trigger.id}' must be ASCII without whitespace")
        if not trigger.text:
            err("empty-text", trigger.id, f"trigger '{trigger.id}' has empty text")
        if not trigger.issue_refs:
            err("no-issue-refs", trigger.id,
                f"trigger '{trigger.id}' lists no issues")
        for ref in trigger.issue_refs:
            if ref not in known_issues:
                err("dangling-ref", trigger.id,
                    f"trigger '{trigger.id}' names unknown issue '{ref}'")
        if not PHASE_MIN <= trigger.phase <= PHASE_MAX:
            err("bad-phase", trigger.id,
                f"trigger '{trigger.id}' phase {trigger.phase} outside "
                f"{PHASE_MIN}..{PHASE_MAX}")
        for other in trigger.excludes:
            if other == trigger.id:
                err("self-exclude", trigger.id,
                    f"trigger '{trigger.id}' excludes itself")
            elif other not in known_triggers:
                err("dangling-ref", trigger.id,
                    f"trigger '{trigger.id}' excludes unknown trigger '{other}'")
            elif trigger.id not in exclude_sets[other]:
                err("asymmetric-exclude", trigger.id,
                    f"exclusion {trigger.id}-{other} is not symmetric")

    return ValidationReport(findings=tuple(findings))


# --- queries ----------------------------------------------------------------

def triggers_for(catalog: Catalog, issue_id: str) -> set[str]:
    """Triggers that exercise an issue: its own for direct coverage, the
    cross_cover_refs for cross-cutting coverage."""
    issue = catalog.issue(issue_id)
    if issue.coverage_mode == CROSS_CUTTING:
        return set(issue.cross_cover_refs)
    return {t.id for t in catalog.triggers if issue_id in t.issue_refs}


def coverage_of(catalog: Catalog, selection: set[str]) -> CoverageMap:
    """Which issues a trigger selection covers, in catalog issue order."""
    for trigger_id in selection:
        if not catalog.has_trigger(trigger_id):
            raise UnknownRefError(f"unknown trigger id '{trigger_id}'", ref=trigger_id)
    entries = []
    for issue in catalog.issues:
        covering = frozenset(triggers_for(catalog, issue.id) & set(selection))
        entries.append(CoverageEntry(issue_id=issue.id, covered=bool(covering),
                                     covering_triggers=covering))
    return CoverageMap(entries=tuple(entries))


# --- serialization ----------------------------------------------------------

def serialize_catalog(catalog: Catalog) -> str:
    """Deterministic interchange text; load_catalog(serialize_catalog(c)) == c."""
    doc = {
        "version": catalog.version,
        "issues": [
            {
                "id": i.id,
                "title": i.title,
                "description": i.description,
                "coverage_mode": i.coverage_mode,
                "cross_cover_refs": list(i.cross_cover_refs),
            }
            for i in catalog.issues
        ],
        "triggers": [
            {
                "id": t.id,
                "text": t.text,
                "issue_refs": list(t.issue_refs),
                "phase": t.phase,
                "cohesion_tags": sorted(t.cohesion_tags),
                "excludes": sorted(t.excludes),
            }
            for t in catalog.triggers
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def seed_catalog_text() -> str:
    return (resources.files("irforge") / "data" / "seed-catalog.json").read_text("utf-8")


def load_seed_catalog() -> Catalog:
    return load_catalog(seed_catalog_text())
