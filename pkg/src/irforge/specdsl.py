"""Scenario-specification language: parser, canonical printer, objective resolution.

The language is a small line-oriented block format (see grammar in the
README). A document names the exercise, states which issues it must cover,
and optionally constrains trigger exclusion, incident count, planning mode,
and the organisation profile. `#` starts a comment; strings are double
quoted with backslash escapes; ids are bare tokens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import Catalog
from .errors import (EmptyObjectivesError, ParseError, UnknownRefError,
                     UnsupportedFormatError)

FORMAT_TTX = "ttx"


@dataclass(frozen=True)
class AllObjectives:
    pass


@dataclass(frozen=True)
class IssueIds:
    ids: tuple[str, ...]


@dataclass(frozen=True)
class CustomObjective:
    text: str
    covers: tuple[str, ...]


Objectives = AllObjectives | IssueIds | CustomObjective


@dataclass(frozen=True)
class AutoPlan:
    pass


@dataclass(frozen=True)
class FixturePlan:
    name: str


PlanMode = AutoPlan | FixturePlan


@dataclass(frozen=True)
class ScenarioSpec:
    title: str
    objectives: Objectives = field(default_factory=AllObjectives)
    format: str = FORMAT_TTX
    max_incidents: int | None = None  # None = unlimited
    exclude_hints: tuple[str, ...] = ()
    plan_mode: PlanMode = field(default_factory=AutoPlan)
    profile: tuple[tuple[str, str], ...] = ()

    def profile_get(self, key: str) -> str | None:
        for k, v in self.profile:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class ObjectiveEntry:
    id: str
    label: str
    issues: tuple[str, ...]


@dataclass(frozen=True)
class ObjectiveSet:
    spec_title: str
    entries: tuple[ObjectiveEntry, ...]

    def issue_ids(self) -> list[str]:
        seen: list[str] = []
        for entry in self.entries:
            for issue_id in entry.issues:
                if issue_id not in seen:
                    seen.append(issue_id)
        return seen


# --- tokenizer ---------------------------------------------------------------

_PUNCT = "{}[]:,"
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789-")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT | STRING | INT | punctuation | EOF
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == '"':
            i += 1
            col += 1
            chunks: list[str] = []
            while True:
                if i >= n or text[i] == "\n":
                    raise ParseError("unterminated string literal",
                                     line=start_line, column=start_col)
                c = text[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise ParseError("unterminated string escape",
                                         line=line, column=col)
                    esc = text[i + 1]
                    mapped = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}.get(esc)
                    if mapped is None:
                        raise ParseError(f"unknown string escape '\\{esc}'",
                                         line=line, column=col)
                    chunks.append(mapped)
                    i += 2
                    col += 2
                    continue
                chunks.append(c)
                i += 1
                col += 1
            tokens.append(_Token("STRING", "".join(chunks), start_line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch in _IDENT_START:
            j = i
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            tokens.append(_Token("IDENT", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line=line, column=col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str, expected: str | None = None) -> _Token:
        token = self.peek()
        if token.kind != kind:
            raise ParseError(f"unexpected {self._describe(token)}",
                             line=token.line, column=token.column,
                             expected=(expected or kind,))
        self.pos += 1
        return token

    def take_keyword(self, word: str) -> _Token:
        token = self.peek()
        if token.kind != "IDENT" or token.value != word:
            raise ParseError(f"unexpected {self._describe(token)}",
                             line=token.line, column=token.column,
                             expected=(f"'{word}'",))
        self.pos += 1
        return token

    @staticmethod
    def _describe(token: _Token) -> str:
        if token.kind == "EOF":
            return "end of input"
        if token.kind in ("IDENT", "INT"):
            return f"'{token.value}'"
        if token.kind == "STRING":
            return "string literal"
        return f"'{token.kind}'"

    def idlist(self) -> tuple[str, ...]:
        self.take("[")
        ids = [self.take("IDENT", "id").value]
        while self.peek().kind == ",":
            self.take(",")
            ids.append(self.take("IDENT", "id").value)
        self.take("]")
        return tuple(ids)

    def spec(self) -> ScenarioSpec:
        self.take_keyword("scenario")
        title = self.take("STRING", "scenario title").value
        self.take("{")
        seen: set[str] = set()
        objectives: Objectives = AllObjectives()
        fmt = FORMAT_TTX
        max_incidents: int | None = None
        exclude: tuple[str, ...] = ()
        plan: PlanMode = AutoPlan()
        profile: tuple[tuple[str, str], ...] = ()
        while self.peek().kind != "}":
            token = self.peek()
            if token.kind != "IDENT":
                raise ParseError(f"unexpected {self._describe(token)}",
                                 line=token.line, column=token.column,
                                 expected=("clause keyword", "'}'"))
            clause = token.value
            if clause in seen:
                raise ParseError(f"duplicate clause '{clause}'",
                                 line=token.line, column=token.column)
            if clause == "objectives":
                objectives = self._objectives_clause()
            elif clause == "format":
                fmt = self._format_clause()
            elif clause == "max-incidents":
                max_incidents = self._max_incidents_clause()
            elif clause == "exclude":
                exclude = self._exclude_clause()
            elif clause == "plan":
                plan = self._plan_clause()
            elif clause == "profile":
                profile = self._profile_clause()
            else:
                raise ParseError(f"unknown clause '{clause}'",
                                 line=token.line, column=token.column,
                                 expected=("objectives", "format", "max-incidents",
                                           "exclude", "plan", "profile"))
            seen.add(clause)
        self.take("}")
        self.take("EOF", "end of input")
        return ScenarioSpec(title=title, objectives=objectives, format=fmt,
                            max_incidents=max_incidents, exclude_hints=exclude,
                            plan_mode=plan, profile=profile)

    def _objectives_clause(self) -> Objectives:
        self.take_keyword("objectives")
        self.take(":")
        token = self.peek()
        if token.kind == "IDENT" and token.value == "all":
            self.pos += 1
            return AllObjectives()
        if token.kind == "IDENT" and token.value == "custom":
            self.pos += 1
            text = self.take("STRING", "objective text").value
            self.take_keyword("covers")
            return CustomObjective(text=text, covers=self.idlist())
        if token.kind == "[":
            ids = self.idlist()
            deduped = tuple(dict.fromkeys(ids))
            return IssueIds(ids=deduped)
        raise ParseError(f"unexpected {self._describe(token)}",
                         line=token.line, column=token.column,
                         expected=("'all'", "'custom'", "'['"))

    def _format_clause(self) -> str:
        self.take_keyword("format")
        self.take(":")
        token = self.take("IDENT", "format name")
        if token.value != FORMAT_TTX:
            raise UnsupportedFormatError(
                f"format '{token.value}' is not supported; only discussion-based "
                f"'{FORMAT_TTX}' exercises are in scope (hands-on 'functional' "
                f"exercises are not)")
        return token.value

    def _max_incidents_clause(self) -> int:
        self.take_keyword("max-incidents")
        self.take(":")
        token = self.take("INT", "positive integer")
        value = int(token.value)
        if value < 1:
            raise ParseError("max-incidents must be positive",
                             line=token.line, column=token.column)
        return value

    def _exclude_clause(self) -> tuple[str, ...]:
        self.take_keyword("exclude")
        self.take(":")
        return tuple(dict.fromkeys(self.idlist()))

    def _plan_clause(self) -> PlanMode:
        self.take_keyword("plan")
        self.take(":")
        token = self.take("IDENT", "'auto' or 'fixture'")
        if token.value == "auto":
            return AutoPlan()
        if token.value == "fixture":
            return FixturePlan(name=self.take("STRING", "fixture name").value)
        raise ParseError(f"unknown plan mode '{token.value}'",
                         line=token.line, column=token.column,
                         expected=("'auto'", "'fixture'"))

    def _profile_clause(self) -> tuple[tuple[str, str], ...]:
        self.take_keyword("profile")
        self.take("{")
        pairs: list[tuple[str, str]] = []
        keys: set[str] = set()
        while self.peek().kind != "}":
            key_token = self.take("IDENT", "profile key")
            if key_token.value in keys:
                raise ParseError(f"duplicate profile key '{key_token.value}'",
                                 line=key_token.line, column=key_token.column)
            keys.add(key_token.value)
            self.take(":")
            value = self.take("STRING", "profile value").value
            pairs.append((key_token.value, value))
        self.take("}")
        return tuple(pairs)


def parse_spec(text: str | bytes) -> ScenarioSpec:
    """Parse a scenario-specification document. Rejects anything malformed
    with a ParseError carrying line/column; never raises anything else on
    arbitrary input (aside from UnsupportedFormatError for non-ttx formats)."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not valid UTF-8: {exc}") from exc
    return _Parser(text).spec()


# --- canonical printer ---------------------------------------------------------

def _quote(value: str) -> str:
    escaped = (value.replace("\\", "\\\\").replace('"', '\\"')
                    .replace("\n", "\\n").replace("\t", "\\t"))
    return f'"{escaped}"'


def print_canonical(spec: ScenarioSpec) -> str:
    """Deterministic canonical text. Defaults are elided; clause order is
    fixed; profile keys keep their input order. parse_spec round-trips it."""
    lines = [f"scenario {_quote(spec.title)} {{"]
    if isinstance(spec.objectives, IssueIds):
        lines.append(f"  objectives: [{', '.join(spec.objectives.ids)}]")
    elif isinstance(spec.objectives, CustomObjective):
        lines.append(f"  objectives: custom {_quote(spec.objectives.text)} "
                     f"covers [{', '.join(spec.objectives.covers)}]")
    if spec.max_incidents is not None:
        lines.append(f"  max-incidents: {spec.max_incidents}")
    if spec.exclude_hints:
        lines.append(f"  exclude: [{', '.join(spec.exclude_hints)}]")
    if isinstance(spec.plan_mode, FixturePlan):
        lines.append(f"  plan: fixture {_quote(spec.plan_mode.name)}")
    if spec.profile:
        lines.append("  profile {")
        for key, value in spec.profile:
            lines.append(f"    {key}: {_quote(value)}")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- objective resolution ------------------------------------------------------

def resolve_objectives(spec: ScenarioSpec, catalog: Catalog) -> ObjectiveSet:
    """Turn a spec's objectives clause into concrete entries linked to catalog
    issues: one entry per issue for All (catalog order) and IssueIds (spec
    order), a single entry for Custom."""
    entries: list[ObjectiveEntry] = []
    if isinstance(spec.objectives, AllObjectives):
        for issue in catalog.issues:
            entries.append(ObjectiveEntry(id=issue.id, label=issue.title,
                                          issues=(issue.id,)))
    elif isinstance(spec.objectives, IssueIds):
        for issue_id in spec.objectives.ids:
            issue = catalog.issue(issue_id)  # raises UnknownRefError
            entries.append(ObjectiveEntry(id=issue.id, label=issue.title,
                                          issues=(issue.id,)))
    else:
        for issue_id in spec.objectives.covers:
            if not catalog.has_issue(issue_id):
                raise UnknownRefError(f"unknown issue id '{issue_id}'", ref=issue_id)
        entries.append(ObjectiveEntry(id="custom-1", label=spec.objectives.text,
                                      issues=spec.objectives.covers))
    if not entries:
        raise EmptyObjectivesError(
            f"spec '{spec.title}' resolves to zero objectives")
    return ObjectiveSet(spec_title=spec.title, entries=tuple(entries))
