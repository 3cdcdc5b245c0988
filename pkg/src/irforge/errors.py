"""Exception hierarchy shared by all irforge modules.

Every error carries a stable ``code`` (kebab-case) so the CLI and HTTP
service can report failures uniformly.
"""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for all domain errors raised by irforge."""

    code = "forge-error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# --- document parsing / loading ------------------------------------------

class ParseError(ForgeError):
    """Malformed document text; carries line/column and, for the DSL, the expected tokens."""

    code = "parse-error"

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: tuple[str, ...] = ()):
        location = f" at line {line}, column {column}" if line else ""
        hint = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message}{location}{hint}")
        self.line = line
        self.column = column
        self.expected = expected


class SchemaError(ForgeError):
    code = "schema-error"


class UnknownRefError(ForgeError):
    """A reference (issue id, trigger id, question id, ...) does not resolve."""

    code = "unknown-ref"

    def __init__(self, message: str, ref: str = ""):
        super().__init__(message)
        self.ref = ref


class DuplicateIdError(ForgeError):
    code = "duplicate-id"


class VersionError(ForgeError):
    code = "version-error"


class InvariantError(ForgeError):
    code = "invariant-error"


# --- spec language ---------------------------------------------------------

class UnsupportedFormatError(ForgeError):
    code = "unsupported-format"


class EmptyObjectivesError(ForgeError):
    code = "empty-objectives"


# --- compilation -----------------------------------------------------------

class UncoverableObjectiveError(ForgeError):
    """An objective's issues cannot be covered by any non-excluded trigger."""

    code = "uncoverable-objective"

    def __init__(self, message: str, objective: str = ""):
        super().__init__(message)
        self.objective = objective


class TemplateError(ForgeError):
    code = "template-error"


class FixtureMismatchError(ForgeError):
    code = "fixture-mismatch"


class InfeasiblePlanError(ForgeError):
    code = "infeasible-plan"


class MissingFragmentError(ForgeError):
    code = "missing-fragment"


class UntracedObjectiveError(ForgeError):
    """Objectives left without an exercising thread or an observing measure."""

    code = "untraced-objective"

    def __init__(self, message: str, objectives: tuple[str, ...] = ()):
        super().__init__(message)
        self.objectives = objectives


class CompileStageError(ForgeError):
    """Wraps a stage failure with the pipeline stage name."""

    code = "compile-stage"

    def __init__(self, stage: str, cause: ForgeError):
        super().__init__(f"stage '{stage}': {cause.message}")
        self.stage = stage
        self.cause = cause
        self.code = cause.code


# --- live sessions ---------------------------------------------------------

class EmptyRosterError(ForgeError):
    code = "empty-roster"


class BadStateError(ForgeError):
    code = "bad-state"


class AlreadyClosedError(BadStateError):
    code = "already-closed"


class AlreadyFiredError(ForgeError):
    code = "already-fired"


class WrongThreadError(ForgeError):
    code = "wrong-thread"


class CorruptLogError(ForgeError):
    code = "corrupt-log"


# --- service ---------------------------------------------------------------

class NotFoundError(ForgeError):
    code = "not-found"
