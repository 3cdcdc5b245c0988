"""Command-line entry point: validate catalogs, compile scenarios, emit
documents, run the service, and report debriefs.

Exit codes: 0 success, 1 domain error, 2 usage error. Human output goes to
stdout, diagnostics to stderr; --json switches to structured output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import runtime, service
from .catalog import parse_catalog, validate_catalog, load_catalog
from .compiler import Measure, compile_scenario
from .emitter import emit_interchange, emit_ttx, load_interchange
from .errors import ForgeError
from .specdsl import parse_spec


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ForgeError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _cmd_catalog_validate(args) -> int:
    catalog = parse_catalog(_read(args.file))
    report = validate_catalog(catalog)
    if args.json:
        print(json.dumps({
            "issues": len(catalog.issues),
            "triggers": len(catalog.triggers),
            "findings": [
                {"severity": f.severity, "code": f.code, "subject": f.subject,
                 "message": f.message}
                for f in report.findings
            ],
        }, indent=2))
    else:
        print(f"{len(catalog.issues)} issues, {len(catalog.triggers)} triggers, "
              f"{len(report.findings)} findings")
        for finding in report.findings:
            print(f"  [{finding.severity}] {finding.message}")
    return 0 if report.clean else 1


def _load_measures_file(path: str) -> tuple[Measure, ...]:
    doc = json.loads(_read(path))
    return tuple(
        Measure(id=m["id"], attached_to=m["attached_to"],
                target_response=m["target_response"],
                objective_refs=tuple(m["objective_refs"]))
        for m in doc["measures"])


def _cmd_compile(args) -> int:
    spec = parse_spec(_read(args.spec))
    catalog = load_catalog(_read(args.catalog))
    measures = None
    if args.measures:
        measures = _load_measures_file(args.measures)
    scenario = compile_scenario(spec, catalog, measure_defs=measures)
    interchange = emit_interchange(scenario)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.json").write_text(interchange, "utf-8")
        (out / "scenario.ttx.md").write_text(emit_ttx(scenario), "utf-8")
        if not args.json:
            print(f"wrote {out / 'scenario.json'} and {out / 'scenario.ttx.md'}")
    if args.json:
        sys.stdout.write(interchange)
    elif not args.output:
        traced = sum(1 for e in scenario.objective_trace if e.threads)
        print(f"compiled '{scenario.title}': {len(scenario.threads)} threads, "
              f"{len(scenario.measures)} measures, "
              f"{traced}/{len(scenario.objectives)} objectives traced")
    return 0


def _cmd_emit(args) -> int:
    scenario = load_interchange(_read(args.scenario))
    if args.format == "ttx":
        sys.stdout.write(emit_ttx(scenario, participant_mode=args.participant))
    else:
        sys.stdout.write(emit_interchange(scenario))
    return 0


def _cmd_serve(args) -> int:
    service.serve(store_root=args.store, port=args.port, host=args.host)
    return 0


def _render_debrief(report) -> str:
    lines = [
        f"Debrief for session {report.session_id} "
        f"(scenario '{report.scenario_title}', state {report.state})",
        f"Questions answered: {report.questions_answered}/{report.questions_total}; "
        f"injects fired: {report.injects_fired}/{report.injects_total}",
        "Objectives:",
    ]
    for entry in report.objectives:
        score = "unscored" if entry.mean_score is None else f"{entry.mean_score:.2f}"
        threads = ", ".join(str(t) for t in entry.threads)
        lines.append(f"  {entry.objective_id}: {entry.label}")
        lines.append(f"      score {score}; threads [{threads}]")
        if entry.unanswered_questions:
            lines.append("      unanswered: " + ", ".join(entry.unanswered_questions))
        if entry.unfired_injects:
            lines.append("      unfired injects: " + ", ".join(entry.unfired_injects))
    if report.action_items:
        lines.append("Action items:")
        for item in report.action_items:
            refs = ", ".join(item.objective_refs)
            lines.append(f"  - [{item.owner}] {item.text}" + (f" ({refs})" if refs else ""))
    return "\n".join(lines) + "\n"


def _cmd_debrief(args) -> int:
    log_text = _read(args.log).decode("utf-8")
    first = log_text.splitlines()[0] if log_text.splitlines() else "{}"
    try:
        genesis_cmd = json.loads(first).get("cmd", {})
    except json.JSONDecodeError:
        genesis_cmd = {}
    if args.scenario:
        scenario = load_interchange(_read(args.scenario))
    else:
        scenario_id = genesis_cmd.get("scenario_id")
        store_root = args.store or os.environ.get("FORGE_STORE")
        if not scenario_id or not store_root:
            raise ForgeError(
                "cannot resolve the scenario for this log: pass --scenario "
                "<scenario.json> or --store/FORGE_STORE with the original store")
        path = Path(store_root) / "scenarios" / f"{scenario_id}.json"
        scenario = load_interchange(_read(str(path)))
    session = runtime.replay(log_text, scenario)
    report = runtime.build_debrief(session)
    if args.json:
        print(json.dumps(service.debrief_view(report), indent=2, ensure_ascii=False))
    else:
        sys.stdout.write(_render_debrief(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Compile and facilitate incident-response tabletop exercises.")
    sub = parser.add_subparsers(dest="command", required=True)

    catalog_parser = sub.add_parser("catalog", help="catalog tools")
    catalog_sub = catalog_parser.add_subparsers(dest="catalog_command", required=True)
    validate = catalog_sub.add_parser("validate", help="validate a catalog file")
    validate.add_argument("file")
    validate.add_argument("--json", action="store_true")
    validate.set_defaults(func=_cmd_catalog_validate)

    compile_parser = sub.add_parser("compile", help="compile a scenario spec")
    compile_parser.add_argument("spec")
    compile_parser.add_argument("--catalog", required=True)
    compile_parser.add_argument("-o", "--output", default=None,
                                help="directory for scenario.json and scenario.ttx.md")
    compile_parser.add_argument("--measures", default=None,
                                help="measure definitions file overriding the "
                                     "plan's measure set")
    compile_parser.add_argument("--json", action="store_true",
                                help="print the interchange document to stdout")
    compile_parser.set_defaults(func=_cmd_compile)

    emit_parser = sub.add_parser("emit", help="render a compiled scenario")
    emit_parser.add_argument("scenario")
    emit_parser.add_argument("--format", choices=("ttx", "json"), default="ttx")
    emit_parser.add_argument("--participant", action="store_true",
                             help="redact facilitator-only material")
    emit_parser.add_argument("--json", action="store_true")
    emit_parser.set_defaults(func=_cmd_emit)

    serve_parser = sub.add_parser("serve", help="run the HTTP service")
    serve_parser.add_argument("--store", default=None,
                              help="store directory (default: FORGE_STORE)")
    serve_parser.add_argument("--port", type=int, default=None,
                              help="port (default: FORGE_PORT)")
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.set_defaults(func=_cmd_serve)

    debrief_parser = sub.add_parser("debrief", help="report on a session log")
    debrief_parser.add_argument("log")
    debrief_parser.add_argument("--scenario", default=None,
                                help="scenario interchange file the log ran against")
    debrief_parser.add_argument("--store", default=None,
                                help="store directory holding the scenario")
    debrief_parser.add_argument("--json", action="store_true")
    debrief_parser.set_defaults(func=_cmd_debrief)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ForgeError as exc:
        print(f"forge: error: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
