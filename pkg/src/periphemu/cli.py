"""Command-line entry point.

Exit codes: 0 pass, 1 semantic failure, 2 input error, 3 bus fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .docformat import (
    FormatSyntaxError,
    Reader,
    device_from_dict,
    dumps,
    loads,
    model_from_dict,
    schema_to_dict,
    serialize_devices,
    serialize_model_instance,
)
from .primitives import InstanceError
from .resolver import ExprError, MacroCycleError, ResolutionError, build_symbol_table, resolve_value
from .schemas import SchemaRegistry, builtin_schemas, default_registry
from .validator import check_instances, validate_all

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUS = 0, 1, 2, 3

log = logging.getLogger("periphemu")


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load(path: str):
    try:
        return loads(_read(path))
    except FormatSyntaxError as exc:
        raise InputError(f"{path}: {exc}") from exc


# --- validate ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    doc = _load(args.instance)
    try:
        if isinstance(doc, dict) and "instances" in doc:
            Reader(args.strict).keys(doc, {"instances", "ram"}, {"instances"}, "")
            devs = [device_from_dict(d, args.strict, path=f"instances[{i}]") for i, d in enumerate(doc["instances"])]
            report = check_instances(devs)
            for d in devs:
                if d.model is not None:
                    report += validate_all(d.model, [d], categories=[])
            models = [d.model for d in devs if d.model is not None]
        else:
            model = model_from_dict(doc, strict=args.strict, check=False)
            report = validate_all(model)
            models = [model]
    except InstanceError as exc:
        raise InputError(f"{args.instance}: {exc}") from exc
    if report.passed:
        for m in models:
            try:
                m.check()
            except InstanceError as exc:
                print(f"verdict: fail\n  {exc}")
                return EXIT_FAIL
    print(json.dumps(report.to_dict(), indent=2) if args.json else report)
    return EXIT_OK if report.passed else EXIT_FAIL


# --- resolve -----------------------------------------------------------------------

def cmd_resolve(args) -> int:
    sources = [(p, _read(p)) for p in args.headers]
    try:
        table = build_symbol_table(sources)
        value = resolve_value(args.expr, table)
    except ResolutionError as exc:
        print(f"cannot resolve {args.expr!r}", file=sys.stderr)
        for step in exc.trace:
            print(f"  {step}", file=sys.stderr)
        return EXIT_FAIL
    except (MacroCycleError, ExprError) as exc:
        print(f"cannot resolve {args.expr!r}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{value:#x}" if args.hex else value)
    return EXIT_OK


# --- extract -----------------------------------------------------------------------

def _extract_config(path: str, args):
    from .frontend import PipelineConfig

    doc = _load(path)
    base = Path(path).parent
    if not isinstance(doc, dict) or "mcu" not in doc or "corpus" not in doc:
        raise InputError(f"{path}: config needs 'mcu' and 'corpus'")
    files = []
    for pattern in doc["corpus"]:
        hits = sorted(base.glob(pattern)) if any(c in pattern for c in "*?[") else [base / pattern]
        if not hits:
            raise InputError(f"{path}: corpus pattern {pattern!r} matches nothing")
        files += hits
    registry = default_registry()
    if doc.get("schemas"):
        known = {s.name: s for s in builtin_schemas()}
        unknown = [n for n in doc["schemas"] if n not in known]
        if unknown:
            raise InputError(f"{path}: unknown schemas {unknown}")
        registry = SchemaRegistry(known[n] for n in doc["schemas"])
    retries = args.retries if args.retries is not None else int(doc.get("retries", 5))
    strict = args.strict if args.strict is not None else bool(doc.get("strict", True))
    try:
        corpus = {str(f.relative_to(base)): f.read_text(encoding="utf-8", errors="replace") for f in files}
        return PipelineConfig(doc["mcu"], corpus, registry=registry, retries=retries, strict=strict)
    except OSError as exc:
        raise InputError(f"cannot read corpus file: {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_extract(args) -> int:
    from .frontend import (
        ClientConfigError,
        HttpClient,
        MockClient,
        PipelineError,
        TranscriptMismatch,
        run_pipeline,
        save_transcript,
    )

    cfg = _extract_config(args.config, args)
    if args.live:
        try:
            client = HttpClient.from_env()
        except ClientConfigError as exc:
            raise InputError(str(exc)) from exc
    else:
        try:
            client = MockClient.from_file(args.mock)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"cannot load transcript {args.mock}: {exc}") from exc
    try:
        result = run_pipeline(client, cfg)
    except TranscriptMismatch as exc:
        raise InputError(f"transcript does not match this run: {exc}") from exc
    except PipelineError as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    for m in result.models:
        (out / "models" / f"{m.peripheral}.json").write_text(serialize_model_instance(m))
    (out / "devices.json").write_text(serialize_devices(result.devices))
    save_transcript(result.transcript, out / "transcript.json")
    for s in result.stages:
        if s.attempts > 1:
            print(f"stage {s.stage} {s.key or '(mcu)'}: accepted after {s.attempts} attempts")
    for w in result.warnings:
        print(f"warning: {w}")
    for n in result.notes:
        print(f"note: {n}")
    for name, failure in result.skipped.items():
        print(f"category {name} skipped: {failure}", file=sys.stderr)
    print(f"{len(result.models)} model(s), {len(result.devices)} device(s) written to {out}")
    return EXIT_FAIL if result.skipped else EXIT_OK


# --- run ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    from .runtime import BuildError, ConfigError, ScenarioError, load_machine, load_scenario, run_scenario

    try:
        machine = load_machine(args.machine, bus_fault=args.bus_fault, debug=args.debug)
        scenario = load_scenario(args.scenario, machine)
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from exc
    except (FormatSyntaxError, ConfigError, ScenarioError, BuildError, InstanceError) as exc:
        raise InputError(str(exc)) from exc
    result = run_scenario(machine, scenario)
    if args.trace:
        Path(args.trace).write_text(result.trace_text())
    for d in machine.diagnostics:
        print(f"diagnostic: {d}")
    if result.passed:
        print(f"pass: {result.steps_run} steps")
        return EXIT_OK
    print(f"FAIL: {result.message}")
    return EXIT_BUS if result.fault is not None else EXIT_FAIL


# --- schemas -----------------------------------------------------------------------

def cmd_schemas_export(args) -> int:
    registry = default_registry()
    names = args.names or registry.names()
    missing = [n for n in names if n not in registry]
    if missing:
        raise InputError(f"unknown schemas {missing}")
    text = dumps({"schemas": [schema_to_dict(registry.get_schema(n)) for n in names]})
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="periphemu", description="Peripheral model extraction and emulation.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def strictness(p, default):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--strict", dest="strict", action="store_true", default=default,
                       help="reject unknown keys (default)" if default else "reject unknown keys")
        g.add_argument("--lenient", dest="strict", action="store_false", help="warn on unknown keys")

    p = sub.add_parser("validate", help="validate a model instance or device document")
    p.add_argument("instance")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    strictness(p, True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("resolve", help="resolve a C constant expression against headers")
    p.add_argument("expr")
    p.add_argument("--headers", nargs="+", default=[], metavar="PATH")
    p.add_argument("--hex", action="store_true")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("extract", help="run the extraction pipeline")
    p.add_argument("config")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--mock", metavar="TRANSCRIPT")
    mode.add_argument("--live", action="store_true")
    p.add_argument("--retries", type=int)
    p.add_argument("--out", default="extracted")
    strictness(p, None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("run", help="run a scenario on a machine")
    p.add_argument("machine")
    p.add_argument("scenario")
    p.add_argument("--trace", metavar="PATH")
    p.add_argument("--bus-fault", choices=("error", "ignore"), default="error")
    p.add_argument("--debug", action="store_true", help="check register masking after every operation")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("schemas", help="schema registry tools")
    ssub = p.add_subparsers(dest="schemas_command", required=True)
    e = ssub.add_parser("export", help="export schemas as JSON")
    e.add_argument("names", nargs="*")
    e.add_argument("--out")
    e.set_defaults(func=cmd_schemas_export)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
