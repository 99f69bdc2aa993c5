"""The seven-stage extraction pipeline with resolution and validate-and-retry.

Stages, per identified peripheral category::

    1 categories -> 2 registers -> 3 fields (one query per register)
      -> 4 updates, 5 semantics -> 6 instances -> 7 irq association (per instance)
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from ..docformat import FormatSyntaxError, Reader, loads, parse_int
from ..primitives import DeviceInstance, InstanceError, ModelInstance, Reg, RegField, Upd
from ..resolver import DocumentResolutionError, SymbolTable, build_symbol_table, resolve_document
from ..schemas import SchemaRegistry, default_registry
from ..validator import (
    Finding,
    ValidationReport,
    check_category_names,
    check_field_overlap,
    check_instances,
    check_irq_association,
    check_referential_integrity,
    check_register_overlap,
    shared_registers,
)
from .client import LlmClient, Record
from .prompts import SYSTEM_INSTRUCTION, assemble_stage_prompt, events_prompt, skeleton_prompt

log = logging.getLogger(__name__)

STAGE_NAMES = {
    1: "category identification",
    2: "register identification",
    3: "register field identification",
    4: "update identification",
    5: "semantic identification",
    6: "instance identification",
    7: "interrupt association",
}
PREREQUISITES = {1: (), 2: (1,), 3: (2,), 4: (3,), 5: (3,), 6: (5,), 7: (6,)}


@dataclass
class PipelineConfig:
    mcu_name: str
    corpus: dict[str, str] = field(default_factory=dict)
    registry: SchemaRegistry = field(default_factory=default_registry)
    retries: int = 5
    strict: bool = True
    temperature: Optional[float] = None

    def __post_init__(self):
        if self.retries < 1:
            raise ValueError("retry limit must be at least 1")

    @classmethod
    def from_files(cls, mcu_name: str, paths: Sequence[Path], **kw) -> "PipelineConfig":
        return cls(mcu_name, {str(p): Path(p).read_text(encoding="utf-8", errors="replace") for p in paths}, **kw)


@dataclass
class StageResult:
    stage: int
    key: str
    attempts: int
    payload: Any
    report: ValidationReport
    transcript: list[Record]
    warnings: list[str] = field(default_factory=list)


class StageFailure(RuntimeError):
    def __init__(self, stage: int, key: str, reports: list[ValidationReport], transcript: list[Record]):
        self.stage = stage
        self.key = key
        self.reports = reports
        self.transcript = transcript
        last = reports[-1] if reports else ValidationReport()
        super().__init__(
            f"stage {stage} ({STAGE_NAMES[stage]}) for {key or 'MCU'} failed after "
            f"{len(reports)} attempt(s); last report:\n{last}"
        )


class PipelineError(RuntimeError):
    pass


# --- response extraction --------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9]*\n(.*?)```", re.S)


def _strip_ellipses(text: str) -> str:
    """Remove ``...`` placeholders (and a following comma) outside string literals."""
    out = []
    i, n = 0, len(text)
    in_str = False
    while i < n:
        ch = text[i]
        if in_str:
            out.append(ch)
            if ch == "\\" and i + 1 < n:
                out.append(text[i + 1])
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif text.startswith("...", i):
            i += 3
            while i < n and text[i] in " \t\r\n":
                i += 1
            if i < n and text[i] == ",":
                i += 1
            continue
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _balanced_end(text: str, start: int) -> Optional[int]:
    stack = []
    in_str = False
    i = start
    while i < len(text):
        ch = text[i]
        if in_str:
            if ch == "\\":
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in "{[":
            stack.append("}" if ch == "{" else "]")
        elif ch in "}]":
            if not stack or stack.pop() != ch:
                return None
            if not stack:
                return i + 1
        i += 1
    return None


def extract_json(response: str) -> Any:
    """First balanced JSON object/array in ``response`` that parses."""
    fenced = _FENCE_RE.findall(response)
    text = _strip_ellipses(fenced[0] if fenced else response)
    error: Optional[Exception] = None
    for start, ch in enumerate(text):
        if ch not in "{[":
            continue
        end = _balanced_end(text, start)
        if end is None:
            continue
        try:
            return loads(text[start:end])
        except FormatSyntaxError as exc:
            error = error or exc
    raise FormatSyntaxError(f"no JSON value found in response ({error})" if error else "no JSON value found in response")


# --- stage handlers ---------------------------------------------------------------


def _error_report(stage: int, rule: str, exc: Exception) -> ValidationReport:
    return ValidationReport([Finding(stage, rule, (), str(exc))])


def _listing(raw: Any, key: str, path: str) -> list:
    if isinstance(raw, dict):
        if key not in raw:
            raise InstanceError("missing-key", f"response has no {key!r} list", path)
        raw = raw[key]
    if not isinstance(raw, list):
        raise InstanceError("type", f"expected a {key!r} list", path)
    return raw


def _model_report(inst: ModelInstance, stage: int) -> ValidationReport:
    report = ValidationReport([f for f in check_referential_integrity(inst).findings if f.stage == stage])
    if report.passed:
        try:
            inst.check()
        except InstanceError as exc:
            report = _error_report(stage, exc.invariant, exc)
    return report


def _categories(raw, ctx, cfg):
    pairs: list[tuple[str, str]] = []
    items = raw if isinstance(raw, list) else [raw]
    for item in items:
        if not isinstance(item, dict):
            raise InstanceError("type", "category entries must be objects", "categories")
        for k, v in item.items():
            if not isinstance(v, str):
                raise InstanceError("type", f"category {k!r} maps to non-string {v!r}", "categories")
            pairs.append((k, v))
        pairs += [(k, item[k]) for k in getattr(item, "duplicates", ())]
    if not pairs:
        raise InstanceError("empty", "no peripheral categories returned", "categories")
    return pairs


def _registers(raw, ctx, cfg):
    r = Reader(cfg.strict)
    regs = [r.reg(x, f"regs[{i}]") for i, x in enumerate(_listing(raw, "regs", "regs"))]
    ModelInstance("x", registers=regs).check()
    return regs


def _fields(raw, ctx, cfg):
    reg: Reg = ctx["reg"]
    r = Reader(cfg.strict)
    out = []
    for i, x in enumerate(_listing(raw, "fields", "fields")):
        path = f"fields[{i}]"
        o = r.keys(x, {"name", "pos", "offset", "width"}, {"name", "width"}, path)
        pos = o.get("pos", o.get("offset"))
        if pos is None:
            raise InstanceError("missing-key", "field has no bit position", path)
        out.append(RegField(reg.name, r.string(o["name"], path + ".name"), parse_int(pos, path + ".pos"),
                            parse_int(o["width"], path + ".width")))
    ModelInstance("x", registers=[reg], fields=out).check()
    return out


def _updates(raw, ctx, cfg):
    r = Reader(cfg.strict)
    return [r.upd(x, f"updates[{i}]") for i, x in enumerate(_listing(raw, "updates", "updates"))]


def _semantics(raw, ctx, cfg):
    r = Reader(cfg.strict)
    slots = r.slots(ctx["schema"], raw, "")
    return ModelInstance(ctx["schema"].name, ctx["registers"], ctx["fields"], ctx["updates"], slots,
                         peripheral=ctx["PERIPHERAL_NAME"])


def _instances(raw, ctx, cfg):
    r = Reader(cfg.strict)
    devs = []
    for i, x in enumerate(_listing(raw, "instances", "instances")):
        path = f"instances[{i}]"
        o = r.keys(x, {"name", "instance", "base", "irqs"}, {"base"}, path)
        name = o.get("name", o.get("instance"))
        irqs = o.get("irqs", [])
        if not isinstance(irqs, list):
            raise InstanceError("type", "irqs must be a list", path)
        devs.append(DeviceInstance(r.string(name, path + ".name"), parse_int(o["base"], path + ".base"),
                                   tuple(parse_int(q, f"{path}.irqs[{j}]") for j, q in enumerate(irqs))))
    return devs


def _norm_event(path: str) -> str:
    return ".".join(p[:-1] if p.endswith("s") and not p.isdigit() else p for p in path.split("."))


def _associate(raw, ctx, cfg):
    model: ModelInstance = ctx["model"]
    if isinstance(raw, list):
        raw = raw[0] if len(raw) == 1 else {"events": raw}
    events = _listing(raw, "events", "events")
    known = [p for p, _ in model.events()]
    by_norm = {_norm_event(p): p for p in known}
    lines: dict[str, int] = {}
    for i, e in enumerate(events):
        if not isinstance(e, dict) or "event" not in e or "irq" not in e:
            raise InstanceError("type", "event entries need 'event' and 'irq'", f"events[{i}]")
        name = e["event"]
        target = name if name in known else by_norm.get(_norm_event(str(name)))
        if target is None:
            raise InstanceError("unknown-event", f"no event named {name!r}", f"events[{i}]")
        lines[target] = parse_int(e["irq"], f"events[{i}].irq")
    return model.with_irq_lines(lines)


def _validate(stage: int, payload, ctx) -> ValidationReport:
    if stage == 1:
        return check_category_names(payload)
    if stage == 2:
        return check_register_overlap(payload)
    if stage == 3:
        return check_field_overlap({ctx["reg"].name: payload})
    if stage == 4:
        return _model_report(ModelInstance("x", ctx["registers"], ctx["fields"], payload), 4)
    if stage == 5:
        return _model_report(payload, 5)
    if stage == 6:
        return check_instances(payload)
    return check_irq_association(ctx["device"], payload)


_BUILDERS: dict[int, Callable] = {
    1: _categories, 2: _registers, 3: _fields, 4: _updates, 5: _semantics, 6: _instances, 7: _associate,
}


def _stage_prompt(stage: int, ctx: dict) -> str:
    if stage == 5:
        ctx = {**ctx, "JSON_LIKE_PROMPT": skeleton_prompt(ctx["schema"])}
    elif stage == 7:
        ctx = {**ctx, "JSON_LIKE_PROMPT": events_prompt(ctx["device"].name, [p for p, _ in ctx["model"].events()])}
    return assemble_stage_prompt(stage, ctx)


def run_stage(stage: int, client: LlmClient, cfg: PipelineConfig, ctx: dict) -> StageResult:
    """Query, parse, resolve and validate until a response passes or retries run out."""
    table: SymbolTable = ctx.get("table") or SymbolTable()
    key = ctx.get("key", "")
    prompt = _stage_prompt(stage, ctx)
    transcript: list[Record] = []
    reports: list[ValidationReport] = []
    for attempt in range(1, cfg.retries + 1):
        response = client.complete(SYSTEM_INSTRUCTION, prompt, temperature=cfg.temperature)
        transcript.append(Record(SYSTEM_INSTRUCTION, prompt, response, stage, key))
        try:
            raw = extract_json(response)
            raw = resolve_document(raw, table) if stage != 1 else raw
            payload = _BUILDERS[stage](raw, ctx, cfg)
            report = _validate(stage, payload, ctx)
        except FormatSyntaxError as exc:
            report = _error_report(stage, "syntax", exc)
        except DocumentResolutionError as exc:
            report = _error_report(stage, "unresolved", exc)
        except InstanceError as exc:
            report = _error_report(stage, exc.invariant, exc)
        if report.passed:
            warnings = []
            if stage == 5:
                warnings = [f"{key}: optional slot {p} not filled" for p in _unfilled(payload.slots)]
                for w in warnings:
                    log.warning(w)
            return StageResult(stage, key, attempt, payload, report, transcript, warnings)
        log.info("stage %d %s attempt %d rejected: %s", stage, key, attempt, report)
        reports.append(report)
    raise StageFailure(stage, key, reports, transcript)


def _unfilled(slots: dict, path: str = "") -> list[str]:
    out = []
    for k, v in slots.items():
        sub = f"{path}.{k}" if path else k
        if v is None:
            out.append(sub)
        elif isinstance(v, dict):
            out += _unfilled(v, sub)
        elif isinstance(v, list):
            for i, item in enumerate(v):
                if isinstance(item, dict):
                    out += _unfilled(item, f"{sub}.{i}")
    return out


@dataclass
class PipelineResult:
    models: list[ModelInstance]
    devices: list[DeviceInstance]
    transcript: list[Record]
    stages: list[StageResult]
    skipped: dict[str, StageFailure]
    categories: list[tuple[str, str]]
    notes: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.models, self.devices, self.transcript))

    @property
    def warnings(self) -> list[str]:
        return [w for s in self.stages for w in s.warnings]


def run_pipeline(client: LlmClient, cfg: PipelineConfig) -> PipelineResult:
    table = build_symbol_table(cfg.corpus.items())
    attach = getattr(client, "attach", None)
    if callable(attach):
        attach(cfg.corpus)
    stages: list[StageResult] = []
    transcript: list[Record] = []

    def run(stage: int, ctx: dict) -> StageResult:
        try:
            res = run_stage(stage, client, cfg, {**ctx, "table": table})
        except StageFailure as exc:
            transcript.extend(exc.transcript)
            raise
        transcript.extend(res.transcript)
        stages.append(res)
        return res

    base = {"MCU_NAME": cfg.mcu_name, "CATEGORY_NAMES": cfg.registry.category_names()}
    try:
        categories = run(1, {**base, "key": ""}).payload
    except StageFailure as exc:
        raise PipelineError(str(exc)) from exc

    models: list[ModelInstance] = []
    devices: list[DeviceInstance] = []
    skipped: dict[str, StageFailure] = {}
    for peripheral, category in categories:
        schema = cfg.registry.get_schema(category)
        ctx = {**base, "PERIPHERAL_NAME": peripheral, "key": peripheral, "schema": schema}
        try:
            regs = run(2, ctx).payload
            fields: list[RegField] = []
            for reg in regs:
                fields += run(3, {**ctx, "REGISTER_NAME": reg.name, "reg": reg, "key": f"{peripheral}.{reg.name}"}).payload
            ctx.update(registers=regs, fields=fields)
            updates: list[Upd] = run(4, ctx).payload
            ctx["updates"] = updates
            if schema.slots:
                model = run(5, ctx).payload
            else:
                model = ModelInstance(schema.name, regs, fields, updates, {}, peripheral=peripheral)
            model.check()
            devs = run(6, ctx).payload
            bound = []
            for dev in devs:
                if model.events():
                    dev_model = run(7, {**ctx, "model": model, "device": dev, "key": f"{peripheral}/{dev.name}"}).payload
                else:
                    dev_model = model
                bound.append(dev.bind(dev_model))
        except StageFailure as exc:
            log.warning("category %s skipped: %s", peripheral, exc)
            skipped[peripheral] = exc
            continue
        models.append(model)
        devices.extend(bound)
    notes = shared_registers(devices)
    for n in notes:
        log.info(n)
    return PipelineResult(models, devices, transcript, stages, skipped, categories, notes)
