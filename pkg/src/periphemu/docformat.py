"""Reading and writing model/device instance documents.

Documents are JSON-style (comments, trailing commas and bare ``0x`` literals
are tolerated).  Integers may be written as numbers or as decimal/hex strings.
"""

from __future__ import annotations

import json
import re
import warnings
from typing import Any, Optional

import json5

from .primitives import (
    CategorySchema,
    DeviceInstance,
    Evt,
    InstanceError,
    MemField,
    MemFieldState,
    ModelInstance,
    Reg,
    RegField,
    RegFieldMap,
    RegFieldState,
    RegRef,
    Slot,
    Swt,
    Upd,
)
from .schemas import SchemaRegistry, default_registry

_INT_RE = re.compile(r"^(0[xX][0-9a-fA-F]+|[0-9]+)$")
_POS_RE = re.compile(r"<string>:(\d+) (.*?)(?: at column (\d+))?$")


class FormatSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnknownKeyWarning(UserWarning):
    pass


def loads(text: str) -> Any:
    """Parse JSON-style text, keeping duplicate keys visible as pair lists."""
    # plain JSON is a subset; the stdlib parser is much faster than json5
    try:
        return json.loads(text, object_pairs_hook=_pairs)
    except ValueError:
        pass
    try:
        return json5.loads(text, object_pairs_hook=_pairs)
    except ValueError as exc:
        m = _POS_RE.search(str(exc))
        if m:
            raise FormatSyntaxError(m.group(2), int(m.group(1)), int(m.group(3) or 0)) from None
        raise FormatSyntaxError(str(exc)) from None


class _Obj(dict):
    """dict that remembers keys that appeared more than once."""

    duplicates: tuple[str, ...] = ()


def _pairs(pairs):
    obj = _Obj()
    dups = []
    for k, v in pairs:
        if k in obj:
            dups.append(k)
        obj[k] = v
    obj.duplicates = tuple(dups)
    return obj


def parse_int(value: Any, path: str = "") -> int:
    if isinstance(value, bool):
        raise InstanceError("integer", f"boolean {value} is not an integer", path)
    if isinstance(value, int):
        if value < 0:
            raise InstanceError("integer", f"negative value {value}", path)
        return value
    if isinstance(value, str) and _INT_RE.match(value.strip()):
        return int(value.strip(), 0) if value.strip().lower().startswith("0x") else int(value.strip())
    raise InstanceError("integer", f"{value!r} is not an unsigned integer", path)


class Reader:
    def __init__(self, strict: bool):
        self.strict = strict

    def keys(self, obj: Any, allowed: set[str], required: set[str], path: str) -> dict:
        if not isinstance(obj, dict):
            raise InstanceError("type", f"expected an object, got {type(obj).__name__}", path)
        for dup in getattr(obj, "duplicates", ()):
            raise InstanceError("duplicate-key", f"key {dup!r} repeated", path)
        extra = set(obj) - allowed
        if extra:
            msg = f"unknown keys {sorted(extra)}"
            if self.strict:
                raise InstanceError("unknown-key", msg, path)
            warnings.warn(f"{path or '<root>'}: {msg}", UnknownKeyWarning, stacklevel=3)
        missing = required - set(obj)
        if missing:
            raise InstanceError("missing-key", f"missing keys {sorted(missing)}", path)
        return obj

    def string(self, value: Any, path: str) -> str:
        if not isinstance(value, str) or not value:
            raise InstanceError("type", f"expected a non-empty string, got {value!r}", path)
        return value

    def reg(self, obj, path) -> Reg:
        o = self.keys(obj, {"name", "offset", "width"}, {"name", "offset", "width"}, path)
        return Reg(self.string(o["name"], path + ".name"), parse_int(o["offset"], path + ".offset"),
                   parse_int(o["width"], path + ".width"))

    def regfield(self, obj, path) -> RegField:
        o = self.keys(obj, {"reg", "name", "offset", "width"}, {"reg", "name", "offset", "width"}, path)
        return RegField(self.string(o["reg"], path + ".reg"), self.string(o["name"], path + ".name"),
                        parse_int(o["offset"], path + ".offset"), parse_int(o["width"], path + ".width"))

    def state(self, obj, path) -> RegFieldState:
        o = self.keys(obj, {"reg", "field", "value"}, {"reg", "field", "value"}, path)
        return RegFieldState(self.string(o["reg"], path + ".reg"), self.string(o["field"], path + ".field"),
                             parse_int(o["value"], path + ".value"))

    def fieldmap(self, obj, path) -> RegFieldMap:
        o = self.keys(obj, {"reg", "field", "map"}, {"reg", "field", "map"}, path)
        raw = o["map"]
        if not isinstance(raw, dict):
            raise InstanceError("type", "map must be an object", path + ".map")
        mapping = {parse_int(k, f"{path}.map[{k}]"): parse_int(v, f"{path}.map[{k}]") for k, v in raw.items()}
        if len(mapping) != len(raw):
            raise InstanceError("map-keys", "map keys collide after integer conversion", path + ".map")
        return RegFieldMap(self.string(o["reg"], path + ".reg"), self.string(o["field"], path + ".field"), mapping)

    def swt(self, obj, path) -> Swt:
        o = self.keys(obj, {"enable", "disable", "status", "active"}, {"enable", "disable"}, path)
        if "status" in o and "active" in o:
            raise InstanceError("duplicate-key", "both status and active given", path)
        status = o.get("status", o.get("active"))
        return Swt(self.state(o["enable"], path + ".enable"), self.state(o["disable"], path + ".disable"),
                   None if status is None else self.state(status, path + ".status"))

    def upd(self, obj, path) -> Upd:
        o = self.keys(obj, {"condition", "action"}, {"condition", "action"}, path)
        for k in ("condition", "action"):
            if not isinstance(o[k], list):
                raise InstanceError("type", f"{k} must be a list", path)
        return Upd(tuple(self.state(c, f"{path}.condition[{i}]") for i, c in enumerate(o["condition"])),
                   tuple(self.state(a, f"{path}.action[{i}]") for i, a in enumerate(o["action"])))

    def evt(self, obj, path) -> Evt:
        members = ("happen", "active", "enable", "disable", "clear")
        o = self.keys(obj, {*members, "irq_line"}, set(members), path)
        irq = o.get("irq_line")
        return Evt(*(self.state(o[m], f"{path}.{m}") for m in members),
                   irq_line=None if irq is None else parse_int(irq, path + ".irq_line"))

    def memfield(self, obj, path) -> MemField:
        o = self.keys(obj, {"offset", "width"}, {"offset", "width"}, path)
        return MemField(parse_int(o["offset"], path + ".offset"), parse_int(o["width"], path + ".width"))

    def memstate(self, obj, path) -> MemFieldState:
        o = self.keys(obj, {"field", "value"}, {"field", "value"}, path)
        return MemFieldState(self.memfield(o["field"], path + ".field"), parse_int(o["value"], path + ".value"))

    def slot_value(self, slot: Slot, obj, path):
        if slot.nested:
            return self.slots(slot.kind, obj, path)
        kind = slot.kind
        if kind == "Reg":
            if isinstance(obj, dict):  # tolerate {"name": ...} or a full Reg
                return RegRef(self.string(obj.get("name"), path + ".name"))
            return RegRef(self.string(obj, path))
        if kind == "text":
            return self.string(obj, path)
        if kind == "choice":
            if obj not in slot.choices:
                raise InstanceError("choice", f"{obj!r} not one of {list(slot.choices)}", path)
            return obj
        reader = {
            "RegFieldState": self.state,
            "RegFieldMap": self.fieldmap,
            "Swt": self.swt,
            "Evt": self.evt,
            "MemField": self.memfield,
            "MemFieldState": self.memstate,
        }[kind]
        return reader(obj, path)

    def slots(self, schema: CategorySchema, obj, path: str = "") -> dict:
        allowed = {k for s in schema.slots for k in (s.name, *s.aliases)}
        o = self.keys(obj, allowed, set(), path or "slots")
        out: dict[str, Any] = {}
        for slot in schema.slots:
            present = [k for k in (slot.name, *slot.aliases) if k in o]
            if len(present) > 1:
                raise InstanceError("duplicate-key", f"slot {slot.name} given as {present}", path)
            sub = f"{path}.{slot.name}" if path else slot.name
            raw = o[present[0]] if present else None
            if raw is None:
                if slot.many:
                    out[slot.name] = []
                elif slot.optional:
                    out[slot.name] = None
                else:
                    raise InstanceError("slot-required", f"required slot {slot.name!r} missing", sub)
            elif slot.many:
                if not isinstance(raw, list):
                    raise InstanceError("type", f"slot {slot.name!r} must be a list", sub)
                out[slot.name] = [self.slot_value(slot, item, f"{sub}.{i}") for i, item in enumerate(raw)]
            else:
                out[slot.name] = self.slot_value(slot, raw, sub)
        return out


def model_from_dict(doc: Any, strict: bool = True, registry: Optional[SchemaRegistry] = None,
                    check: bool = True) -> ModelInstance:
    registry = registry or default_registry()
    r = Reader(strict)
    o = r.keys(doc, {"category", "peripheral", "registers", "fields", "updates", "slots"}, {"category"}, "")
    category = r.string(o["category"], "category")
    schema = registry.get_schema(category)

    def items(key):
        v = o.get(key, [])
        if not isinstance(v, list):
            raise InstanceError("type", f"{key} must be a list", key)
        return v

    inst = ModelInstance(
        category=category,
        peripheral=o.get("peripheral") or category,
        registers=tuple(r.reg(x, f"registers[{i}]") for i, x in enumerate(items("registers"))),
        fields=tuple(r.regfield(x, f"fields[{i}]") for i, x in enumerate(items("fields"))),
        updates=tuple(r.upd(x, f"updates[{i}]") for i, x in enumerate(items("updates"))),
        slots=r.slots(schema, o.get("slots") or {}, ""),
    )
    return inst.check() if check else inst


def parse_model_instance(text: str, strict: bool = True, registry: Optional[SchemaRegistry] = None) -> ModelInstance:
    return model_from_dict(loads(text), strict=strict, registry=registry)


def device_from_dict(doc: Any, strict: bool = True, registry: Optional[SchemaRegistry] = None,
                     path: str = "") -> DeviceInstance:
    r = Reader(strict)
    o = r.keys(doc, {"name", "base", "irqs", "model"}, {"name", "base"}, path)
    irqs = o.get("irqs", [])
    if not isinstance(irqs, list):
        raise InstanceError("type", "irqs must be a list", path + ".irqs")
    model = o.get("model")
    return DeviceInstance(
        name=r.string(o["name"], path + ".name"),
        base=parse_int(o["base"], path + ".base"),
        irqs=tuple(parse_int(x, f"{path}.irqs[{i}]") for i, x in enumerate(irqs)),
        model=None if model is None else model_from_dict(model, strict, registry),
    )


def parse_devices(text: str, strict: bool = True, registry: Optional[SchemaRegistry] = None) -> list[DeviceInstance]:
    doc = loads(text)
    r = Reader(strict)
    o = r.keys(doc, {"instances", "ram"}, {"instances"}, "")
    if not isinstance(o["instances"], list):
        raise InstanceError("type", "instances must be a list", "instances")
    return [device_from_dict(d, strict, registry, f"instances[{i}]") for i, d in enumerate(o["instances"])]


def _state(s: RegFieldState) -> dict:
    return {"reg": s.reg, "field": s.field, "value": s.value}


def _memfield(f: MemField) -> dict:
    return {"offset": f.offset, "width": f.width}


def value_to_dict(value: Any) -> Any:
    if value is None:
        return None
    if isinstance(value, dict):
        return {k: value_to_dict(v) for k, v in value.items()}
    if isinstance(value, list):
        return [value_to_dict(v) for v in value]
    if isinstance(value, RegRef):
        return value.name
    if isinstance(value, str):
        return value
    if isinstance(value, RegFieldState):
        return _state(value)
    if isinstance(value, RegFieldMap):
        return {"reg": value.reg, "field": value.field, "map": {str(k): v for k, v in value.map.items()}}
    if isinstance(value, Swt):
        return {"enable": _state(value.enable), "disable": _state(value.disable),
                "status": None if value.status is None else _state(value.status)}
    if isinstance(value, Evt):
        out = {m: _state(s) for m, s in value.states()}
        out["irq_line"] = value.irq_line
        return out
    if isinstance(value, Upd):
        return {"condition": [_state(c) for c in value.condition], "action": [_state(a) for a in value.action]}
    if isinstance(value, MemField):
        return _memfield(value)
    if isinstance(value, MemFieldState):
        return {"field": _memfield(value.field), "value": value.value}
    if isinstance(value, Reg):
        return {"name": value.name, "offset": value.offset, "width": value.width}
    if isinstance(value, RegField):
        return {"reg": value.reg, "name": value.name, "offset": value.offset, "width": value.width}
    raise TypeError(f"cannot serialize {type(value).__name__}")


def model_to_dict(inst: ModelInstance) -> dict:
    return {
        "category": inst.category,
        "peripheral": inst.peripheral,
        "registers": [value_to_dict(r) for r in inst.registers],
        "fields": [value_to_dict(f) for f in inst.fields],
        "updates": [value_to_dict(u) for u in inst.updates],
        "slots": value_to_dict(inst.slots),
    }


def device_to_dict(dev: DeviceInstance) -> dict:
    return {
        "name": dev.name,
        "base": dev.base,
        "irqs": list(dev.irqs),
        "model": None if dev.model is None else model_to_dict(dev.model),
    }


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def serialize_model_instance(inst: ModelInstance) -> str:
    return dumps(model_to_dict(inst))


def serialize_devices(devs: list[DeviceInstance]) -> str:
    return dumps({"instances": [device_to_dict(d) for d in devs]})


def schema_to_dict(schema: CategorySchema) -> dict:
    slots = []
    for s in schema.slots:
        entry: dict[str, Any] = {
            "name": s.name,
            "kind": schema_to_dict(s.kind) if s.nested else s.kind,
            "description": s.description,
            "many": s.many,
            "optional": s.optional,
        }
        if s.aliases:
            entry["aliases"] = list(s.aliases)
        if s.choices:
            entry["choices"] = list(s.choices)
        slots.append(entry)
    return {"category": schema.name, "description": schema.description, "slots": slots}
