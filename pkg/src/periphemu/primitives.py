"""The nine modeling primitives, category schemas and model/device instances.

Every cross-reference between primitives is by name: a ``RegFieldState`` names
its register and field, a ``Reg`` slot names a register.  Names are resolved
against the register/field universes held by a :class:`ModelInstance`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Optional, Union

REG_WIDTHS = (8, 16, 32, 64)

PRIMITIVE_KINDS = (
    "Reg",
    "RegField",
    "RegFieldState",
    "RegFieldMap",
    "Swt",
    "Upd",
    "Evt",
    "MemField",
    "MemFieldState",
)

# slot kinds that are not primitives but appear in shipped schemas (Ethernet)
EXTRA_SLOT_KINDS = ("text", "choice")


class InstanceError(ValueError):
    """A type invariant does not hold.  ``invariant`` names the broken rule."""

    def __init__(self, invariant: str, message: str, path: str = ""):
        self.invariant = invariant
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"[{invariant}]{where}: {message}")


class DanglingReferenceError(InstanceError):
    pass


@dataclass(frozen=True)
class Reg:
    name: str
    offset: int
    width: int

    def __post_init__(self):
        if not self.name:
            raise InstanceError("reg-name", "register name is empty")
        if self.width not in REG_WIDTHS:
            raise InstanceError("reg-width", f"{self.name}: width {self.width} not in {REG_WIDTHS}")
        if self.offset < 0:
            raise InstanceError("reg-offset", f"{self.name}: negative offset {self.offset}")

    @property
    def nbytes(self) -> int:
        return self.width // 8

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1


@dataclass(frozen=True)
class RegField:
    reg: str
    name: str
    offset: int
    width: int

    def __post_init__(self):
        if not self.name:
            raise InstanceError("field-name", f"field of {self.reg} has empty name")
        if self.width < 1:
            raise InstanceError("field-width", f"{self.reg}.{self.name}: width {self.width} < 1")
        if self.offset < 0:
            raise InstanceError("field-offset", f"{self.reg}.{self.name}: negative bit offset")

    @property
    def mask(self) -> int:
        return ((1 << self.width) - 1) << self.offset


@dataclass(frozen=True)
class RegFieldState:
    reg: str
    field: str
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise InstanceError("state-value", f"{self.reg}.{self.field}: negative value")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.reg, self.field, self.value)

    def __str__(self):
        return f"{self.reg}.{self.field}={self.value}"


@dataclass(frozen=True)
class RegFieldMap:
    reg: str
    field: str
    map: dict[int, int]

    def __post_init__(self):
        if not self.map:
            raise InstanceError("map-nonempty", f"{self.reg}.{self.field}: empty value map")
        if any(k < 0 or v < 0 for k, v in self.map.items()):
            raise InstanceError("map-unsigned", f"{self.reg}.{self.field}: negative map entry")

    def __hash__(self):
        return hash((self.reg, self.field, tuple(sorted(self.map.items()))))


@dataclass(frozen=True)
class Swt:
    enable: RegFieldState
    disable: RegFieldState
    status: Optional[RegFieldState] = None

    def __post_init__(self):
        if self.enable.key == self.disable.key:
            raise InstanceError("swt-distinct", f"enable and disable are both {self.enable}")


@dataclass(frozen=True)
class Upd:
    condition: tuple[RegFieldState, ...]
    action: tuple[RegFieldState, ...]

    def __post_init__(self):
        object.__setattr__(self, "condition", tuple(self.condition))
        object.__setattr__(self, "action", tuple(self.action))
        if not self.condition or not self.action:
            raise InstanceError("upd-nonempty", "condition and action lists must be non-empty")
        cond = {c.key for c in self.condition}
        for a in self.action:
            if a.key in cond:
                raise InstanceError("upd-no-self", f"action {a} repeats a condition entry")


@dataclass(frozen=True)
class Evt:
    happen: RegFieldState
    active: RegFieldState
    enable: RegFieldState
    disable: RegFieldState
    clear: RegFieldState
    irq_line: Optional[int] = None

    def __post_init__(self):
        same = (self.enable.reg, self.enable.field) == (self.disable.reg, self.disable.field)
        if same and self.enable.value == self.disable.value:
            raise InstanceError("evt-enable-disable", f"enable and disable are both {self.enable}")
        if self.irq_line is not None and self.irq_line < 0:
            raise InstanceError("evt-irq", f"negative irq line {self.irq_line}")

    def states(self) -> Iterator[tuple[str, RegFieldState]]:
        for member in ("happen", "active", "enable", "disable", "clear"):
            yield member, getattr(self, member)


@dataclass(frozen=True)
class MemField:
    offset: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise InstanceError("memfield-width", f"width {self.width} < 1")
        if self.offset < 0:
            raise InstanceError("memfield-offset", f"negative offset {self.offset}")


@dataclass(frozen=True)
class MemFieldState:
    field: MemField
    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.field.width):
            raise InstanceError(
                "memstate-value", f"value {self.value} does not fit in {self.field.width} bits"
            )


Primitive = Union[Reg, RegField, RegFieldState, RegFieldMap, Swt, Upd, Evt, MemField, MemFieldState]


@dataclass(frozen=True)
class Slot:
    """One named parameter of a category schema.

    ``kind`` is a primitive kind name, ``"text"``/``"choice"``, or a nested
    :class:`CategorySchema`.  ``many`` makes the slot an ordered list.
    """

    name: str
    kind: Union[str, "CategorySchema"]
    description: str
    many: bool = False
    optional: bool = False
    aliases: tuple[str, ...] = ()
    choices: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.description.strip():
            raise InstanceError("slot-description", f"slot {self.name!r} has no description")
        if isinstance(self.kind, str):
            if self.kind not in PRIMITIVE_KINDS + EXTRA_SLOT_KINDS:
                raise InstanceError("slot-kind", f"slot {self.name!r}: unknown kind {self.kind!r}")
            if self.kind in ("RegField", "Upd"):
                # fields live in the universe, updates in the update list
                raise InstanceError("slot-kind", f"slot {self.name!r}: {self.kind} is not a slot kind")
            if self.kind == "choice" and not self.choices:
                raise InstanceError("slot-kind", f"choice slot {self.name!r} has no choices")

    @property
    def nested(self) -> bool:
        return isinstance(self.kind, CategorySchema)


@dataclass(frozen=True)
class CategorySchema:
    name: str
    slots: tuple[Slot, ...] = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        seen: set[str] = set()
        for s in self.slots:
            for key in (s.name, *s.aliases):
                if key in seen:
                    raise InstanceError("slot-unique", f"schema {self.name}: duplicate slot {key!r}")
                seen.add(key)

    def slot(self, key: str) -> Optional[Slot]:
        for s in self.slots:
            if key == s.name or key in s.aliases:
                return s
        return None


SlotValue = Any  # primitive | str | dict[str, SlotValue] | list[SlotValue] | None


@dataclass(frozen=True)
class ModelInstance:
    """A fully bound peripheral model.

    ``category`` is the abstract model (schema) name, ``peripheral`` the
    driver-side name of the peripheral category (``USART`` for ``UART``).
    """

    category: str
    registers: tuple[Reg, ...] = ()
    fields: tuple[RegField, ...] = ()
    updates: tuple[Upd, ...] = ()
    slots: dict[str, SlotValue] = field(default_factory=dict)
    peripheral: str = ""

    def __post_init__(self):
        object.__setattr__(self, "registers", tuple(self.registers))
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "updates", tuple(self.updates))
        if not self.peripheral:
            object.__setattr__(self, "peripheral", self.category)

    def __hash__(self):
        return hash((self.category, self.peripheral, self.registers, self.fields))

    def reg(self, name: str) -> Optional[Reg]:
        for r in self.registers:
            if r.name == name:
                return r
        return None

    def field_of(self, reg: str, name: str) -> Optional[RegField]:
        for f in self.fields:
            if f.reg == reg and f.name == name:
                return f
        return None

    def fields_by_reg(self) -> dict[str, list[RegField]]:
        out: dict[str, list[RegField]] = {r.name: [] for r in self.registers}
        for f in self.fields:
            out.setdefault(f.reg, []).append(f)
        return out

    def events(self) -> list[tuple[str, Evt]]:
        return [(p, v) for p, v in walk_slots(self.slots) if isinstance(v, Evt)]

    def switches(self) -> list[tuple[str, Swt]]:
        return [(p, v) for p, v in walk_slots(self.slots) if isinstance(v, Swt)]

    def with_irq_lines(self, lines: dict[str, int]) -> "ModelInstance":
        """Copy with ``Evt.irq_line`` set for each event path in ``lines``."""

        def sub(path, value):
            if isinstance(value, Evt) and path in lines:
                return replace(value, irq_line=lines[path])
            return value

        return replace(self, slots=map_slots(self.slots, sub))

    def check(self) -> "ModelInstance":
        """Raise :class:`InstanceError` unless every cross-primitive invariant holds."""
        names = [r.name for r in self.registers]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise InstanceError("reg-unique", f"duplicate register names {sorted(dup)}")
        regs = {r.name: r for r in self.registers}
        seen: set[tuple[str, str]] = set()
        for f in self.fields:
            if f.reg not in regs:
                raise DanglingReferenceError("dangling-reg", f"field {f.name} names unknown register {f.reg}")
            if f.offset + f.width > regs[f.reg].width:
                raise InstanceError(
                    "field-bounds",
                    f"{f.reg}.{f.name} bits [{f.offset},{f.offset + f.width}) exceed {regs[f.reg].width}-bit register",
                )
            if (f.reg, f.name) in seen:
                raise InstanceError("field-unique", f"duplicate field {f.reg}.{f.name}")
            seen.add((f.reg, f.name))
        for i, u in enumerate(self.updates):
            for s in (*u.condition, *u.action):
                self._check_state(s, f"updates[{i}]")
        for path, value in walk_slots(self.slots):
            self._check_value(value, path)
        return self

    def _lookup(self, reg: str, name: str, path: str) -> RegField:
        if reg not in {r.name for r in self.registers}:
            raise DanglingReferenceError("dangling-reg", f"unknown register {reg}", path)
        f = self.field_of(reg, name)
        if f is None:
            raise DanglingReferenceError("dangling-field", f"unknown field {reg}.{name}", path)
        return f

    def _check_state(self, s: RegFieldState, path: str):
        f = self._lookup(s.reg, s.field, path)
        if s.value >= 1 << f.width:
            raise InstanceError("state-value", f"{s} does not fit in {f.width}-bit field", path)

    def _check_value(self, value: SlotValue, path: str):
        if isinstance(value, RegFieldState):
            self._check_state(value, path)
        elif isinstance(value, RegFieldMap):
            f = self._lookup(value.reg, value.field, path)
            bad = [k for k in value.map if k >= 1 << f.width]
            if bad:
                raise InstanceError("map-key", f"keys {bad} do not fit in {value.reg}.{value.field}", path)
        elif isinstance(value, (Swt, Evt)):
            for member in ("enable", "disable", "status", "happen", "active", "clear"):
                s = getattr(value, member, None)
                if s is not None:
                    self._check_state(s, f"{path}.{member}")
        elif isinstance(value, RegRef):
            if self.reg(value.name) is None:
                raise DanglingReferenceError("dangling-reg", f"unknown register {value.name}", path)


@dataclass(frozen=True)
class RegRef:
    """A ``Reg`` slot value: the name of a register in the instance universe."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class DeviceInstance:
    name: str
    base: int
    irqs: tuple[int, ...] = ()
    model: Optional[ModelInstance] = None

    def __post_init__(self):
        object.__setattr__(self, "irqs", tuple(self.irqs))
        if not self.name:
            raise InstanceError("device-name", "device instance has empty name")
        if self.base < 0 or self.base % 4:
            raise InstanceError("device-base", f"{self.name}: base {self.base:#x} not 4-byte aligned")
        if len(set(self.irqs)) != len(self.irqs):
            raise InstanceError("device-irqs", f"{self.name}: repeated irq lines {list(self.irqs)}")
        if any(i < 0 for i in self.irqs):
            raise InstanceError("device-irqs", f"{self.name}: negative irq line")

    def bind(self, model: ModelInstance) -> "DeviceInstance":
        return replace(self, model=model)


def walk_slots(value: SlotValue, path: str = "") -> Iterator[tuple[str, SlotValue]]:
    """Yield ``(path, value)`` for every leaf slot value, depth first, in order.

    Paths join slot names and list indices with dots: ``trans_descs.0.complete``.
    """
    if isinstance(value, dict):
        for k, v in value.items():
            yield from walk_slots(v, f"{path}.{k}" if path else k)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from walk_slots(v, f"{path}.{i}")
    elif value is not None:
        yield path, value


def map_slots(value: SlotValue, fn, path: str = "") -> SlotValue:
    if isinstance(value, dict):
        return {k: map_slots(v, fn, f"{path}.{k}" if path else k) for k, v in value.items()}
    if isinstance(value, list):
        return [map_slots(v, fn, f"{path}.{i}") for i, v in enumerate(value)]
    if value is None:
        return None
    return fn(path, value)


def referenced_states(value: SlotValue) -> Iterator[RegFieldState]:
    if isinstance(value, RegFieldState):
        yield value
    elif isinstance(value, Swt):
        yield value.enable
        yield value.disable
        if value.status is not None:
            yield value.status
    elif isinstance(value, Evt):
        for _, s in value.states():
            yield s
    elif isinstance(value, Upd):
        yield from value.condition
        yield from value.action
