"""Self-contradiction checks over extraction results.

Each check is exhaustive: every conflicting pair or dangling name becomes its
own finding, so a retry loop sees the full picture.  Register intervals are in
bytes, field intervals in bits, both half-open.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .primitives import (
    DeviceInstance,
    ModelInstance,
    Reg,
    RegField,
    RegFieldMap,
    RegRef,
    referenced_states,
    walk_slots,
)


@dataclass(frozen=True)
class Finding:
    stage: int
    rule: str
    entities: tuple[str, ...]
    message: str

    def to_dict(self) -> dict:
        return {"stage": self.stage, "rule": self.rule, "entities": list(self.entities), "message": self.message}


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.findings

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def __bool__(self):
        return self.passed

    def __add__(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.findings + other.findings)

    def stages(self) -> set[int]:
        return {f.stage for f in self.findings}

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "findings": [f.to_dict() for f in self.findings]}

    def __str__(self):
        lines = [f"verdict: {self.verdict}"]
        lines += [f"  stage {f.stage} {f.rule}: {f.message}" for f in self.findings]
        return "\n".join(lines)


def _duplicates(values: Iterable) -> list:
    counts = Counter(values)
    return [v for v in counts if counts[v] > 1]


def check_category_names(categories: Sequence[tuple[str, str]]) -> ValidationReport:
    dups = _duplicates(name for name, _ in categories)
    return ValidationReport([
        Finding(1, "duplicate-category", (name,), f"peripheral category {name!r} listed more than once")
        for name in dups
    ])


def intervals_intersect(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    return a_start < b_end and b_start < a_end


def check_register_overlap(regs: Sequence[Reg]) -> ValidationReport:
    findings = []
    spans = sorted(
        ((r.offset, r.offset + r.width // 8, i, r) for i, r in enumerate(regs)),
        key=lambda t: (t[0], t[2]),
    )
    # sweep: each register is compared only against those starting before it ends
    for k, (start, end, i, a) in enumerate(spans):
        for start2, end2, j, b in spans[k + 1:]:
            if start2 >= end:
                break
            first, second = (a, b) if i < j else (b, a)
            findings.append(Finding(
                2, "register-overlap", tuple(sorted((first.name, second.name))),
                f"{first.name} [{first.offset:#x},{first.offset + first.nbytes:#x}) overlaps "
                f"{second.name} [{second.offset:#x},{second.offset + second.nbytes:#x})",
            ))
    return ValidationReport(sorted(findings, key=lambda f: f.entities))


def check_field_overlap(fields_by_reg: Mapping[str, Sequence[RegField]]) -> ValidationReport:
    findings = []
    for reg, fields in fields_by_reg.items():
        for i, a in enumerate(fields):
            for b in fields[i + 1:]:
                if intervals_intersect(a.offset, a.offset + a.width, b.offset, b.offset + b.width):
                    x, y = sorted((a.name, b.name))
                    findings.append(Finding(
                        3, "field-overlap", (f"{reg}.{x}", f"{reg}.{y}"),
                        f"{reg}.{a.name} bits [{a.offset},{a.offset + a.width}) overlap "
                        f"{reg}.{b.name} bits [{b.offset},{b.offset + b.width})",
                    ))
    return ValidationReport(findings)


def _missing(regs: set[str], fields: set[tuple[str, str]], reg: str, name: Optional[str]):
    if reg not in regs:
        return reg
    if name is not None and (reg, name) not in fields:
        return f"{reg}.{name}"
    return None


def check_referential_integrity(inst: ModelInstance) -> ValidationReport:
    regs = {r.name for r in inst.registers}
    fields = {(f.reg, f.name) for f in inst.fields}
    findings = []
    for i, u in enumerate(inst.updates):
        for s in referenced_states(u):
            bad = _missing(regs, fields, s.reg, s.field)
            if bad:
                findings.append(Finding(4, "unknown-name", (bad,), f"updates[{i}] references unknown {bad}"))
    for path, value in walk_slots(inst.slots):
        if isinstance(value, RegRef):
            refs = [(value.name, None)]
        elif isinstance(value, RegFieldMap):
            refs = [(value.reg, value.field)]
        else:
            refs = [(s.reg, s.field) for s in referenced_states(value)]
        for reg, name in refs:
            bad = _missing(regs, fields, reg, name)
            if bad:
                findings.append(Finding(5, "unknown-name", (bad,), f"slot {path} references unknown {bad}"))
    return ValidationReport(findings)


def check_instances(devs: Sequence[DeviceInstance]) -> ValidationReport:
    findings = [
        Finding(6, "duplicate-instance", (n,), f"instance name {n!r} repeated")
        for n in _duplicates(d.name for d in devs)
    ]
    for base in _duplicates(d.base for d in devs):
        owners = tuple(d.name for d in devs if d.base == base)
        findings.append(Finding(6, "duplicate-base", owners, f"base address {base:#x} shared by {list(owners)}"))
    owners_by_irq = defaultdict(list)
    for d in devs:
        for irq in set(d.irqs):
            owners_by_irq[irq].append(d.name)
    for irq, owners in sorted(owners_by_irq.items()):
        if len(owners) > 1:
            findings.append(Finding(6, "duplicate-irq", tuple(owners), f"irq {irq} shared by {owners}"))
    return ValidationReport(findings)


def shared_registers(devs: Sequence[DeviceInstance]) -> list[str]:
    """Registers of different instances that occupy the same absolute bytes.

    Informational only: one hardware register may legitimately be described by
    more than one category model of an MCU.
    """
    notes = []
    placed = [(d, r, d.base + r.offset) for d in devs if d.model is not None for r in d.model.registers]
    for i, (da, ra, a) in enumerate(placed):
        for db, rb, b in placed[i + 1:]:
            if da is not db and intervals_intersect(a, a + ra.nbytes, b, b + rb.nbytes):
                notes.append(f"register {da.name}.{ra.name} ({da.model.category}) at {a:#x} is also "
                             f"{db.name}.{rb.name} ({db.model.category}) at {b:#x}")
    return notes


def check_irq_association(dev: DeviceInstance, model: Optional[ModelInstance] = None) -> ValidationReport:
    model = model or dev.model
    if model is None:
        return ValidationReport()
    findings = []
    for path, evt in model.events():
        if evt.irq_line is None:
            findings.append(Finding(7, "irq-unassigned", (dev.name, path), f"{dev.name}: event {path} has no irq line"))
        elif evt.irq_line not in dev.irqs:
            findings.append(Finding(
                7, "irq-unknown", (dev.name, path),
                f"{dev.name}: event {path} uses irq {evt.irq_line}, instance irqs are {list(dev.irqs)}",
            ))
    return ValidationReport(findings)


def validate_all(inst: ModelInstance, devs: Sequence[DeviceInstance] = (),
                 categories: Optional[Sequence[tuple[str, str]]] = None) -> ValidationReport:
    """Run all six checks; devices are checked against their bound model or ``inst``."""
    if categories is None:
        categories = [(inst.peripheral, inst.category)]
    report = check_category_names(categories)
    report += check_register_overlap(inst.registers)
    report += check_field_overlap(inst.fields_by_reg())
    report += check_referential_integrity(inst)
    report += check_instances(devs)
    for d in devs:
        report += check_irq_association(d, d.model or inst)
    return report
