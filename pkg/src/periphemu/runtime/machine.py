"""Interpretive emulation of instantiated peripheral models.

A :class:`Machine` owns RAM, an MMIO map from addresses to device registers,
interrupt line levels and one engine per device.  Every write goes through
the same sequence: store, update rules, event control, switches, engine kick,
interrupt line recomputation.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..primitives import DeviceInstance, Evt, ModelInstance, Reg, RegField, RegFieldState, Swt
from ..validator import ValidationReport, check_instances, validate_all

log = logging.getLogger(__name__)

RAM_BASE = 0x20000000
ACCESS_SIZES = (1, 2, 4, 8)


class BuildError(ValueError):
    def __init__(self, message: str, report: Optional[ValidationReport] = None):
        self.report = report
        super().__init__(message if report is None else f"{message}\n{report}")


class BusFault(RuntimeError):
    def __init__(self, addr: int, size: int, reason: str):
        self.addr = addr
        self.size = size
        self.reason = reason
        super().__init__(f"bus fault at {addr:#x} (size {size}): {reason}")


class IrqLineError(KeyError):
    pass


def inactive_value(s: RegFieldState) -> int:
    """The value a flag field takes when the state ``s`` no longer holds."""
    return 0 if s.value else 1


@dataclass
class DeviceState:
    """Register file and modeled switch states for one device instance."""

    dev: DeviceInstance
    model: ModelInstance
    regs: dict[str, int]
    reg_by_name: dict[str, Reg]
    fields: dict[tuple[str, str], RegField]
    events: list[tuple[str, Evt]]
    switches: list[tuple[str, Swt]]
    switch_on: dict[str, bool] = field(default_factory=dict)
    happen_mask: dict[str, int] = field(default_factory=dict)
    engine: Optional["Engine"] = None

    @classmethod
    def create(cls, dev: DeviceInstance) -> "DeviceState":
        model = dev.model
        hm: dict[str, int] = defaultdict(int)
        fields = {(f.reg, f.name): f for f in model.fields}
        events = model.events()
        for _, evt in events:
            hm[evt.happen.reg] |= fields[(evt.happen.reg, evt.happen.field)].mask
        switches = model.switches()
        return cls(
            dev=dev,
            model=model,
            regs={r.name: 0 for r in model.registers},
            reg_by_name={r.name: r for r in model.registers},
            fields=fields,
            events=events,
            switches=switches,
            switch_on={p: False for p, _ in switches},
            happen_mask=dict(hm),
        )

    @property
    def name(self) -> str:
        return self.dev.name

    def get_field(self, reg: str, name: str) -> int:
        f = self.fields[(reg, name)]
        return (self.regs[reg] >> f.offset) & ((1 << f.width) - 1)

    def set_field(self, reg: str, name: str, value: int) -> None:
        f = self.fields[(reg, name)]
        cur = self.regs[reg]
        self.regs[reg] = ((cur & ~f.mask) | ((value << f.offset) & f.mask)) & self.reg_by_name[reg].mask

    def holds(self, s: RegFieldState) -> bool:
        return self.get_field(s.reg, s.field) == s.value

    def apply(self, s: RegFieldState) -> None:
        self.set_field(s.reg, s.field, s.value)

    def read_reg(self, name: str) -> int:
        return self.regs[name]

    def write_reg(self, name: str, value: int) -> None:
        self.regs[name] = value & self.reg_by_name[name].mask

    def field_touched(self, s: RegFieldState, reg: str, touched: int) -> bool:
        return s.reg == reg and bool(self.fields[(s.reg, s.field)].mask & touched)

    def written_matches(self, s: RegFieldState, reg: str, touched: int, written: int) -> bool:
        """Did a write of ``written`` (touching bit mask ``touched``) to ``reg`` put ``s``'s value in its field?"""
        if not self.field_touched(s, reg, touched):
            return False
        f = self.fields[(s.reg, s.field)]
        return (written >> f.offset) & ((1 << f.width) - 1) == s.value


class Engine:
    """Category-specific behavior hooked into the generic write/read/tick path."""

    def __init__(self, machine: "Machine", ds: DeviceState):
        self.m = machine
        self.ds = ds

    def on_read(self, reg: str) -> None:
        pass

    def on_write(self, reg: str, touched: int, written: int, enabled: list[str], disabled: list[str]) -> None:
        pass

    def on_tick(self) -> None:
        pass


class Machine:
    def __init__(self, devs: Sequence[DeviceInstance] = (), mem_size: int = 0x10000, ram_base: int = RAM_BASE,
                 bus_fault: str = "error", debug: bool = False, validate: bool = True):
        if bus_fault not in ("error", "ignore"):
            raise ValueError("bus_fault must be 'error' or 'ignore'")
        self.ram_base = ram_base
        self.ram = bytearray(mem_size)
        self.bus_fault = bus_fault
        self.debug = debug
        self.ticks = 0
        self.trace: list[dict] = []
        self.diagnostics: list[str] = []
        self.devices: dict[str, DeviceState] = {}
        self._map: dict[int, tuple[DeviceState, Reg]] = {}
        self.groups: dict[int, list[tuple[DeviceState, str, Evt]]] = defaultdict(list)
        self.lines: dict[int, int] = {}
        self._build(list(devs), validate)

    # --- construction -------------------------------------------------------------

    def _build(self, devs: list[DeviceInstance], validate: bool):
        from .engines import engine_for

        if validate:
            report = check_instances(devs)
            for d in devs:
                if d.model is None:
                    raise BuildError(f"device {d.name} has no model bound")
                report += validate_all(d.model, [d], categories=[])
            if not report.passed:
                raise BuildError("device set does not validate", report)
        ram_end = self.ram_base + len(self.ram)
        ranges = []
        for d in devs:
            if d.model is None:
                raise BuildError(f"device {d.name} has no model bound")
            extent = max((r.offset + r.nbytes for r in d.model.registers), default=0)
            lo, hi = d.base, d.base + extent
            if extent and lo < ram_end and self.ram_base < hi:
                raise BuildError(f"device {d.name} [{lo:#x},{hi:#x}) collides with RAM")
            for name, a, b in ranges:
                if extent and lo < b and a < hi:
                    raise BuildError(f"device {d.name} [{lo:#x},{hi:#x}) overlaps {name} [{a:#x},{b:#x})")
            ranges.append((d.name, lo, hi))
            ds = DeviceState.create(d)
            self.devices[d.name] = ds
            for r in d.model.registers:
                for k in range(r.nbytes):
                    self._map[d.base + r.offset + k] = (ds, r)
            for line in d.irqs:
                self.lines.setdefault(line, 0)
            for path, evt in ds.events:
                if evt.irq_line is not None:
                    self.groups[evt.irq_line].append((ds, path, evt))
                    self.lines.setdefault(evt.irq_line, 0)
            ds.engine = engine_for(self, ds)
        self.lines = dict(sorted(self.lines.items()))

    def device(self, name: str) -> DeviceState:
        try:
            return self.devices[name]
        except KeyError:
            raise KeyError(f"no device named {name!r}") from None

    def reg_address(self, dev: str, reg: str) -> int:
        ds = self.device(dev)
        if reg not in ds.reg_by_name:
            raise KeyError(f"device {dev} has no register {reg!r}")
        return ds.dev.base + ds.reg_by_name[reg].offset

    # --- bus ------------------------------------------------------------------------

    def _locate(self, addr: int, size: int) -> Optional[tuple[DeviceState, Reg, int]]:
        if size not in ACCESS_SIZES:
            return self._fault(addr, size, f"unsupported access size {size}")
        hit = self._map.get(addr)
        if hit is None:
            return self._fault(addr, size, "unmapped address")
        ds, reg = hit
        shift = addr - ds.dev.base - reg.offset
        if shift + size > reg.nbytes:
            return self._fault(addr, size, f"access crosses or exceeds {ds.name}.{reg.name} ({reg.width} bits)")
        return ds, reg, shift

    def _fault(self, addr: int, size: int, reason: str):
        self.trace.append({"op": "fault", "addr": f"{addr:#x}", "size": size, "reason": reason})
        if self.bus_fault == "error":
            raise BusFault(addr, size, reason)
        log.warning("bus fault at %#x ignored: %s", addr, reason)
        self.diagnostics.append(f"bus fault at {addr:#x}: {reason}")
        return None

    def mmio_read(self, addr: int, size: int) -> int:
        hit = self._locate(addr, size)
        if hit is None:
            return 0
        ds, reg, shift = hit
        ds.engine.on_read(reg.name)
        value = (ds.regs[reg.name] >> (8 * shift)) & ((1 << (8 * size)) - 1)
        self.trace.append({"op": "read", "addr": f"{addr:#x}", "size": size, "value": f"{value:#x}"})
        self._recompute()
        self._check_masks()
        return value

    def mmio_write(self, addr: int, size: int, value: int) -> None:
        hit = self._locate(addr, size)
        if hit is None:
            return
        ds, reg, shift = hit
        value &= (1 << (8 * size)) - 1
        self.trace.append({"op": "write", "addr": f"{addr:#x}", "size": size, "value": f"{value:#x}"})
        touched = ((1 << (8 * size)) - 1) << (8 * shift)
        old = ds.regs[reg.name]
        written = (old & ~touched) | (value << (8 * shift))
        # hardware-set flags ignore direct writes; clearing goes through Evt.clear
        hmask = ds.happen_mask.get(reg.name, 0)
        ds.regs[reg.name] = ((written & ~hmask) | (old & hmask)) & reg.mask

        self._apply_updates(ds, reg.name)

        for _, evt in ds.events:
            if ds.written_matches(evt.enable, reg.name, touched, written):
                ds.apply(evt.active)
            if ds.written_matches(evt.disable, reg.name, touched, written):
                ds.set_field(evt.active.reg, evt.active.field, inactive_value(evt.active))
            if ds.written_matches(evt.clear, reg.name, touched, written):
                ds.set_field(evt.happen.reg, evt.happen.field, inactive_value(evt.happen))

        enabled, disabled = [], []
        for path, swt in ds.switches:
            if ds.written_matches(swt.enable, reg.name, touched, written):
                if not ds.switch_on[path]:
                    enabled.append(path)
                ds.switch_on[path] = True
                if swt.status is not None:
                    ds.apply(swt.status)
            if ds.written_matches(swt.disable, reg.name, touched, written):
                if ds.switch_on[path]:
                    disabled.append(path)
                ds.switch_on[path] = False
                if swt.status is not None:
                    ds.set_field(swt.status.reg, swt.status.field, inactive_value(swt.status))
        enabled = [p for p in enabled if ds.switch_on[p]]

        ds.engine.on_write(reg.name, touched, written, enabled, disabled)
        self._recompute()
        self._check_masks()

    def _apply_updates(self, ds: DeviceState, reg: str) -> bool:
        # conditions are judged on the post-store state; actions never retrigger rules
        fired = [
            i for i, u in enumerate(ds.model.updates)
            if any(c.reg == reg for c in u.condition) and all(ds.holds(c) for c in u.condition)
        ]
        before = dict(ds.regs)
        for i in fired:
            for a in ds.model.updates[i].action:
                ds.apply(a)
            self.trace.append({"op": "upd", "device": ds.name, "rule": i})
        return ds.regs != before

    def apply_updates(self, dev: str, reg: str) -> bool:
        """Run the update rules as if ``reg`` had just been fully written; True if anything changed."""
        ds = self.device(dev)
        if reg not in ds.reg_by_name:
            raise KeyError(f"device {dev} has no register {reg!r}")
        changed = self._apply_updates(ds, reg)
        self._recompute()
        return changed

    # --- time, interrupts -------------------------------------------------------------

    def tick(self, n: int = 1) -> None:
        if n < 1:
            raise ValueError("tick count must be >= 1")
        self.trace.append({"op": "tick", "n": n})
        for _ in range(n):
            self.ticks += 1
            for ds in self.devices.values():
                ds.engine.on_tick()
            self._recompute()
        self._check_masks()

    def line_level(self, line: int) -> int:
        """Level recomputed from register state: OR over events of (happen AND active)."""
        return int(any(ds.holds(e.happen) and ds.holds(e.active) for ds, _, e in self.groups.get(line, ())))

    def _recompute(self) -> None:
        for line in self.lines:
            level = self.line_level(line)
            if level != self.lines[line]:
                self.lines[line] = level
                self.trace.append({"op": "irq", "line": line, "level": level})

    def refresh(self) -> None:
        """Recompute interrupt lines after register state was changed outside the bus."""
        self._recompute()

    def irq_level(self, line: int) -> int:
        if line not in self.lines:
            raise IrqLineError(f"no interrupt line {line}")
        return self.lines[line]

    def set_event(self, ds: DeviceState, evt: Evt) -> None:
        ds.apply(evt.happen)

    # --- RAM ---------------------------------------------------------------------------

    def _ram_slice(self, addr: int, length: int) -> slice:
        off = addr - self.ram_base
        if length < 0 or off < 0 or off + length > len(self.ram):
            raise BusFault(addr, length, "outside RAM")
        return slice(off, off + length)

    def in_ram(self, addr: int, length: int) -> bool:
        off = addr - self.ram_base
        return 0 <= off and off + length <= len(self.ram)

    def mem_read(self, addr: int, length: int) -> bytes:
        return bytes(self.ram[self._ram_slice(addr, length)])

    def mem_write(self, addr: int, data: bytes) -> None:
        self.ram[self._ram_slice(addr, len(data))] = data

    # --- UART harness -----------------------------------------------------------------

    def _uart(self, dev: str):
        from .engines import UartEngine

        eng = self.device(dev).engine
        if not isinstance(eng, UartEngine):
            raise TypeError(f"device {dev} is not a UART")
        return eng

    def inject_rx(self, dev: str, data: bytes) -> None:
        self._uart(dev).inject(bytes(data))
        self._recompute()
        self._check_masks()

    def read_tx(self, dev: str) -> bytes:
        return self._uart(dev).drain()

    # --- misc -------------------------------------------------------------------------

    def diagnose(self, message: str, **record) -> None:
        log.warning(message)
        self.diagnostics.append(message)
        self.trace.append({"op": "diag", "message": message, **record})

    def _check_masks(self) -> None:
        if not self.debug:
            return
        for ds in self.devices.values():
            for name, v in ds.regs.items():
                assert 0 <= v <= ds.reg_by_name[name].mask, f"{ds.name}.{name} holds {v:#x}"


def build_machine(devs: Sequence[DeviceInstance], mem_size: int = 0x10000, **kw) -> Machine:
    return Machine(devs, mem_size, **kw)


def mmio_read(m: Machine, addr: int, size: int) -> int:
    return m.mmio_read(addr, size)


def mmio_write(m: Machine, addr: int, size: int, value: int) -> None:
    m.mmio_write(addr, size, value)


def tick(m: Machine, n: int = 1) -> None:
    m.tick(n)


def irq_level(m: Machine, line: int) -> int:
    return m.irq_level(line)


def inject_rx(m: Machine, device: str, data: bytes) -> None:
    m.inject_rx(device, data)


def read_tx(m: Machine, device: str) -> bytes:
    return m.read_tx(device)


def mem_read(m: Machine, addr: int, length: int) -> bytes:
    return m.mem_read(addr, length)


def mem_write(m: Machine, addr: int, data: bytes) -> None:
    m.mem_write(addr, data)
