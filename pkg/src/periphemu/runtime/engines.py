"""Category engines: Timer, UART, GPIO and DMA behavior on top of the register file."""

from __future__ import annotations

from collections import deque
from typing import TYPE_CHECKING

from ..primitives import RegFieldMap
from .machine import DeviceState, Engine

if TYPE_CHECKING:
    from .machine import Machine


class IdleEngine(Engine):
    """Register semantics only; used for the generic model and categories without an engine."""


class TimerEngine(Engine):
    """Counters count while enabled and flag their period event on a match.

    Capture and compare channels are checked against the first counter's tick.
    """

    def __init__(self, machine: "Machine", ds: DeviceState):
        super().__init__(machine, ds)
        s = ds.model.slots
        self.counters = [(f"counters.{i}", c) for i, c in enumerate(s.get("counters") or [])]
        self.channels = [(f"input_captures.{i}", c["capture"].name, c["enable"], c["capture_evt"])
                         for i, c in enumerate(s.get("input_captures") or [])]
        self.channels += [(f"output_compares.{i}", c["compare"].name, c["enable"], c["compare_evt"])
                          for i, c in enumerate(s.get("output_compares") or [])]

    def on_tick(self) -> None:
        ds = self.ds
        for n, (path, c) in enumerate(self.counters):
            if not ds.switch_on[f"{path}.enable"]:
                continue
            tick, period = c["tick"].name, c["period"].name
            value = (ds.read_reg(tick) + 1) & ds.reg_by_name[tick].mask
            ds.write_reg(tick, value)
            if n == 0:
                for cpath, reg, _, evt in self.channels:
                    if ds.switch_on[f"{cpath}.enable"] and value == ds.read_reg(reg):
                        self.m.set_event(ds, evt)
            if value == ds.read_reg(period):
                self.m.set_event(ds, c["period_evt"])
                ds.write_reg(tick, 0)


class UartEngine(Engine):
    def __init__(self, machine: "Machine", ds: DeviceState):
        super().__init__(machine, ds)
        s = ds.model.slots
        self.data = s["data"].name
        self.tx_evt = s["tx_evt"]
        self.rx_evt = s["rx_evt"]
        self.rx: deque[int] = deque()
        self.tx = bytearray()

    def inject(self, data: bytes) -> None:
        if not data:
            return
        self.rx.extend(data)
        self.m.set_event(self.ds, self.rx_evt)
        self.m.trace.append({"op": "rx", "device": self.ds.name, "data": data.hex()})

    def drain(self) -> bytes:
        out, self.tx = bytes(self.tx), bytearray()
        return out

    def on_read(self, reg: str) -> None:
        if reg != self.data or not self.rx:
            return
        self.ds.write_reg(self.data, self.rx.popleft())
        if not self.rx:
            h = self.rx_evt.happen
            self.ds.set_field(h.reg, h.field, 0 if h.value else 1)

    def on_write(self, reg, touched, written, enabled, disabled) -> None:
        if reg != self.data or not self.ds.switch_on["tx_enable"]:
            return
        byte = self.ds.read_reg(self.data) & 0xFF
        self.tx.append(byte)
        self.m.set_event(self.ds, self.tx_evt)
        self.m.trace.append({"op": "tx", "device": self.ds.name, "data": f"{byte:02x}"})


class GpioEngine(Engine):
    """Pin levels driven through set/clear (and optionally output) registers.

    Levels are mirrored into the input register; set and clear registers read back as 0.
    """

    def __init__(self, machine: "Machine", ds: DeviceState):
        super().__init__(machine, ds)
        s = ds.model.slots
        self.input = s["input"].name
        self.set = s["set"].name
        self.clear = s["clear"].name
        self.output = s["output"].name if s.get("output") is not None else None
        self.edges = [(e["pin"], e["evt"]) for e in s.get("edges") or []]
        self.levels = 0

    def on_write(self, reg, touched, written, enabled, disabled) -> None:
        ds = self.ds
        levels = self.levels
        if reg == self.set:
            levels |= ds.read_reg(self.set)
            ds.write_reg(self.set, 0)
        elif reg == self.clear:
            levels &= ~ds.read_reg(self.clear)
            ds.write_reg(self.clear, 0)
        elif reg == self.output:
            levels = ds.read_reg(self.output)
        else:
            return
        self.drive(levels)

    def drive(self, levels: int) -> None:
        ds = self.ds
        before = {pin.key: ds.holds(pin) for pin, _ in self.edges}
        self.levels = levels & ds.reg_by_name[self.input].mask
        ds.write_reg(self.input, self.levels)
        if self.output is not None:
            ds.write_reg(self.output, self.levels)
        for pin, evt in self.edges:
            if not before[pin.key] and ds.holds(pin):
                self.m.set_event(ds, evt)
        self.m.trace.append({"op": "gpio", "device": ds.name, "levels": self.levels})


class DmaEngine(Engine):
    """Register-programmed channels; a transfer runs to completion when its channel is enabled."""

    def __init__(self, machine: "Machine", ds: DeviceState):
        super().__init__(machine, ds)
        self.descs = {f"trans_descs.{i}.enable": (i, d)
                      for i, d in enumerate(ds.model.slots.get("trans_descs") or [])}

    def on_write(self, reg, touched, written, enabled, disabled) -> None:
        for path in enabled:
            if path in self.descs:
                self.kick(*self.descs[path])

    def _width(self, m: RegFieldMap) -> int | None:
        return m.map.get(self.ds.get_field(m.reg, m.field))

    def kick(self, index: int, d: dict) -> bool:
        ds, m = self.ds, self.m
        src, dst, cnt = (ds.read_reg(d[k].name) for k in ("src", "dst", "cnt"))
        sw, dw = self._width(d["src_width"]), self._width(d["dst_width"])
        where = f"{ds.name} trans_descs.{index}"
        for slot, width in (("src_width", sw), ("dst_width", dw)):
            if width is None:
                fm = d[slot]
                key = ds.get_field(fm.reg, fm.field)
                m.diagnose(f"{where}: {slot} field {fm.reg}.{fm.field}={key} has no mapped width; transfer aborted",
                           device=ds.name, desc=index)
                return False
        direction = d.get("direction")
        inverted = direction is not None and ds.holds(direction)
        if inverted:
            src, dst = dst, src
        n = cnt * sw
        if not (m.in_ram(src, n) and m.in_ram(dst, n)):
            m.diagnose(f"{where}: {n} bytes {src:#x} -> {dst:#x} not within RAM; transfer aborted",
                       device=ds.name, desc=index)
            return False
        m.mem_write(dst, m.mem_read(src, n))
        ds.write_reg(d["cnt"].name, 0)
        m.set_event(ds, d["complete"])
        m.trace.append({"op": "dma", "device": ds.name, "desc": index,
                        "src": f"{src:#x}", "dst": f"{dst:#x}", "bytes": n})
        return True


ENGINES = {"Timer": TimerEngine, "UART": UartEngine, "GPIO": GpioEngine, "DMA": DmaEngine}


def engine_for(machine: "Machine", ds: DeviceState) -> Engine:
    return ENGINES.get(ds.model.category, IdleEngine)(machine, ds)
