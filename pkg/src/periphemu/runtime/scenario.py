"""Scripted firmware harness: machine configs, scenario files and trace output.

A scenario is line-oriented text, one step per line, ``#`` starting a comment::

    write TIM2.ARR 3            # symbolic DEVICE.REG, size = register width
    write 0x40000024 4 0x10     # numeric address with explicit size
    tick 3
    read_expect USART1.DR 0x68
    inject_rx USART1 "hi"
    expect_tx USART1 [4f 4b]
    expect_irq 28 high
    mem_write 0x20000000 [01 02 03 04]
    mem_expect 0x20000100 "\\x01\\x02"
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from ..docformat import Reader, loads, model_from_dict, parse_int
from ..primitives import DeviceInstance, InstanceError
from ..schemas import SchemaRegistry
from .machine import RAM_BASE, BusFault, Machine

STEP_KINDS = ("write", "read_expect", "tick", "inject_rx", "expect_tx", "expect_irq", "mem_write", "mem_expect")
_TOKEN_RE = re.compile(r'"(?:\\.|[^"\\])*"|\[[^\]]*\]|#.*|\S+')


class ScenarioError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    kind: str
    line: int
    text: str
    addr: int = 0
    size: int = 0
    value: int = 0
    device: str = ""
    data: bytes = b""


@dataclass
class Scenario:
    steps: list[Step]
    source: str = ""


@dataclass
class ScenarioResult:
    passed: bool
    steps_run: int
    trace: list[dict]
    failed_step: Optional[int] = None
    message: str = ""
    fault: Optional[BusFault] = None

    def trace_text(self) -> str:
        return dump_trace(self.trace)


def dump_trace(trace: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in trace)


# --- machine configs ---------------------------------------------------------------

def machine_from_dict(doc: Any, base_dir: Union[str, Path] = ".", strict: bool = True,
                      registry: Optional[SchemaRegistry] = None, **kw) -> Machine:
    """Build a machine from ``{"ram": {...}, "instances": [...]}``.

    An instance's ``model`` is inline or a path relative to ``base_dir``;
    ``irq_lines`` optionally maps event paths to lines, overriding the model.
    """
    base_dir = Path(base_dir)
    r = Reader(strict)
    try:
        o = r.keys(doc, {"ram", "instances", "bus_fault"}, {"instances"}, "")
        ram = r.keys(o.get("ram", {}), {"base", "size"}, set(), "ram")
        devs = []
        for i, raw in enumerate(o["instances"]):
            path = f"instances[{i}]"
            d = r.keys(raw, {"name", "base", "irqs", "model", "irq_lines"}, {"name", "base", "model"}, path)
            model_doc = d["model"]
            if isinstance(model_doc, str):
                model_doc = loads((base_dir / model_doc).read_text(encoding="utf-8"))
            model = model_from_dict(model_doc, strict, registry)
            if d.get("irq_lines"):
                model = model.with_irq_lines({k: parse_int(v, f"{path}.irq_lines.{k}")
                                              for k, v in d["irq_lines"].items()})
            irqs = tuple(parse_int(x, f"{path}.irqs") for x in d.get("irqs", []))
            devs.append(DeviceInstance(r.string(d["name"], path + ".name"), parse_int(d["base"], path + ".base"),
                                       irqs, model))
    except InstanceError as exc:
        raise ConfigError(str(exc)) from exc
    kw.setdefault("bus_fault", o.get("bus_fault", "error"))
    return Machine(devs, parse_int(ram.get("size", 0x10000), "ram.size"),
                   ram_base=parse_int(ram.get("base", RAM_BASE), "ram.base"), **kw)


def load_machine(path: Union[str, Path], **kw) -> Machine:
    path = Path(path)
    return machine_from_dict(loads(path.read_text(encoding="utf-8")), path.parent, **kw)


# --- scenario parsing ------------------------------------------------------------------

def _tokens(line: str) -> list[str]:
    out = []
    for tok in _TOKEN_RE.findall(line):
        if tok.startswith("#"):
            break
        out.append(tok)
    return out


def parse_bytes(tok: str) -> bytes:
    if tok.startswith('"'):
        value = ast.literal_eval("b" + tok)
        return bytes(value)
    if tok.startswith("[") and tok.endswith("]"):
        items = tok[1:-1].replace(",", " ").split()
        out = bytearray()
        for item in items:
            v = int(item, 16)
            if not 0 <= v <= 0xFF:
                raise ValueError(f"byte {item!r} out of range")
            out.append(v)
        return bytes(out)
    raise ValueError(f"expected a quoted string or [hex bytes], got {tok!r}")


def _level(tok: str) -> int:
    t = tok.lower()
    if t in ("high", "1"):
        return 1
    if t in ("low", "0"):
        return 0
    raise ValueError(f"irq level must be high/low/1/0, got {tok!r}")


def _address(tok: str, m: Machine) -> tuple[int, Optional[int]]:
    """Resolve a numeric or ``DEVICE.REG`` address; the second item is the register size in bytes."""
    if re.fullmatch(r"0[xX][0-9a-fA-F]+|\d+", tok):
        return int(tok, 0), None
    dev, _, reg = tok.partition(".")
    addr = m.reg_address(dev, reg)
    return addr, m.device(dev).reg_by_name[reg].nbytes


def _int(tok: str) -> int:
    return int(tok.replace("_", ""), 0)


def _parse_step(toks: list[str], lineno: int, text: str, m: Machine) -> Step:
    kind, args = toks[0], toks[1:]
    if kind not in STEP_KINDS:
        raise ValueError(f"unknown step {kind!r}")

    def arity(*n):
        if len(args) not in n:
            raise ValueError(f"{kind} takes {' or '.join(map(str, n))} arguments, got {len(args)}")

    if kind in ("write", "read_expect"):
        arity(2, 3)
        addr, width = _address(args[0], m)
        size = _int(args[1]) if len(args) == 3 else (width or 4)
        return Step(kind, lineno, text, addr=addr, size=size, value=_int(args[-1]))
    if kind == "tick":
        arity(1)
        n = _int(args[0])
        if n < 1:
            raise ValueError("tick count must be >= 1")
        return Step(kind, lineno, text, value=n)
    if kind in ("inject_rx", "expect_tx"):
        arity(2)
        m.device(args[0])
        return Step(kind, lineno, text, device=args[0], data=parse_bytes(args[1]))
    if kind == "expect_irq":
        arity(2)
        line = _int(args[0])
        if line not in m.lines:
            raise ValueError(f"no interrupt line {line}")
        return Step(kind, lineno, text, value=_level(args[1]), size=line)
    arity(2)
    addr, _ = _address(args[0], m)
    return Step(kind, lineno, text, addr=addr, data=parse_bytes(args[1]))


def parse_scenario(text: str, m: Machine) -> Scenario:
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = _tokens(raw)
        if not toks:
            continue
        try:
            steps.append(_parse_step(toks, lineno, " ".join(toks), m))
        except (ValueError, KeyError, SyntaxError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            raise ScenarioError(lineno, str(msg)) from exc
    return Scenario(steps, text)


def load_scenario(path: Union[str, Path], m: Machine) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), m)


# --- execution -------------------------------------------------------------------------

def _show(data: bytes) -> str:
    return data.hex(" ") if data else "(empty)"


def _execute(m: Machine, s: Step) -> Optional[str]:
    """Run one step; a string return is a failed expectation."""
    if s.kind == "write":
        m.mmio_write(s.addr, s.size, s.value)
    elif s.kind == "read_expect":
        got = m.mmio_read(s.addr, s.size)
        if got != s.value:
            return f"read {s.addr:#x}: expected {s.value:#x}, got {got:#x}"
    elif s.kind == "tick":
        m.tick(s.value)
    elif s.kind == "inject_rx":
        m.inject_rx(s.device, s.data)
    elif s.kind == "expect_tx":
        got = m.read_tx(s.device)
        if got != s.data:
            return f"{s.device} tx: expected {_show(s.data)}, got {_show(got)}"
    elif s.kind == "expect_irq":
        got = m.irq_level(s.size)
        if got != s.value:
            return f"irq {s.size}: expected {'high' if s.value else 'low'}, got {'high' if got else 'low'}"
    elif s.kind == "mem_write":
        m.mem_write(s.addr, s.data)
    elif s.kind == "mem_expect":
        got = m.mem_read(s.addr, len(s.data))
        if got != s.data:
            return f"memory at {s.addr:#x}: expected {_show(s.data)}, got {_show(got)}"
    return None


def run_scenario(m: Machine, scenario: Scenario) -> ScenarioResult:
    """Run steps in order, stopping at the first failed expectation or bus fault."""
    for i, step in enumerate(scenario.steps):
        m.trace.append({"op": "step", "index": i, "line": step.line, "step": step.text})
        try:
            failure = _execute(m, step)
        except BusFault as exc:
            m.trace.append({"op": "abort", "index": i, "reason": str(exc)})
            return ScenarioResult(False, i + 1, m.trace, i, f"step {i} (line {step.line}): {exc}", fault=exc)
        if failure:
            m.trace.append({"op": "fail", "index": i, "reason": failure})
            return ScenarioResult(False, i + 1, m.trace, i, f"step {i} (line {step.line}) `{step.text}`: {failure}")
    return ScenarioResult(True, len(scenario.steps), m.trace)


def run_files(machine_config: Union[str, Path], scenario_path: Union[str, Path], **kw) -> ScenarioResult:
    m = load_machine(machine_config, **kw)
    return run_scenario(m, load_scenario(scenario_path, m))
