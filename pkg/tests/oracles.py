"""Reference implementations the package is checked against.

Each oracle is written from the definition, without reusing package code paths:
byte/bit sets for overlap, a tree walker for C expressions, slice copies for DMA,
a plain loop for the timer and a direct formula for interrupt lines.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Union

U64 = (1 << 64) - 1


# --- overlap -----------------------------------------------------------------------

def register_overlaps(regs) -> list[tuple[str, str]]:
    """Every pair of registers sharing at least one byte, as sorted name pairs."""
    out = []
    for i, a in enumerate(regs):
        a_bytes = set(range(a.offset, a.offset + a.width // 8))
        for b in regs[i + 1:]:
            if a_bytes & set(range(b.offset, b.offset + b.width // 8)):
                out.append(tuple(sorted((a.name, b.name))))
    return sorted(out)


def field_overlaps(fields_by_reg) -> list[tuple[str, str]]:
    out = []
    for reg, fields in fields_by_reg.items():
        for i, a in enumerate(fields):
            a_bits = set(range(a.offset, a.offset + a.width))
            for b in fields[i + 1:]:
                if a_bits & set(range(b.offset, b.offset + b.width)):
                    x, y = sorted((a.name, b.name))
                    out.append((f"{reg}.{x}", f"{reg}.{y}"))
    return sorted(out)


# --- C constant expressions ----------------------------------------------------------

class DivByZero(Exception):
    pass


@dataclass
class Lit:
    value: int
    text: str


@dataclass
class Sym:
    name: str


@dataclass
class Neg:
    op: str  # "-" or "~"
    arg: "Node"
    cast: str = ""


@dataclass
class Bin:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Lit, Sym, Neg, Bin]

# C binding strength, tighter is larger
PREC = {"*": 6, "/": 6, "%": 6, "+": 5, "-": 5, "<<": 4, ">>": 4, "&": 3, "^": 2, "|": 1}
CASTS = ("(uint64_t)", "(unsigned long long)", "(uint64_t )")


def ref_eval(node: Node, env: dict[str, int]) -> int:
    if isinstance(node, Lit):
        return node.value & U64
    if isinstance(node, Sym):
        return env[node.name] & U64
    if isinstance(node, Neg):
        v = ref_eval(node.arg, env)
        return (U64 + 1 - v) & U64 if node.op == "-" else U64 - v
    a, b = ref_eval(node.left, env), ref_eval(node.right, env)
    op = node.op
    if op in "/%" and b == 0:
        raise DivByZero
    if op == "<<":
        return 0 if b >= 64 else (a << b) & U64
    if op == ">>":
        return 0 if b >= 64 else a >> b
    return {
        "+": lambda: (a + b) & U64,
        "-": lambda: (a - b) & U64,
        "*": lambda: (a * b) & U64,
        "/": lambda: a // b,
        "%": lambda: a % b,
        "&": lambda: a & b,
        "|": lambda: a | b,
        "^": lambda: a ^ b,
    }[op]()


def render(node: Node, minimal: bool = True) -> str:
    if isinstance(node, Lit):
        return node.text
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Neg):
        inner = render(node.arg, minimal)
        if not isinstance(node.arg, (Lit, Sym)):
            inner = f"({inner})"
        return f"{node.cast}{node.op}{inner}"
    left, right = render(node.left, minimal), render(node.right, minimal)
    p = PREC[node.op]
    if not minimal or (isinstance(node.left, Bin) and PREC[node.left.op] < p):
        left = f"({left})"
    if not minimal or (isinstance(node.right, Bin) and PREC[node.right.op] <= p):
        right = f"({right})"
    return f"{left} {node.op} {right}"


def literal(rng: random.Random) -> Lit:
    v = rng.choice([rng.randrange(0, 16), rng.randrange(0, 1 << 16), rng.randrange(0, 1 << 32),
                    rng.randrange(0, 1 << 64), rng.choice([0, 1, 63, 64, 65])])
    style = rng.randrange(4)
    if style == 0:
        text = str(v)
    elif style == 1:
        text = hex(v)
    elif style == 2:
        text = f"0x{v:X}UL"
    else:
        text = f"{v}u" if v else "0"
    return Lit(v, text)


def random_expr(rng: random.Random, depth: int, names: list[str]) -> Node:
    if depth == 0 or rng.random() < 0.2:
        if names and rng.random() < 0.35:
            return Sym(rng.choice(names))
        return literal(rng)
    r = rng.random()
    if r < 0.12:
        return Neg(rng.choice("-~"), random_expr(rng, depth - 1, names),
                   rng.choice(CASTS) if rng.random() < 0.2 else "")
    op = rng.choice(list(PREC))
    right = random_expr(rng, depth - 1, names)
    if op in ("<<", ">>") and rng.random() < 0.8:
        n = rng.randrange(0, 70)
        right = Lit(n, str(n))
    return Bin(op, random_expr(rng, depth - 1, names), right)


def depth_of(node: Node) -> int:
    if isinstance(node, (Lit, Sym)):
        return 0
    if isinstance(node, Neg):
        return 1 + depth_of(node.arg)
    return 1 + max(depth_of(node.left), depth_of(node.right))


# --- runtime references ---------------------------------------------------------------

def dma_copy(ram: bytes, base: int, src: int, dst: int, nbytes: int) -> bytes:
    out = bytearray(ram)
    chunk = bytes(ram[src - base:src - base + nbytes])
    out[dst - base:dst - base + nbytes] = chunk
    return bytes(out)


def timer_reference(period: int, ticks: int, width: int = 32) -> tuple[list[int], int]:
    """Tick indices (1-based) at which the period flag is raised, and the final tick value."""
    tick, raised = 0, []
    for t in range(1, ticks + 1):
        tick = (tick + 1) % (1 << width)
        if tick == period:
            raised.append(t)
            tick = 0
    return raised, tick


def line_level(flags: list[tuple[bool, bool]]) -> int:
    """OR over events of (happen AND active)."""
    level = 0
    for happen, active in flags:
        level |= int(happen and active)
    return level


def field_value(reg_value: int, offset: int, width: int) -> int:
    return (reg_value >> offset) % (1 << width)
