"""Turning symbolic LLM answers into integers using driver headers.

A header scan collects object-like macros, enumerators and integer ``const``
globals; values are computed by a small C constant-expression evaluator with
unsigned 64-bit wraparound.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Union

log = logging.getLogger(__name__)

BITS = 64
MASK = (1 << BITS) - 1
MAX_DEPTH = 64


class ResolutionError(ValueError):
    """A string could not be turned into an integer.  ``trace`` lists each attempt."""

    def __init__(self, text: str, trace: list[str]):
        self.text = text
        self.trace = trace
        super().__init__(f"cannot resolve {text!r}: " + "; ".join(trace))


class ExprError(ValueError):
    pass


class MacroCycleError(ValueError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("cyclic definition: " + " -> ".join(cycle))


class UnknownSymbol(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown identifier {name}")


# --- lexing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>(?:0[xX][0-9a-fA-F]+|0[bB][01]+|[0-9]+)[uUlL]*)\b
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op><<|>>|[-+*/%&|^~()])
    """,
    re.VERBOSE,
)

_INT_LIT_RE = re.compile(r"^(0[xX][0-9a-fA-F]+|0[bB][01]+|[0-9]+)([uUlL]*)$")
_SUFFIXES = {"", "u", "l", "ul", "lu", "ll", "ull", "llu"}
_TYPE_WORDS = {
    "unsigned", "signed", "int", "long", "short", "char", "const", "volatile", "struct",
    "uint", "u8", "u16", "u32", "u64", "s8", "s16", "s32", "s64",
}


def _is_type_word(name: str) -> bool:
    return name in _TYPE_WORDS or name.endswith("_t") or name.endswith("_TypeDef")


def parse_int_literal(text: str) -> int:
    m = _INT_LIT_RE.match(text)
    if not m or m.group(2).lower() not in _SUFFIXES:
        raise ExprError(f"bad integer literal {text!r}")
    digits = m.group(1)
    if digits[:2] in ("0x", "0X"):
        return int(digits, 16)
    if digits[:2] in ("0b", "0B"):
        return int(digits[2:], 2)
    if len(digits) > 1 and digits[0] == "0":
        if any(c in "89" for c in digits):
            raise ExprError(f"bad octal literal {text!r}")
        return int(digits, 8)
    return int(digits)


@dataclass(frozen=True)
class Tok:
    kind: str  # int | name | op
    text: str


def tokenize(text: str) -> list[Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ExprError(f"unexpected character {text[pos]!r} at {pos}")
        pos = m.end()
        if m.lastgroup != "ws":
            toks.append(Tok(m.lastgroup, m.group()))
    return _strip_casts(toks)


def _strip_casts(toks: list[Tok]) -> list[Tok]:
    """Drop ``(type)`` and ``(type *)`` casts; they do not change the integer."""
    out: list[Tok] = []
    i = 0
    while i < len(toks):
        if toks[i].text == "(":
            j = i + 1
            words = 0
            while j < len(toks) and toks[j].kind == "name" and _is_type_word(toks[j].text):
                words += 1
                j += 1
            while j < len(toks) and toks[j].text == "*" and words:
                j += 1
            nxt = toks[j + 1] if j + 1 < len(toks) else None
            if (words and j < len(toks) and toks[j].text == ")" and nxt is not None
                    and (nxt.kind in ("int", "name") or nxt.text in ("(", "~", "-", "+"))):
                i = j + 1
                continue
        out.append(toks[i])
        i += 1
    return out


# --- expression tree ----------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Name, Unary, Binary]

# C precedence, loosest first
_BINARY_LEVELS = [("|",), ("^",), ("&",), ("<<", ">>"), ("+", "-"), ("*", "/", "%")]


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> Optional[Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> Tok:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of expression")
        self.i += 1
        return tok

    def binary(self, level: int) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        node = self.binary(level + 1)
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in _BINARY_LEVELS[level]:
            self.take()
            node = Binary(tok.text, node, self.binary(level + 1))
        return node

    def unary(self) -> Expr:
        tok = self.take()
        if tok.kind == "op" and tok.text in ("-", "~", "+"):
            operand = self.unary()
            return operand if tok.text == "+" else Unary(tok.text, operand)
        if tok.text == "(":
            node = self.binary(0)
            if self.take().text != ")":
                raise ExprError("missing ')'")
            return node
        if tok.kind == "int":
            return Num(parse_int_literal(tok.text) & MASK)
        if tok.kind == "name":
            if (nxt := self.peek()) is not None and nxt.text == "(":
                raise ExprError(f"function call {tok.text}() not allowed")
            return Name(tok.text)
        raise ExprError(f"unexpected token {tok.text!r}")


def parse_expr(text: str) -> Expr:
    toks = tokenize(text)
    if not toks:
        raise ExprError("empty expression")
    p = _Parser(toks)
    node = p.binary(0)
    if p.peek() is not None:
        raise ExprError(f"trailing token {p.peek().text!r}")
    return node


def evaluate(node: Expr, lookup: Callable[[str], int]) -> int:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        return lookup(node.id) & MASK
    if isinstance(node, Unary):
        v = evaluate(node.operand, lookup)
        return (-v) & MASK if node.op == "-" else v ^ MASK
    a = evaluate(node.left, lookup)
    b = evaluate(node.right, lookup)
    op = node.op
    if op in ("/", "%") and b == 0:
        raise ExprError("division by zero")
    if op == "+":
        return (a + b) & MASK
    if op == "-":
        return (a - b) & MASK
    if op == "*":
        return (a * b) & MASK
    if op == "/":
        return a // b
    if op == "%":
        return a % b
    if op == "<<":
        return (a << b) & MASK if b < BITS else 0
    if op == ">>":
        return a >> b if b < BITS else 0
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    return a ^ b


def names_in(node: Expr) -> set[str]:
    if isinstance(node, Name):
        return {node.id}
    if isinstance(node, Unary):
        return names_in(node.operand)
    if isinstance(node, Binary):
        return names_in(node.left) | names_in(node.right)
    return set()


# --- symbol table ---------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    name: str
    value: int
    origin: str  # macro | enumerator | global-constant
    location: str


@dataclass
class SymbolTable:
    symbols: dict[str, Symbol] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __contains__(self, name: str) -> bool:
        return name in self.symbols

    def __getitem__(self, name: str) -> int:
        return self.symbols[name].value

    def get(self, name: str, default: Optional[int] = None) -> Optional[int]:
        sym = self.symbols.get(name)
        return default if sym is None else sym.value

    def values(self) -> dict[str, int]:
        return {k: s.value for k, s in self.symbols.items()}

    @classmethod
    def from_values(cls, values: dict[str, int]) -> "SymbolTable":
        return cls({k: Symbol(k, v & MASK, "global-constant", "<literal>") for k, v in values.items()})


@dataclass
class _Def:
    name: str
    body: str
    origin: str
    location: str
    expr: Optional[Expr] = None


_COMMENT_RE = re.compile(r'//[^\n]*|/\*.*?\*/|"(?:\\.|[^"\\])*"|\'(?:\\.|[^\'\\])*\'', re.S)
_DEFINE_RE = re.compile(r"^\s*#\s*define\s+([A-Za-z_]\w*)(\()?(.*)$")
_ENUM_RE = re.compile(r"\benum\b\s*(?:[A-Za-z_]\w*\s*)?\{(.*?)\}", re.S)
_INT_TYPE = r"(?:unsigned|signed|int|long|short|char|u?int(?:8|16|32|64)_t|uint|[us](?:8|16|32|64)|size_t)"
_CONST_RE = re.compile(
    rf"(?:^|(?<=[;}}\n]))\s*(?:static\s+|extern\s+)?"
    rf"(?P<pre>const\s+)?(?:volatile\s+)?(?P<type>(?:{_INT_TYPE}\s+)+)(?P<post>const\s+)?"
    rf"(?P<name>[A-Za-z_]\w*)\s*=\s*(?P<expr>[^;{{}}]+);"
)


def _strip_comments(text: str) -> str:
    def repl(m):
        s = m.group()
        if s.startswith(("/", )):
            # keep line numbers stable
            return "\n" * s.count("\n") if s.startswith("/*") else ""
        return s
    return _COMMENT_RE.sub(repl, text)


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _top_level(text: str) -> str:
    """Blank out everything inside braces, keeping offsets."""
    out = []
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
            out.append(" ")
        elif ch == "}":
            depth = max(0, depth - 1)
            out.append(";")
        else:
            out.append(ch if depth == 0 or ch == "\n" else " ")
    return "".join(out)


def _split_top(body: str) -> list[tuple[str, int]]:
    """Split on commas outside parentheses; yields (item, offset)."""
    items, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            items.append((body[start:i], start))
            start = i + 1
    items.append((body[start:], start))
    return items


def _collect(sources: Iterable[Union[str, tuple[str, str]]], warn: Callable[[str], None]) -> dict[str, _Def]:
    defs: dict[str, _Def] = {}

    def add(d: _Def):
        if d.name in defs:
            warn(f"{d.location}: {d.name} redefined (previous at {defs[d.name].location})")
        defs[d.name] = d

    for n, src in enumerate(sources):
        fname, text = src if isinstance(src, tuple) else (f"<source {n}>", src)
        text = _strip_comments(text.replace("\\\r\n", " ").replace("\\\n", " "))
        code_lines = []
        for lineno, line in enumerate(text.split("\n"), 1):
            m = _DEFINE_RE.match(line)
            if m:
                name, paren, body = m.group(1), m.group(2), m.group(3).strip()
                if paren:
                    warn(f"{fname}:{lineno}: function-like macro {name} skipped")
                elif body:
                    add(_Def(name, body, "macro", f"{fname}:{lineno}"))
                code_lines.append("")
            elif line.lstrip().startswith("#"):
                code_lines.append("")
            else:
                code_lines.append(line)
        code = "\n".join(code_lines)

        for m in _ENUM_RE.finditer(code):
            prev: Optional[str] = None
            for item, off in _split_top(m.group(1)):
                item = item.strip()
                if not item:
                    continue
                loc = f"{fname}:{_line_of(code, m.start(1) + off)}"
                name, _, expr = item.partition("=")
                name = name.strip()
                if not re.fullmatch(r"[A-Za-z_]\w*", name):
                    warn(f"{loc}: cannot parse enumerator {item!r}")
                    prev = None
                    continue
                if expr.strip():
                    body = expr.strip()
                elif prev is None:
                    body = "0"
                else:
                    body = f"({prev}) + 1"
                add(_Def(name, body, "enumerator", loc))
                prev = name

        top = _top_level(code)
        for m in _CONST_RE.finditer(top):
            if not (m.group("pre") or m.group("post")):
                continue
            add(_Def(m.group("name"), m.group("expr").strip(), "global-constant",
                     f"{fname}:{_line_of(top, m.start('name'))}"))
    return defs


def build_symbol_table(sources: Iterable[Union[str, tuple[str, str]]]) -> SymbolTable:
    """Scan header/source texts (plain strings or ``(filename, text)`` pairs)."""
    table = SymbolTable()

    def warn(msg: str):
        table.warnings.append(msg)
        log.info(msg)

    defs = _collect(sources, warn)
    for d in defs.values():
        try:
            d.expr = parse_expr(d.body)
        except ExprError as exc:
            warn(f"{d.location}: {d.name} is not a constant expression ({exc}); omitted")

    memo: dict[str, Optional[int]] = {}
    stack: list[str] = []

    def value_of(name: str) -> int:
        if name in memo:
            if memo[name] is None:
                raise UnknownSymbol(name)
            return memo[name]
        if name in stack:
            raise MacroCycleError(stack[stack.index(name):] + [name])
        d = defs.get(name)
        if d is None or d.expr is None:
            raise UnknownSymbol(name)
        if len(stack) >= MAX_DEPTH:
            raise ExprError(f"expansion deeper than {MAX_DEPTH}")
        stack.append(name)
        try:
            v = evaluate(d.expr, value_of)
        except MacroCycleError:
            raise
        except ExprError:
            memo[name] = None
            raise
        finally:
            stack.pop()
        memo[name] = v
        return v

    for name in sorted(defs):
        d = defs[name]
        if d.expr is None:
            continue
        try:
            table.symbols[name] = Symbol(name, value_of(name), d.origin, d.location)
        except MacroCycleError:
            raise
        except ExprError as exc:
            warn(f"{d.location}: {name} unresolvable ({exc}); omitted")
    return table


# --- resolution -----------------------------------------------------------------

_IDENT_RE = re.compile(r"^[A-Za-z_]\w*$")


def resolve_value(text: Any, table: SymbolTable) -> int:
    """Resolve a raw answer: integer literal, then symbol name, then expression."""
    if isinstance(text, bool):
        raise ResolutionError(str(text), ["boolean is not an integer"])
    if isinstance(text, int):
        if 0 <= text <= MASK:
            return text
        raise ResolutionError(str(text), [f"integer {text} outside unsigned 64-bit range"])
    if not isinstance(text, str):
        raise ResolutionError(repr(text), [f"unsupported type {type(text).__name__}"])
    s = text.strip()
    trace = []
    try:
        v = parse_int_literal(s)
        if v > MASK:
            raise ExprError(f"literal {s} exceeds 64 bits")
        return v
    except ExprError as exc:
        trace.append(f"direct: {exc}")
    if _IDENT_RE.match(s):
        if s in table:
            return table[s]
        trace.append(f"lookup: no symbol {s}")
    else:
        trace.append("lookup: not an identifier")
    try:
        return evaluate(parse_expr(s), lambda n: table[n] if n in table else _raise(UnknownSymbol(n)))
    except ExprError as exc:
        trace.append(f"expression: {exc}")
    raise ResolutionError(text, trace)


def _raise(exc: Exception):
    raise exc


INT_KEYS = {"offset", "width", "value", "base", "irq_line", "pos", "irq"}


class DocumentResolutionError(ValueError):
    """One or more value slots failed; ``failures`` maps slot path -> error."""

    def __init__(self, failures: list[tuple[str, ResolutionError]]):
        self.failures = failures
        super().__init__(f"{len(failures)} slot(s) unresolved: " + ", ".join(p for p, _ in failures))


def resolve_document(raw: Any, table: SymbolTable) -> Any:
    """Return a copy of ``raw`` with every integer slot resolved, or fail atomically."""
    failures: list[tuple[str, ResolutionError]] = []

    def res(v, path):
        if v is None:
            return None
        try:
            return resolve_value(v, table)
        except ResolutionError as exc:
            failures.append((path, exc))
            return v

    def walk(node, path):
        if isinstance(node, dict):
            out = type(node)() if type(node) is not dict else {}
            if hasattr(node, "duplicates"):
                out.duplicates = node.duplicates
            for k, v in node.items():
                sub = f"{path}.{k}" if path else k
                if k in INT_KEYS and not isinstance(v, (dict, list)):
                    out[k] = res(v, sub)
                elif k == "irqs" and isinstance(v, list):
                    out[k] = [res(x, f"{sub}[{i}]") for i, x in enumerate(v)]
                elif k == "map" and isinstance(v, dict):
                    out[k] = {str(res(mk, f"{sub}[{mk}]")): res(mv, f"{sub}[{mk}]") for mk, mv in v.items()}
                else:
                    out[k] = walk(v, sub)
            return out
        if isinstance(node, list):
            return [walk(x, f"{path}[{i}]") for i, x in enumerate(node)]
        return node

    resolved = walk(raw, "")
    if failures:
        raise DocumentResolutionError(failures)
    return resolved


def resolve_instance(raw: Any, table: SymbolTable, strict: bool = True, registry=None):
    """Resolve a symbolic document into a ModelInstance (has ``category``) or DeviceInstance."""
    from .docformat import device_from_dict, model_from_dict

    resolved = resolve_document(raw, table)
    if isinstance(resolved, dict) and "category" in resolved:
        return model_from_dict(resolved, strict=strict, registry=registry)
    return device_from_dict(resolved, strict=strict, registry=registry)
