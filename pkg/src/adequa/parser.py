"""Textual form of algorithm (.adm) and architecture (.arm) models.

The grammar is line-oriented and small:

    def algorithm <name> [period <int>] :
      dtype <name> <size_bytes>;
      ? <type>[<width>] <name> <rank>;          # boundary input port
      ! <type>[<width>] <name> <rank>;          # boundary output port
      <kind> <name> : <ports> [period <int>] [constraint <op>]
                              [duration <optype>=<stu>,...];
      super <name> [options] { ...nested items... }
      <blk>.<port> -> <blk>.<port>;             # data dependency
      <blk> ~> <blk>;                           # precedence dependency
    end

    operator <name> : type <optype> clock <hz> stu <cycles> gates <g,...>;
    medium <name> : kind <sam_ptp|sam_multi|ram> [broadcast]
                    attach <op>.<gate>,... duration <type>=<stu>,...;

Inside a super block's braces, deps may reference the boundary through the
reserved endpoint `self`.  Comments run from `#` to end of line.  Common
scalar types (uint8..int32, float, double, bool, int) need no declaration.

print_model emits the canonical form (blocks in declaration order, deps and
dtypes sorted); parse(print(g)) == g for canonical models.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import (
    AlgorithmGraph,
    ArchitectureGraph,
    Block,
    BlockKind,
    BUILTIN_DTYPES,
    DataType,
    Dependency,
    DepStrength,
    Direction,
    Medium,
    MediumKind,
    Operator,
    Port,
)

BLOCK_KIND_WORDS = {k.value: k for k in BlockKind if k is not BlockKind.SUPER}
MEDIUM_KIND_WORDS = {k.value: k for k in MediumKind}
OPTION_WORDS = {"period", "constraint", "duration", "condition"}


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError("source spans are 1-based")
        if self.length < 0:
            raise ValueError("span length is non-negative")


class ParseError(Exception):
    """Lexical or syntactic fault, located by a SourceSpan.

    ``code`` is one of UNEXPECTED_TOKEN, UNKNOWN_TYPE, DUPLICATE_NAME,
    BAD_NUMBER.
    """

    def __init__(self, span: SourceSpan, code: str, message: str):
        super().__init__(f"{span.line}:{span.column}: [{code}] {message}")
        self.span = span
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str       # ident | number | punct | eof
    text: str
    line: int
    column: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.column, max(len(self.text), 0))


_PUNCT2 = ("->", "~>", "=>")
_PUNCT1 = "?!:;,.[]{}="


def tokenize(src: str) -> list:
    """Split source text into tokens; raises ParseError on unknown bytes."""
    tokens = []
    line, col = 1, 1
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src[i:i + 2] in _PUNCT2:
            tokens.append(Token("punct", src[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if c in _PUNCT1:
            tokens.append(Token("punct", c, line, col))
            i += 1
            col += 1
            continue
        if c.isdigit():
            start = i
            start_col = col
            while i < n and src[i].isdigit():
                i += 1
            if i < n and src[i] == "." and i + 1 < n and src[i + 1].isdigit():
                i += 1
                while i < n and src[i].isdigit():
                    i += 1
            elif i < n and src[i] == ".":
                raise ParseError(SourceSpan(line, start_col, i - start + 1), "BAD_NUMBER",
                                 "digits must follow a decimal point")
            text = src[start:i]
            col += i - start
            tokens.append(Token("number", text, line, start_col))
            continue
        if c.isalpha() or c == "_":
            start = i
            start_col = col
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            col += i - start
            tokens.append(Token("ident", src[start:i], line, start_col))
            continue
        raise ParseError(SourceSpan(line, col, 1), "UNEXPECTED_TOKEN", f"stray character {c!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens


def _found(t: Token) -> str:
    return repr(t.text) if t.kind != "eof" else "end of input"


class _Cursor:
    """Token stream with the usual expect/accept helpers."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def accept(self, text: str):
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            raise ParseError(t.span, "UNEXPECTED_TOKEN", f"expected {text!r}, found {_found(t)}")
        return self.next()

    def ident(self, what: str = "name") -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(t.span, "UNEXPECTED_TOKEN", f"expected {what}, found {_found(t)}")
        return self.next()

    def integer(self, what: str, minimum: int = 1) -> int:
        t = self.peek()
        if t.kind != "number":
            raise ParseError(t.span, "UNEXPECTED_TOKEN", f"expected {what}, found {_found(t)}")
        if "." in t.text:
            raise ParseError(t.span, "BAD_NUMBER", f"{what} must be an integer")
        value = int(t.text)
        if value < minimum:
            raise ParseError(t.span, "BAD_NUMBER", f"{what} must be >= {minimum}")
        self.next()
        return value

    def number(self, what: str) -> float:
        t = self.peek()
        if t.kind != "number":
            raise ParseError(t.span, "UNEXPECTED_TOKEN", f"expected {what}, found {_found(t)}")
        self.next()
        return float(t.text)


# ---------------------------------------------------------------------------
# algorithm parsing

class _GraphScope:
    def __init__(self):
        self.blocks = []
        self.deps = []
        self.dtypes = {}        # name -> DataType, explicit or auto builtin
        self.ports = []
        self.block_names = set()


def _use_dtype(scope: _GraphScope, tok: Token) -> str:
    name = tok.text
    if name in scope.dtypes:
        return name
    if name in BUILTIN_DTYPES:
        scope.dtypes[name] = DataType(name, BUILTIN_DTYPES[name])
        return name
    raise ParseError(tok.span, "UNKNOWN_TYPE", f"type {name} is not declared")


def _parse_port(cur: _Cursor, scope: _GraphScope, rank_seen: dict) -> Port:
    marker = cur.next()     # ? or !
    direction = Direction.INPUT if marker.text == "?" else Direction.OUTPUT
    dtype = _use_dtype(scope, cur.ident("type name"))
    cur.expect("[")
    width = cur.integer("port width")
    cur.expect("]")
    name_tok = cur.ident("port name")
    rank = cur.integer("port rank")
    key = (name_tok.text, direction)
    if key in rank_seen:
        raise ParseError(name_tok.span, "DUPLICATE_NAME", f"port {name_tok.text} declared twice")
    rank_seen[key] = rank
    return Port(name_tok.text, direction, dtype, width, rank)


def _parse_block_options(cur: _Cursor):
    period = None
    constraint = None
    durations = {}
    parameters = {}
    while cur.peek().text in OPTION_WORDS:
        word = cur.next().text
        if word == "period":
            period = cur.integer("period")
        elif word == "constraint":
            constraint = cur.ident("operator name").text
        elif word == "condition":
            parameters["condition"] = cur.ident("condition name").text
        else:
            while True:
                key = cur.ident("operator type").text
                cur.expect("=")
                durations[key] = cur.integer("duration")
                if not cur.accept(","):
                    break
    return period, constraint, durations, parameters


def _parse_block_line(cur: _Cursor, scope: _GraphScope, kind: BlockKind):
    name_tok = cur.ident("block name")
    if name_tok.text in scope.block_names:
        raise ParseError(name_tok.span, "DUPLICATE_NAME", f"block {name_tok.text} declared twice")
    cur.expect(":")
    ports = []
    rank_seen = {}
    while cur.peek().text in ("?", "!"):
        ports.append(_parse_port(cur, scope, rank_seen))
        cur.accept(",")
    period, constraint, durations, parameters = _parse_block_options(cur)
    cur.expect(";")
    scope.block_names.add(name_tok.text)
    scope.blocks.append(Block(name_tok.text, kind, tuple(ports), period, durations, constraint, parameters))


def _parse_dep_line(cur: _Cursor, scope: _GraphScope):
    a = cur.ident("block name")
    if cur.accept("~>"):
        b = cur.ident("block name")
        cur.expect(";")
        scope.deps.append(Dependency(a.text, b.text, strength=DepStrength.PRECEDENCE))
        return
    cur.expect(".")
    ap = cur.ident("port name")
    cur.expect("->")
    b = cur.ident("block name")
    cur.expect(".")
    bp = cur.ident("port name")
    cur.expect(";")
    scope.deps.append(Dependency(a.text, b.text, ap.text, bp.text))


def _parse_items(cur: _Cursor, scope: _GraphScope, *, nested: bool):
    while True:
        t = cur.peek()
        if t.kind == "eof":
            if nested:
                raise ParseError(t.span, "UNEXPECTED_TOKEN", "missing '}' before end of input")
            return
        if nested and cur.at("}"):
            return
        if not nested and cur.at("end"):
            cur.next()
            extra = cur.peek()
            if extra.kind != "eof":
                raise ParseError(extra.span, "UNEXPECTED_TOKEN", "text after 'end'")
            return
        if cur.at("dtype"):
            cur.next()
            name_tok = cur.ident("type name")
            size = cur.integer("type size")
            cur.expect(";")
            if name_tok.text in scope.dtypes and name_tok.text not in BUILTIN_DTYPES:
                raise ParseError(name_tok.span, "DUPLICATE_NAME", f"type {name_tok.text} declared twice")
            scope.dtypes[name_tok.text] = DataType(name_tok.text, size)
            continue
        if t.text in ("?", "!"):
            rank_seen = {(p.name, p.direction): p.rank for p in scope.ports}
            scope.ports.append(_parse_port(cur, scope, rank_seen))
            cur.expect(";")
            continue
        if cur.at("super"):
            cur.next()
            name_tok = cur.ident("block name")
            if name_tok.text in scope.block_names:
                raise ParseError(name_tok.span, "DUPLICATE_NAME", f"block {name_tok.text} declared twice")
            period, constraint, durations, parameters = _parse_block_options(cur)
            cur.expect("{")
            inner = _GraphScope()
            inner.dtypes = dict(scope.dtypes)
            _parse_items(cur, inner, nested=True)
            cur.expect("}")
            body = _finish_graph(inner, name_tok.text, None)
            for dt in body.dtypes:
                scope.dtypes.setdefault(dt.name, dt)
            scope.block_names.add(name_tok.text)
            scope.blocks.append(Block(name_tok.text, BlockKind.SUPER, tuple(body.ports),
                                      period, durations, constraint, parameters, body))
            continue
        if t.text in BLOCK_KIND_WORDS:
            cur.next()
            _parse_block_line(cur, scope, BLOCK_KIND_WORDS[t.text])
            continue
        if t.kind == "ident":
            _parse_dep_line(cur, scope)
            continue
        raise ParseError(t.span, "UNEXPECTED_TOKEN", f"unexpected {t.text!r}")


def _finish_graph(scope: _GraphScope, name: str, period) -> AlgorithmGraph:
    dtypes = sorted(scope.dtypes.values(), key=lambda d: d.name)
    ports = sorted(scope.ports, key=lambda p: (p.direction is Direction.OUTPUT, p.rank, p.name))
    return AlgorithmGraph(name, scope.blocks, scope.deps, dtypes, ports, period)


def parse_algorithm(src: str) -> AlgorithmGraph:
    """Parse `.adm` text into an AlgorithmGraph.

    Syntax faults raise ParseError; semantic faults (dangling deps, type
    mismatches, ...) parse fine and surface through validate_algorithm.
    """
    cur = _Cursor(tokenize(src))
    cur.expect("def")
    cur.expect("algorithm")
    name = cur.ident("algorithm name").text
    period = cur.integer("period") if cur.accept("period") else None
    cur.expect(":")
    scope = _GraphScope()
    _parse_items(cur, scope, nested=False)
    return _finish_graph(scope, name, period)


# ---------------------------------------------------------------------------
# architecture parsing

def parse_architecture(src: str) -> ArchitectureGraph:
    """Parse `.arm` text into an ArchitectureGraph."""
    cur = _Cursor(tokenize(src))
    operators = []
    media = []
    op_names = set()
    medium_names = set()
    while not cur.at_kind("eof"):
        if cur.accept("operator"):
            name_tok = cur.ident("operator name")
            if name_tok.text in op_names:
                raise ParseError(name_tok.span, "DUPLICATE_NAME", f"operator {name_tok.text} declared twice")
            cur.expect(":")
            cur.expect("type")
            op_type = cur.ident("operator type").text
            cur.expect("clock")
            clock_tok = cur.peek()
            clock = cur.number("clock frequency")
            if clock <= 0:
                raise ParseError(clock_tok.span, "BAD_NUMBER", "clock must be positive")
            cur.expect("stu")
            cycles = cur.integer("cycles per stu")
            gates = []
            if cur.accept("gates"):
                while True:
                    gate_tok = cur.ident("gate name")
                    if gate_tok.text in gates:
                        raise ParseError(gate_tok.span, "DUPLICATE_NAME", f"gate {gate_tok.text} declared twice")
                    gates.append(gate_tok.text)
                    if not cur.accept(","):
                        break
            cur.expect(";")
            op_names.add(name_tok.text)
            operators.append(Operator(name_tok.text, op_type, tuple(gates), clock, cycles))
            continue
        if cur.accept("medium"):
            name_tok = cur.ident("medium name")
            if name_tok.text in medium_names:
                raise ParseError(name_tok.span, "DUPLICATE_NAME", f"medium {name_tok.text} declared twice")
            cur.expect(":")
            cur.expect("kind")
            kind_tok = cur.ident("medium kind")
            if kind_tok.text not in MEDIUM_KIND_WORDS:
                raise ParseError(kind_tok.span, "UNEXPECTED_TOKEN",
                                 f"medium kind is one of {', '.join(sorted(MEDIUM_KIND_WORDS))}")
            broadcast = cur.accept("broadcast") is not None
            attach = []
            if cur.accept("attach"):
                while True:
                    op_tok = cur.ident("operator name")
                    cur.expect(".")
                    gate_tok = cur.ident("gate name")
                    attach.append((op_tok.text, gate_tok.text))
                    if not cur.accept(","):
                        break
            durations = {}
            if cur.accept("duration"):
                while True:
                    key = cur.ident("type name").text
                    cur.expect("=")
                    durations[key] = cur.integer("transfer duration")
                    if not cur.accept(","):
                        break
            cur.expect(";")
            medium_names.add(name_tok.text)
            media.append(Medium(name_tok.text, MEDIUM_KIND_WORDS[kind_tok.text],
                                tuple(attach), broadcast, durations))
            continue
        t = cur.peek()
        raise ParseError(t.span, "UNEXPECTED_TOKEN", f"expected 'operator' or 'medium', found {t.text!r}")
    return ArchitectureGraph(operators, media)


# ---------------------------------------------------------------------------
# canonical printing

def _fmt_number(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(x)


def _fmt_port(p: Port) -> str:
    marker = "?" if p.direction is Direction.INPUT else "!"
    return f"{marker} {p.dtype}[{p.width}] {p.name} {p.rank}"


def _fmt_options(b: Block) -> str:
    parts = []
    if b.period_stu is not None:
        parts.append(f"period {b.period_stu}")
    if b.constraint is not None:
        parts.append(f"constraint {b.constraint}")
    if "condition" in b.parameters:
        parts.append(f"condition {b.parameters['condition']}")
    if b.durations:
        pairs = ",".join(f"{k}={v}" for k, v in sorted(b.durations.items()))
        parts.append(f"duration {pairs}")
    return (" " + " ".join(parts)) if parts else ""


def _dep_sort_key(d: Dependency):
    return (d.from_block, d.from_port or "", d.to_block, d.to_port or "", d.strength.value)


def _print_items(g: AlgorithmGraph, indent: str, lines: list):
    for dt in sorted(g.dtypes, key=lambda t: t.name):
        lines.append(f"{indent}dtype {dt.name} {dt.size_bytes};")
    for p in g.ports:
        lines.append(f"{indent}{_fmt_port(p)};")
    for b in g.blocks:
        if b.kind is BlockKind.SUPER:
            lines.append(f"{indent}super {b.name}{_fmt_options(b)} {{")
            _print_items(b.body, indent + "  ", lines)
            lines.append(f"{indent}}}")
        else:
            ports = ", ".join(_fmt_port(p) for p in b.ports)
            sep = " " if ports else ""
            lines.append(f"{indent}{b.kind.value} {b.name} :{sep and ' '}{ports}{_fmt_options(b)};")
    for d in sorted(g.deps, key=_dep_sort_key):
        if d.strength is DepStrength.PRECEDENCE:
            lines.append(f"{indent}{d.from_block} ~> {d.to_block};")
        else:
            lines.append(f"{indent}{d.from_block}.{d.from_port} -> {d.to_block}.{d.to_port};")


def print_model(g) -> str:
    """Canonical text for an AlgorithmGraph or ArchitectureGraph."""
    if isinstance(g, AlgorithmGraph):
        head = f"def algorithm {g.name}"
        if g.period_stu is not None:
            head += f" period {g.period_stu}"
        lines = [head + " :"]
        _print_items(g, "  ", lines)
        lines.append("end")
        return "\n".join(lines) + "\n"
    if isinstance(g, ArchitectureGraph):
        lines = []
        for op in g.operators:
            gates = f" gates {','.join(op.gates)}" if op.gates else ""
            lines.append(f"operator {op.name} : type {op.op_type} "
                         f"clock {_fmt_number(op.clock_hz)} stu {op.cycles_per_stu}{gates};")
        for m in g.media:
            parts = [f"medium {m.name} : kind {m.kind.value}"]
            if m.broadcast:
                parts.append("broadcast")
            if m.attach:
                parts.append("attach " + ",".join(f"{o}.{gate}" for o, gate in m.attach))
            if m.transfer_duration:
                parts.append("duration " + ",".join(f"{k}={v}" for k, v in sorted(m.transfer_duration.items())))
            lines.append(" ".join(parts) + ";")
        return "\n".join(lines) + "\n"
    raise TypeError(f"cannot print {type(g).__name__}")


def canonicalize(g: AlgorithmGraph) -> AlgorithmGraph:
    """Sort deps and dtypes the way the printer does (blocks keep order)."""
    blocks = [
        replace(b, body=canonicalize(b.body)) if b.kind is BlockKind.SUPER else b
        for b in g.blocks
    ]
    return AlgorithmGraph(
        g.name,
        blocks,
        sorted(g.deps, key=_dep_sort_key),
        sorted(g.dtypes, key=lambda t: t.name),
        list(g.ports),
        g.period_stu,
    )
