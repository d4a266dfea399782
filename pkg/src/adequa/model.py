"""Core domain types: dataflow algorithm graphs and multiprocessor architectures.

An algorithm is a directed graph of typed blocks exchanging data over
port-to-port dependencies; an architecture is a set of operators (processing
elements) whose gates attach to communication media.  Everything here is
plain value data: validation, flattening and time conversion are pure
functions, so models can be shared freely between threads or processes.

Time is counted in STU (schedule time units).  One STU is a configurable
number of processor clock cycles, so `time_convert` can move values between
seconds, cycles and STU exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Union


class ToolError(Exception):
    """Base for coded errors raised across the toolchain.

    Every instance carries a stable ``code`` string (e.g. "UNROUTABLE") so
    callers can branch on the failure class without parsing messages.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message


class DomainError(ToolError):
    """An argument lies outside an operation's stated domain."""

    def __init__(self, message: str):
        super().__init__("DOMAIN", message)


class FlattenError(ToolError):
    pass


@dataclass(frozen=True)
class Finding:
    """One validation finding: a stable code, the offending subject, detail text."""

    code: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.code} {self.subject}: {self.detail}" if self.detail else f"{self.code} {self.subject}"


# A validation report is simply a list of findings; empty means valid.
ValidationReport = list


class BlockKind(Enum):
    SENSOR = "sensor"
    ACTUATOR = "actuator"
    FUNCTION = "function"
    CONSTANT = "constant"
    DELAY = "delay"
    SUPER = "super"


class Direction(Enum):
    INPUT = "input"
    OUTPUT = "output"


class DepStrength(Enum):
    DATA = "data"
    PRECEDENCE = "precedence"


class MediumKind(Enum):
    SAM_POINT_TO_POINT = "sam_ptp"
    SAM_MULTIPOINT = "sam_multi"
    RAM = "ram"


@dataclass(frozen=True)
class DataType:
    """A named scalar type with its size in bytes on the target."""

    name: str
    size_bytes: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("DataType name must be non-empty")
        if self.size_bytes < 1:
            raise ValueError(f"DataType {self.name}: size_bytes must be >= 1")


#: Types every model may use without declaring them.  Sizes follow the usual
#: C widths on an 8-bit AVR target (plain int is 16 bit there).
BUILTIN_DTYPES = {
    "bool": 1,
    "uint8": 1,
    "int8": 1,
    "uint16": 2,
    "int16": 2,
    "uint32": 4,
    "int32": 4,
    "int": 2,
    "float": 4,
    "double": 8,
}


@dataclass(frozen=True)
class Port:
    name: str
    direction: Direction
    dtype: str            # DataType name, resolved against the owning graph
    width: int = 1
    rank: int = 1         # declaration order, 1-based

    def __post_init__(self):
        if not self.name:
            raise ValueError("Port name must be non-empty")
        if self.width < 1:
            raise ValueError(f"port {self.name}: width must be >= 1")
        if self.rank < 1:
            raise ValueError(f"port {self.name}: rank must be >= 1")


@dataclass(frozen=True)
class Block:
    """One algorithm vertex.

    ``durations`` maps an operator type (or a specific operator name, which
    shadows the type entry) to the block's WCET on it, in STU.  ``constraint``
    pins the block to one operator.  Super blocks carry their sub-graph in
    ``body``; the body's boundary ports are this block's ports.
    """

    name: str
    kind: BlockKind
    ports: tuple = ()
    period_stu: Optional[int] = None
    durations: Mapping = field(default_factory=dict)
    constraint: Optional[str] = None
    parameters: Mapping = field(default_factory=dict)
    body: Optional["AlgorithmGraph"] = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("Block name must be non-empty")
        if self.period_stu is not None and self.period_stu < 1:
            raise ValueError(f"block {self.name}: period must be positive")
        for key, d in self.durations.items():
            if d < 1:
                raise ValueError(f"block {self.name}: duration for {key} must be positive")
        if (self.body is not None) != (self.kind is BlockKind.SUPER):
            raise ValueError(f"block {self.name}: body present iff kind=super")
        seen = set()
        for p in self.ports:
            key = (p.name, p.direction)
            if key in seen:
                raise ValueError(f"block {self.name}: duplicate port {p.name} ({p.direction.value})")
            seen.add(key)
        # kind/port shape rules (sensor inputs, delay arity, ...) are
        # reported by validate_algorithm, not enforced here: a parsed model
        # must stay representable so its faults can be listed as findings

    def inputs(self) -> list:
        return [p for p in self.ports if p.direction is Direction.INPUT]

    def outputs(self) -> list:
        return [p for p in self.ports if p.direction is Direction.OUTPUT]

    def port(self, name: str, direction: Direction):
        for p in self.ports:
            if p.name == name and p.direction is direction:
                return p
        return None

    def duration_on(self, op: "Operator") -> Optional[int]:
        # an entry for the operator instance shadows its type entry
        if op.name in self.durations:
            return self.durations[op.name]
        return self.durations.get(op.op_type)


# Reserved endpoint name binding a super-block body dep to a boundary port.
SELF_NAME = "self"


@dataclass(frozen=True)
class Dependency:
    """A data edge (port to port) or a precedence edge (block to block)."""

    from_block: str
    to_block: str
    from_port: Optional[str] = None
    to_port: Optional[str] = None
    strength: DepStrength = DepStrength.DATA

    def __post_init__(self):
        if self.strength is DepStrength.DATA:
            if self.from_port is None or self.to_port is None:
                raise ValueError("data dependencies name both ports")
        else:
            if self.from_port is not None or self.to_port is not None:
                raise ValueError("precedence dependencies carry no ports")


@dataclass
class AlgorithmGraph:
    """A dataflow algorithm: blocks, dependencies and the types they use.

    ``ports`` is the graph's boundary (used when the graph is a super-block
    body or a reusable library definition); ``period_stu`` is a default
    period inherited by blocks that do not set their own.
    """

    name: str = "algorithm"
    blocks: list = field(default_factory=list)
    deps: list = field(default_factory=list)
    dtypes: list = field(default_factory=list)
    ports: list = field(default_factory=list)
    period_stu: Optional[int] = None

    def block(self, name: str) -> Optional[Block]:
        for b in self.blocks:
            if b.name == name:
                return b
        return None

    def dtype(self, name: str) -> Optional[DataType]:
        for t in self.dtypes:
            if t.name == name:
                return t
        return None

    def effective_period(self, block: Block) -> Optional[int]:
        return block.period_stu if block.period_stu is not None else self.period_stu

    def boundary_port(self, name: str, direction: Direction):
        for p in self.ports:
            if p.name == name and p.direction is direction:
                return p
        return None


@dataclass(frozen=True)
class Operator:
    """A processing element: executes its scheduled blocks sequentially."""

    name: str
    op_type: str
    gates: tuple = ()
    clock_hz: float = 1.0
    cycles_per_stu: int = 1

    def __post_init__(self):
        if self.clock_hz <= 0:
            raise ValueError(f"operator {self.name}: clock_hz must be positive")
        if self.cycles_per_stu < 1:
            raise ValueError(f"operator {self.name}: cycles_per_stu must be >= 1")
        if len(set(self.gates)) != len(self.gates):
            raise ValueError(f"operator {self.name}: gate names must be unique")


@dataclass(frozen=True)
class Medium:
    """A communication channel attaching operator gates.

    ``transfer_duration`` maps a DataType name to the STU cost of moving one
    unit of width across the medium.
    """

    name: str
    kind: MediumKind
    attach: tuple = ()                      # ((operator, gate), ...)
    broadcast: bool = False
    transfer_duration: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for key, d in self.transfer_duration.items():
            if d < 1:
                raise ValueError(f"medium {self.name}: transfer duration for {key} must be positive")

    def operators(self) -> list:
        return [op for op, _gate in self.attach]


@dataclass
class ArchitectureGraph:
    operators: list = field(default_factory=list)
    media: list = field(default_factory=list)

    def operator(self, name: str) -> Optional[Operator]:
        for op in self.operators:
            if op.name == name:
                return op
        return None

    def medium(self, name: str) -> Optional[Medium]:
        for m in self.media:
            if m.name == name:
                return m
        return None

    def shared_media(self, op_a: str, op_b: str) -> list:
        """Media attaching both operators, in declaration order."""
        out = []
        for m in self.media:
            ops = set(m.operators())
            if op_a in ops and op_b in ops:
                out.append(m)
        return out


# ---------------------------------------------------------------------------
# validation

def _dep_edges(g: AlgorithmGraph, *, skip_loop_carried: bool) -> list:
    """Block-level edges of the dependency graph.

    Data deps feeding a delay block are loop-carried (the delay emits the
    previous repetition's value), so the acyclicity rule skips them.
    """
    edges = []
    for d in g.deps:
        if skip_loop_carried and d.strength is DepStrength.DATA:
            consumer = g.block(d.to_block)
            if consumer is not None and consumer.kind is BlockKind.DELAY:
                continue
        edges.append((d.from_block, d.to_block))
    return edges


def _cyclic_groups(nodes: Iterable, edges: Iterable) -> list:
    """Strongly connected components with more than one node, plus self-loops.

    Iterative Tarjan; returns each cyclic group as a sorted list of names.
    """
    adj = {n: [] for n in nodes}
    for a, b in edges:
        if a in adj and b in adj:
            adj[a].append(b)
    index = {}
    low = {}
    on_stack = set()
    stack = []
    counter = [0]
    groups = []

    for root in adj:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                if len(comp) > 1:
                    groups.append(sorted(comp))
                elif (comp[0], comp[0]) in edges:
                    groups.append(comp)
    groups.sort()
    return groups


def validate_algorithm(g: AlgorithmGraph) -> ValidationReport:
    """Check the structural rules of an algorithm graph.

    Returns one finding per violation; an empty report means valid.  Codes:
    DUPLICATE_NAME, UNKNOWN_TYPE, DANGLING, TYPE_MISMATCH, WIDTH_MISMATCH,
    MULTI_FEED, SENSOR_INPUT, ACTUATOR_OUTPUT, CYCLE.
    """
    findings = []
    known_types = {t.name for t in g.dtypes} | set(BUILTIN_DTYPES)

    seen = set()
    for b in g.blocks:
        if b.name in seen:
            findings.append(Finding("DUPLICATE_NAME", b.name, "block declared twice"))
        seen.add(b.name)
        for p in b.ports:
            if p.dtype not in known_types:
                findings.append(Finding("UNKNOWN_TYPE", f"{b.name}.{p.name}", f"type {p.dtype} not declared"))
        if b.kind in (BlockKind.SENSOR, BlockKind.CONSTANT) and b.inputs():
            findings.append(Finding("SENSOR_INPUT", b.name, f"{b.kind.value} block declares data inputs"))
        if b.kind is BlockKind.ACTUATOR and b.outputs():
            findings.append(Finding("ACTUATOR_OUTPUT", b.name, "actuator block declares data outputs"))
        if b.kind is BlockKind.DELAY:
            ins, outs = b.inputs(), b.outputs()
            if (len(ins) != 1 or len(outs) != 1
                    or (ins and outs and (ins[0].dtype, ins[0].width) != (outs[0].dtype, outs[0].width))):
                findings.append(Finding("DELAY_SHAPE", b.name,
                                        "delay blocks carry exactly one input and one output of one dtype/width"))

    def resolve(g_: AlgorithmGraph, dep: Dependency):
        """Resolve dep endpoints to (dtype, width) pairs, or record findings."""
        ends = []
        for block_name, port_name, direction in (
            (dep.from_block, dep.from_port, Direction.OUTPUT),
            (dep.to_block, dep.to_port, Direction.INPUT),
        ):
            if block_name == SELF_NAME:
                # boundary binding inside a super body: inputs feed, outputs drain
                want = Direction.INPUT if direction is Direction.OUTPUT else Direction.OUTPUT
                port = g_.boundary_port(port_name, want)
                if port is None:
                    findings.append(Finding("DANGLING", f"{SELF_NAME}.{port_name}", "no such boundary port"))
                    return None
                ends.append((port.dtype, port.width))
                continue
            blk = g_.block(block_name)
            if blk is None:
                findings.append(Finding("DANGLING", block_name, "dependency names unknown block"))
                return None
            if dep.strength is DepStrength.PRECEDENCE:
                ends.append(None)
                continue
            port = blk.port(port_name, direction)
            if port is None:
                findings.append(Finding("DANGLING", f"{block_name}.{port_name}", f"no {direction.value} port"))
                return None
            ends.append((port.dtype, port.width))
        return ends

    fed = {}
    for dep in g.deps:
        ends = resolve(g, dep)
        if ends is None or dep.strength is DepStrength.PRECEDENCE:
            continue
        (ft, fw), (tt, tw) = ends
        if ft != tt:
            findings.append(
                Finding("TYPE_MISMATCH", f"{dep.from_block}.{dep.from_port}->{dep.to_block}.{dep.to_port}",
                        f"{ft} vs {tt}"))
        if fw != tw:
            findings.append(
                Finding("WIDTH_MISMATCH", f"{dep.from_block}.{dep.from_port}->{dep.to_block}.{dep.to_port}",
                        f"{fw} vs {tw}"))
        sink = (dep.to_block, dep.to_port)
        if dep.to_block != SELF_NAME:
            fed.setdefault(sink, 0)
            fed[sink] += 1

    for (blk, port), n in fed.items():
        if n > 1:
            findings.append(Finding("MULTI_FEED", f"{blk}.{port}", f"{n} data feeds into one input"))

    names = [b.name for b in g.blocks]
    edges = _dep_edges(g, skip_loop_carried=True)
    for group in _cyclic_groups(names, edges):
        findings.append(Finding("CYCLE", "/".join(group), "dependency cycle"))

    for b in g.blocks:
        if b.body is not None:
            for f in validate_algorithm(b.body):
                findings.append(Finding(f.code, f"{b.name}/{f.subject}", f.detail))

    return findings


def validate_architecture(a: ArchitectureGraph) -> ValidationReport:
    """Check operator/medium consistency.

    Codes: DUPLICATE_NAME, UNRESOLVED_GATE, ARITY, GATE_REUSE.
    """
    findings = []
    seen = set()
    for op in a.operators:
        if op.name in seen:
            findings.append(Finding("DUPLICATE_NAME", op.name, "operator declared twice"))
        seen.add(op.name)
    seen = set()
    gate_use = {}
    for m in a.media:
        if m.name in seen:
            findings.append(Finding("DUPLICATE_NAME", m.name, "medium declared twice"))
        seen.add(m.name)
        for op_name, gate in m.attach:
            op = a.operator(op_name)
            if op is None or gate not in op.gates:
                findings.append(Finding("UNRESOLVED_GATE", f"{m.name}:{op_name}.{gate}", "no such operator gate"))
                continue
            key = (op_name, gate)
            if key in gate_use:
                findings.append(Finding("GATE_REUSE", f"{op_name}.{gate}",
                                        f"attached to both {gate_use[key]} and {m.name}"))
            else:
                gate_use[key] = m.name
        if m.kind is MediumKind.SAM_POINT_TO_POINT and len(m.attach) != 2:
            findings.append(Finding("ARITY", m.name, f"point-to-point medium attaches {len(m.attach)} operators"))
    return findings


# ---------------------------------------------------------------------------
# flattening

def _prefixed_block(b: Block, prefix: str, period: Optional[int], constraint: Optional[str]) -> Block:
    return replace(
        b,
        name=f"{prefix}/{b.name}",
        period_stu=b.period_stu if b.period_stu is not None else period,
        constraint=b.constraint if b.constraint is not None else constraint,
    )


def flatten(g: AlgorithmGraph) -> AlgorithmGraph:
    """Replace every super block by its body, splicing boundary ports.

    Block names become path-qualified (``parent/child``); deps through a
    boundary port are reconnected end to end.  Raises FlattenError
    (FLATTEN_DANGLING) if a boundary port has no internal binding.
    """
    blocks = []
    deps = []
    dtypes = list(g.dtypes)

    supers = {b.name: b for b in g.blocks if b.kind is BlockKind.SUPER}
    if not supers:
        return AlgorithmGraph(g.name, list(g.blocks), list(g.deps), dtypes, list(g.ports), g.period_stu)

    # internal bindings per super: boundary port -> body endpoints
    in_bind = {}    # (super, port) -> [(block, port) consuming it]
    out_bind = {}   # (super, port) -> (block, port) producing it
    body_flat = {}
    for s in supers.values():
        body = flatten(s.body)
        body_flat[s.name] = body
        period = g.effective_period(s)
        for t in body.dtypes:
            if not any(existing.name == t.name for existing in dtypes):
                dtypes.append(t)
        for ib in body.blocks:
            blocks.append(_prefixed_block(ib, s.name, period, s.constraint))
        for d in body.deps:
            if d.from_block == SELF_NAME and d.to_block == SELF_NAME:
                in_bind.setdefault((s.name, d.from_port), []).append((SELF_NAME, d.to_port))
            elif d.from_block == SELF_NAME:
                in_bind.setdefault((s.name, d.from_port), []).append((f"{s.name}/{d.to_block}", d.to_port))
            elif d.to_block == SELF_NAME:
                out_bind[(s.name, d.to_port)] = (f"{s.name}/{d.from_block}", d.from_port)
            else:
                deps.append(replace(d, from_block=f"{s.name}/{d.from_block}", to_block=f"{s.name}/{d.to_block}"))
        for p in s.ports:
            key = (s.name, p.name)
            if p.direction is Direction.INPUT and key not in in_bind:
                raise FlattenError("FLATTEN_DANGLING", f"boundary input {s.name}.{p.name} consumed by nothing")
            if p.direction is Direction.OUTPUT and key not in out_bind:
                raise FlattenError("FLATTEN_DANGLING", f"boundary output {s.name}.{p.name} produced by nothing")

    for b in g.blocks:
        if b.kind is not BlockKind.SUPER:
            blocks.append(b)

    def body_roots(s_name: str) -> list:
        body = body_flat[s_name]
        fed = {d.to_block for d in body.deps if d.from_block != SELF_NAME}
        return [f"{s_name}/{b.name}" for b in body.blocks if b.name not in fed]

    def body_sinks(s_name: str) -> list:
        body = body_flat[s_name]
        feeding = {d.from_block for d in body.deps if d.to_block != SELF_NAME}
        return [f"{s_name}/{b.name}" for b in body.blocks if b.name not in feeding]

    for d in g.deps:
        from_super = d.from_block in supers
        to_super = d.to_block in supers
        if d.strength is DepStrength.PRECEDENCE:
            sources = body_sinks(d.from_block) if from_super else [d.from_block]
            targets = body_roots(d.to_block) if to_super else [d.to_block]
            for a in sources:
                for b in targets:
                    deps.append(Dependency(a, b, strength=DepStrength.PRECEDENCE))
            continue
        sources = [out_bind[(d.from_block, d.from_port)]] if from_super else [(d.from_block, d.from_port)]
        targets = in_bind.get((d.to_block, d.to_port), []) if to_super else [(d.to_block, d.to_port)]
        for (fb, fp) in sources:
            for (tb, tp) in targets:
                if tb == SELF_NAME:
                    # pass-through port of a nested super: splice one level up
                    deps.append(Dependency(fb, d.to_block, fp, tp))
                else:
                    deps.append(Dependency(fb, tb, fp, tp))

    flat = AlgorithmGraph(g.name, blocks, deps, dtypes, list(g.ports), g.period_stu)
    return flat


# ---------------------------------------------------------------------------
# time arithmetic

_TIME_UNITS = ("stu", "cycles", "seconds")


def time_convert(value: float, from_unit: str, to_unit: str, op: Operator) -> float:
    """Convert between seconds, clock cycles and STU for one operator."""
    if from_unit not in _TIME_UNITS or to_unit not in _TIME_UNITS:
        raise DomainError(f"unknown time unit {from_unit!r}/{to_unit!r}")
    if value < 0:
        raise DomainError("time values are non-negative")
    if from_unit == "cycles":
        cycles = value
    elif from_unit == "seconds":
        cycles = value * op.clock_hz
    else:
        cycles = value * op.cycles_per_stu
    if to_unit == "cycles":
        return cycles
    if to_unit == "seconds":
        return cycles / op.clock_hz
    return cycles / op.cycles_per_stu


def hyperperiod(periods) -> int:
    """Least common multiple of the given periods (STU)."""
    periods = list(periods)
    if not periods:
        raise DomainError("hyperperiod of an empty period set")
    if any(p <= 0 for p in periods):
        raise DomainError("periods must be positive")
    return math.lcm(*periods)
