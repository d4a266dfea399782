"""Distribution and static scheduling of a flat algorithm graph.

`adequate` runs earliest-finish-time list scheduling: among all ready
(block repetition, operator) pairs it repeatedly commits the one with the
smallest finish time, breaking ties by constrained-first, block name,
repetition, operator name.  Data crossing operators travels as a
send/receive pair on the first (by name) medium shared by the two
operators; there is no multi-hop routing.  The pair shares one id and one
time span on the medium lane: it is a single occupation seen from both
sides.  On a broadcast medium a later consumer attaches an extra receive
to the existing send instead of paying for a second transfer.

Periods must be harmonic (every period divides the largest one); the
largest period is the hyperperiod and a block with period p is scheduled
hyperperiod/p times, repetition k released at k*p and due at (k+1)*p.

Delay blocks hold state across repetitions.  Their input dependency does
not order anything inside one repetition; it becomes one inter-repetition
synchro edge (producer at the last repetition, delay at the first of the
next).  When producer and delay sit on different operators the value still
has to move, so a transfer is appended after everything else and the inter
edge starts from it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .model import (
    AlgorithmGraph,
    ArchitectureGraph,
    Block,
    BlockKind,
    DepStrength,
    Direction,
    Finding,
    Operator,
    ToolError,
)


class AdequationError(ToolError):
    """Scheduling failure: UNROUTABLE, NO_DURATION, PERIOD_OVERFLOW,
    NONHARMONIC or CANCELLED."""


class EntryKind(Enum):
    COMPUTE = "compute"
    SEND = "send"
    RECEIVE = "receive"
    WAIT = "wait"
    TIMER_RESERVE = "timer_reserve"


_KIND_RANK = {k: i for i, k in enumerate(EntryKind)}


@dataclass(frozen=True)
class Payload:
    dtype: str
    width: int
    producer: str
    consumer: str


@dataclass(frozen=True)
class ScheduleEntry:
    id: str
    lane: str
    kind: EntryKind
    block: str = None
    payload: Payload = None
    start_stu: int = 0
    duration_stu: int = 1

    def __post_init__(self):
        if self.start_stu < 0:
            raise ValueError("entry start must be non-negative")
        if self.duration_stu < 1:
            raise ValueError("entry duration must be positive")

    @property
    def end_stu(self) -> int:
        return self.start_stu + self.duration_stu


@dataclass(frozen=True)
class SynchroEdge:
    from_id: str
    to_id: str
    scope: str = "intra"

    def __post_init__(self):
        if self.scope not in ("intra", "inter"):
            raise ValueError("synchro scope is 'intra' or 'inter'")


@dataclass(frozen=True)
class ScheduleTable:
    lanes: tuple
    hyperperiod_stu: int
    entries: tuple = ()
    synchros: tuple = ()
    placement: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hyperperiod_stu < 1:
            raise ValueError("hyperperiod must be positive")

    def entries_on(self, lane: str) -> list:
        return [e for e in self.entries if e.lane == lane]

    def makespan(self) -> int:
        return max((e.end_stu for e in self.entries), default=0)


# ---------------------------------------------------------------------------
# serialization: stable-key JSON understood by the renderer, the code
# generator, the executive simulator and golden-file tests

def dump_table(table: ScheduleTable) -> str:
    doc = {
        "lanes": list(table.lanes),
        "hyperperiod_stu": table.hyperperiod_stu,
        "entries": [
            {
                "id": e.id,
                "lane": e.lane,
                "kind": e.kind.value,
                "block": e.block,
                "payload": None if e.payload is None else {
                    "dtype": e.payload.dtype,
                    "width": e.payload.width,
                    "producer": e.payload.producer,
                    "consumer": e.payload.consumer,
                },
                "start_stu": e.start_stu,
                "duration_stu": e.duration_stu,
            }
            for e in table.entries
        ],
        "synchros": [
            {"from": s.from_id, "to": s.to_id, "scope": s.scope}
            for s in table.synchros
        ],
        "placement": dict(sorted(table.placement.items())),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_table(text: str) -> ScheduleTable:
    doc = json.loads(text)
    entries = tuple(
        ScheduleEntry(
            id=e["id"],
            lane=e["lane"],
            kind=EntryKind(e["kind"]),
            block=e["block"],
            payload=None if e["payload"] is None else Payload(**e["payload"]),
            start_stu=e["start_stu"],
            duration_stu=e["duration_stu"],
        )
        for e in doc["entries"]
    )
    synchros = tuple(
        SynchroEdge(s["from"], s["to"], s["scope"]) for s in doc["synchros"]
    )
    return ScheduleTable(tuple(doc["lanes"]), doc["hyperperiod_stu"],
                         entries, synchros, dict(doc["placement"]))


# ---------------------------------------------------------------------------
# task graph: one task per (block, repetition)

@dataclass(frozen=True)
class _Task:
    block: str
    rep: int


@dataclass
class _Problem:
    flat: AlgorithmGraph
    arch: ArchitectureGraph
    hyper: int               # None while no block carries a period
    periods: dict            # block -> effective period or None
    reps: dict               # block -> repetition count
    tasks: list
    preds: dict              # task -> tuple of (pred task, dep)
    inter_feeds: dict        # delay block -> (producer block, from_port, to_port)


def _effective_period(g: AlgorithmGraph, b: Block):
    return b.period_stu if b.period_stu is not None else g.period_stu


def _rep_map(j: int, consumer_period, producer_period, producer_reps: int, hyper) -> int:
    pc = consumer_period if consumer_period is not None else (hyper or 1)
    pp = producer_period if producer_period is not None else (hyper or 1)
    return min((j * pc) // pp, producer_reps - 1)


def build_problem(flat: AlgorithmGraph, arch: ArchitectureGraph) -> _Problem:
    for b in flat.blocks:
        if b.kind is BlockKind.SUPER:
            raise ValueError(f"graph is not flat: super block {b.name}")
    periods = {b.name: _effective_period(flat, b) for b in flat.blocks}
    stated = sorted({p for p in periods.values() if p is not None})
    hyper = None
    if stated:
        hyper = stated[-1]
        bad = [p for p in stated if hyper % p != 0]
        if bad:
            raise AdequationError(
                "NONHARMONIC",
                f"period {bad[0]} does not divide the hyperperiod {hyper}")
    reps = {name: (hyper // p if p is not None else 1)
            for name, p in periods.items()}
    blocks = {b.name: b for b in flat.blocks}
    tasks = [_Task(b.name, k) for b in flat.blocks for k in range(reps[b.name])]
    preds = {t: [] for t in tasks}
    inter_feeds = {}
    for d in flat.deps:
        if d.from_block not in blocks or d.to_block not in blocks:
            raise ValueError(f"dangling dependency {d.from_block} -> {d.to_block}")
        consumer = blocks[d.to_block]
        carried = (d.strength is DepStrength.DATA
                   and consumer.kind is BlockKind.DELAY)
        if carried:
            inter_feeds[d.to_block] = (d.from_block, d.from_port, d.to_port)
        for j in range(reps[d.to_block]):
            k = _rep_map(j, periods[d.to_block], periods[d.from_block],
                         reps[d.from_block], hyper)
            if carried:
                k -= 1          # delay latches the previous repetition's value
                if k < 0:
                    continue    # crosses the table boundary: inter synchro only
            preds[_Task(d.to_block, j)].append((_Task(d.from_block, k), d))
    for t in tasks:
        preds[t] = tuple(sorted(
            preds[t],
            key=lambda pr: (pr[0].block, pr[0].rep, pr[1].from_port or "",
                            pr[1].strength.value)))
    return _Problem(flat, arch, hyper, periods, reps, tasks, preds, inter_feeds)


# ---------------------------------------------------------------------------
# scheduler state and the one cost routine both adequate and candidate_cost use

def _compute_id(block: str, rep: int, reps: int) -> str:
    return f"c:{block}" if reps == 1 else f"c:{block}#{rep}"


def entry_repetition(entry_id: str) -> int:
    """Repetition index encoded in a compute entry id (absent means 0)."""
    _, _, suffix = entry_id.partition("#")
    return int(suffix) if suffix else 0


class _State:
    def __init__(self, problem: _Problem):
        self.problem = problem
        self.entries = []
        self.synchros = []
        self.placement = {}
        self.op_free = {op.name: 0 for op in problem.arch.operators}
        self.medium_free = {m.name: 0 for m in problem.arch.media}
        self.finish = {}         # entry id -> end STU
        self.compute_entry = {}  # task -> entry id
        self.delivered = {}      # (block, rep, port, dest op) -> (xfer id, end)
        self.sent = {}           # (block, rep, port, medium) -> (xfer id, end)
        self.transfers = 0

    @classmethod
    def from_table(cls, table: ScheduleTable, problem: _Problem) -> "_State":
        # a reloaded table does not store which producer port fed a transfer,
        # so reuse keys carry port None; _plan_task falls back to that form
        st = cls(problem)
        st.placement = dict(table.placement)
        rep_of_xfer = {}
        for s in table.synchros:
            if s.to_id.startswith("x") and s.from_id.startswith("c:"):
                rep_of_xfer[s.to_id] = entry_repetition(s.from_id)
        for e in table.entries:
            if e.kind is EntryKind.COMPUTE:
                task = _Task(e.block, entry_repetition(e.id))
                st.compute_entry[task] = e.id
                st.finish[e.id] = e.end_stu
                st.op_free[e.lane] = max(st.op_free.get(e.lane, 0), e.end_stu)
            elif e.kind is EntryKind.SEND:
                st.finish[e.id] = e.end_stu
                st.medium_free[e.lane] = max(st.medium_free.get(e.lane, 0), e.end_stu)
                rep = rep_of_xfer.get(e.id, 0)
                st.sent[(e.payload.producer, rep, None, e.lane)] = (e.id, e.end_stu)
            elif e.kind is EntryKind.RECEIVE:
                dest = st.placement.get(e.block)
                rep = rep_of_xfer.get(e.id, 0)
                st.delivered[(e.payload.producer, rep, None, dest)] = (e.id, e.end_stu)
        st.transfers = len({e.id for e in table.entries
                            if e.kind is EntryKind.SEND})
        return st


@dataclass
class _Xfer:
    action: str              # "pair" or "attach"
    medium: str
    xfer_id: str             # set for attach, assigned at commit for pair
    start: int
    duration: int
    payload: Payload
    producer_entry: str
    producer_key: tuple      # (block, rep, port)


@dataclass
class _Plan:
    task: _Task
    op: str
    start: int
    finish: int
    duration: int
    xfers: list
    cross_prec: list         # predecessor entry ids realized only by synchro
    reused: list             # already-delivered transfer ids this task reads


def _transfer_duration(medium, dtype: str, width: int):
    per_elem = medium.transfer_duration.get(dtype)
    return None if per_elem is None else per_elem * width


def _plan_task(state: _State, task: _Task, op: Operator):
    """Earliest-finish plan of task on op, or None when op is excluded.

    Raises AdequationError(UNROUTABLE / NO_DURATION) when a predecessor's
    value cannot reach op at all.
    """
    pb = state.problem
    block = pb.flat.block(task.block)
    if block.constraint is not None and block.constraint != op.name:
        return None
    locked = state.placement.get(task.block)
    if locked is not None and locked != op.name:
        return None
    duration = block.duration_on(op)
    if duration is None:
        return None
    period = pb.periods[task.block]
    start = max(state.op_free[op.name], task.rep * period if period else 0)
    mcur = dict(state.medium_free)
    xfers = []
    cross_prec = []
    reused = []
    attached = set()
    for pred, dep in pb.preds[task]:
        pe_id = state.compute_entry[pred]
        pe_end = state.finish[pe_id]
        pred_op = state.placement[pred.block]
        if dep.strength is DepStrength.PRECEDENCE:
            ready = pe_end
            if pred_op != op.name:
                cross_prec.append(pe_id)
        elif pred_op == op.name:
            ready = pe_end
        else:
            key = (pred.block, pred.rep, dep.from_port, op.name)
            loose = (pred.block, pred.rep, None, op.name)
            if key in state.delivered or loose in state.delivered:
                xid, ready = state.delivered.get(key, state.delivered.get(loose))
                reused.append(xid)
            elif key in attached:
                ready = next(x.start + x.duration for x in xfers
                             if x.producer_key + (op.name,) == key)
            else:
                media = pb.arch.shared_media(pred_op, op.name)
                if not media:
                    raise AdequationError(
                        "UNROUTABLE",
                        f"no medium between {pred_op} and {op.name} "
                        f"for {pred.block} -> {task.block}")
                medium = min(media, key=lambda m: m.name)
                port = pb.flat.block(pred.block).port(dep.from_port, Direction.OUTPUT)
                if port is None:
                    raise AdequationError(
                        "UNROUTABLE",
                        f"{pred.block} has no output port {dep.from_port}")
                payload = Payload(port.dtype, port.width, pred.block, task.block)
                sent_key = (pred.block, pred.rep, dep.from_port, medium.name)
                sent_loose = (pred.block, pred.rep, None, medium.name)
                if medium.broadcast and (sent_key in state.sent
                                         or sent_loose in state.sent):
                    xfer_id, ready = state.sent.get(
                        sent_key, state.sent.get(sent_loose))
                    xfers.append(_Xfer("attach", medium.name, xfer_id,
                                       ready, 0, payload, pe_id,
                                       (pred.block, pred.rep, dep.from_port)))
                else:
                    dx = _transfer_duration(medium, port.dtype, port.width)
                    if dx is None:
                        raise AdequationError(
                            "NO_DURATION",
                            f"medium {medium.name} has no duration for {port.dtype}")
                    xs = max(pe_end, mcur[medium.name])
                    mcur[medium.name] = xs + dx
                    ready = xs + dx
                    xfers.append(_Xfer("pair", medium.name, "", xs, dx,
                                       payload, pe_id,
                                       (pred.block, pred.rep, dep.from_port)))
                attached.add(key)
        start = max(start, ready)
    return _Plan(task, op.name, start, start + duration, duration, xfers,
                 cross_prec, reused)


def _commit(state: _State, plan: _Plan):
    pb = state.problem
    task = plan.task
    cid = _compute_id(task.block, task.rep, pb.reps[task.block])
    for x in plan.xfers:
        if x.action == "pair":
            xid = f"x{state.transfers}"
            state.transfers += 1
            end = x.start + x.duration
            state.entries.append(ScheduleEntry(
                xid, x.medium, EntryKind.SEND, x.payload.producer,
                x.payload, x.start, x.duration))
            state.entries.append(ScheduleEntry(
                xid, x.medium, EntryKind.RECEIVE, task.block,
                x.payload, x.start, x.duration))
            state.synchros.append(SynchroEdge(x.producer_entry, xid))
            state.synchros.append(SynchroEdge(xid, cid))
            state.medium_free[x.medium] = end
            state.finish[xid] = end
            state.sent[x.producer_key + (x.medium,)] = (xid, end)
            state.delivered[x.producer_key + (plan.op,)] = (xid, end)
        else:
            original = next(e for e in state.entries
                            if e.id == x.xfer_id and e.kind is EntryKind.SEND)
            state.entries.append(ScheduleEntry(
                x.xfer_id, x.medium, EntryKind.RECEIVE, task.block,
                x.payload, original.start_stu, original.duration_stu))
            state.synchros.append(SynchroEdge(x.xfer_id, cid))
            state.delivered[x.producer_key + (plan.op,)] = (x.xfer_id, x.start)
    for pe_id in plan.cross_prec:
        state.synchros.append(SynchroEdge(pe_id, cid))
    for xid in dict.fromkeys(plan.reused):
        state.synchros.append(SynchroEdge(xid, cid))
    state.entries.append(ScheduleEntry(
        cid, plan.op, EntryKind.COMPUTE, task.block, None,
        plan.start, plan.duration))
    state.op_free[plan.op] = plan.finish
    state.finish[cid] = plan.finish
    state.compute_entry[task] = cid
    state.placement[task.block] = plan.op


def candidate_cost(partial: ScheduleTable, block: Block, op: Operator,
                   flat: AlgorithmGraph, arch: ArchitectureGraph) -> float:
    """Earliest finish of block's next repetition on op given the partial
    table; math.inf when op cannot run the block.  All predecessors must
    already appear in the table."""
    problem = build_problem(flat, arch)
    state = _State.from_table(partial, problem)
    done = sum(1 for t in state.compute_entry if t.block == block.name)
    plan = _plan_task(state, _Task(block.name, done), arch.operator(op.name))
    return math.inf if plan is None else plan.finish


# ---------------------------------------------------------------------------
# the greedy itself

def _deadline(problem: _Problem, task: _Task):
    p = problem.periods[task.block]
    if p is not None:
        return (task.rep + 1) * p
    return problem.hyper if problem.hyper is not None else math.inf


def _append_delay_carries(state: _State, problem: _Problem):
    # one inter-repetition synchro per delay; a cross-operator carry also
    # needs a real transfer, placed after the regular traffic
    for name in sorted(problem.inter_feeds):
        producer, from_port, _ = problem.inter_feeds[name]
        last = _Task(producer, problem.reps[producer] - 1)
        first = _Task(name, 0)
        src_id = state.compute_entry[last]
        dst_id = state.compute_entry[first]
        if state.placement[producer] == state.placement[name]:
            state.synchros.append(SynchroEdge(src_id, dst_id, "inter"))
            continue
        media = problem.arch.shared_media(state.placement[producer],
                                          state.placement[name])
        if not media:
            raise AdequationError(
                "UNROUTABLE",
                f"no medium carries the state of delay {name} from "
                f"{state.placement[producer]} to {state.placement[name]}")
        medium = min(media, key=lambda m: m.name)
        port = problem.flat.block(producer).port(from_port, Direction.OUTPUT)
        dx = _transfer_duration(medium, port.dtype, port.width)
        if dx is None:
            raise AdequationError(
                "NO_DURATION",
                f"medium {medium.name} has no duration for {port.dtype}")
        xs = max(state.finish[src_id], state.medium_free[medium.name])
        if problem.hyper is not None and xs + dx > problem.hyper:
            raise AdequationError(
                "PERIOD_OVERFLOW",
                f"carry of delay {name} cannot fit inside the hyperperiod "
                f"after the regular traffic")
        xid = f"x{state.transfers}"
        state.transfers += 1
        payload = Payload(port.dtype, port.width, producer, name)
        state.entries.append(ScheduleEntry(
            xid, medium.name, EntryKind.SEND, producer, payload, xs, dx))
        state.entries.append(ScheduleEntry(
            xid, medium.name, EntryKind.RECEIVE, name, payload, xs, dx))
        state.synchros.append(SynchroEdge(src_id, xid))
        state.synchros.append(SynchroEdge(xid, dst_id, "inter"))
        state.medium_free[medium.name] = xs + dx
        state.finish[xid] = xs + dx


def _lane_order(arch: ArchitectureGraph) -> tuple:
    return tuple([op.name for op in arch.operators] + [m.name for m in arch.media])


def _finish_table(state: _State, problem: _Problem) -> ScheduleTable:
    lanes = _lane_order(problem.arch)
    index = {lane: i for i, lane in enumerate(lanes)}
    entries = sorted(state.entries,
                     key=lambda e: (e.start_stu, index[e.lane],
                                    _KIND_RANK[e.kind], e.id))
    hyper = problem.hyper
    if hyper is None:
        hyper = max((e.end_stu for e in entries), default=1) or 1
    synchros = sorted(state.synchros,
                      key=lambda s: (s.scope, s.from_id, s.to_id))
    return ScheduleTable(lanes, hyper, tuple(entries), tuple(synchros),
                         dict(state.placement))


def adequate(flat: AlgorithmGraph, arch: ArchitectureGraph,
             cancel=None) -> ScheduleTable:
    """Distribute and schedule the flat graph; deterministic for equal input.

    `cancel`, when given, is polled between placement steps; returning true
    aborts with AdequationError(CANCELLED).
    """
    problem = build_problem(flat, arch)
    state = _State(problem)
    remaining = set(problem.tasks)
    placed = set()
    while remaining:
        if cancel is not None and cancel():
            raise AdequationError("CANCELLED", "adequation interrupted")
        ready = sorted(
            (t for t in remaining
             if all(p in placed for p, _ in problem.preds[t])),
            key=lambda t: (t.block, t.rep))
        if not ready:
            raise ValueError("graph has a dependency cycle; validate it first")
        best = None
        for task in ready:
            block = problem.flat.block(task.block)
            feasible = []
            route_failure = None
            saw_overflow = False
            for op in problem.arch.operators:
                try:
                    plan = _plan_task(state, task, op)
                except AdequationError as exc:
                    route_failure = exc
                    continue
                if plan is None:
                    continue
                if plan.finish > _deadline(problem, task):
                    saw_overflow = True
                    continue
                feasible.append(plan)
            if not feasible:
                if saw_overflow:
                    raise AdequationError(
                        "PERIOD_OVERFLOW",
                        f"{task.block} repetition {task.rep} cannot finish "
                        f"within its period")
                if route_failure is not None:
                    raise route_failure
                raise AdequationError(
                    "NO_DURATION",
                    f"{task.block} has no duration on any operator")
            for plan in feasible:
                key = (plan.finish,
                       0 if block.constraint is not None else 1,
                       task.block, task.rep, plan.op)
                if best is None or key < best[0]:
                    best = (key, plan)
        _, plan = best
        _commit(state, plan)
        placed.add(plan.task)
        remaining.discard(plan.task)
    _append_delay_carries(state, problem)
    return _finish_table(state, problem)


# ---------------------------------------------------------------------------
# waits and timer reserves

def _roots(flat: AlgorithmGraph) -> set:
    fed = {d.to_block for d in flat.deps}
    return {b.name for b in flat.blocks if b.name not in fed}


def _timer_controllers(flat: AlgorithmGraph) -> list:
    """Blocks that pace a lane: portless, periodic, with precedence fan-out."""
    out = []
    for b in flat.blocks:
        if b.ports:
            continue
        if _effective_period(flat, b) is None:
            continue
        if any(d.from_block == b.name and d.strength is DepStrength.PRECEDENCE
               for d in flat.deps):
            out.append(b.name)
    return out


def _gated_chain(flat: AlgorithmGraph, timer: str, placement: dict) -> list:
    """Blocks the timer releases, walked only across its own operator."""
    lane = placement.get(timer)
    blocks = {b.name: b for b in flat.blocks}
    succ = {}
    for d in flat.deps:
        if d.strength is DepStrength.DATA and blocks[d.to_block].kind is BlockKind.DELAY:
            continue
        succ.setdefault(d.from_block, []).append(d.to_block)
    chain = []
    seen = {timer}
    stack = [timer]
    while stack:
        cur = stack.pop()
        for nxt in succ.get(cur, ()):
            if nxt in seen or placement.get(nxt) != lane:
                continue
            seen.add(nxt)
            chain.append(nxt)
            stack.append(nxt)
    return chain


def insert_waits(table: ScheduleTable, flat: AlgorithmGraph) -> ScheduleTable:
    """Fill each period-driven operator lane up to the hyperperiod.

    A lane is period-driven when a root block (no incoming dependency) with
    an effective period sits on it.  Timer-paced lanes also get a
    timer_reserve entry spanning the released chain: the slot stays booked
    in repetitions where the timer does not fire.
    """
    hyper = table.hyperperiod_stu
    roots = _roots(flat)
    periods = {b.name: _effective_period(flat, b) for b in flat.blocks}
    extra = []
    for lane in table.lanes:
        lane_entries = [e for e in table.entries if e.lane == lane
                        and e.kind is EntryKind.COMPUTE]
        if not lane_entries:
            continue
        driven = any(e.block in roots and periods.get(e.block) is not None
                     for e in lane_entries)
        if not driven:
            continue
        busy_end = max(e.end_stu for e in table.entries if e.lane == lane)
        if busy_end > hyper:
            raise AdequationError(
                "PERIOD_OVERFLOW",
                f"lane {lane} is busy {busy_end} STU against a period of {hyper}")
        if busy_end < hyper:
            extra.append(ScheduleEntry(f"w:{lane}", lane, EntryKind.WAIT,
                                       None, None, busy_end, hyper - busy_end))
    by_block = {e.block: e for e in table.entries if e.kind is EntryKind.COMPUTE}
    reserved = {e.id for e in table.entries if e.kind is EntryKind.TIMER_RESERVE}
    for timer in _timer_controllers(flat):
        timer_entry = by_block.get(timer)
        if timer_entry is None or f"r:{timer}" in reserved:
            continue
        chain = [by_block[b] for b in _gated_chain(flat, timer, table.placement)
                 if b in by_block]
        wcet = sum(e.duration_stu for e in chain)
        if wcet == 0:
            continue
        extra.append(ScheduleEntry(f"r:{timer}", timer_entry.lane,
                                   EntryKind.TIMER_RESERVE, timer, None,
                                   min(e.start_stu for e in chain), wcet))
    if not extra:
        return table
    index = {lane: i for i, lane in enumerate(table.lanes)}
    entries = sorted(list(table.entries) + extra,
                     key=lambda e: (e.start_stu, index[e.lane],
                                    _KIND_RANK[e.kind], e.id))
    return ScheduleTable(table.lanes, hyper, tuple(entries),
                         table.synchros, dict(table.placement))


# ---------------------------------------------------------------------------
# verification

def _iter_pairs(entries):
    spans = {}
    for e in entries:
        spans.setdefault(e.id, []).append(e)
    return spans


def verify_schedule(table: ScheduleTable, flat: AlgorithmGraph,
                    arch: ArchitectureGraph) -> list:
    """Findings: OVERLAP, PAIRING, ORDER, MISSING, DEADLOCK, CONSTRAINT,
    PERIOD.  An empty list means the table realizes the graph."""
    findings = []
    blocks = {b.name: b for b in flat.blocks}
    periods = {b.name: _effective_period(flat, b) for b in flat.blocks}
    op_names = {op.name for op in arch.operators}

    # lane exclusivity over distinct ids; reserves overlap by design
    for lane in table.lanes:
        spans = []
        for eid, group in _iter_pairs(
                e for e in table.entries
                if e.lane == lane and e.kind is not EntryKind.TIMER_RESERVE).items():
            start = min(e.start_stu for e in group)
            end = max(e.end_stu for e in group)
            spans.append((start, end, eid))
        spans.sort()
        for (s1, e1, id1), (s2, e2, id2) in zip(spans, spans[1:]):
            if s2 < e1:
                findings.append(Finding(
                    "OVERLAP", lane, f"{id1} and {id2} overlap at {s2}"))

    # send/receive pairing: one send, >= 1 receive, identical span and lane
    for eid, group in _iter_pairs(
            e for e in table.entries
            if e.kind in (EntryKind.SEND, EntryKind.RECEIVE)).items():
        sends = [e for e in group if e.kind is EntryKind.SEND]
        recvs = [e for e in group if e.kind is EntryKind.RECEIVE]
        if len(sends) != 1 or not recvs:
            findings.append(Finding(
                "PAIRING", eid,
                f"{len(sends)} send(s) and {len(recvs)} receive(s)"))
            continue
        send = sends[0]
        if send.lane in op_names:
            findings.append(Finding("PAIRING", eid, "transfer on an operator lane"))
        for r in recvs:
            if (r.lane, r.start_stu, r.duration_stu) != (
                    send.lane, send.start_stu, send.duration_stu):
                findings.append(Finding(
                    "PAIRING", eid, "receive does not mirror its send"))

    # every data dependency realized by order or by a transfer
    compute = {}
    for e in table.entries:
        if e.kind is EntryKind.COMPUTE:
            compute[(e.block, entry_repetition(e.id))] = e
    recvs_for = {}
    for e in table.entries:
        if e.kind is EntryKind.RECEIVE:
            recvs_for.setdefault(e.payload.producer, []).append(e)
    # transfer id -> compute entry that produced its value, via synchros
    produced_by = {}
    for s in table.synchros:
        if s.from_id.startswith("c:") and not s.to_id.startswith("c:"):
            produced_by.setdefault(s.to_id, s.from_id)
    try:
        problem = build_problem(flat, arch)
    except (AdequationError, ValueError) as exc:
        return [Finding("PERIOD", flat.name, str(exc))]
    for b in flat.blocks:
        if b.name not in table.placement:
            findings.append(Finding("MISSING", b.name, "block never placed"))
            continue
        for k in range(problem.reps[b.name]):
            if (b.name, k) not in compute:
                findings.append(Finding(
                    "MISSING", b.name, f"repetition {k} missing"))
    for task in problem.tasks:
        ce = compute.get((task.block, task.rep))
        if ce is None:
            continue
        for pred, dep in problem.preds[task]:
            pe = compute.get((pred.block, pred.rep))
            if pe is None:
                continue
            if dep.strength is DepStrength.PRECEDENCE or \
                    table.placement.get(pred.block) == table.placement.get(task.block):
                if pe.end_stu > ce.start_stu:
                    findings.append(Finding(
                        "ORDER", f"{pred.block}->{task.block}",
                        f"consumer starts at {ce.start_stu} before producer "
                        f"ends at {pe.end_stu}"))
                continue
            # any receive of this producer repetition landing on the
            # consumer's operator before the consumer starts will do;
            # reuse means the receiving block may differ from the consumer
            dest_op = table.placement.get(task.block)
            candidates = [r for r in recvs_for.get(pred.block, [])
                          if table.placement.get(r.block) == dest_op
                          and produced_by.get(r.id) == pe.id
                          and r.start_stu >= pe.end_stu
                          and r.end_stu <= ce.start_stu]
            if not candidates:
                findings.append(Finding(
                    "ORDER", f"{pred.block}->{task.block}",
                    "no transfer between producer end and consumer start"))

    # synchro graph plus lane orders must be acyclic inside one repetition
    ids = {e.id for e in table.entries}
    edges = set()
    for s in table.synchros:
        if s.scope == "intra" and s.from_id in ids and s.to_id in ids:
            edges.add((s.from_id, s.to_id))
    for lane in table.lanes:
        ordered = []
        for eid, group in _iter_pairs(
                e for e in table.entries if e.lane == lane).items():
            ordered.append((min(e.start_stu for e in group), eid))
        ordered.sort()
        for (_, a), (_, b) in zip(ordered, ordered[1:]):
            edges.add((a, b))
    if _has_cycle(ids, edges):
        findings.append(Finding("DEADLOCK", flat.name,
                                "synchronization graph has a cycle"))

    for name, op in sorted(table.placement.items()):
        b = blocks.get(name)
        if b is not None and b.constraint is not None and b.constraint != op:
            findings.append(Finding(
                "CONSTRAINT", name, f"placed on {op}, constrained to {b.constraint}"))

    for e in table.entries:
        if e.end_stu > table.hyperperiod_stu:
            findings.append(Finding(
                "PERIOD", e.id,
                f"ends at {e.end_stu}, hyperperiod {table.hyperperiod_stu}"))
        if e.kind is EntryKind.COMPUTE:
            p = periods.get(e.block)
            if p is not None:
                due = (entry_repetition(e.id) + 1) * p
                if e.end_stu > due:
                    findings.append(Finding(
                        "PERIOD", e.id, f"ends at {e.end_stu}, due {due}"))
    return findings


def _has_cycle(nodes, edges) -> bool:
    succ = {}
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
        indeg[b] += 1
    queue = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in succ.get(n, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return seen != len(nodes)
