"""Discrete-event replay of a static schedule with sampled real durations.

The schedule models every block at its WCET; real tasks finish earlier.
Replaying the table with sampled durations shows the consequence: in
event_driven mode each operation starts as soon as its operator is free
and its synchronization predecessors are done, so a gap opens and the
next repetition slides forward, violating declared periods.  In
timer_blocking mode a timer-gated chain blocks until its exact activation
instant k*period, which absorbs the gap and restores the period at the
cost of idle time.

Durations are drawn per (block, activation) from a seeded uniform integer
on [best_case, wcet], so runs are reproducible and never exceed the
modeled slot.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import AlgorithmGraph, ToolError
from .schedule import (EntryKind, ScheduleTable, _effective_period,
                       _gated_chain, _timer_controllers, entry_repetition)

MODES = ("event_driven", "timer_blocking")


class ExecError(ToolError):
    """DEADLINE_MISS carries the partial timeline in .timeline."""

    def __init__(self, code, message, timeline=None):
        super().__init__(code, message)
        self.timeline = timeline


@dataclass(frozen=True)
class DurationModel:
    seed: int
    spans: dict          # block -> (best_case, wcet) in STU

    def __post_init__(self):
        for name, (best, wcet) in self.spans.items():
            if not 0 < best <= wcet:
                raise ValueError(f"{name}: need 0 < best_case <= wcet, got ({best}, {wcet})")

    @classmethod
    def from_table(cls, table: ScheduleTable, best_ratio: float = 1.0,
                   seed: int = 0) -> "DurationModel":
        """WCET per block from its modeled slot; best = ratio of that,
        at least one STU."""
        spans = {}
        for e in table.entries:
            if e.kind is EntryKind.COMPUTE:
                spans[e.block] = (max(1, int(e.duration_stu * best_ratio)),
                                  e.duration_stu)
        return cls(seed, spans)

    def sample(self, block: str, activation: int) -> int:
        best, wcet = self.spans[block]
        u = random.Random(f"{self.seed}:{block}:{activation}").random()
        return min(wcet, best + int(u * (wcet - best + 1)))


@dataclass(frozen=True)
class ExecEvent:
    block: str
    operator: str
    start_stu: int
    end_stu: int
    repetition: int


@dataclass(frozen=True)
class ExecTimeline:
    mode: str
    events: tuple
    hyperperiod_stu: int
    repetitions: int


def _block_reps(table: ScheduleTable):
    reps = {}
    for e in table.entries:
        if e.kind is EntryKind.COMPUTE:
            reps[e.block] = max(reps.get(e.block, 0), entry_repetition(e.id) + 1)
    return reps


def simulate_executive(table: ScheduleTable, dm: DurationModel, mode: str,
                       repetitions: int, flat: AlgorithmGraph = None) -> ExecTimeline:
    """Replay `repetitions` hyperperiods of a verified table.

    timer_blocking needs `flat` to find the timer controllers and their
    periods; without it the mode degrades to event_driven.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    compute = [e for e in table.entries if e.kind is EntryKind.COMPUTE]
    missing = sorted({e.block for e in compute} - set(dm.spans))
    if missing:
        raise ValueError(f"duration model misses blocks: {', '.join(missing)}")

    timers = {}
    if flat is not None and mode == "timer_blocking":
        blocks = {b.name: b for b in flat.blocks}
        for t in _timer_controllers(flat):
            timers[t] = _effective_period(flat, blocks[t])

    intra, inter = {}, {}
    for s in table.synchros:
        (intra if s.scope == "intra" else inter).setdefault(s.to_id, []).append(s.from_id)

    entry_by_id = {}
    for e in table.entries:
        entry_by_id.setdefault(e.id, []).append(e)
    reps_of = _block_reps(table)
    H = table.hyperperiod_stu

    cursor = {lane: 0 for lane in table.lanes}
    finish = {}                       # (rep, entry id) -> end time
    events = []
    for r in range(repetitions):
        for e in table.entries:
            if e.kind in (EntryKind.WAIT, EntryKind.TIMER_RESERVE,
                          EntryKind.RECEIVE):
                continue
            ready = 0
            for pid in intra.get(e.id, ()):
                ready = max(ready, finish.get((r, pid), 0))
            for pid in inter.get(e.id, ()):
                ready = max(ready, finish.get((r - 1, pid), 0))
            if e.kind is EntryKind.SEND:
                # the pair occupies the medium as one span; the sequencer
                # does the work, the operators are not blocked here
                start = max(cursor[e.lane], ready)
                stop = start + e.duration_stu
                cursor[e.lane] = stop
                finish[(r, e.id)] = stop
                continue
            activation = None
            if e.block in timers:
                k = r * reps_of[e.block] + entry_repetition(e.id)
                activation = k * timers[e.block]
            start = max(cursor[e.lane], ready)
            if activation is not None:
                if start > activation:
                    raise ExecError(
                        "DEADLINE_MISS",
                        f"{e.block} activation {k} due at {activation}, "
                        f"ready only at {start}",
                        ExecTimeline(mode, tuple(events), H, repetitions))
                start = activation
            stop = start + dm.sample(
                e.block, r * reps_of[e.block] + entry_repetition(e.id))
            cursor[e.lane] = stop
            finish[(r, e.id)] = stop
            events.append(ExecEvent(e.block, e.lane, start, stop,
                                    r * reps_of[e.block] + entry_repetition(e.id)))
    return ExecTimeline(mode, tuple(events), H, repetitions)


@dataclass(frozen=True)
class PeriodRow:
    block: str
    period_stu: int          # declared; 0 when the block has none
    min_stu: int
    max_stu: int
    mean_stu: float
    violations: int


def period_report(t: ExecTimeline, flat: AlgorithmGraph) -> dict:
    """Inter-activation statistics per block; a violation is an interval
    shorter than the declared period (the task ran early)."""
    blocks = {b.name: b for b in flat.blocks}
    starts = {}
    for ev in t.events:
        starts.setdefault(ev.block, []).append(ev.start_stu)
    report = {}
    for name, times in starts.items():
        times.sort()
        gaps = [b - a for a, b in zip(times, times[1:])]
        period = _effective_period(flat, blocks[name]) if name in blocks else None
        period = period or 0
        if not gaps:
            report[name] = PeriodRow(name, period, 0, 0, 0.0, 0)
            continue
        violations = sum(1 for g in gaps if period and g < period)
        report[name] = PeriodRow(name, period, min(gaps), max(gaps),
                                 sum(gaps) / len(gaps), violations)
    return report


def dump_timeline(t: ExecTimeline, delimiter: str = "\t") -> str:
    """Delimiter-separated event table, one row per executed block slot.
    A leading comment keeps the run parameters with the data."""
    lines = [f"# mode={t.mode} hyperperiod={t.hyperperiod_stu} "
             f"repetitions={t.repetitions}",
             delimiter.join(("block", "operator", "start_stu", "end_stu",
                             "repetition"))]
    for ev in sorted(t.events, key=lambda e: (e.start_stu, e.operator, e.block)):
        lines.append(delimiter.join((ev.block, ev.operator, str(ev.start_stu),
                                     str(ev.end_stu), str(ev.repetition))))
    return "\n".join(lines) + "\n"


def load_timeline(text: str, delimiter: str = "\t") -> ExecTimeline:
    mode, hyper, reps = "event_driven", 0, 0
    events = []
    for line in text.splitlines():
        if line.startswith("#"):
            for part in line.lstrip("# ").split():
                key, _, value = part.partition("=")
                if key == "mode":
                    mode = value
                elif key == "hyperperiod":
                    hyper = int(value)
                elif key == "repetitions":
                    reps = int(value)
            continue
        cells = line.split(delimiter)
        if not line or cells[0] == "block":
            continue
        events.append(ExecEvent(cells[0], cells[1], int(cells[2]),
                                int(cells[3]), int(cells[4])))
    return ExecTimeline(mode, tuple(events), hyper, reps)
