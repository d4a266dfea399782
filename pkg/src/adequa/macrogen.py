"""Target-independent macro programs generated from a schedule.

One program per operator, phase-structured: buffer allocations, init calls,
the main loop in lane order, end calls.  Cross-operator traffic appears
twice: as Pre/Suc token statements inside the loop (the producer releases
Pre<k> after writing, the consumer blocks on Suc<k> before reading) and as
a per-medium communication sequencer listing the transfers in schedule
order.  `sequentialize_comm` folds the sequencers into the loop as inline
send_/recv_ calls, which is only legal while the operator has no compute
slot overlapping the transfer; the schedule slots ride along in the
program for exactly that check.

`expand` turns a program into target source with a two-pass substituter:
positional $1..$9 and $@ (arguments from the second on, comma-joined)
first, then every `<dtype>_map` token through the target's type map.
Inter-repetition state carries emit no statements, only comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .model import AlgorithmGraph, ArchitectureGraph, Direction, ToolError
from .schedule import EntryKind, ScheduleTable


class MacroError(ToolError):
    """SEQUENTIALIZE_CONFLICT, MERGE_COLLISION, MISSING_TEMPLATE,
    MISSING_TYPE_MAP or UNRESOLVED_PLACEHOLDER."""


@dataclass(frozen=True)
class MacroStatement:
    macro: str
    args: tuple = ()

    def __str__(self):
        return f"{self.macro}({','.join(self.args)})"


@dataclass(frozen=True)
class SeqOp:
    direction: str           # "send" | "recv"
    payload: str             # transfer id shared by the pair
    peer: str                # operator on the other side ('+'-joined if many)
    pre_token: str
    suc_token: str
    start_stu: int = 0
    duration_stu: int = 0


@dataclass(frozen=True)
class CommSequencer:
    medium: str
    gate: str
    members: tuple
    ops: tuple = ()
    inline: bool = False


@dataclass(frozen=True)
class MacroProgram:
    operator: str
    allocs: tuple = ()
    init: tuple = ()
    loop: tuple = ()
    end: tuple = ()
    sequencers: tuple = ()
    timing: dict = field(default_factory=dict)   # entry id -> (start, end)
    notes: tuple = ()


@dataclass(frozen=True)
class TargetDefinition:
    name: str
    type_map: dict
    templates: dict          # (macro, phase) -> template text
    prologue: str = ""
    epilogue: str = ""


def _ident(path: str) -> str:
    return path.replace("/", "_")


def buffer_name(block, port) -> str:
    """Global buffer for one block output; delay state carries dollar_."""
    from .model import BlockKind
    stem = f"{_ident(block.name)}_{port.name}_buf"
    return f"dollar_{stem}" if block.kind is BlockKind.DELAY else stem


# ---------------------------------------------------------------------------
# emission

def emit_macros(table: ScheduleTable, flat: AlgorithmGraph,
                arch: ArchitectureGraph) -> list:
    """One MacroProgram per operator, in architecture order.

    The architecture is needed on top of the table: sequencer membership is
    the medium's full attachment set (an attached but silent operator still
    runs the bus protocol) and the gate names live only there.
    """
    blocks = {b.name: b for b in flat.blocks}
    feeds = {}            # (consumer, port) -> producer buffer
    for d in flat.deps:
        if d.to_port is None:
            continue
        producer = blocks[d.from_block]
        port = producer.port(d.from_port, Direction.OUTPUT)
        if port is not None:
            feeds[(d.to_block, d.to_port)] = buffer_name(producer, port)

    entry_by_id = {}
    for e in table.entries:
        entry_by_id.setdefault(e.id, []).append(e)
    pre_of = {}           # consumer entry id -> [transfer ids]
    post_of = {}          # producer entry id -> [transfer ids]
    carries = []
    for s in table.synchros:
        if s.to_id.startswith("x") and s.from_id.startswith("c:"):
            post_of.setdefault(s.from_id, []).append(s.to_id)
        elif s.from_id.startswith("x") and s.to_id.startswith("c:"):
            if s.scope == "inter":
                carries.append((s.from_id, s.to_id))
            else:
                pre_of.setdefault(s.to_id, []).append(s.from_id)
        elif s.scope == "inter":
            carries.append((s.from_id, s.to_id))

    def xfer_start(xid):
        return min(e.start_stu for e in entry_by_id[xid])

    def token(xid, kind):
        return f"{kind}{xid[1:]}"

    programs = []
    for op in arch.operators:
        allocs, init, loop, end = [], [], [], []
        timing = {}
        for name, where in sorted(table.placement.items()):
            if where != op.name:
                continue
            b = blocks[name]
            for port in b.outputs():
                allocs.append(MacroStatement(
                    "alloc_", (port.dtype, buffer_name(b, port), str(port.width))))
            init.append(MacroStatement("proc_init_", (_ident(name),)))
            end.append(MacroStatement("proc_end_", (_ident(name),)))
        for e in table.entries:
            if e.lane != op.name:
                continue
            if e.kind is EntryKind.WAIT:
                loop.append(MacroStatement("wait_", (str(e.duration_stu),)))
                continue
            if e.kind is not EntryKind.COMPUTE:
                continue
            timing[e.id] = (e.start_stu, e.end_stu)
            b = blocks[e.block]
            for xid in sorted(pre_of.get(e.id, ()), key=xfer_start):
                loop.append(MacroStatement("Suc", (token(xid, "Suc"),)))
            args = [_ident(e.block)]
            args += [feeds.get((e.block, p.name), "") for p in b.inputs()]
            args += [buffer_name(b, p) for p in b.outputs()]
            loop.append(MacroStatement("loop_call", tuple(args)))
            for xid in sorted(post_of.get(e.id, ()), key=xfer_start):
                loop.append(MacroStatement("Pre", (token(xid, "Pre"),)))
        sequencers = []
        for medium in arch.media:
            lane = [e for e in table.entries if e.lane == medium.name]
            if not lane:
                continue
            attach_ops = [o for o, _ in medium.attach]
            if op.name not in attach_ops:
                continue
            gate = dict(medium.attach)[op.name]
            ops = []
            seen = set()
            for e in sorted(lane, key=lambda e: (e.start_stu, e.id)):
                if e.id in seen:
                    continue
                group = entry_by_id[e.id]
                send = next(g for g in group if g.kind is EntryKind.SEND)
                recvs = [g for g in group if g.kind is EntryKind.RECEIVE]
                sender = table.placement[send.block]
                readers = sorted(table.placement[r.block] for r in recvs)
                if op.name == sender:
                    direction, peer = "send", "+".join(readers)
                elif op.name in readers:
                    direction, peer = "recv", sender
                else:
                    continue
                seen.add(e.id)
                ops.append(SeqOp(direction, e.id, peer,
                                 token(e.id, "Pre"), token(e.id, "Suc"),
                                 send.start_stu, send.duration_stu))
            sequencers.append(CommSequencer(
                medium.name, gate, tuple(attach_ops), tuple(ops)))
        notes = tuple(f"carry {a} -> {b}" for a, b in sorted(carries)
                      if a in timing or b in timing
                      or any(e.lane == op.name for e in entry_by_id.get(a, ()))
                      or any(e.lane == op.name for e in entry_by_id.get(b, ())))
        programs.append(MacroProgram(op.name, tuple(allocs), tuple(init),
                                     tuple(loop), tuple(end), tuple(sequencers),
                                     timing, notes))
    return programs


# ---------------------------------------------------------------------------
# sequentialization

def sequentialize_comm(progs) -> list:
    """Fold every sequencer into its loop as inline send_/recv_ calls.

    Pre/Suc token statements disappear; the per-medium op order is kept
    bit-for-bit.  A transfer overlapping a compute slot on the same
    operator cannot be inlined: the operator would have to be in two
    places at once, so SEQUENTIALIZE_CONFLICT is raised.
    """
    out = []
    for prog in progs:
        by_pre = {}
        by_suc = {}
        late = []
        for seq in prog.sequencers:
            for op in seq.ops:
                span = (op.start_stu, op.start_stu + op.duration_stu)
                for eid, (cs, ce) in prog.timing.items():
                    if max(cs, span[0]) < min(ce, span[1]):
                        raise MacroError(
                            "SEQUENTIALIZE_CONFLICT",
                            f"{op.payload} on {seq.medium} overlaps {eid} "
                            f"on {prog.operator}")
                call = MacroStatement(
                    "send_" if op.direction == "send" else "recv_",
                    (seq.medium, op.payload, op.peer))
                if op.direction == "send":
                    by_pre[op.pre_token] = call
                else:
                    by_suc[op.suc_token] = call
        used = set()
        loop = []
        for st in prog.loop:
            if st.macro == "Pre" and st.args and st.args[0] in by_pre:
                loop.append(by_pre[st.args[0]])
                used.add(st.args[0])
            elif st.macro == "Suc" and st.args and st.args[0] in by_suc:
                loop.append(by_suc[st.args[0]])
                used.add(st.args[0])
            else:
                loop.append(st)
        # a carry consumed only in the next repetition has no Suc statement;
        # its receive call still has to happen, at its slot near the loop end
        for seq in prog.sequencers:
            for op in seq.ops:
                tok = op.pre_token if op.direction == "send" else op.suc_token
                mapped = by_pre.get(tok) if op.direction == "send" else by_suc.get(tok)
                if mapped is not None and tok not in used:
                    late.append((op.start_stu, mapped))
        loop += [call for _, call in sorted(late, key=lambda p: p[0])]
        sequencers = tuple(
            replace(seq, inline=True,
                    ops=tuple(replace(op, pre_token="", suc_token="")
                              for op in seq.ops))
            for seq in prog.sequencers)
        out.append(replace(prog, loop=tuple(loop), sequencers=sequencers))
    return out


# ---------------------------------------------------------------------------
# merging

def merge_programs(progs) -> MacroProgram:
    """Concatenate programs for one operator, prefixing names m0_, m1_, ..."""
    progs = list(progs)
    if not progs:
        raise ValueError("nothing to merge")
    if len({p.operator for p in progs}) != 1:
        raise ValueError("merge_programs needs programs for one operator")
    if len(progs) == 1:
        return progs[0]

    def rename(i, prog):
        names = {st.args[1] for st in prog.allocs}
        names |= {st.args[0] for st in prog.init}
        tokens = {op.pre_token for s in prog.sequencers for op in s.ops}
        tokens |= {op.suc_token for s in prog.sequencers for op in s.ops}
        payloads = {op.payload for s in prog.sequencers for op in s.ops}
        renamable = names | tokens | payloads | set(prog.timing)

        def fix(arg):
            return f"m{i}_{arg}" if arg in renamable else arg

        def fix_all(stmts):
            return tuple(MacroStatement(st.macro, tuple(fix(a) for a in st.args))
                         for st in stmts)

        sequencers = tuple(
            replace(s, ops=tuple(
                replace(op, payload=fix(op.payload), pre_token=fix(op.pre_token),
                        suc_token=fix(op.suc_token)) for op in s.ops))
            for s in prog.sequencers)
        timing = {fix(k): v for k, v in prog.timing.items()}
        return MacroProgram(prog.operator, fix_all(prog.allocs),
                            fix_all(prog.init), fix_all(prog.loop),
                            fix_all(prog.end), sequencers, timing, prog.notes)

    parts = [rename(i, p) for i, p in enumerate(progs)]
    alloc_names = [st.args[1] for p in parts for st in p.allocs]
    if len(alloc_names) != len(set(alloc_names)):
        dup = sorted(n for n in alloc_names if alloc_names.count(n) > 1)[0]
        raise MacroError("MERGE_COLLISION", f"buffer {dup} defined twice")
    merged_timing = {}
    for p in parts:
        merged_timing.update(p.timing)
    return MacroProgram(
        progs[0].operator,
        sum((p.allocs for p in parts), ()),
        sum((p.init for p in parts), ()),
        sum((p.loop for p in parts), ()),
        sum((p.end for p in parts), ()),
        sum((p.sequencers for p in parts), ()),
        merged_timing,
        sum((p.notes for p in parts), ()),
    )


# ---------------------------------------------------------------------------
# expansion

_PLACEHOLDER = re.compile(r"\$(\d|@)")


def _render(template_key, template: str, args) -> str:
    def sub(m):
        if m.group(1) == "@":
            return ",".join(args[1:])
        i = int(m.group(1))
        return args[i - 1] if 1 <= i <= len(args) else m.group(0)

    text = _PLACEHOLDER.sub(sub, template)
    leftover = _PLACEHOLDER.search(text)
    if leftover:
        raise MacroError(
            "UNRESOLVED_PLACEHOLDER",
            f"{template_key[0]}:{template_key[1]} leaves {leftover.group(0)}")
    return text


def expand(prog: MacroProgram, target: TargetDefinition,
           iterations: int = None) -> str:
    """Target source for one program; pure text substitution, no recursion.

    `iterations` bounds the main loop when given; it becomes $1 of the
    loop_begin_ structure template.
    """
    for st in prog.allocs:
        if st.args[0] not in target.type_map:
            raise MacroError("MISSING_TYPE_MAP", st.args[0])

    def stmt(st: MacroStatement, phase: str) -> str:
        key = (st.macro, phase)
        template = target.templates.get(key)
        if template is None:
            raise MacroError("MISSING_TEMPLATE", f"{st.macro}:{phase}")
        return _render(key, template, list(st.args))

    def structure(macro: str, *args) -> str:
        return stmt(MacroStatement(macro, tuple(args)), "structure")

    lines = []
    if target.prologue:
        lines.append(target.prologue)
    lines += [stmt(st, "decl") for st in prog.allocs]
    lines.append(structure("main_begin_", prog.operator))
    lines += [stmt(st, "init") for st in prog.init]
    lines.append(structure("loop_begin_",
                           "" if iterations is None else str(iterations)))
    lines += [stmt(st, "loop") for st in prog.loop]
    lines.append(structure("loop_end_"))
    lines += [stmt(st, "end") for st in prog.end]
    lines.append(structure("main_end_", prog.operator))
    if target.epilogue:
        lines.append(target.epilogue)
    text = "\n".join(lines) + "\n"
    for dtype, mapped in sorted(target.type_map.items(), key=lambda kv: -len(kv[0])):
        text = text.replace(f"{dtype}_map", mapped)
    return text


# ---------------------------------------------------------------------------
# .m4k serialization: one statement per line, sequencers bracketed by
# thread_/endthread_ markers, compute slots as slot_ metadata

_STMT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\((.*)\)$")


def _parse_stmt(line: str, lineno: int) -> MacroStatement:
    m = _STMT.match(line)
    if m is None:
        raise ValueError(f"line {lineno}: not a macro statement: {line!r}")
    name, raw = m.groups()
    args = tuple(a.strip() for a in raw.split(",")) if raw.strip() else ()
    return MacroStatement(name, args)


def dump_program(prog: MacroProgram) -> str:
    lines = [f"program_({prog.operator})"]
    lines += [str(st) for st in prog.allocs]
    lines.append(f"main_begin_({prog.operator})")
    lines += [str(st) for st in prog.init]
    lines.append("loop_begin_()")
    lines += [str(st) for st in prog.loop]
    lines.append("loop_end_()")
    lines += [str(st) for st in prog.end]
    lines.append(f"main_end_({prog.operator})")
    for seq in prog.sequencers:
        marker = "switchthread_" if seq.inline else "thread_"
        lines.append(f"{marker}({seq.medium},{seq.gate},{','.join(seq.members)})")
        for op in seq.ops:
            lines.append(f"seqop_({op.direction},{op.payload},{op.peer},"
                         f"{op.pre_token},{op.suc_token},"
                         f"{op.start_stu},{op.duration_stu})")
        lines.append("endthread_()")
    for eid in sorted(prog.timing):
        s, e = prog.timing[eid]
        lines.append(f"slot_({eid},{s},{e})")
    for note in prog.notes:
        lines.append(f"# {note}")
    return "\n".join(lines) + "\n"


def load_program(text: str) -> MacroProgram:
    operator = None
    allocs, init, loop, end, sequencers, notes = [], [], [], [], [], []
    timing = {}
    section = "allocs"
    seq = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            notes.append(line.lstrip("# "))
            continue
        st = _parse_stmt(line, lineno)
        if st.macro == "program_":
            operator = st.args[0]
        elif st.macro == "main_begin_":
            section = "init"
        elif st.macro == "loop_begin_":
            section = "loop"
        elif st.macro == "loop_end_":
            section = "end"
        elif st.macro == "main_end_":
            section = "done"
        elif st.macro in ("thread_", "switchthread_"):
            seq = CommSequencer(st.args[0], st.args[1], st.args[2:], (),
                                st.macro == "switchthread_")
        elif st.macro == "seqop_":
            d, payload, peer, pre, suc, s, dur = st.args
            seq = replace(seq, ops=seq.ops + (
                SeqOp(d, payload, peer, pre, suc, int(s), int(dur)),))
        elif st.macro == "endthread_":
            sequencers.append(seq)
            seq = None
        elif st.macro == "slot_":
            timing[st.args[0]] = (int(st.args[1]), int(st.args[2]))
        elif section == "allocs":
            allocs.append(st)
        elif section == "init":
            init.append(st)
        elif section == "loop":
            loop.append(st)
        elif section == "end":
            end.append(st)
    if operator is None:
        raise ValueError("missing program_ header")
    return MacroProgram(operator, tuple(allocs), tuple(init), tuple(loop),
                        tuple(end), tuple(sequencers), timing, tuple(notes))


# ---------------------------------------------------------------------------
# .tdef parsing

def parse_target(text: str, name: str = "target") -> TargetDefinition:
    """Sections: [types] name = text lines; [template macro:phase] raw lines
    up to a blank line; [prologue] and [epilogue] raw lines up to the next
    section."""
    type_map = {}
    templates = {}
    prologue, epilogue = [], []
    section = None
    key = None
    buf = []

    def flush():
        nonlocal buf
        if section == "template" and key is not None:
            templates[key] = "\n".join(buf).strip()
        elif section == "prologue":
            prologue.extend(buf)
        elif section == "epilogue":
            epilogue.extend(buf)
        buf = []

    for raw in text.splitlines():
        line = raw.rstrip()
        if line.startswith("[") and line.endswith("]"):
            flush()
            header = line[1:-1].strip()
            if header == "types":
                section = "types"
            elif header.startswith("template "):
                section = "template"
                macro, _, phase = header[len("template "):].partition(":")
                key = (macro.strip(), phase.strip())
            elif header in ("prologue", "epilogue"):
                section = header
            else:
                raise ValueError(f"unknown section [{header}]")
            continue
        if section == "types":
            if not line or line.startswith("#"):
                continue
            n, sep, v = line.partition("=")
            if not sep:
                raise ValueError(f"bad type mapping: {line!r}")
            type_map[n.strip()] = v.strip()
        elif section == "template":
            if not line:
                flush()
                section = None
                key = None
            else:
                buf.append(line)
        elif section in ("prologue", "epilogue"):
            buf.append(line)
    flush()
    return TargetDefinition(name, type_map, templates,
                            "\n".join(prologue).strip(),
                            "\n".join(epilogue).strip())
