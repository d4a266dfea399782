"""Hybrid block-diagram simulation with event clocks.

A diagram mixes always-active continuous blocks (first-order lags),
memoryless function blocks, and discrete stateful blocks fired by event
clocks.  Within one instant every block with direct feedthrough is
evaluated in topological order of the regular links, which is what makes
two blocks on the same clock always execute in dependency order; blocks
without feedthrough (registers, lags) publish their state first and latch
or integrate after the pass.  Blocks lacking an explicit activation
inherit it through their regular input, transitively.

Time inside a diagram is seconds; the pid block's own sampling period Ts
stays in milliseconds like the controller module it wraps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import Finding, ToolError
from .control import PidParams, PidState, pid_step
from . import parser as _p


class HybridError(ToolError):
    """DOMAIN, NO_ACTIVATION, AMBIGUOUS_INHERITANCE or ALGEBRAIC_LOOP."""


BLOCK_KINDS = frozenset({
    "constant", "gain", "summation", "saturation", "quantizer", "register",
    "pt1", "deadtime", "static_map", "pid", "event_clock", "scope",
})

#: kinds whose output at an instant depends on their input at that instant
_FEEDTHROUGH = frozenset({
    "gain", "summation", "saturation", "quantizer", "static_map", "pid",
    "scope",
})
#: kinds that never need an activation source
_ALWAYS = frozenset({"constant", "event_clock", "pt1", "deadtime"})
#: input arity; None = any number >= 2
_ARITY = {
    "constant": 0, "event_clock": 0, "gain": 1, "saturation": 1,
    "quantizer": 1, "register": 1, "pt1": 1, "deadtime": 1,
    "static_map": 1, "pid": 1, "scope": 1, "summation": None,
}


@dataclass(frozen=True)
class SimBlock:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if not self.name:
            raise ValueError("SimBlock name must be non-empty")


@dataclass(frozen=True)
class Diagram:
    """blocks + regular links (src, dst, input port) + activation links
    (event_clock, target).  All signals are scalar, so regular links are
    type-compatible by construction."""

    name: str
    blocks: tuple
    regular_links: tuple
    activation_links: tuple

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(names) != len(set(names)):
            dup = sorted(n for n in names if names.count(n) > 1)[0]
            raise ValueError(f"duplicate block name {dup!r}")
        by_name = {b.name: b for b in self.blocks}
        seen_ports = set()
        for src, dst, port in self.regular_links:
            if src not in by_name or dst not in by_name:
                raise ValueError(f"link {src}->{dst} names unknown block")
            if by_name[src].kind in ("event_clock",):
                raise ValueError(f"{src} has no regular output")
            if (dst, port) in seen_ports:
                raise ValueError(f"two links drive {dst} port {port}")
            seen_ports.add((dst, port))
        for clock, dst in self.activation_links:
            if clock not in by_name or dst not in by_name:
                raise ValueError(f"activation {clock}=>{dst} names unknown block")
            if by_name[clock].kind != "event_clock":
                raise ValueError(f"activation source {clock} is not an event_clock")
        for b in self.blocks:
            arity = _ARITY[b.kind]
            have = sorted(p for (d, p) in seen_ports if d == b.name)
            if arity is None:
                if have != list(range(len(have))) or len(have) < 2:
                    raise ValueError(f"{b.name}: summation needs inputs 0..n-1, n >= 2")
            elif have != list(range(arity)):
                raise ValueError(f"{b.name}: needs exactly {arity} input(s), has {have}")

    def block(self, name: str) -> SimBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def inputs_of(self, name: str):
        pairs = sorted((p, s) for s, d, p in self.regular_links if d == name)
        return [s for _, s in pairs]


class DiagramBuilder:
    """Incremental construction; build() validates and freezes."""

    def __init__(self, name: str = "diagram"):
        self.name = name
        self._blocks = []
        self._links = []
        self._acts = []

    def block(self, name, kind, **params):
        self._blocks.append(SimBlock(name, kind, params))
        return self

    def link(self, src, dst, port=0):
        self._links.append((src, dst, port))
        return self

    def activate(self, clock, dst):
        self._acts.append((clock, dst))
        return self

    def build(self) -> Diagram:
        return Diagram(self.name, tuple(self._blocks), tuple(self._links),
                       tuple(self._acts))


@dataclass(frozen=True)
class SimTrace:
    samples: dict    # probe name -> tuple of (time s, value)

    def __post_init__(self):
        for name, points in self.samples.items():
            for a, b in zip(points, points[1:]):
                if not a[0] < b[0]:
                    raise ValueError(f"probe {name}: times must strictly increase")

    def last(self, name: str):
        return self.samples[name][-1]


# ---------------------------------------------------------------------------
# activation resolution

def _explicit_acts(d: Diagram):
    acts = {}
    for clock, dst in d.activation_links:
        acts.setdefault(dst, set()).add(clock)
    return acts


def _resolve_acts(d: Diagram):
    """name -> "always" | frozenset(clock names) | None (unresolvable)."""
    explicit = _explicit_acts(d)
    act = {}
    for b in d.blocks:
        if b.name in explicit:
            act[b.name] = frozenset(explicit[b.name])
        elif b.kind in _ALWAYS:
            act[b.name] = "always"
        else:
            act[b.name] = None
    for _ in range(len(d.blocks) + 1):
        changed = False
        for b in d.blocks:
            if act[b.name] is not None:
                continue
            preds = {act[s] for s in d.inputs_of(b.name)}
            if None in preds:
                continue
            clocked = {p for p in preds if p != "always"}
            if len(clocked) > 1:
                raise HybridError(
                    "AMBIGUOUS_INHERITANCE",
                    f"{b.name} inherits from differently-clocked predecessors")
            act[b.name] = clocked.pop() if clocked else "always"
            changed = True
        if not changed:
            break
    return act


def infer_activations(d: Diagram) -> Diagram:
    """Materialize inherited activations as explicit activation links."""
    act = _resolve_acts(d)
    explicit = _explicit_acts(d)
    extra = []
    for b in d.blocks:
        if b.name in explicit or act[b.name] in ("always", None):
            continue
        for clock in sorted(act[b.name]):
            extra.append((clock, b.name))
    if not extra:
        return d
    return replace(d, activation_links=d.activation_links + tuple(extra))


def check_synchronism(d: Diagram) -> list:
    """UNSYNCHRONIZED_CLOCKS for equal-period clock pairs whose activated
    subgraphs are joined by a data path: same period does not mean same
    event, so their relative firing order is arbitrary."""
    act = _resolve_acts(infer_activations(d))
    succ = {}
    for s, t, _ in d.regular_links:
        succ.setdefault(s, set()).add(t)

    def reaches(frm, targets):
        stack, seen = [frm], set()
        while stack:
            n = stack.pop()
            if n in targets:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(succ.get(n, ()))
        return False

    clocks = [b for b in d.blocks if b.kind == "event_clock"]
    findings = []
    for i, c1 in enumerate(clocks):
        for c2 in clocks[i + 1:]:
            if c1.params.get("period") != c2.params.get("period"):
                continue
            g1 = {n for n, a in act.items()
                  if isinstance(a, frozenset) and c1.name in a}
            g2 = {n for n, a in act.items()
                  if isinstance(a, frozenset) and c2.name in a}
            joined = any(reaches(a, g2) for a in g1) or \
                     any(reaches(b, g1) for b in g2)
            if joined:
                findings.append(Finding(
                    "UNSYNCHRONIZED_CLOCKS", f"{c1.name}, {c2.name}",
                    "equal periods but independent events on a shared data path"))
    return findings


# ---------------------------------------------------------------------------
# simulation

def _round_half_away(x: float) -> float:
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def _lag_step(x, u, T, k, dt):
    def f(x):
        return (k * u - x) / T
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _topo_order(d: Diagram):
    indeg = {b.name: 0 for b in d.blocks}
    succ = {b.name: [] for b in d.blocks}
    by_name = {b.name: b for b in d.blocks}
    for s, t, _ in d.regular_links:
        if by_name[t].kind in _FEEDTHROUGH:
            indeg[t] += 1
            succ[s].append(t)
    order = sorted(n for n, k in indeg.items() if k == 0)
    out = []
    i = 0
    while i < len(order):
        n = order[i]
        i += 1
        out.append(n)
        ready = []
        for t in succ[n]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
        order.extend(sorted(ready))
    if len(out) != len(d.blocks):
        loop = sorted(set(indeg) - set(out))
        raise HybridError("ALGEBRAIC_LOOP",
                          f"memoryless cycle through {', '.join(loop)}")
    return out


def _pid_params(b: SimBlock) -> PidParams:
    p = b.params
    return PidParams(Kp=p["kp"], Ki=p["ki"], Kd=p["kd"],
                     Tn=p.get("tn", p["kp"] / p["ki"] if p["ki"] else 1.0),
                     Tv=p.get("tv", p["kd"] / p["kp"] if p["kp"] else 0.0),
                     Ts=p.get("ts", 5.0),
                     u_min=p.get("umin", 0.0), u_max=p.get("umax", 100.0))


def simulate(d: Diagram, t_end: float, dt_cont: float) -> SimTrace:
    """Fixed-step run over [0, t_end] sampling every dt_cont seconds.

    Every event clock period must be an integer multiple of dt_cont.
    Scope blocks record at the instants their activation fires, or at
    every instant when always-active.
    """
    if dt_cont <= 0 or t_end < 0:
        raise HybridError("DOMAIN", "need t_end >= 0 and dt_cont > 0")
    d = infer_activations(d)
    act = _resolve_acts(d)
    for b in d.blocks:
        if act[b.name] is None:
            raise HybridError("NO_ACTIVATION",
                              f"{b.name} has no activation source to inherit")
    clock_steps = {}
    for b in d.blocks:
        if b.kind != "event_clock":
            continue
        period = b.params["period"]
        steps = period / dt_cont
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise HybridError(
                "DOMAIN", f"{b.name}: period {period} is not a multiple of dt_cont")
        clock_steps[b.name] = (int(round(steps)),
                               int(round(b.params.get("offset", 0.0) / dt_cont)))
    order = _topo_order(d)
    by_name = {b.name: b for b in d.blocks}
    inputs = {b.name: d.inputs_of(b.name) for b in d.blocks}

    reg_state = {b.name: float(b.params.get("init", 0.0))
                 for b in d.blocks if b.kind == "register"}
    lag_state = {b.name: float(b.params.get("init", 0.0))
                 for b in d.blocks if b.kind in ("pt1", "deadtime")}
    pid_state = {b.name: PidState() for b in d.blocks if b.kind == "pid"}
    pid_hold = {b.name: 0.0 for b in d.blocks if b.kind == "pid"}
    probes = {b.name: [] for b in d.blocks if b.kind == "scope"}

    steps = int(round(t_end / dt_cont))
    for k in range(steps + 1):
        t = k * dt_cont
        fired = {c for c, (per, off) in clock_steps.items()
                 if k >= off and (k - off) % per == 0}

        def active(name):
            a = act[name]
            return True if a == "always" else bool(a & fired)

        out = {}
        for name in order:
            b = by_name[name]
            if b.kind in ("register", "pt1", "deadtime"):
                # no feedthrough: publish state, read input after the pass
                out[name] = reg_state[name] if b.kind == "register" else lag_state[name]
                continue
            ins = [out[s] for s in inputs[name]]
            if b.kind == "constant":
                out[name] = float(b.params["value"])
            elif b.kind == "event_clock":
                out[name] = 0.0
            elif b.kind == "gain":
                out[name] = float(b.params["k"]) * ins[0]
            elif b.kind == "summation":
                minus = set(int(i) for i in b.params.get("minus", ()))
                out[name] = sum(-v if i in minus else v
                                for i, v in enumerate(ins))
            elif b.kind == "saturation":
                lo = float(b.params.get("lo", 0.0))
                hi = float(b.params.get("hi", 100.0))
                out[name] = max(lo, min(hi, ins[0]))
            elif b.kind == "quantizer":
                out[name] = float(_round_half_away(ins[0]))
            elif b.kind == "static_map":
                cutoff = float(b.params.get("cutoff", 28.0))
                scale = float(b.params.get("scale", 9250.0))
                top = float(b.params.get("max", 10000.0))
                v = ins[0]
                out[name] = 0.0 if v < cutoff else max(0.0, min(top, v / 100.0 * scale))
            elif b.kind == "pid":
                if active(name):
                    pid_state[name], u = pid_step(pid_state[name], ins[0],
                                                  _pid_params(b))
                    pid_hold[name] = u
                out[name] = pid_hold[name]
            elif b.kind == "scope":
                out[name] = ins[0]
                if active(name):
                    probes[name].append((t, ins[0]))

        # latch and integrate after the instant's outputs are all published
        for name, st in reg_state.items():
            if active(name):
                reg_state[name] = out[inputs[name][0]]
        if k < steps:
            for name in lag_state:
                b = by_name[name]
                T = float(b.params["T"])
                gain = float(b.params.get("k", 1.0))
                lag_state[name] = _lag_step(lag_state[name], out[inputs[name][0]],
                                            T, gain, dt_cont)

    return SimTrace({n: tuple(v) for n, v in probes.items()})


def dump_trace(trace: SimTrace, delimiter: str = "\t") -> str:
    """Delimiter-separated table: time column, one column per probe,
     6 decimal places, empty cell when a probe has no sample at a time."""
    names = list(trace.samples)
    by_time = {}
    for name in names:
        for t, v in trace.samples[name]:
            by_time.setdefault(round(t, 9), {})[name] = v
    lines = [delimiter.join(["time"] + names)]
    for t in sorted(by_time):
        row = [f"{t:.6f}"]
        for name in names:
            v = by_time[t].get(name)
            row.append("" if v is None else f"{v:.6f}")
        lines.append(delimiter.join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# hybrid time bases and automata

@dataclass(frozen=True)
class HybridTimeBasis:
    """Contiguous interval sequence, either listed or described.

    kind "finite_list": intervals = ((t0, t0'), (t1, t1'), ...) with
    t_j <= t_j' and t_j' = t_{j+1}.  kind "infinite_descr": lengths form
    the geometric sequence first_length * ratio**j.
    """

    kind: str
    intervals: tuple = ()
    first_length: float = 0.0
    ratio: float = 1.0

    def __post_init__(self):
        if self.kind not in ("finite_list", "infinite_descr"):
            raise ValueError(f"bad basis kind {self.kind!r}")
        if self.kind == "finite_list":
            if not self.intervals:
                raise ValueError("finite_list needs at least one interval")
            for a, b in self.intervals:
                if b < a:
                    raise HybridError("DOMAIN", f"interval [{a},{b}] has negative length")
            for (_, b), (c, _) in zip(self.intervals, self.intervals[1:]):
                if b != c:
                    raise ValueError("intervals must be contiguous")
        else:
            if self.first_length < 0 or self.ratio < 0:
                raise HybridError("DOMAIN", "lengths must be non-negative")


def classify_time_basis(b: HybridTimeBasis) -> str:
    """trivial | finite | infinite | zeno.

    A described infinite basis is Zeno exactly when its total length
    converges, i.e. the geometric ratio is below one.
    """
    if b.kind == "finite_list":
        if len(b.intervals) == 1 and b.intervals[0][0] == b.intervals[0][1]:
            return "trivial"
        return "finite"
    if b.first_length == 0:
        return "trivial"
    return "zeno" if b.ratio < 1 else "infinite"


def concat_bases(a: HybridTimeBasis, b: HybridTimeBasis) -> HybridTimeBasis:
    """Join two finite bases; b's intervals are shifted to start at a's end."""
    if a.kind != "finite_list" or b.kind != "finite_list":
        raise HybridError("DOMAIN", "only finite bases concatenate")
    shift = a.intervals[-1][1] - b.intervals[0][0]
    moved = tuple((x + shift, y + shift) for x, y in b.intervals)
    return HybridTimeBasis("finite_list", a.intervals + moved)


def scale_basis(b: HybridTimeBasis, c: float) -> HybridTimeBasis:
    if c <= 0:
        raise HybridError("DOMAIN", "scale factor must be positive")
    if b.kind == "finite_list":
        t0 = b.intervals[0][0]
        scaled = tuple((t0 + (x - t0) * c, t0 + (y - t0) * c)
                       for x, y in b.intervals)
        return HybridTimeBasis("finite_list", scaled)
    return HybridTimeBasis("infinite_descr", (), b.first_length * c, b.ratio)


@dataclass(frozen=True)
class HybridAutomaton:
    """Structural record of H = (Q, U_D, E, S, Inv, R, G); predicates and
    maps are opaque callables, execution is out of scope."""

    states: tuple
    discrete_inputs: tuple = ()
    transitions: tuple = ()          # (q, u, q')
    dynamics: dict = field(default_factory=dict)
    invariant: dict = field(default_factory=dict)
    reset: dict = field(default_factory=dict)
    guard: dict = field(default_factory=dict)

    def __post_init__(self):
        q = set(self.states)
        for a, u, b in self.transitions:
            if a not in q or b not in q:
                raise ValueError(f"transition {a}-{u}->{b} leaves the state set")


# ---------------------------------------------------------------------------
# ODE order reduction

@dataclass(frozen=True)
class OdeEquation:
    """lead * y_var^(order) = sum(coeff * y_j^(d)) + forcing u_eq.

    terms: sequence of (var index, derivative order, coefficient).
    """

    var: int
    order: int
    lead: float = 1.0
    terms: tuple = ()

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("equation order must be >= 1")


def ode_to_first_order(equations):
    """Companion form of a linear higher-order ODE system.

    Returns (A, B, labels): x' = A x + B u with one state per derivative
    order, derivative-major (all plain variables first, then all first
    derivatives, ...), and B mapping one forcing input per equation to
    the row of its highest-order state.
    """
    eqs = list(equations)
    for eq in eqs:
        if eq.lead == 0:
            raise HybridError("DOMAIN", f"equation for y{eq.var} has zero leading coefficient")
    orders = {eq.var: eq.order for eq in eqs}
    if sorted(orders) != list(range(len(eqs))):
        raise ValueError("equations must cover variables 0..m-1 exactly once")
    labels = []
    for d in range(max(orders.values())):
        for var in sorted(orders):
            if orders[var] > d:
                labels.append((var, d))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    A = np.zeros((n, n))
    B = np.zeros((n, len(eqs)))
    for var, d in labels:
        row = index[(var, d)]
        if d + 1 < orders[var]:
            A[row, index[(var, d + 1)]] = 1.0
            continue
        eq = next(e for e in eqs if e.var == var)
        if d + 1 < eq.order:
            A[row, index[(var, d + 1)]] = 1.0
            continue
        for tvar, tord, coeff in eq.terms:
            if tord >= orders[tvar]:
                raise ValueError(
                    f"term y{tvar}^({tord}) is not a state (order {orders[tvar]})")
            A[row, index[(tvar, tord)]] += coeff / eq.lead
        B[row, eqs.index(eq)] = 1.0 / eq.lead
    return A, B, tuple(labels)


# ---------------------------------------------------------------------------
# text form, sharing the model language lexer

def parse_diagram(src: str) -> Diagram:
    """def diagram <name> : <items> end

    Items: `block <name> : kind <kind> [param value]... ;` with numeric
    params (ints or decimals) or int lists for `minus`; regular links
    `a -> b [. port] ;`; activation links `clock => b ;`.
    """
    cur = _p._Cursor(_p.tokenize(src))
    cur.expect("def")
    cur.expect("diagram")
    name = cur.ident("diagram name").text
    cur.expect(":")
    builder = DiagramBuilder(name)
    while not cur.at("end") and not cur.at_kind("eof"):
        first = cur.ident("'block' or a link source")
        if first.text == "block":
            bname = cur.ident("block name").text
            cur.expect(":")
            cur.expect("kind")
            kind_tok = cur.ident("block kind")
            if kind_tok.text not in BLOCK_KINDS:
                raise _p.ParseError(kind_tok.span, "UNKNOWN_TYPE",
                                    f"unknown block kind {kind_tok.text!r}")
            params = {}
            while not cur.at(";"):
                key = cur.ident("parameter name").text
                if key == "minus":
                    idxs = [cur.integer("port index", 0)]
                    while cur.accept(","):
                        idxs.append(cur.integer("port index", 0))
                    params[key] = tuple(idxs)
                else:
                    params[key] = cur.number(f"value for {key}")
            cur.expect(";")
            builder.block(bname, kind_tok.text, **params)
        elif cur.accept("->"):
            dst = cur.ident("link target").text
            port = 0
            if cur.accept("."):
                port = cur.integer("input port", 0)
            cur.expect(";")
            builder.link(first.text, dst, port)
        elif cur.accept("=>"):
            dst = cur.ident("activation target").text
            cur.expect(";")
            builder.activate(first.text, dst)
        else:
            t = cur.peek()
            raise _p.ParseError(t.span, "UNEXPECTED_TOKEN",
                                f"expected '->', '=>' or 'block', found {_p._found(t)}")
    cur.accept("end")
    return builder.build()
