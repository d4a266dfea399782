"""Shared test helpers: random model generation and independent oracles.

Oracles here are written from the domain definitions, not from the
package code, so tests compare two separate derivations of the same
quantity.
"""

from __future__ import annotations

import copy
import math
import random

from adequa.model import flatten
from adequa.parser import parse_algorithm, parse_architecture
from adequa.schedule import (AdequationError, _State, _append_delay_carries,
                             _commit, _deadline, _finish_table, _plan_task,
                             adequate, build_problem)


# ---------------------------------------------------------------------------
# random instance generation (source text, so the parser is on the path)

def random_architecture_src(rng: random.Random, max_ops: int = 3) -> str:
    m = rng.randint(1, max_ops)
    lines = []
    for i in range(m):
        gates = " gates a" if m > 1 else ""
        lines.append(
            f"operator op{i} : type avr clock 14745600 stu 1000{gates};")
    if m > 1:
        attach = ",".join(f"op{i}.a" for i in range(m))
        kind = rng.choice(["sam_multi", "sam_multi", "sam_ptp"]) \
            if m == 2 else "sam_multi"
        bc = " broadcast" if rng.random() < 0.4 and kind == "sam_multi" else ""
        dur = rng.randint(1, 2)
        lines.append(f"medium bus : kind {kind}{bc} attach {attach} "
                     f"duration uint16={dur};")
    return "\n".join(lines) + "\n"


def random_algorithm_src(rng: random.Random, n_ops: int,
                         max_blocks: int = 8) -> str:
    n = rng.randint(1, max_blocks)
    periodic = rng.random() < 0.35
    base = rng.choice((8, 12, 16, 24)) if periodic else None
    head = f"def algorithm g :" if base is None \
        else f"def algorithm g period {base} :"
    lines = [head]
    outputs = []         # names of blocks that have an output port
    for i in range(n):
        name = f"B{i}"
        opts = []
        if base is not None and rng.random() < 0.3:
            divisors = [d for d in (base // 4, base // 2, base)
                        if d >= 1 and base % d == 0]
            opts.append(f"period {rng.choice(divisors)}")
        if n_ops > 1 and rng.random() < 0.2:
            opts.append(f"constraint op{rng.randrange(n_ops)}")
        opts.append(f"duration avr={rng.randint(1, 3)}")
        opt_txt = " " + " ".join(opts)
        if i == 0 or not outputs:
            kind = rng.choice(("sensor", "constant"))
            lines.append(f"  {kind} {name} : ! uint16[1] o1 1{opt_txt};")
            outputs.append(name)
            continue
        roll = rng.random()
        if roll < 0.15 and i < n - 1:
            src = rng.choice(outputs)
            lines.append(f"  delay {name} : ? uint16[1] i1 1, "
                         f"! uint16[1] o1 2{opt_txt};")
            outputs.append(name)
            feeds = [(src, name, "i1")]
        elif roll < 0.3:
            k = rng.randint(1, min(2, len(outputs)))
            srcs = rng.sample(outputs, k)
            ports = ", ".join(f"? uint16[1] i{j+1} {j+1}" for j in range(k))
            lines.append(f"  actuator {name} : {ports}{opt_txt};")
            feeds = [(s, name, f"i{j+1}") for j, s in enumerate(srcs)]
        else:
            k = rng.randint(1, min(2, len(outputs)))
            srcs = rng.sample(outputs, k)
            ports = ", ".join(f"? uint16[1] i{j+1} {j+1}" for j in range(k))
            lines.append(f"  function {name} : {ports}, "
                         f"! uint16[1] o1 {k+1}{opt_txt};")
            outputs.append(name)
            feeds = [(s, name, f"i{j+1}") for j, s in enumerate(srcs)]
        for s, d, port in feeds:
            lines.append(f"  {s}.o1 -> {d}.{port};")
    lines.append("end")
    return "\n".join(lines) + "\n"


def random_instance(seed: int):
    """(flat algorithm, architecture) pair; parses its own generated text."""
    rng = random.Random(seed)
    arch = parse_architecture(random_architecture_src(rng))
    n_ops = len(arch.operators)
    flat = flatten(parse_algorithm(random_algorithm_src(rng, n_ops)))
    return flat, arch


def schedulable_instance(seed: int, tries: int = 64):
    """Rejection-sample until adequate() succeeds; the rejected draws are
    legitimate PERIOD_OVERFLOW instances, not generator bugs."""
    from adequa.schedule import AdequationError
    for k in range(tries):
        flat, arch = random_instance(seed * 1000 + k)
        try:
            table = adequate(flat, arch)
        except AdequationError:
            continue
        return flat, arch, table
    raise AssertionError(f"no schedulable instance near seed {seed}")


# ---------------------------------------------------------------------------
# exhaustive scheduling oracle

class _Cap(Exception):
    pass


def best_makespan(flat, arch, node_cap: int = 60000):
    """Minimum makespan over every placement and commit order, using the
    scheduler's own planning primitives so costs are comparable.  Returns
    None when the search space exceeds node_cap nodes."""
    problem = build_problem(flat, arch)
    best = [math.inf]
    nodes = [0]

    def rec(state, remaining, placed):
        nodes[0] += 1
        if nodes[0] > node_cap:
            raise _Cap()
        floor = max([*state.op_free.values(), *state.medium_free.values(), 0])
        if floor >= best[0]:
            return
        if not remaining:
            leaf = copy.deepcopy(state)
            try:
                _append_delay_carries(leaf, problem)
            except AdequationError:
                return          # carry does not fit: infeasible leaf
            table = _finish_table(leaf, problem)
            best[0] = min(best[0], table.makespan())
            return
        ready = sorted((t for t in remaining
                        if all(p in placed for p, _ in problem.preds[t])),
                       key=lambda t: (t.block, t.rep))
        for task in ready:
            for op in problem.arch.operators:
                try:
                    plan = _plan_task(state, task, op)
                except Exception:
                    continue
                if plan is None or plan.finish > _deadline(problem, task):
                    continue
                child = copy.deepcopy(state)
                child_plan = _plan_task(child, task, op)
                _commit(child, child_plan)
                rec(child, remaining - {task}, placed | {task})

    try:
        rec(_State(problem), set(problem.tasks), set())
    except _Cap:
        return None
    return best[0] if best[0] < math.inf else None


# ---------------------------------------------------------------------------
# control oracles

def pid_reference(Kp, Ki, Kd, Ts, errors):
    """Direct summation of the discrete PID formula, no clamping."""
    out = []
    acc = 0.0
    prev = 0.0
    for e in errors:
        acc += e * Ts
        out.append(Kp * e + Ki * acc + Kd * (e - prev) / Ts)
        prev = e
    return out


def cascade_step_response(t, Ta, Tu, Ks, u=1.0):
    """Closed-form output of 1/(1+s*Tu) * Ks/(1+s*Ta) to a step of height u."""
    if Tu == 0:
        return Ks * u * (1.0 - math.exp(-t / Ta))
    if math.isclose(Ta, Tu):
        return Ks * u * (1.0 - (1.0 + t / Ta) * math.exp(-t / Ta))
    num = Ta * math.exp(-t / Ta) - Tu * math.exp(-t / Tu)
    return Ks * u * (1.0 - num / (Ta - Tu))
