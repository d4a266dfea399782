"""Batch pipeline driver.

Exit status: 0 success, 1 validation findings or tool errors, 2 usage.
Every subcommand is deterministic for fixed inputs and seeds; nothing is
written outside the paths named in the arguments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import macrogen, render
from .control import chr_tune
from .execsim import (DurationModel, ExecError, dump_timeline, load_timeline,
                      period_report, simulate_executive)
from .hybrid import check_synchronism, dump_trace, parse_diagram, simulate
from .model import ToolError, flatten, validate_algorithm, validate_architecture
from .parser import ParseError, parse_algorithm, parse_architecture
from .schedule import adequate, dump_table, insert_waits, load_table, verify_schedule


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_algorithm(path: str):
    return flatten(parse_algorithm(_read(path)))


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="adequa", description=__doc__)
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="parse and validate a model file")
    p.add_argument("model", help=".adm algorithm, .arm architecture, .dgm diagram")

    p = sub.add_parser("adequate", help="distribute and schedule an algorithm")
    p.add_argument("--algo", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--out", required=True, help="schedule table JSON path")

    p = sub.add_parser("render", help="render a schedule table")
    p.add_argument("table")
    p.add_argument("--svg", action="store_true")
    p.add_argument("--stu-per-cell", type=int, default=1)
    p.add_argument("--px-per-stu", type=float, default=4.0)
    p.add_argument("--synchros", action="store_true", help="draw synchro arcs (svg)")
    p.add_argument("--out")

    p = sub.add_parser("codegen", help="emit macro programs from a schedule")
    p.add_argument("table")
    p.add_argument("--algo", required=True)
    p.add_argument("--arch", required=True,
                   help="needed for sequencer membership and gate names")
    p.add_argument("--sequentialize", action="store_true")
    p.add_argument("--merge", action="store_true",
                   help="merge per-operator program lists (identity for one table)")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("expand", help="expand a macro program to target source")
    p.add_argument("program", help=".m4k file")
    p.add_argument("--target", required=True, help=".tdef file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run a hybrid diagram")
    p.add_argument("--diagram", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("execsim", help="replay a schedule with sampled durations")
    p.add_argument("table")
    p.add_argument("--mode", choices=["event_driven", "timer_blocking"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--best-ratio", type=float, default=1.0)
    p.add_argument("--algo", help="needed for timer_blocking gating")
    p.add_argument("--out")

    p = sub.add_parser("report", help="period statistics for a timeline")
    p.add_argument("timeline")
    p.add_argument("--algo", required=True)

    p = sub.add_parser("tune", help="CHR PID parameters from plant constants")
    p.add_argument("--ta", type=float, required=True)
    p.add_argument("--tu", type=float, required=True)
    p.add_argument("--ks", type=float, required=True)
    p.add_argument("--ts", type=float, default=5.0)
    return top


def _cmd_validate(ns) -> int:
    path = ns.model
    if path.endswith(".arm"):
        findings = validate_architecture(parse_architecture(_read(path)))
    elif path.endswith(".dgm"):
        findings = check_synchronism(parse_diagram(_read(path)))
    else:
        findings = validate_algorithm(parse_algorithm(_read(path)))
    for f in findings:
        print(str(f))
    return 1 if findings else 0


def _cmd_adequate(ns) -> int:
    flat = _load_algorithm(ns.algo)
    arch = parse_architecture(_read(ns.arch))
    table = insert_waits(adequate(flat, arch), flat)
    findings = verify_schedule(table, flat, arch)
    if findings:
        for f in findings:
            print(str(f), file=sys.stderr)
        return 1
    Path(ns.out).write_text(dump_table(table), encoding="utf-8")
    return 0


def _cmd_render(ns) -> int:
    table = load_table(_read(ns.table))
    if ns.svg:
        opts = render.RenderOptions(px_per_stu=ns.px_per_stu,
                                    show_synchros=ns.synchros)
        _emit(render.render_svg(table, opts), ns.out)
    else:
        opts = render.RenderOptions(stu_per_cell=ns.stu_per_cell)
        _emit(render.render_text(table, opts), ns.out)
    return 0


def _cmd_codegen(ns) -> int:
    table = load_table(_read(ns.table))
    flat = _load_algorithm(ns.algo)
    arch = parse_architecture(_read(ns.arch))
    progs = macrogen.emit_macros(table, flat, arch)
    if ns.sequentialize:
        progs = macrogen.sequentialize_comm(progs)
    if ns.merge:
        progs = [macrogen.merge_programs([p]) for p in progs]
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for prog in progs:
        (out_dir / f"{prog.operator}.m4k").write_text(
            macrogen.dump_program(prog), encoding="utf-8")
        print(out_dir / f"{prog.operator}.m4k")
    return 0


def _cmd_expand(ns) -> int:
    prog = macrogen.load_program(_read(ns.program))
    target = macrogen.parse_target(_read(ns.target), Path(ns.target).stem)
    _emit(macrogen.expand(prog, target, ns.iterations), ns.out)
    return 0


def _cmd_simulate(ns) -> int:
    d = parse_diagram(_read(ns.diagram))
    trace = simulate(d, ns.t_end, ns.dt)
    _emit(dump_trace(trace), ns.out)
    return 0


def _cmd_execsim(ns) -> int:
    table = load_table(_read(ns.table))
    flat = _load_algorithm(ns.algo) if ns.algo else None
    dm = DurationModel.from_table(table, ns.best_ratio, ns.seed)
    timeline = simulate_executive(table, dm, ns.mode, ns.reps, flat)
    _emit(dump_timeline(timeline), ns.out)
    return 0


def _cmd_report(ns) -> int:
    timeline = load_timeline(_read(ns.timeline))
    flat = _load_algorithm(ns.algo)
    rows = period_report(timeline, flat)
    print("block\tperiod\tmin\tmax\tmean\tviolations")
    for name in sorted(rows):
        r = rows[name]
        print(f"{r.block}\t{r.period_stu}\t{r.min_stu}\t{r.max_stu}"
              f"\t{r.mean_stu:.2f}\t{r.violations}")
    return 1 if any(r.violations for r in rows.values()) else 0


def _cmd_tune(ns) -> int:
    p = chr_tune(ns.ta, ns.tu, ns.ks, ns.ts)
    print(f"Kp={p.Kp:.6f} Ki={p.Ki:.8f} Kd={p.Kd:.5f} Tn={p.Tn:g} Tv={p.Tv:g} Ts={p.Ts:g}")
    return 0


_DISPATCH = {
    "validate": _cmd_validate,
    "adequate": _cmd_adequate,
    "render": _cmd_render,
    "codegen": _cmd_codegen,
    "expand": _cmd_expand,
    "simulate": _cmd_simulate,
    "execsim": _cmd_execsim,
    "report": _cmd_report,
    "tune": _cmd_tune,
}


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[ns.cmd](ns)
    except (ParseError,) as e:
        print(str(e), file=sys.stderr)
        return 1
    except ExecError as e:
        print(str(e), file=sys.stderr)
        return 1
    except ToolError as e:
        print(str(e), file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"no such file: {e.filename}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
