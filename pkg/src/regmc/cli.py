"""``regmc``: check algorithms, classify schedules, simulate schedules on register models.

Exit codes: 0 everything holds, 1 a violation or failure, 2 inconclusive,
3 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import algorithms, checker, schedules, trace_bridge
from .register_models import MODELS

EXIT_OK, EXIT_VIOLATED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_assignment(text: Optional[str]) -> dict:
    """``all=safe,turn=atomic`` -> ``{"all": "safe", "turn": "atomic"}``."""
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, eq, model = item.partition("=")
        if not eq or not name or model not in MODELS:
            raise UsageError(f"bad register assignment {item!r} (expected name=safe|regular|atomic)")
        out[name.strip()] = model
    return out


def _split_list(text: str, allowed, what: str) -> list:
    items = [x.strip() for x in text.split(",") if x.strip()]
    for x in items:
        if x not in allowed:
            raise UsageError(f"unknown {what} {x!r}; choose from {', '.join(allowed)}")
    return items


def _build_program(args) -> algorithms.Program:
    params: dict = {}
    name = args.algorithm
    if args.threads is not None:
        params["n"] = args.threads
    if args.variant is not None:
        if name != "lamport-3bit":
            raise UsageError("--variant applies to lamport-3bit only")
        params["variant"] = args.variant
    if args.reset_order is not None:
        if name != "szymanski-bits":
            raise UsageError("--reset-order applies to szymanski-bits only")
        params["reset_order"] = tuple(x.strip() for x in args.reset_order.split(","))
    if args.semaphore is not None:
        if name != "szymanski-3bit":
            raise UsageError("--semaphore applies to szymanski-3bit only")
        params["semaphore"] = args.semaphore
    try:
        return algorithms.build(name, **params)
    except algorithms.ProgramError as exc:
        raise UsageError(str(exc)) from None


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


# ---- check ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    prog = _build_program(args)
    props = _split_list(args.property, ("mutex", "reach"), "property")
    limit = args.state_limit if args.state_limit is not None else checker.state_limit_from_env()
    try:
        cfg = checker.SystemConfig.make(prog, parse_assignment(args.registers), state_limit=limit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    graph = checker.explore(cfg)
    verdicts = checker.check_properties(graph, props, args.reach_semantics)
    models = dict(zip(prog.register_names, cfg.models))
    files = {}
    for v in verdicts:
        if v.counterexample is None or args.no_files:
            continue
        stem = os.path.join(args.out_dir, f"{prog.name}-{v.property.replace('(', '').replace(')', '')}")
        os.makedirs(args.out_dir, exist_ok=True)
        tl = checker.render_timeline(v.counterexample, prog.n_threads)
        written = {"trace": stem + ".trace", "timeline": stem + ".timeline.txt"}
        with open(written["trace"], "w") as fh:
            fh.write(f"# {v.counterexample.note}\n" + v.counterexample.to_text())
        with open(written["timeline"], "w") as fh:
            fh.write(tl.to_text())
        svg = args.timeline if args.timeline else stem + ".svg"
        if args.timeline and len([x for x in verdicts if x.counterexample]) > 1:
            base, ext = os.path.splitext(args.timeline)
            svg = f"{base}-{v.property.replace('(', '').replace(')', '')}{ext or '.svg'}"
        with open(svg, "w") as fh:
            fh.write(tl.to_svg())
        written["svg"] = svg
        files[v.property] = written
    if args.export_graph:
        with open(args.export_graph, "w") as fh:
            graph.export(fh)
    summary = {p: checker.summarize(verdicts, p) for p in props}
    payload = {
        "algorithm": prog.name,
        "threads": prog.n_threads,
        "params": {k: list(v) if isinstance(v, tuple) else v for k, v in prog.params.items()},
        "registers": models,
        "states": graph.n_states,
        "edges": graph.n_edges,
        "complete": graph.complete,
        "summary": summary,
        "verdicts": [{"property": v.property, "outcome": v.outcome, "detail": v.detail,
                      "counterexample": None if v.counterexample is None else
                      [str(l) for l in v.counterexample.labels],
                      "files": files.get(v.property)} for v in verdicts],
    }
    mark = {checker.HOLDS: "holds", checker.VIOLATED: "VIOLATED", checker.INCONCLUSIVE: "inconclusive"}
    lines = [f"{prog.name} threads={prog.n_threads} "
             + " ".join(f"{k}={v}" for k, v in sorted(models.items())),
             f"states={graph.n_states} edges={graph.n_edges}" + ("" if graph.complete else " (state limit hit)")]
    lines += [f"{p:<6} {mark[summary[p]]}" for p in props]
    for v in verdicts:
        if v.outcome != checker.HOLDS:
            lines.append(f"  {v.property}: {v.outcome}" + (f" ({v.detail})" if v.detail else ""))
            if v.counterexample is not None:
                lines.append(f"    {v.counterexample.note}; {len(v.counterexample.steps)} steps")
                for kind, path in files.get(v.property, {}).items():
                    lines.append(f"    {kind}: {path}")
    _emit(args, payload, "\n".join(lines))
    outcomes = set(summary.values())
    if checker.VIOLATED in outcomes:
        return EXIT_VIOLATED
    if checker.INCONCLUSIVE in outcomes:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ---- schedule ------------------------------------------------------------------------

def _read_schedule(path: str) -> schedules.Schedule:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(str(exc)) from None
    try:
        return schedules.parse_schedule(text)
    except schedules.ScheduleError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _witness_json(w):
    if w is None:
        return None
    if isinstance(w, schedules.OperationRef):
        return str(w)
    if isinstance(w, dict):
        return {str(k): _witness_json(v) for k, v in w.items()}
    if isinstance(w, (list, tuple)):
        return [_witness_json(x) for x in w]
    return str(w)


def cmd_schedule(args) -> int:
    sched = _read_schedule(args.file)
    names = list(schedules.CONDITIONS) if args.condition == "all" else \
        _split_list(args.condition, tuple(schedules.CONDITIONS), "condition")
    results = []
    for name in names:
        fn = schedules.CONDITIONS[name]
        if name in ("safe", "regular") and not sched.single_writer:
            if args.condition == "all":
                results.append((name, "n/a", None, "multi-writer schedule"))
                continue
            raise UsageError(f"{name} is defined on single-writer schedules only")
        try:
            if name in ("atomic", "weak"):
                v = fn(sched, limit=args.limit or schedules.DEFAULT_ATOMIC_LIMIT)
            elif name == "write-order":
                v = fn(sched, limit=args.limit or schedules.DEFAULT_WRITE_LIMIT)
            else:
                v = fn(sched)
        except schedules.ScheduleError as exc:
            raise UsageError(str(exc)) from None
        results.append((name, v.status, v.witness, v.detail))
    lines = [f"{name:<12} {status.upper()}" + (f"  {detail}" if detail else "")
             for name, status, _, detail in results]
    for name, status, witness, _ in results:
        if name in ("atomic",) and status == schedules.HOLDS:
            lines.append("  serialisation: " + " ".join(sched.op(r).label() for r in witness))
        if name == "write-order" and status == schedules.HOLDS:
            lines.append("  write order: " + " ".join(sched.op(r).label() for r in witness["order"]))
    payload = {"events": len(sched.events), "operations": len(sched.ops),
               "results": [{"condition": n, "status": s, "detail": d, "witness": _witness_json(w)}
                           for n, s, w, d in results]}
    _emit(args, payload, "\n".join(lines))
    statuses = {s for _, s, _, _ in results}
    if schedules.FAILS in statuses:
        return EXIT_VIOLATED
    if schedules.UNKNOWN in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ---- simulate ------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    sched = _read_schedule(args.file)
    if args.construct:
        if args.model != "regular":
            raise UsageError("--construct builds regular-register traces only")
        verdict = schedules.check_write_order(sched)
        if verdict.status == schedules.UNKNOWN:
            _emit(args, {"status": "unknown", "detail": verdict.detail}, f"UNKNOWN: {verdict.detail}")
            return EXIT_INCONCLUSIVE
        if not verdict.holds:
            _emit(args, {"status": "not-simulable", "detail": verdict.detail},
                  "NOT SIMULABLE: the schedule has no write-order witness")
            return EXIT_VIOLATED
        trace = trace_bridge.construct_write_order_trace(sched, verdict.witness["family"])
    else:
        try:
            trace = trace_bridge.simulate_schedule(args.model, sched, limit=args.limit)
        except trace_bridge.SearchLimitExceeded as exc:
            _emit(args, {"status": "unknown", "detail": str(exc)}, f"UNKNOWN: {exc}")
            return EXIT_INCONCLUSIVE
        if trace is None:
            _emit(args, {"status": "not-simulable"}, f"NOT SIMULABLE in the {args.model} model")
            return EXIT_VIOLATED
    text = trace.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    _emit(args, {"status": "simulable", "trace": [str(e) for e in trace.events], "out": args.out},
          text if not args.out else f"trace written to {args.out}")
    return EXIT_OK


# ---- entry point -----------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="regmc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="explore an algorithm and check mutex/reach")
    c.add_argument("algorithm", choices=sorted(algorithms.BUILDERS))
    c.add_argument("--threads", type=int)
    c.add_argument("--variant", choices=(algorithms.SNAPSHOT, algorithms.REREAD))
    c.add_argument("--reset-order", help="comma-separated permutation of intent,door_in,door_out")
    c.add_argument("--semaphore", dest="semaphore", action="store_true", default=None)
    c.add_argument("--no-semaphore", dest="semaphore", action="store_false")
    c.add_argument("--registers", default="", help="e.g. all=safe,turn=atomic (default atomic)")
    c.add_argument("--property", default="mutex,reach")
    c.add_argument("--reach-semantics", choices=(checker.REACHABLE, checker.FORMULA),
                   default=checker.REACHABLE)
    c.add_argument("--state-limit", type=int)
    c.add_argument("--out-dir", default=".", help="where counterexample files go")
    c.add_argument("--no-files", action="store_true", help="do not write counterexample files")
    c.add_argument("--timeline", help="SVG path for the counterexample timeline")
    c.add_argument("--export-graph", help="write the state graph as '<src> <action> <dst>' lines")
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("schedule", help="evaluate schedule conditions")
    s.add_argument("file")
    s.add_argument("--condition", default="all")
    s.add_argument("--limit", type=int)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_schedule)

    m = sub.add_parser("simulate", help="find a register trace for a schedule")
    m.add_argument("file")
    m.add_argument("--model", choices=MODELS, required=True)
    m.add_argument("--construct", action="store_true",
                   help="build the trace from a write-order witness (regular only)")
    m.add_argument("--out")
    m.add_argument("--limit", type=int, default=200_000)
    m.add_argument("--format", choices=("text", "json"), default="text")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"regmc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
