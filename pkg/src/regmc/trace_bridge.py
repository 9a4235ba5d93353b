"""Traces of the register models and their relation to schedules."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from . import register_models as rm
from .register_models import FR, FW, INTERNAL_TAGS, OW, SR, SW, Action, RegisterConfig
from .schedules import (
    INIT,
    Schedule,
    ScheduleError,
    precedes,
    read_event_lines,
    reads_from,
)


class SearchLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Trace:
    events: tuple
    model: str
    config: RegisterConfig

    @property
    def complete(self) -> bool:
        return is_complete(self.events)

    @property
    def single_writer(self) -> bool:
        return is_single_writer(self.events)

    def to_text(self) -> str:
        cfg = self.config
        lines = [f"trace n={cfg.n} domain={cfg.domain_size} init={cfg.initial}"]
        lines += [str(e) for e in self.events]
        return "\n".join(lines) + "\n"


def parse_trace(text: str, model: str) -> Trace:
    header, events = read_event_lines(text)
    cfg = RegisterConfig(header["domain"], header["init"], header["n"])
    return Trace(tuple(events), model, cfg)


def is_complete(events: Sequence[Action]) -> bool:
    last: dict = {}
    for e in events:
        if e.kind in (SR, SW, FR, FW):
            last[e.thread] = e.kind
    return all(k in (FR, FW) for k in last.values())


def is_single_writer(events: Sequence[Action]) -> bool:
    return len({e.thread for e in events if e.kind in (SW, FW)}) <= 1


def erase(trace) -> Schedule:
    """Drop order and execute actions; the rest, in order, is a schedule."""
    if isinstance(trace, Trace):
        events, cfg = trace.events, trace.config
        kept = tuple(e for e in events if e.kind not in INTERNAL_TAGS)
        return Schedule(kept, cfg.n, cfg.domain_size, cfg.initial)
    return tuple(e for e in trace if e.kind not in INTERNAL_TAGS)


def run(model: str, config: RegisterConfig, events: Sequence[Action]) -> frozenset:
    """The set of register states reachable by exactly the label sequence ``events``."""
    states = {rm.initial_register(model, config)}
    for e in events:
        nxt = set()
        for s in states:
            for a, succ in rm.transitions(s):
                if a == e:
                    nxt.add(succ)
        if not nxt:
            return frozenset()
        states = nxt
    return frozenset(states)


def is_trace(model: str, config: RegisterConfig, events: Sequence[Action]) -> bool:
    return bool(run(model, config, events))


def simulate_schedule(model: str, sched: Schedule, limit: int = 200_000) -> Optional[Trace]:
    """Find a trace whose erasure is ``sched``, inserting internal actions as late
    as possible; ``None`` when no such trace exists."""
    cfg = RegisterConfig(sched.domain_size, sched.initial, sched.n)
    events = sched.events
    dead: set = set()
    out: list = []
    budget = [limit]

    def go(pos: int, state) -> bool:
        if pos == len(events):
            return True
        key = (pos, state)
        if key in dead:
            return False
        budget[0] -= 1
        if budget[0] < 0:
            raise SearchLimitExceeded(f"simulation explored more than {limit} nodes")
        moves = rm.transitions(state)
        want = events[pos]
        for a, succ in moves:
            if a == want:
                out.append(a)
                if go(pos + 1, succ):
                    return True
                out.pop()
        for a, succ in moves:
            if a.kind in INTERNAL_TAGS:
                out.append(a)
                if go(pos, succ):
                    return True
                out.pop()
        dead.add(key)
        return False

    if go(0, rm.initial_register(model, cfg)):
        return Trace(tuple(out), model, cfg)
    return None


# ---- constructive transformation for write-order schedules ------------------------

def write_enumeration(sched: Schedule, family: dict) -> tuple:
    """Line up the writes and the non-overlapping reads in one sequence.

    Writes relevant to some read come first in the order the family agrees on,
    the remaining writes follow by invocation; each write is directly followed
    by the non-overlapping reads that read from it, sorted by invocation.
    """
    rho = reads_from(sched, family)
    reads = sched.reads
    relevant = set()
    for r in reads:
        relevant |= {w for w in family[r.ref] if w != r.ref}
    before: set = set()
    for r in reads:
        ser = list(family[r.ref])
        ser.remove(r.ref)
        for a_i, a in enumerate(ser):
            for b in ser[a_i + 1:]:
                before.add((a, b))
    ranked = sorted(relevant, key=lambda w: sum((v, w) in before for v in relevant))
    for a, b in zip(ranked, ranked[1:]):
        if (a, b) not in before:
            raise ScheduleError("family does not induce a total order on the relevant writes")
    rest = sorted((w for w in sched.writes if w.ref not in relevant), key=lambda w: w.inv)
    writes = ranked + [w.ref for w in rest]
    non_overlapping = [r for r in reads if precedes(sched, rho[r.ref], r)]
    enum = []
    for w in writes:
        enum.append(w)
        block = sorted((r for r in non_overlapping if rho[r.ref] == w), key=lambda r: r.inv)
        enum.extend(r.ref for r in block)
    return tuple(enum)


def construct_write_order_trace(sched: Schedule, family: dict) -> Trace:
    """Insert order actions into ``sched`` following the write enumeration."""
    enum = write_enumeration(sched, family)
    events = list(sched.events)
    out: list = []
    pos = 0

    def advance_past(index: int) -> None:
        nonlocal pos
        while pos <= index:
            out.append(events[pos])
            pos += 1

    for ref in enum:
        if ref == INIT:
            continue
        op = sched.op(ref)
        if op.is_read:
            advance_past(op.inv)
        else:
            advance_past(op.inv)
            out.append(Action(OW, ref.thread))
    out.extend(events[pos:])
    cfg = RegisterConfig(sched.domain_size, sched.initial, sched.n)
    return Trace(tuple(out), rm.REGULAR, cfg)


# ---- bounded enumeration ------------------------------------------------------------

def enumerate_traces(model: str, config: RegisterConfig, depth: int = 12, *,
                     complete: bool = False, single_writer: bool = False) -> Iterator[Trace]:
    """Every label sequence of length at most ``depth`` the model can produce.

    Sequences are visited depth-first in canonical action order and each is
    yielded once, however many runs produce it.
    """
    path: list = []

    def go(states: frozenset, writer: Optional[int]):
        if (not complete or is_complete(path)):
            yield Trace(tuple(path), model, config)
        if len(path) == depth:
            return
        moves: dict = {}
        for s in states:
            for a, succ in rm.transitions(s):
                moves.setdefault(a, set()).add(succ)
        for a in sorted(moves, key=rm.action_key):
            w = writer
            if single_writer and a.kind == SW:
                if writer is not None and a.thread != writer:
                    continue
                w = a.thread
            path.append(a)
            yield from go(frozenset(moves[a]), w)
            path.pop()

    yield from go(frozenset({rm.initial_register(model, config)}), None)


def check_enumeration(sched: Schedule, family: dict, enum: Sequence) -> list:
    """Describe each way ``enum`` breaks the enumeration requirements (empty if none)."""
    rho = reads_from(sched, family)
    problems = []
    if not enum or enum[0] != INIT:
        problems.append("does not start with w_init")
    pos = {ref: k for k, ref in enumerate(enum)}
    for a in enum:
        for b in enum:
            if precedes(sched, a, b) and pos[a] > pos[b]:
                problems.append(f"{a} precedes {b} but comes later")
    for ref in enum:
        op = sched.op(ref)
        if op.is_read:
            w = rho[ref]
            if w not in pos or pos[w] > pos[ref]:
                problems.append(f"{ref} appears before the write it reads from")
            elif any(sched.op(x).is_write for x in enum[pos[w] + 1:pos[ref]]):
                problems.append(f"a write separates {ref} from {w}")
    reads = [ref for ref in enum if sched.op(ref).is_read]
    for i, r1 in enumerate(reads):
        for r2 in reads[i + 1:]:
            if rho[r1] == rho[r2] and sched.op(r1).inv > sched.op(r2).inv:
                problems.append(f"{r1} and {r2} out of invocation order")
    return problems

