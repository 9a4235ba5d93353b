"""Schedules of register operations and the conditions that classify them.

A schedule is a finite sequence of invocations and responses.  Operations are
recovered by pairing each thread's invocations with its responses; the special
write ``w_init`` of the initial value precedes everything.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

from .register_models import BASE_TAGS, FR, FW, SR, SW, Action

HOLDS = "holds"
FAILS = "fails"
UNKNOWN = "unknown"

READ = "read"
WRITE = "write"

DEFAULT_ATOMIC_LIMIT = 12
DEFAULT_WRITE_LIMIT = 10


class ScheduleError(ValueError):
    pass


class OperationRef(NamedTuple):
    """An operation occurrence: thread (``None`` for w_init) and its ordinal."""
    thread: Optional[int]
    ordinal: int

    def __str__(self) -> str:
        return "w_init" if self.thread is None else f"t{self.thread}#{self.ordinal}"


INIT = OperationRef(None, 0)


@dataclass(frozen=True)
class Operation:
    ref: OperationRef
    kind: str
    value: Optional[int]        # write value, or return value of a finished read
    inv: int                    # event index of the invocation (-1 for w_init)
    resp: Optional[int]         # event index of the response, None if pending

    @property
    def is_read(self) -> bool:
        return self.kind == READ

    @property
    def is_write(self) -> bool:
        return self.kind == WRITE

    def label(self) -> str:
        if self.ref == INIT:
            return f"w_init({self.value})"
        op = "r" if self.is_read else "w"
        val = "?" if self.value is None else self.value
        return f"{op}{self.ref.thread}.{self.ref.ordinal}({val})"


@dataclass(frozen=True)
class Verdict:
    condition: str
    status: str
    witness: object = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def __str__(self) -> str:
        text = f"{self.condition}: {self.status.upper()}"
        return f"{text} ({self.detail})" if self.detail else text


@dataclass(frozen=True)
class Schedule:
    events: tuple
    n: int = 2
    domain_size: int = 2
    initial: int = 0
    operations: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.n < 1 or self.domain_size < 1 or not 0 <= self.initial < self.domain_size:
            raise ScheduleError("bad schedule header")
        object.__setattr__(self, "operations", _pair_operations(self))

    # -- derived views --
    @property
    def ops(self) -> tuple:
        return self.operations

    def op(self, ref: OperationRef) -> Operation:
        for o in self.operations:
            if o.ref == ref:
                return o
        raise KeyError(f"no operation {ref} in schedule")

    @property
    def reads(self) -> tuple:
        return tuple(o for o in self.operations if o.is_read)

    @property
    def writes(self) -> tuple:
        return tuple(o for o in self.operations if o.is_write)

    @property
    def complete(self) -> bool:
        return all(o.resp is not None for o in self.operations)

    @property
    def single_writer(self) -> bool:
        return len({o.ref.thread for o in self.writes if o.ref != INIT}) <= 1

    def __len__(self) -> int:
        return len(self.events)

    def to_text(self) -> str:
        lines = [f"schedule n={self.n} domain={self.domain_size} init={self.initial}"]
        lines += [str(e) for e in self.events]
        return "\n".join(lines) + "\n"


def _pair_operations(s: Schedule) -> tuple:
    ops = [Operation(INIT, WRITE, s.initial, -1, -1)]
    active: dict = {}
    count = [0] * s.n
    for k, e in enumerate(s.events):
        if e.kind not in BASE_TAGS:
            raise ScheduleError(f"event {k}: {e} is not a schedule event")
        t = e.thread
        if not 0 <= t < s.n:
            raise ScheduleError(f"event {k}: thread {t} out of range")
        if e.kind in (FR, SW) and not 0 <= e.value < s.domain_size:
            raise ScheduleError(f"event {k}: value {e.value} outside domain")
        if e.kind in (SR, SW):
            if t in active:
                raise ScheduleError(f"event {k}: thread {t} invokes while an operation is active")
            active[t] = (e, k)
            continue
        if t not in active:
            raise ScheduleError(f"event {k}: response without invocation for thread {t}")
        inv, ik = active.pop(t)
        if (inv.kind == SR) != (e.kind == FR):
            raise ScheduleError(f"event {k}: response {e} does not match invocation {inv}")
        kind, value = (READ, e.value) if e.kind == FR else (WRITE, inv.value)
        ops.append(Operation(OperationRef(t, count[t]), kind, value, ik, k))
        count[t] += 1
    for t, (inv, ik) in active.items():
        kind, value = (READ, None) if inv.kind == SR else (WRITE, inv.value)
        ops.append(Operation(OperationRef(t, count[t]), kind, value, ik, None))
    ops.sort(key=lambda o: o.inv)
    return tuple(ops)


def read_event_lines(text: str) -> tuple:
    """Split text into a header dict and a list of actions (any tag)."""
    header = {"n": 2, "domain": 2, "init": 0}
    events = []
    for lineno, raw in enumerate(text.replace("/", "\n").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.split()[0] in ("schedule", "trace"):
            for tok in line.split()[1:]:
                key, _, val = tok.partition("=")
                if key not in header or not val.isdigit():
                    raise ScheduleError(f"line {lineno}: bad header field {tok!r}")
                header[key] = int(val)
            continue
        try:
            events.append(Action.parse(line))
        except ValueError as exc:
            raise ScheduleError(f"line {lineno}: {exc}") from None
    return header, events


def parse_schedule(text: str) -> Schedule:
    """Parse ``schedule n=.. domain=.. init=..`` followed by one event per line.

    ``#`` starts a comment and ``/`` may separate events on one line.  Without a
    header the defaults ``n=2 domain=2 init=0`` apply.
    """
    header, events = read_event_lines(text)
    bad = [e for e in events if e.kind not in BASE_TAGS]
    if bad:
        raise ScheduleError(f"{bad[0]} is not a schedule event")
    return Schedule(tuple(events), header["n"], header["domain"], header["init"])


# ---- order relations -----------------------------------------------------------

def _resp(o: Operation) -> float:
    return float("inf") if o.resp is None else o.resp


def precedes(sched: Schedule, o, o2) -> bool:
    """``o <_sigma o2``: the response of ``o`` comes before the invocation of ``o2``."""
    a = o if isinstance(o, Operation) else sched.op(o)
    b = o2 if isinstance(o2, Operation) else sched.op(o2)
    if a.ref == b.ref:
        return False
    if a.ref == INIT:
        return True
    if b.ref == INIT:
        return False
    return _resp(a) < b.inv


def _as_op(sched, o) -> Operation:
    return o if isinstance(o, Operation) else sched.op(o)


def _need(o: Operation, kind: str) -> None:
    if o.kind != kind:
        raise ScheduleError(f"{o.label()} is not a {kind}")


def fixed_writes(sched: Schedule, r) -> frozenset:
    r = _as_op(sched, r)
    _need(r, READ)
    return frozenset(w.ref for w in sched.writes if precedes(sched, w, r))


def relevant_writes(sched: Schedule, r) -> frozenset:
    r = _as_op(sched, r)
    _need(r, READ)
    return frozenset(w.ref for w in sched.writes if not precedes(sched, r, w))


def can_read_from(sched: Schedule, r, w) -> bool:
    r, w = _as_op(sched, r), _as_op(sched, w)
    _need(r, READ)
    _need(w, WRITE)
    if precedes(sched, r, w):
        return False
    return not any(precedes(sched, w, w2) and precedes(sched, w2, r) for w2 in sched.writes)


def has_overlapping_writes(sched: Schedule, o) -> bool:
    o = _as_op(sched, o)
    return any(w.ref != o.ref and not precedes(sched, o, w) and not precedes(sched, w, o)
               for w in sched.writes)


def overlapping_writes(sched: Schedule, o) -> tuple:
    o = _as_op(sched, o)
    return tuple(w for w in sched.writes
                 if w.ref != o.ref and not precedes(sched, o, w) and not precedes(sched, w, o))


# ---- single-writer conditions ---------------------------------------------------

def _require_single_writer(sched: Schedule) -> None:
    if not sched.single_writer:
        raise ScheduleError("condition is defined on single-writer schedules only")


def _require_complete(sched: Schedule) -> None:
    if not sched.complete:
        raise ScheduleError("condition is defined on complete schedules only")


def _max_fixed_value(sched: Schedule, r: Operation) -> int:
    fixed = [w for w in sched.writes if precedes(sched, w, r)]
    # single writer: fixed writes are totally ordered, the latest response is the maximum
    return max(fixed, key=lambda w: w.resp).value


def check_safe(sched: Schedule) -> Verdict:
    _require_single_writer(sched)
    _require_complete(sched)
    for r in sched.reads:
        if not has_overlapping_writes(sched, r) and r.value != _max_fixed_value(sched, r):
            return Verdict("safe", FAILS, r.ref, f"{r.label()} should return {_max_fixed_value(sched, r)}")
    return Verdict("safe", HOLDS)


def check_regular(sched: Schedule) -> Verdict:
    _require_single_writer(sched)
    _require_complete(sched)
    for r in sched.reads:
        allowed = {_max_fixed_value(sched, r)} | {w.value for w in overlapping_writes(sched, r)}
        if r.value not in allowed:
            return Verdict("regular", FAILS, r.ref,
                           f"{r.label()} may only return one of {sorted(allowed)}")
    return Verdict("regular", HOLDS)


# ---- serialisation search --------------------------------------------------------

def is_legal_serialisation(sched: Schedule, order: Sequence[OperationRef]) -> bool:
    """Independent re-check: ``order`` respects ``<_sigma`` and every read returns
    the value of the closest preceding write in ``order``."""
    ops = [sched.op(ref) for ref in order]
    if len(set(order)) != len(order):
        return False
    for a, b in itertools.combinations(ops, 2):
        if precedes(sched, b, a):
            return False
    last = None
    for o in ops:
        if o.is_write:
            last = o
        elif last is None or last.value != o.value:
            return False
    return True


def _legal_search(sched: Schedule, ops: Sequence[Operation]) -> Optional[tuple]:
    """Backtracking search for a legal serialisation of ``ops`` (memoised on the
    placed set and the value of the latest placed write)."""
    ops = list(ops)
    idx = {o.ref: k for k, o in enumerate(ops)}
    must_before = [0] * len(ops)
    for a in ops:
        for b in ops:
            if precedes(sched, a, b):
                must_before[idx[b.ref]] |= 1 << idx[a.ref]
    full = (1 << len(ops)) - 1
    dead: set = set()
    order: list = []

    def go(placed: int, value: Optional[int]) -> bool:
        if placed == full:
            return True
        key = (placed, value)
        if key in dead:
            return False
        for k, o in enumerate(ops):
            bit = 1 << k
            if placed & bit or must_before[k] & ~placed:
                continue
            if o.is_read:
                if o.value != value:
                    continue
                nxt = value
            else:
                nxt = o.value
            order.append(o.ref)
            if go(placed | bit, nxt):
                return True
            order.pop()
        dead.add(key)
        return False

    return tuple(order) if go(0, None) else None


def check_atomic(sched: Schedule, limit: int = DEFAULT_ATOMIC_LIMIT) -> Verdict:
    _require_complete(sched)
    if len(sched.ops) > limit:
        return Verdict("atomic", UNKNOWN, None, f"{len(sched.ops)} operations exceed limit {limit}")
    order = _legal_search(sched, sched.ops)
    if order is None:
        return Verdict("atomic", FAILS, None, "no legal serialisation of all operations")
    return Verdict("atomic", HOLDS, order)


def check_weak(sched: Schedule, limit: int = DEFAULT_ATOMIC_LIMIT) -> Verdict:
    _require_complete(sched)
    writes = sched.writes
    if len(writes) + 1 > limit:
        return Verdict("weak", UNKNOWN, None, f"{len(writes) + 1} operations exceed limit {limit}")
    witness = {}
    for r in sched.reads:
        order = _legal_search(sched, list(writes) + [r])
        if order is None:
            return Verdict("weak", FAILS, r.ref, f"no legal serialisation of the writes and {r.label()}")
        witness[r.ref] = order
    return Verdict("weak", HOLDS, witness)


def write_linear_extensions(sched: Schedule) -> Iterator[tuple]:
    """All total orders of the writes consistent with ``<_sigma`` (w_init first)."""
    writes = list(sched.writes)
    preds = {w.ref: {v.ref for v in writes if precedes(sched, v, w)} for w in writes}
    order: list = []
    placed: set = set()

    def go():
        if len(order) == len(writes):
            yield tuple(order)
            return
        for w in writes:
            if w.ref not in placed and preds[w.ref] <= placed:
                placed.add(w.ref)
                order.append(w.ref)
                yield from go()
                order.pop()
                placed.discard(w.ref)

    yield from go()


def _place_read(sched: Schedule, global_order: Sequence[OperationRef], r: Operation):
    """Insert ``r`` into the restriction of ``global_order`` to its relevant writes.

    Returns the resulting r-serialisation or ``None``.  The read must come after
    every fixed write and right after a write carrying its return value; the
    latest such position is preferred.
    """
    rel = relevant_writes(sched, r)
    fixed = fixed_writes(sched, r)
    restricted = [w for w in global_order if w in rel]
    last_fixed = max(k for k, w in enumerate(restricted) if w in fixed)
    for k in range(len(restricted) - 1, last_fixed - 1, -1):
        if sched.op(restricted[k]).value == r.value:
            return tuple(restricted[:k + 1]) + (r.ref,) + tuple(restricted[k + 1:])
    return None


def check_write_order(sched: Schedule, limit: int = DEFAULT_WRITE_LIMIT) -> Verdict:
    """Search one global write order that every read can be consistently placed in.

    The witness is a dict with the global order under ``"order"`` and the per-read
    serialisations under ``"family"``.
    """
    _require_complete(sched)
    if len(sched.writes) > limit:
        return Verdict("write-order", UNKNOWN, None,
                       f"{len(sched.writes)} writes exceed limit {limit}")
    reads = sched.reads
    for order in write_linear_extensions(sched):
        family = {}
        for r in reads:
            ser = _place_read(sched, order, r)
            if ser is None:
                break
            family[r.ref] = ser
        else:
            return Verdict("write-order", HOLDS, {"order": order, "family": family})
    return Verdict("write-order", FAILS, None, "no global write order admits every read")


def validate_family(sched: Schedule, family: dict) -> None:
    """Raise ``ScheduleError`` unless ``family`` is a write-order witness."""
    reads = sched.reads
    if set(family) != {r.ref for r in reads}:
        raise ScheduleError("family must give one serialisation per read")
    for r in reads:
        ser = tuple(family[r.ref])
        if set(ser) != set(relevant_writes(sched, r)) | {r.ref} or len(ser) != len(set(ser)):
            raise ScheduleError(f"serialisation for {r.label()} is not over its relevant writes")
        if not is_legal_serialisation(sched, ser):
            raise ScheduleError(f"serialisation for {r.label()} is not legal")
    for r1, r2 in itertools.combinations(reads, 2):
        s1, s2 = family[r1.ref], family[r2.ref]
        shared = set(relevant_writes(sched, r1)) & set(relevant_writes(sched, r2))
        p1 = {w: k for k, w in enumerate(s1)}
        p2 = {w: k for k, w in enumerate(s2)}
        for a, b in itertools.combinations(shared, 2):
            if (p1[a] < p1[b]) != (p2[a] < p2[b]):
                raise ScheduleError(f"{r1.label()} and {r2.label()} disagree on {a} and {b}")


def reads_from(sched: Schedule, family: dict) -> dict:
    """Map each read to the write directly before it in its serialisation."""
    validate_family(sched, family)
    rho = {}
    for r in sched.reads:
        ser = tuple(family[r.ref])
        rho[r.ref] = ser[ser.index(r.ref) - 1]
    return rho


CONDITIONS = {
    "safe": check_safe,
    "regular": check_regular,
    "atomic": check_atomic,
    "weak": check_weak,
    "write-order": check_write_order,
}


# ---- exhaustive generation ---------------------------------------------------------

def generate_schedules(n: int, domain_size: int, max_ops: int, *, initial: int = 0,
                       single_writer: Optional[bool] = None,
                       writer: Optional[int] = None) -> Iterator[Schedule]:
    """Every complete schedule with at most ``max_ops`` thread operations.

    ``single_writer=True`` keeps only schedules whose writes are all by one thread
    (``writer`` pins that thread).
    """
    for events in _gen_events(n, domain_size, max_ops, single_writer, writer):
        yield Schedule(events, n, domain_size, initial)


def _gen_events(n, d, max_ops, single_writer, writer):
    events: list = []
    active: list = [None] * n   # None idle, else the invocation
    state = {"ops": 0, "writer": writer}

    def go():
        if all(a is None for a in active):
            yield tuple(events)
        for t in range(n):
            a = active[t]
            if a is None:
                if state["ops"] >= max_ops:
                    continue
                state["ops"] += 1
                active[t] = Action(SR, t)
                events.append(active[t])
                yield from go()
                events.pop()
                can_write = True
                prev_writer = state["writer"]
                if single_writer:
                    if prev_writer is not None and prev_writer != t:
                        can_write = False
                if can_write:
                    if single_writer:
                        state["writer"] = t
                    for v in range(d):
                        active[t] = Action(SW, t, v)
                        events.append(active[t])
                        yield from go()
                        events.pop()
                    state["writer"] = prev_writer
                active[t] = None
                state["ops"] -= 1
            else:
                active[t] = None
                if a.kind == SR:
                    for v in range(d):
                        events.append(Action(FR, t, v))
                        yield from go()
                        events.pop()
                else:
                    events.append(Action(FW, t))
                    yield from go()
                    events.pop()
                active[t] = a

    yield from go()


def schedule_from_events(events: Iterable[Action], n: int, domain_size: int, initial: int = 0) -> Schedule:
    return Schedule(tuple(events), n, domain_size, initial)
