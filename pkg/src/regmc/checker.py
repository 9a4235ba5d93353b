"""Explicit-state checking of thread programs composed with register processes.

A system state is the tuple of interned thread-state ids, interned register-state
ids and the semaphore holder (0 when free, ``t + 1`` when held by thread ``t``).
States are bit-packed into a few 64-bit words for the seen-set.  Purely local statements
(assignments and branches) are folded into the visible step that precedes them,
so every edge of the graph carries an action: a register action of one register,
an emitted ``crit``/``noncrit``, or a semaphore action.
"""
from __future__ import annotations

import collections
import os
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as _k
from . import register_models as rm
from .algorithms import (
    Assign,
    Branch,
    Emit,
    Halt,
    Program,
    Read,
    SemAcquire,
    SemRelease,
    Write,
)
from .register_models import (
    ACQUIRE,
    ATOMIC,
    CRIT,
    FR,
    FW,
    INTERNAL_TAGS,
    MODELS,
    NONCRIT,
    RELEASE,
    SR,
    SW,
    Action,
    RegisterConfig,
)

DEFAULT_STATE_LIMIT = 50_000_000
HOLDS = "holds"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

# reach semantics
REACHABLE = "reachable"   # from every crit(i)-free continuation a crit(i)-enabled state stays reachable
FORMULA = "formula"       # no crit(i)-free infinite path right after a noncrit(i)

_K_READ, _K_WRITE, _K_EMIT, _K_ACQ, _K_REL, _K_HALT = range(6)


def state_limit_from_env(default: int = DEFAULT_STATE_LIMIT) -> int:
    raw = os.environ.get("REGMC_STATE_LIMIT")
    if not raw:
        return default
    try:
        val = int(raw.replace("_", ""))
    except ValueError:
        raise ValueError(f"REGMC_STATE_LIMIT must be an integer, got {raw!r}") from None
    if val < 1:
        raise ValueError("REGMC_STATE_LIMIT must be positive")
    return val


@dataclass(frozen=True)
class SystemConfig:
    program: Program
    models: tuple                         # one model name per register, in program order
    state_limit: int = DEFAULT_STATE_LIMIT

    @classmethod
    def make(cls, program: Program, assignment: Optional[dict] = None,
             default: str = ATOMIC, state_limit: Optional[int] = None) -> "SystemConfig":
        """Build from ``{"all": model, reg: model, ...}``; per-register entries win."""
        assignment = dict(assignment or {})
        base = assignment.pop("all", default)
        names = program.register_names
        for name, model in assignment.items():
            if name not in names:
                raise ValueError(f"{program.name} has no register {name!r}")
        models = tuple(assignment.get(name, base) for name in names)
        for m in models + (base,):
            if m not in MODELS:
                raise ValueError(f"unknown register model {m!r}")
        limit = state_limit_from_env() if state_limit is None else state_limit
        return cls(program, models, limit)

    def model_of(self, reg: str) -> str:
        return self.models[self.program.register_names.index(reg)]


@dataclass(frozen=True)
class Label:
    action: Action
    register: Optional[str] = None

    def __str__(self) -> str:
        if self.register is None:
            return str(self.action)
        return f"{self.register}.{self.action}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        head, _, rest = text.partition(" ")
        reg, dot, kind = head.rpartition(".")
        if not dot:
            return cls(Action.parse(text))
        return cls(Action.parse(f"{kind} {rest}"), reg)


# state encodings are interned per System; keep one per config while anything uses it
_SYSTEMS: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()
_RECENT: collections.deque = collections.deque(maxlen=4)


class System:
    """Interning tables and the successor function for one configuration."""

    def __init__(self, config: SystemConfig):
        self.config = config
        prog = self.program = config.program
        self.n = prog.n_threads
        self.nreg = len(prog.registers)
        self.reg_index = {name: k for k, name in enumerate(prog.register_names)}
        self.labels: list = []
        self._label_ids: dict = {}
        # thread states: (t, pc, phase, locals)
        self.tstates: list = []
        self._tids: dict = {}
        self._tinfo: list = []        # (kind, register index or -1, write value or -1)
        self._tmemo: dict = {}
        # register states, one table per register
        self.rstates = [[] for _ in range(self.nreg)]
        self._rids = [{} for _ in range(self.nreg)]
        self._rmoves = [[] for _ in range(self.nreg)]   # rid -> (per-thread dict, internal list)
        init_regs = []
        for k, reg in enumerate(prog.registers):
            cfg = RegisterConfig(reg.domain_size, reg.initial, self.n)
            init_regs.append(self._rid(k, rm.initial_register(config.models[k], cfg)))
        init_threads = [self._settle(t, 0, prog.initial_locals()) for t in range(self.n)]
        self.initial = tuple(init_threads) + tuple(init_regs) + (0,)
        self.width = len(self.initial)

    # -- interning --------------------------------------------------------------

    @classmethod
    def of(cls, config) -> "System":
        """The live ``System`` for ``config``, shared so that state ids agree across calls."""
        if isinstance(config, System):
            return config
        system = _SYSTEMS.get(config)
        if system is None:
            system = _SYSTEMS[config] = cls(config)
        if system in _RECENT:
            _RECENT.remove(system)
        _RECENT.append(system)
        return system

    def label_id(self, label: Label) -> int:
        lid = self._label_ids.get(label)
        if lid is None:
            lid = self._label_ids[label] = len(self.labels)
            self.labels.append(label)
        return lid

    def _rid(self, k: int, state) -> int:
        table = self._rids[k]
        rid = table.get(state)
        if rid is None:
            rid = table[state] = len(self.rstates[k])
            self.rstates[k].append(state)
            per_thread: dict = {}
            internal = []
            name = self.program.registers[k].name
            for a, succ in rm.transitions(state):
                if a.kind in INTERNAL_TAGS:
                    internal.append((a, succ))
                else:
                    per_thread.setdefault((a.thread, a.kind), []).append((a, succ))
            self._rmoves[k].append([per_thread, internal, name, False])
        return rid

    def _reg_moves(self, k: int, rid: int, key):
        entry = self._rmoves[k][rid]
        if not entry[3]:
            per_thread = {tk: [(self.label_id(Label(a, entry[2])), self._rid(k, s)) for a, s in lst]
                          for tk, lst in entry[0].items()}
            internal = [(self.label_id(Label(a, entry[2])), self._rid(k, s)) for a, s in entry[1]]
            entry[0], entry[1], entry[3] = per_thread, internal, True
        if key is None:
            return entry[1]
        return entry[0].get(key, ())

    def _tid(self, t: int, pc: int, phase: int, loc) -> int:
        key = (t, pc, phase, loc)
        tid = self._tids.get(key)
        if tid is None:
            tid = self._tids[key] = len(self.tstates)
            self.tstates.append(key)
            self._tinfo.append(self._classify(t, pc, loc))
        return tid

    def _classify(self, t: int, pc: int, loc):
        st = self.program.code[t][pc]
        if isinstance(st, (Read, Write)):
            reg = st.reg(loc) if callable(st.reg) else st.reg
            k = self.reg_index[reg]
            if isinstance(st, Read):
                return (_K_READ, k, -1)
            val = st.value(loc) if callable(st.value) else st.value
            writers = self.program.registers[k].writers
            if writers is not None and t not in writers:
                raise ValueError(f"thread {t} pc {pc}: may not write {reg}")
            if not 0 <= val < self.program.registers[k].domain_size:
                raise ValueError(f"thread {t} pc {pc}: writes {val} outside the domain of {reg}")
            return (_K_WRITE, k, val)
        if isinstance(st, Emit):
            return (_K_EMIT, -1, -1)
        if isinstance(st, SemAcquire):
            return (_K_ACQ, -1, -1)
        if isinstance(st, SemRelease):
            return (_K_REL, -1, -1)
        if isinstance(st, Halt):
            return (_K_HALT, -1, -1)
        raise AssertionError(f"unsettled statement {st}")

    def _settle(self, t: int, pc: int, loc) -> int:
        """Run local statements from ``pc`` up to the next visible one."""
        code = self.program.code[t]
        for _ in range(10_000):
            st = code[pc]
            if isinstance(st, Assign):
                loc = loc._replace(**{st.local: st.expr(loc)})
                pc += 1
            elif isinstance(st, Branch):
                if st.cond(loc):
                    pc = st.then
                elif st.orelse is not None:
                    pc = st.orelse
                else:
                    pc += 1
            else:
                if self.program.scratch:
                    loc = loc._replace(**{s: 0 for s in self.program.scratch})
                return self._tid(t, pc, 0, loc)
        raise RuntimeError(f"thread {t} loops without a visible step at pc {pc}")

    # -- successors -----------------------------------------------------------------

    def thread_moves(self, t: int, tid: int, ctx: int) -> list:
        """Moves of thread ``t`` in state ``tid``; ``ctx`` is the register id or semaphore."""
        key = (tid, ctx)
        moves = self._tmemo.get(key)
        if moves is not None:
            return moves
        _, pc, phase, loc = self.tstates[tid]
        kind, k, val = self._tinfo[tid]
        moves = []
        if kind == _K_READ:
            if phase == 0:
                for lid, rid in self._reg_moves(k, ctx, (t, SR)):
                    moves.append((lid, self._tid(t, pc, 1, loc), rid))
            else:
                into = self.program.code[t][pc].into
                for lid, rid in self._reg_moves(k, ctx, (t, FR)):
                    got = self.labels[lid].action.value
                    moves.append((lid, self._settle(t, pc + 1, loc._replace(**{into: got})), rid))
        elif kind == _K_WRITE:
            if phase == 0:
                for lid, rid in self._reg_moves(k, ctx, (t, SW)):
                    if self.labels[lid].action.value == val:
                        moves.append((lid, self._tid(t, pc, 1, loc), rid))
            else:
                nxt = self._settle(t, pc + 1, loc)
                for lid, rid in self._reg_moves(k, ctx, (t, FW)):
                    moves.append((lid, nxt, rid))
        elif kind == _K_EMIT:
            what = self.program.code[t][pc].kind
            moves.append((self.label_id(Label(Action(what, t))), self._settle(t, pc + 1, loc), ctx))
        elif kind == _K_ACQ:
            if ctx == 0:
                moves.append((self.label_id(Label(Action(ACQUIRE, t))), self._settle(t, pc + 1, loc), t + 1))
        elif kind == _K_REL:
            if ctx != t + 1:
                raise RuntimeError(f"thread {t} releases a semaphore it does not hold")
            moves.append((self.label_id(Label(Action(RELEASE, t))), self._settle(t, pc + 1, loc), 0))
        self._tmemo[key] = moves
        return moves

    def successors(self, state: tuple) -> list:
        """All ``(label id, successor)`` pairs in a fixed deterministic order."""
        n, out = self.n, []
        sem_pos = self.width - 1
        for t in range(n):
            tid = state[t]
            kind, k, _ = self._tinfo[tid]
            if kind == _K_HALT:
                continue
            if k >= 0:
                pos = n + k
            elif kind == _K_EMIT:
                pos = -1
            else:
                pos = sem_pos
            ctx = state[pos] if pos >= 0 else 0
            for lid, ntid, nctx in self.thread_moves(t, tid, ctx):
                s = list(state)
                s[t] = ntid
                if pos >= 0:
                    s[pos] = nctx
                out.append((lid, tuple(s)))
        for k in range(self.nreg):
            pos = n + k
            for lid, rid in self._reg_moves(k, state[pos], None):
                s = list(state)
                s[pos] = rid
                out.append((lid, tuple(s)))
        return out

    def crit_enabled(self, state: tuple) -> list:
        """Threads whose next action is ``crit``."""
        out = []
        for t in range(self.n):
            tid = state[t]
            if self._tinfo[tid][0] == _K_EMIT:
                _, pc, _, _ = self.tstates[tid]
                if self.program.code[t][pc].kind == CRIT:
                    out.append(t)
        return out

    def describe(self, state: tuple) -> dict:
        prog = self.program
        threads = []
        for t in range(self.n):
            _, pc, phase, loc = self.tstates[state[t]]
            threads.append({"pc": pc, "invoked": bool(phase), "locals": dict(loc._asdict())})
        regs = {}
        for k, reg in enumerate(prog.registers):
            r = self.rstates[k][state[self.n + k]]
            regs[reg.name] = {"value": r.current, "slots": [repr(s) for s in r.slots]}
        sem = state[-1]
        return {"threads": threads, "registers": regs, "semaphore": None if sem == 0 else sem - 1}


def successors(config, state: tuple) -> list:
    """``(Label, successor)`` pairs of ``state`` under ``config``."""
    system = System.of(config)
    return [(system.labels[lid], s) for lid, s in system.successors(state)]


# ---- exploration ------------------------------------------------------------------

CHUNK = 20_000


@dataclass(frozen=True)
class Layout:
    """Bit layout of a packed state: field ``k`` sits in ``word[k]`` at ``shift[k]``."""
    widths: tuple
    word: np.ndarray
    shift: np.ndarray
    mask: np.ndarray
    nwords: int

    @classmethod
    def for_widths(cls, widths) -> "Layout":
        word, shift, mask = [], [], []
        w, used = 0, 0
        for b in widths:
            if b > 63:
                raise OverflowError("state field wider than 63 bits")
            if used + b > 64:
                w, used = w + 1, 0
            word.append(w)
            shift.append(used)
            mask.append((1 << b) - 1)
            used += b
        return cls(tuple(widths), np.array(word, dtype=np.int64), np.array(shift, dtype=np.int64),
                   np.array(mask, dtype=np.uint64), w + 1)

    def pack(self, rows: np.ndarray) -> np.ndarray:
        return _k.pack_rows(rows, self.word, self.shift, self.nwords)

    def unpack(self, keys: np.ndarray) -> np.ndarray:
        return _k.unpack_rows(keys, self.word, self.shift, self.mask)

    def fits(self, maxima) -> bool:
        return all(int(m) < (1 << b) for m, b in zip(maxima, self.widths))

    def widened(self, maxima) -> "Layout":
        return Layout.for_widths(tuple(max(b, int(m).bit_length() + 2)
                                       for b, m in zip(self.widths, maxima)))


@dataclass
class StateGraph:
    """Explored graph in CSR form: the edges of state ``v`` are
    ``indptr[v]:indptr[v + 1]`` of ``adj`` (targets) and ``lab`` (label ids)."""
    system: System
    layout: Layout
    packed: np.ndarray        # uint64 [n_states, nwords]
    indptr: np.ndarray
    adj: np.ndarray
    lab: np.ndarray
    parent: np.ndarray        # BFS tree: discovering state, -1 for the initial state
    parent_label: np.ndarray
    complete: bool
    initial: int = 0
    _reverse: Optional[tuple] = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return int(self.packed.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.adj.shape[0])

    def state(self, k: int) -> tuple:
        return tuple(self.layout.unpack(self.packed[k:k + 1])[0].tolist())

    def label(self, lid: int) -> Label:
        return self.system.labels[lid]

    def edges(self, v: int) -> list:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return list(zip(self.lab[lo:hi].tolist(), self.adj[lo:hi].tolist()))

    def source_of(self, e: int) -> int:
        return int(np.searchsorted(self.indptr, e, side="right") - 1)

    def path_to(self, k: int) -> list:
        """BFS-shortest ``[(label id, state index), ...]`` from the initial state to ``k``."""
        steps = []
        while self.parent[k] >= 0:
            steps.append((int(self.parent_label[k]), k))
            k = int(self.parent[k])
        steps.reverse()
        return steps

    def reverse(self, with_edges: bool = True) -> tuple:
        """Reverse CSR ``(rptr, radj, redge)``; ``redge`` is empty unless ``with_edges``."""
        if self._reverse is None or (with_edges and self._reverse[2].shape[0] != self.n_edges):
            self._reverse = _k.reverse_csr(self.indptr, self.adj, self.n_states, with_edges)
        return self._reverse

    def export(self, out=None) -> Optional[str]:
        """One ``<src> <action> <dst>`` line per edge, written to ``out`` or returned."""
        names = [str(l) for l in self.system.labels]
        chunks = []
        for v in range(self.n_states):
            for lid, w in self.edges(v):
                line = f"{v} {names[lid]} {w}\n"
                if out is None:
                    chunks.append(line)
                else:
                    out.write(line)
        return "".join(chunks) if out is None else None


class _Buffer:
    """Append-only array over a generous lazily-committed reservation.

    Untouched pages of ``np.empty`` are never committed, so reserving far more
    than is used costs address space only; growth copies are rare.
    """

    def __init__(self, capacity: int, dtype, width: Optional[int] = None):
        self.shape_tail = () if width is None else (width,)
        self.data = np.empty((max(capacity, 16),) + self.shape_tail, dtype=dtype)
        self.size = 0

    def reserve(self, extra: int) -> None:
        need = self.size + extra
        if need > self.data.shape[0]:
            new = np.empty((max(need, self.data.shape[0] * 3 // 2),) + self.shape_tail,
                           dtype=self.data.dtype)
            new[:self.size] = self.data[:self.size]
            self.data = new

    def extend(self, arr: np.ndarray) -> None:
        self.reserve(arr.shape[0])
        self.data[self.size:self.size + arr.shape[0]] = arr
        self.size += arr.shape[0]

    def view(self) -> np.ndarray:
        return self.data[:self.size]


_RESERVE_STATES = 64_000_000


def explore(config, state_limit: Optional[int] = None) -> StateGraph:
    """Breadth-first closure from the initial state.

    States are numbered in discovery order.  If more than ``state_limit``
    states are found the exploration stops and the graph is marked incomplete.
    """
    system = System.of(config)
    limit = system.config.state_limit if state_limit is None else state_limit
    width = system.width
    widths = [10] * system.n + [8] * system.nreg + [max(1, system.n.bit_length())]
    layout = Layout.for_widths(widths)
    init = np.array([system.initial], dtype=np.int64)
    if not layout.fits(init.max(axis=0)):
        layout = layout.widened(init.max(axis=0))
    reserve = min(limit + 1, _RESERVE_STATES)
    packed = np.empty((reserve, layout.nwords), dtype=np.uint64)
    parent = np.empty(reserve, dtype=np.int32)
    parent_label = np.empty(reserve, dtype=np.int32)
    packed[0] = layout.pack(init)[0]
    parent[0] = parent_label[0] = -1
    n = 1
    table = _k.rehash(packed, n, 1 << 13)
    adj = _Buffer(4 * reserve, np.int32)
    lab = _Buffer(4 * reserve, np.int16)
    indptr = _Buffer(reserve + 1, np.int64)
    indptr.extend(np.zeros(1, dtype=np.int64))
    head = 0
    complete = True
    succ_fn = system.successors
    while head < n and complete:
        hi = min(n, head + CHUNK)
        rows = layout.unpack(packed[head:hi]).tolist()
        flat: list = []
        labs: list = []
        counts: list = []
        for row in rows:
            succ = succ_fn(tuple(row))
            counts.append(len(succ))
            for lid, s in succ:
                labs.append(lid)
                flat.extend(s)
        m = len(labs)
        indptr.extend(adj.size + np.cumsum(np.array(counts, dtype=np.int64)))
        head = hi
        if m == 0:
            continue
        block = np.array(flat, dtype=np.int64).reshape(m, width)
        del flat
        maxima = block.max(axis=0)
        if not layout.fits(maxima):
            new = layout.widened(np.maximum(maxima, np.array([(1 << b) - 1 for b in layout.widths])))
            packed = _repack(packed, n, layout, new)
            layout = new
            table = _k.rehash(packed, n, table.shape[0])
        need = n + m
        if need > packed.shape[0]:
            grow = max(need, packed.shape[0] * 3 // 2)
            packed = _grow(packed, n, grow)
            parent = _grow(parent, n, grow)
            parent_label = _grow(parent_label, n, grow)
        if 2 * need > table.shape[0]:
            size = table.shape[0]
            while 2 * min(need, limit) > size:
                size *= 2
            if size != table.shape[0]:
                del table
                table = _k.rehash(packed, n, size)
        keys = layout.pack(block)
        del block
        src = np.repeat(np.arange(hi - len(counts), hi, dtype=np.int32), counts)
        lab_arr = np.array(labs, dtype=np.int32)
        dst, n = _k.insert_batch(table, packed, n, keys, src, lab_arr, parent, parent_label, limit)
        if (dst < 0).any():
            complete = False
        adj.extend(dst)
        lab.extend(lab_arr.astype(np.int16))
    del table
    # states discovered but never expanded have no edges
    pad = n + 1 - indptr.size
    if pad > 0:
        indptr.extend(np.full(pad, adj.size, dtype=np.int64))
    return StateGraph(system, layout, packed[:n], indptr.view(), adj.view(), lab.view(),
                      parent[:n], parent_label[:n], complete)


def _grow(arr: np.ndarray, n: int, size: int) -> np.ndarray:
    out = np.empty((size,) + arr.shape[1:], dtype=arr.dtype)
    out[:n] = arr[:n]
    return out


def _repack(packed: np.ndarray, n: int, old: Layout, new: Layout) -> np.ndarray:
    out = np.empty((packed.shape[0], new.nwords), dtype=np.uint64)
    for lo in range(0, n, 1 << 20):
        hi = min(n, lo + (1 << 20))
        out[lo:hi] = new.pack(old.unpack(packed[lo:hi]))
    return out


# ---- verdicts -----------------------------------------------------------------------

@dataclass
class Counterexample:
    """A path from the initial state; ``loop_start`` marks where the lasso's cycle
    begins (an index into ``steps``) and ``deadlock`` flags a path ending in a
    state without successors."""
    steps: list                 # [(Label, state index)]
    loop_start: Optional[int] = None
    deadlock: bool = False
    note: str = ""

    @property
    def labels(self) -> list:
        return [l for l, _ in self.steps]

    def to_text(self) -> str:
        lines = []
        for k, (label, idx) in enumerate(self.steps):
            mark = "  # cycle starts" if self.loop_start == k else ""
            lines.append(f"{label}{mark}")
        if self.loop_start is not None:
            lines.append("# cycle repeats")
        if self.deadlock:
            lines.append("# deadlock: no further actions")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class Verdict:
    property: str
    outcome: str
    counterexample: Optional[Counterexample] = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.outcome == HOLDS


def _label_threads(graph: StateGraph, kind: str) -> np.ndarray:
    """Per label id: the thread of a ``kind`` (crit/noncrit) label, else -1."""
    return np.array([l.action.thread if (l.register is None and l.action.kind == kind) else -1
                     for l in graph.system.labels] or [-1], dtype=np.int64)


def check_mutex(graph: StateGraph) -> Verdict:
    """Look for a state in which two threads have ``crit`` enabled.

    Whether ``crit`` is enabled depends on the thread state alone, so this
    works on the stored states and also on unexpanded ones of a partial graph.
    """
    name = "mutex"
    system = graph.system
    at_crit = np.zeros(len(system.tstates), dtype=np.int64)
    for tid, (t, pc, phase, _) in enumerate(system.tstates):
        st = system.program.code[t][pc]
        at_crit[tid] = int(isinstance(st, Emit) and st.kind == CRIT)
    bad = None
    step = 1 << 20
    for lo in range(0, graph.n_states, step):
        rows = graph.layout.unpack(graph.packed[lo:lo + step])[:, :system.n]
        hits = np.flatnonzero(at_crit[rows].sum(axis=1) >= 2)
        if hits.size:
            bad = lo + int(hits[0])
            break
    if bad is not None:
        steps = [(graph.label(l), k) for l, k in graph.path_to(bad)]
        who = system.crit_enabled(graph.state(bad))
        return Verdict(name, VIOLATED, Counterexample(steps, note=f"crit enabled for threads {who}"),
                       f"state {bad} enables crit for threads {who}")
    if not graph.complete:
        return Verdict(name, INCONCLUSIVE, detail=f"state limit reached after {graph.n_states} states")
    return Verdict(name, HOLDS)


def check_reach(graph: StateGraph, i: int, semantics: str = REACHABLE) -> Verdict:
    """Reachability of the critical section for thread ``i``.

    With ``REACHABLE`` the property fails iff some state entered after a
    ``noncrit(i)``, without a ``crit(i)`` since, can no longer reach a state in
    which ``crit(i)`` is enabled.  With ``FORMULA`` it fails iff a ``noncrit(i)``
    edge leads into the greatest set of states that all have a crit(i)-free
    edge staying inside the set.
    """
    name = f"reach({i})"
    if semantics not in (REACHABLE, FORMULA):
        raise ValueError(f"unknown reach semantics {semantics!r}")
    if not graph.complete:
        return Verdict(name, INCONCLUSIVE, detail=f"state limit reached after {graph.n_states} states")
    crit_names = _label_threads(graph, CRIT) == i
    noncrit_names = _label_threads(graph, NONCRIT) == i
    is_crit_i = crit_names[graph.lab]
    is_noncrit_i = noncrit_names[graph.lab]
    rev = graph.reverse(with_edges=semantics == FORMULA)
    bad = reach_region(graph.indptr, graph.adj, is_crit_i, is_noncrit_i, semantics, rev)
    free = ~is_crit_i
    if not bad.any():
        return Verdict(name, HOLDS)
    return Verdict(name, VIOLATED, _reach_counterexample(graph, i, bad, free, is_noncrit_i, semantics))


def reach_region(indptr, adj, is_crit, is_noncrit, semantics: str = REACHABLE,
                 reverse: Optional[tuple] = None) -> np.ndarray:
    """States that witness a Reach violation, over a CSR graph.

    ``is_crit``/``is_noncrit`` flag the edges labelled crit(i)/noncrit(i).  A
    state is returned if it is entered through crit(i)-free edges after a
    noncrit(i) edge and, under ``REACHABLE``, no state with a crit(i) edge is
    reachable from it; under ``FORMULA``, it has an infinite crit(i)-free path.
    """
    n = indptr.shape[0] - 1
    adj = np.asarray(adj, dtype=np.int32)
    if reverse is None:
        reverse = _k.reverse_csr(indptr, adj, n, semantics == FORMULA)
    rptr, radj, redge = reverse
    free = ~is_crit
    entries = np.unique(adj[is_noncrit]).astype(np.int64)
    after = _k.sweep(indptr, adj, free, entries, n)
    if semantics == REACHABLE:
        enabled = np.unique(np.searchsorted(indptr, np.flatnonzero(is_crit), side="right") - 1)
        return after & ~_k.closure(rptr, radj, enabled.astype(np.int64), n)
    return after & _k.greatest_fixpoint(indptr, adj, free, rptr, radj, redge, n)


def _reach_counterexample(graph: StateGraph, i: int, bad: np.ndarray, free: np.ndarray,
                          is_noncrit_i: np.ndarray, semantics: str) -> Counterexample:
    n = graph.n_states
    # stem: the noncrit(i) edge with the shallowest source, then a shortest crit(i)-free path into bad
    nc_edges = np.flatnonzero(is_noncrit_i)
    sources = np.searchsorted(graph.indptr, nc_edges, side="right") - 1
    depth = _k.depths(graph.parent, n)
    best = None
    for k in np.argsort(depth[sources], kind="stable").tolist():
        e = int(nc_edges[k])
        walk, ok = _k.bfs_path(graph.indptr, graph.adj, free, int(graph.adj[e]), bad, n)
        if ok:
            best = (e, int(sources[k]), walk)
            break
    assert best is not None, "violating region unreachable after noncrit"
    e, s, walk = best
    steps = [(graph.label(l), k) for l, k in graph.path_to(s)]
    steps.append((graph.label(int(graph.lab[e])), int(graph.adj[e])))
    steps += [(graph.label(int(graph.lab[x])), int(graph.adj[x])) for x in walk.tolist()]
    # continue inside the violating region until a state repeats or nothing is enabled;
    # the thread that acted least recently goes first, so every thread able to move shows up
    here = steps[-1][1]
    seen = {here: len(steps)}
    last_moved = {}
    loop_start, deadlock = None, False
    while True:
        options = [(lid, w) for lid, w in graph.edges(here) if bad[w]]
        if not options:
            deadlock = True
            break
        choice = min(options, key=lambda o: last_moved.get(graph.label(o[0]).action.thread, -1))
        last_moved[graph.label(choice[0]).action.thread] = len(steps)
        steps.append((graph.label(choice[0]), choice[1]))
        if choice[1] in seen:
            loop_start = seen[choice[1]]
            break
        seen[choice[1]] = len(steps)
        here = choice[1]
    note = (f"after noncrit({i}) thread {i} can no longer reach its critical section"
            if semantics == REACHABLE else f"crit({i})-free infinite path after noncrit({i})")
    return Counterexample(steps, loop_start, deadlock, note)


def check_properties(graph: StateGraph, properties=("mutex", "reach"),
                     semantics: str = REACHABLE) -> list:
    out = []
    for p in properties:
        if p == "mutex":
            out.append(check_mutex(graph))
        elif p == "reach":
            out.extend(check_reach(graph, i, semantics) for i in range(graph.system.n))
        else:
            raise ValueError(f"unknown property {p!r}")
    return out


def summarize(verdicts, prop: str) -> str:
    """Fold per-thread verdicts of one property into a single outcome."""
    mine = [v for v in verdicts if v.property.split("(")[0] == prop]
    if any(v.outcome == VIOLATED for v in mine):
        return VIOLATED
    if any(v.outcome == INCONCLUSIVE for v in mine):
        return INCONCLUSIVE
    return HOLDS


# ---- replay ---------------------------------------------------------------------------

class ReplayError(AssertionError):
    pass


def replay(config, labels) -> list:
    """Re-execute ``labels`` from the initial state through ``successors``.

    Nondeterministic labels (a safe write's response) are resolved by keeping
    every matching successor; the run fails only if no successor matches.
    Returns the list of state sets after each step.
    """
    system = System.of(config)
    frontier = {system.initial}
    history = []
    for k, label in enumerate(labels):
        label = Label.parse(label) if isinstance(label, str) else label
        nxt = set()
        for s in frontier:
            for lid, t in system.successors(s):
                if system.labels[lid] == label:
                    nxt.add(t)
        if not nxt:
            raise ReplayError(f"step {k}: {label} is not enabled")
        frontier = nxt
        history.append(frozenset(nxt))
    return history


def replay_counterexample(graph: StateGraph, cex: Counterexample) -> None:
    """Check every edge of ``cex`` against ``successors``, state by state."""
    system = graph.system
    here = system.initial
    for k, (label, idx) in enumerate(cex.steps):
        target = graph.state(idx)
        if not any(system.labels[lid] == label and s == target for lid, s in system.successors(here)):
            raise ReplayError(f"step {k}: no {label} edge to state {idx}")
        here = target
    if cex.loop_start is not None:
        start = cex.steps[cex.loop_start - 1][1] if cex.loop_start > 0 else 0
        if cex.steps[-1][1] != start:
            raise ReplayError("cycle does not close")
    if cex.deadlock and system.successors(here):
        raise ReplayError("claimed deadlock still has successors")


from .timeline import Timeline, render_timeline  # noqa: E402  (re-exported)
