"""Mutual exclusion algorithms as per-thread control-flow graphs.

Every shared access is its own ``Read``/``Write`` statement touching one register;
guards only look at locals.  Quantified awaits become read loops over the other
threads in ascending order that restart from the first thread whenever one
test fails, and disjunctions are evaluated left to right with one read per
disjunct.  Each thread loops forever through ``noncrit``, the entry protocol,
``crit`` and the exit protocol.
"""
from __future__ import annotations

import collections
import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

RegRef = Union[str, Callable]


class ProgramError(ValueError):
    pass


# ---- statements ----------------------------------------------------------------

class Read(NamedTuple):
    reg: RegRef
    into: str = "v"


class Write(NamedTuple):
    reg: RegRef
    value: Union[int, Callable]


class Assign(NamedTuple):
    local: str
    expr: Callable


class Branch(NamedTuple):
    cond: Callable
    then: Union[int, str]
    orelse: Union[int, str, None] = None   # None: fall through


class Emit(NamedTuple):
    kind: str          # "crit" or "noncrit"


class SemAcquire(NamedTuple):
    pass


class SemRelease(NamedTuple):
    pass


class Halt(NamedTuple):
    """No statement is enabled any more; the thread is stuck for good."""


LOCAL_STATEMENTS = (Assign, Branch)


@dataclass(frozen=True)
class Register:
    name: str
    domain_size: int = 2
    initial: int = 0
    writers: Optional[frozenset] = None     # None: every thread may write


@dataclass(frozen=True)
class Program:
    name: str
    n_threads: int
    registers: tuple
    code: tuple                 # one tuple of statements per thread; pc 0 is the entry
    locals: tuple = ("v",)
    scratch: frozenset = frozenset({"v"})
    uses_semaphore: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "Locals", collections.namedtuple("Locals", self.locals))
        validate(self)

    def register(self, name: str) -> Register:
        for r in self.registers:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def register_names(self) -> tuple:
        return tuple(r.name for r in self.registers)

    def initial_locals(self):
        return self.Locals(*([0] * len(self.locals)))


def validate(prog: Program) -> None:
    names = set(prog.register_names)
    if len(names) != len(prog.registers):
        raise ProgramError("duplicate register names")
    if len(prog.code) != prog.n_threads:
        raise ProgramError("one code block per thread required")
    for t, code in enumerate(prog.code):
        crit = 0
        for pc, st in enumerate(code):
            if isinstance(st, Branch):
                for tgt in (st.then, st.orelse):
                    if tgt is not None and not 0 <= tgt < len(code):
                        raise ProgramError(f"thread {t} pc {pc}: branch target {tgt} out of range")
            elif isinstance(st, (Read, Write)) and isinstance(st.reg, str):
                if st.reg not in names:
                    raise ProgramError(f"thread {t} pc {pc}: unknown register {st.reg}")
                reg = prog.register(st.reg)
                if isinstance(st, Write):
                    if reg.writers is not None and t not in reg.writers:
                        raise ProgramError(f"thread {t} may not write {st.reg}")
                    if isinstance(st.value, int) and not 0 <= st.value < reg.domain_size:
                        raise ProgramError(f"thread {t} pc {pc}: value outside domain of {st.reg}")
            elif isinstance(st, Assign) and st.local not in prog.locals:
                raise ProgramError(f"thread {t} pc {pc}: unknown local {st.local}")
            if isinstance(st, Read) and st.into not in prog.locals:
                raise ProgramError(f"thread {t} pc {pc}: unknown local {st.into}")
            if isinstance(st, Emit) and st.kind == "crit":
                crit += 1
        if crit != 1:
            raise ProgramError(f"thread {t} must have exactly one critical section")
        if not isinstance(code[0], Emit) or code[0].kind != "noncrit":
            raise ProgramError(f"thread {t} must start with noncrit")


class Asm:
    """Tiny assembler: statements plus symbolic labels."""

    def __init__(self):
        self.stmts: list = []
        self.labels: dict = {}
        self._fresh = itertools.count()

    def fresh(self, stem: str = "L") -> str:
        return f"_{stem}{next(self._fresh)}"

    def label(self, name: str) -> str:
        if name in self.labels:
            raise ProgramError(f"label {name} defined twice")
        self.labels[name] = len(self.stmts)
        return name

    def read(self, reg: RegRef, into: str = "v") -> None:
        self.stmts.append(Read(reg, into))

    def write(self, reg: RegRef, value) -> None:
        self.stmts.append(Write(reg, value))

    def assign(self, local: str, expr) -> None:
        fn = expr if callable(expr) else (lambda L, c=expr: c)
        self.stmts.append(Assign(local, fn))

    def branch(self, cond: Callable, then: str, orelse: Optional[str] = None) -> None:
        self.stmts.append(Branch(cond, then, orelse))

    def goto(self, target: str) -> None:
        self.stmts.append(Branch(_always, target, None))

    def crit(self) -> None:
        self.stmts.append(Emit("crit"))

    def noncrit(self) -> None:
        self.stmts.append(Emit("noncrit"))

    def acquire(self) -> None:
        self.stmts.append(SemAcquire())

    def release(self) -> None:
        self.stmts.append(SemRelease())

    def halt(self) -> None:
        self.stmts.append(Halt())

    def assemble(self) -> tuple:
        out = []
        for st in self.stmts:
            if isinstance(st, Branch):
                then = self._resolve(st.then)
                orelse = None if st.orelse is None else self._resolve(st.orelse)
                st = Branch(st.cond, then, orelse)
            out.append(st)
        return tuple(out)

    def _resolve(self, target) -> int:
        if isinstance(target, int):
            return target
        if target not in self.labels:
            raise ProgramError(f"undefined label {target}")
        return self.labels[target]


def _always(L) -> bool:
    return True


def v_is(c):
    return lambda L: L.v == c


def v_not(c):
    return lambda L: L.v != c


# ---- cycles (Lamport) -------------------------------------------------------------

def ord_cycle(members) -> tuple:
    """The ordered cycle of a non-empty set of thread ids: its sorted elements."""
    s = sorted(set(members))
    if not s:
        raise ValueError("ORD of the empty set")
    return tuple(s)


def cg(v, gamma, j: int) -> int:
    """1 iff ``v`` at position ``j`` of ``gamma`` agrees with its predecessor rule.

    The comparison value is the negated value of the previous element, or for the
    first element the value of the last one.
    """
    if not 0 <= j < len(gamma):
        raise IndexError(f"position {j} outside cycle of length {len(gamma)}")
    here = v[gamma[j]]
    other = (1 - v[gamma[j - 1]]) if j > 0 else v[gamma[-1]]
    return int(here == other)


def _mask_members(mask: int) -> tuple:
    return tuple(k for k in range(mask.bit_length()) if mask >> k & 1)


# ---- builders ---------------------------------------------------------------------

def _bit(name: str, owner: Optional[int] = None) -> Register:
    return Register(name, 2, 0, None if owner is None else frozenset({owner}))


def peterson() -> Program:
    regs = (_bit("flag0", 0), _bit("flag1", 1), _bit("turn"))
    code = []
    for i in range(2):
        j = 1 - i
        a = Asm()
        a.label("start")
        a.noncrit()
        a.write(f"flag{i}", 1)
        a.write("turn", i)
        a.label("await")
        a.read(f"flag{j}")
        a.branch(v_is(0), "cs")
        a.read("turn")
        a.branch(v_is(j), "cs")
        a.goto("await")
        a.label("cs")
        a.crit()
        a.write(f"flag{i}", 0)
        a.goto("start")
        code.append(a.assemble())
    return Program("peterson", 2, regs, tuple(code))


def _await_flag_or_turn(a: Asm, i: int, j: int, done: str) -> None:
    """await flag[j] = 0 or turn = j"""
    top = a.label(a.fresh("await"))
    a.read(f"flag{j}")
    a.branch(v_is(0), done)
    a.read("turn")
    a.branch(v_is(j), done)
    a.goto(top)


def _await_value(a: Asm, reg: str, ok, done: Optional[str] = None) -> None:
    top = a.label(a.fresh("spin"))
    a.read(reg)
    a.branch(lambda L: not ok(L.v), top)
    if done is not None:
        a.goto(done)


def attiya_welch_original() -> Program:
    regs = (_bit("flag0", 0), _bit("flag1", 1), _bit("turn"))
    code = []
    for i in range(2):
        j = 1 - i
        a = Asm()
        a.label("start")
        a.noncrit()
        a.label("line1")
        a.write(f"flag{i}", 0)
        _await_flag_or_turn(a, i, j, "line3")
        a.label("line3")
        a.write(f"flag{i}", 1)
        a.read("turn")                      # read once, both branches use this copy
        a.branch(v_is(i), "line5", "line7")
        a.label("line5")
        a.read(f"flag{j}")
        a.branch(v_is(1), "line1", "cs")
        a.label("line7")
        _await_value(a, f"flag{j}", lambda x: x == 0, "cs")
        a.label("cs")
        a.crit()
        a.write("turn", i)
        a.write(f"flag{i}", 0)
        a.goto("start")
        code.append(a.assemble())
    return Program("attiya-welch", 2, regs, tuple(code))


def attiya_welch_alternate() -> Program:
    regs = (_bit("flag0", 0), _bit("flag1", 1), _bit("turn"))
    code = []
    for i in range(2):
        j = 1 - i
        a = Asm()
        a.label("start")
        a.noncrit()
        a.label("repeat")
        a.write(f"flag{i}", 0)
        _await_flag_or_turn(a, i, j, "set")
        a.label("set")
        a.write(f"flag{i}", 1)
        a.read("turn")                      # until turn = j or flag[j] = 0
        a.branch(v_is(j), "check")
        a.read(f"flag{j}")
        a.branch(v_is(0), "check", "repeat")
        a.label("check")
        a.read("turn")                      # turn is read a second time here
        a.branch(v_is(j), "wait", "cs")
        a.label("wait")
        _await_value(a, f"flag{j}", lambda x: x == 0, "cs")
        a.label("cs")
        a.crit()
        a.write("turn", i)
        a.write(f"flag{i}", 0)
        a.goto("start")
        code.append(a.assemble())
    return Program("attiya-welch-alt", 2, regs, tuple(code))


def _await_all(a: Asm, js, reg_of, ok) -> None:
    """await forall j in js. ok(reg_of(j)); restart from the first j on failure."""
    top = a.label(a.fresh("all"))
    for j in js:
        a.read(reg_of(j))
        a.branch(lambda L: not ok(L.v), top)


def _await_any(a: Asm, js, reg_of, ok) -> None:
    top = a.label(a.fresh("any"))
    done = a.fresh("found")
    for j in js:
        a.read(reg_of(j))
        a.branch(lambda L: ok(L.v), done)
    a.goto(top)
    a.label(done)


def _check_n(n: int, low: int = 2) -> None:
    if not isinstance(n, int) or n < low:
        raise ProgramError(f"need at least {low} threads, got {n}")


def szymanski_flag(n: int = 3) -> Program:
    _check_n(n)
    regs = tuple(Register(f"flag{k}", 5, 0, frozenset({k})) for k in range(n))
    code = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        flag = lambda j: f"flag{j}"
        a = Asm()
        a.label("start")
        a.noncrit()
        a.write(flag(i), 1)
        _await_all(a, others, flag, lambda x: x < 3)
        a.write(flag(i), 3)
        for j in others:                    # if exists j. flag[j] = 1
            a.read(flag(j))
            a.branch(v_is(1), "wait4")
        a.goto("line7")
        a.label("wait4")
        a.write(flag(i), 2)
        _await_any(a, others, flag, lambda x: x == 4)
        a.label("line7")
        a.write(flag(i), 4)
        _await_all(a, [j for j in range(i)], flag, lambda x: x < 2)
        a.crit()
        # disjunction over one register: a single read checked twice locally
        _await_all(a, [j for j in range(i + 1, n)], flag, lambda x: x < 2 or x > 3)
        a.write(flag(i), 0)
        a.goto("start")
        code.append(a.assemble())
    return Program("szymanski-flag", n, regs, tuple(code), params={"n": n})


BITS = ("intent", "door_in", "door_out")
DEFAULT_RESET_ORDER = BITS


def szymanski_flag_bits(n: int = 3, reset_order=DEFAULT_RESET_ORDER) -> Program:
    _check_n(n)
    reset_order = tuple(reset_order)
    if sorted(reset_order) != sorted(BITS):
        raise ProgramError(f"reset order must be a permutation of {BITS}")
    regs = tuple(Register(f"{b}{k}", 2, 0, frozenset({k})) for k in range(n) for b in BITS)
    code = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        a = Asm()
        a.label("start")
        a.noncrit()
        a.write(f"intent{i}", 1)
        top = a.label("line2")              # await forall j. intent[j] = 0 or door_in[j] = 0
        for j in others:
            nxt = a.fresh("next")
            a.read(f"intent{j}")
            a.branch(v_is(0), nxt)
            a.read(f"door_in{j}")
            a.branch(v_not(0), top)
            a.label(nxt)
        a.write(f"door_in{i}", 1)
        for j in others:                    # if exists j. intent[j] = 1 and door_in[j] = 0
            nxt = a.fresh("next")
            a.read(f"intent{j}")
            a.branch(v_not(1), nxt)
            a.read(f"door_in{j}")
            a.branch(v_is(0), "line5")
            a.label(nxt)
        a.goto("line7")
        a.label("line5")
        a.write(f"intent{i}", 0)
        _await_any(a, others, lambda j: f"door_out{j}", lambda x: x == 1)
        a.label("line7")
        a.read(f"intent{i}")
        a.branch(v_not(0), "line9")
        a.write(f"intent{i}", 1)
        a.label("line9")
        a.write(f"door_out{i}", 1)
        _await_all(a, range(i), lambda j: f"door_in{j}", lambda x: x == 0)
        a.crit()
        top = a.label("line12")             # await forall j > i. door_in[j] = 0 or door_out[j] = 1
        for j in range(i + 1, n):
            nxt = a.fresh("next")
            a.read(f"door_in{j}")
            a.branch(v_is(0), nxt)
            a.read(f"door_out{j}")
            a.branch(v_not(1), top)
            a.label(nxt)
        for b in reset_order:
            a.write(f"{b}{i}", 0)
        a.goto("start")
        code.append(a.assemble())
    return Program("szymanski-bits", n, regs, tuple(code),
                   params={"n": n, "reset_order": reset_order})


def szymanski_3bit(n: int = 3, semaphore: bool = True) -> Program:
    _check_n(n)
    regs = tuple(Register(f"{b}{k}", 2, 0, frozenset({k})) for k in range(n) for b in "aws")

    def thread_code(i):
        a = Asm()

        def guarded_write(reg, val):
            if semaphore:
                a.acquire()
            a.write(reg, val)
            if semaphore:
                a.release()

        def scan_a(exit_label):
            """while j < N and a_j = 0: j <- j + 1, unrolled; j holds the exit value"""
            for k in range(n):
                stop = a.fresh("stop")
                cont = a.fresh("cont")
                a.read(f"a{k}")
                a.branch(v_is(0), cont)
                a.label(stop)
                a.assign("j", k)
                a.goto(exit_label)
                a.label(cont)
            a.assign("j", n)
            a.goto(exit_label)

        a.label("start")
        a.noncrit()
        a.write(f"a{i}", 1)
        for k in range(n):                  # for j <- 0 to N-1: await s_j = 0
            _await_value(a, f"s{k}", lambda x: x == 0)
        guarded_write(f"w{i}", 1)
        a.write(f"a{i}", 0)
        a.label("line5")
        a.read(f"s{i}")
        a.branch(v_not(0), "line22")
        scan_a("line8")
        a.label("line8")
        a.branch(lambda L: L.j == n, "line9", "line16")
        a.label("line9")
        guarded_write(f"s{i}", 1)
        scan_a("line12")
        a.label("line12")
        a.branch(lambda L: L.j < n, "line12a", "line14")
        a.label("line12a")
        guarded_write(f"s{i}", 0)
        a.goto("line16")
        a.label("line14")
        guarded_write(f"w{i}", 0)
        for k in range(n):                  # for j <- 0 to N-1: await w_j = 0
            _await_value(a, f"w{k}", lambda x: x == 0)
        a.assign("j", n)                    # the for loop leaves j = N
        a.label("line16")
        a.branch(lambda L: L.j < n, "line17", "line19")
        a.label("line17")
        # while j < N and (w_j = 1 or s_j = 0): j <- j + 1
        for k in range(n):
            nxt = a.fresh("next")
            hit = a.fresh("hit")
            if semaphore:
                a.acquire()
            a.read(f"w{k}")
            if semaphore:
                rel_next = a.fresh("reln")
                a.branch(v_is(1), rel_next)
                a.read(f"s{k}")
                a.branch(v_is(0), rel_next, hit)
                a.label(rel_next)
                a.release()
                a.goto(nxt)
                a.label(hit)
                a.assign("j", k)
                a.release()
                a.goto("line19")
            else:
                a.branch(v_is(1), nxt)
                a.read(f"s{k}")
                a.branch(v_is(0), nxt, hit)
                a.label(hit)
                a.assign("j", k)
                a.goto("line19")
            a.label(nxt)
        a.assign("j", n)
        a.label("line19")
        a.branch(lambda L: L.j != i and L.j < n, "line20", "loop")
        a.label("line20")
        guarded_write(f"s{i}", 1)
        guarded_write(f"w{i}", 0)
        a.label("loop")
        a.assign("j", 0)                    # j is dead until reassigned
        a.goto("line5")
        a.label("line22")
        for k in range(i):                  # for j <- 0 to i-1: await s_j = 0
            _await_value(a, f"s{k}", lambda x: x == 0)
        a.crit()
        guarded_write(f"s{i}", 0)
        a.goto("start")
        return a.assemble()

    code = [thread_code(i) for i in range(n)]
    return Program("szymanski-3bit", n, regs, tuple(code), locals=("v", "j"),
                   uses_semaphore=semaphore, params={"n": n, "semaphore": semaphore})


SNAPSHOT = "snapshot"
REREAD = "reread"


def lamport_3bit(n: int = 3, variant: str = SNAPSHOT) -> Program:
    _check_n(n)
    if variant not in (SNAPSHOT, REREAD):
        raise ProgramError(f"unknown variant {variant!r}")
    regs = tuple(Register(f"{b}{k}", 2, 0, frozenset({k})) for k in range(n) for b in "xyz")
    # gamma: bitmask of the cycle members; f: chosen thread id; j: cycle position;
    # za/zb: z values held across reads (cleared once used)
    loc = ("v", "gamma", "f", "j", "za", "zb")

    def elem(L, pos):
        return _mask_members(L.gamma)[pos]

    def size(L):
        return bin(L.gamma).count("1")

    def pos_of(L, who):
        return _mask_members(L.gamma).index(who)

    def thread_code(i):
        a = Asm()
        a.label("start")
        a.noncrit()
        a.write(f"y{i}", 1)
        a.label("l1")
        a.write(f"x{i}", 1)
        a.label("l2")
        a.assign("gamma", 1 << i)           # y_i = 1 is our own, known value
        for k in range(n):
            if k == i:
                continue
            a.read(f"y{k}")
            skip = a.fresh("noty")
            a.branch(v_not(1), skip)
            a.assign("gamma", lambda L, k=k: L.gamma | (1 << k))
            a.label(skip)
        if variant == SNAPSHOT:
            # read every z_j of the cycle once, then choose f on the local copy
            a.assign("za", 0)
            for k in range(n):
                skip = a.fresh("skip")
                a.branch(lambda L, k=k: not (L.gamma >> k & 1), skip)
                a.read(f"z{k}")
                a.assign("za", lambda L, k=k: L.za | (L.v << k))
                a.label(skip)
            a.assign("f", lambda L: _choose_f(L.gamma, L.za))
            a.assign("za", 0)
            a.branch(lambda L: L.f < 0, "stuck", "line5")
        else:
            # re-read z at every CG test: z of the element, then z of its comparison partner
            for p in range(n):
                nxt = a.fresh("next")
                a.branch(lambda L, p=p: p >= size(L), "stuck")
                a.read(lambda L, p=p: f"z{elem(L, p)}", into="za")
                a.read(lambda L, p=p: f"z{elem(L, p - 1) if p > 0 else elem(L, size(L) - 1)}", into="zb")
                a.branch(lambda L, p=p: L.za != ((1 - L.zb) if p > 0 else L.zb), nxt)
                a.assign("f", lambda L, p=p: elem(L, p))
                a.assign("za", 0)
                a.assign("zb", 0)
                a.goto("line5")
                a.label(nxt)
                a.assign("za", 0)
                a.assign("zb", 0)
            a.goto("stuck")
        a.label("stuck")
        a.halt()
        # for j <- f cyclically to i: if y_j = 1 then (if x_i = 1 then x_i <- 0); goto l2
        a.label("line5")
        a.assign("j", lambda L: pos_of(L, L.f))
        a.label("loop5")
        a.branch(lambda L: elem(L, L.j) == i, "line6")
        a.read(lambda L: f"y{elem(L, L.j)}")
        a.branch(v_is(1), "yset")
        a.assign("j", lambda L: (L.j + 1) % size(L))
        a.goto("loop5")
        a.label("yset")
        a.read(f"x{i}")
        a.branch(v_not(1), "back")
        a.write(f"x{i}", 0)
        a.label("back")
        a.assign("f", 0)
        a.assign("j", 0)
        a.goto("l2")
        # if x_i = 0 then goto l1
        a.label("line6")
        a.read(f"x{i}")
        a.branch(v_is(0), "to_l1")
        # for j <- i (+) 1 cyclically to f: if x_j = 1 then goto l2
        a.assign("j", lambda L: (pos_of(L, i) + 1) % size(L))
        a.label("loop7")
        a.branch(lambda L: elem(L, L.j) == L.f, "cs")
        a.read(lambda L: f"x{elem(L, L.j)}")
        a.branch(v_is(1), "back")
        a.assign("j", lambda L: (L.j + 1) % size(L))
        a.goto("loop7")
        a.label("to_l1")
        a.assign("gamma", 0)
        a.assign("f", 0)
        a.assign("j", 0)
        a.goto("l1")
        a.label("cs")
        a.assign("gamma", 0)
        a.assign("f", 0)
        a.assign("j", 0)
        a.crit()
        a.read(f"z{i}")                     # z_i <- 1 - z_i
        a.branch(v_is(0), "zset")
        a.write(f"z{i}", 0)
        a.goto("exit")
        a.label("zset")
        a.write(f"z{i}", 1)
        a.label("exit")
        a.write(f"x{i}", 0)
        a.write(f"y{i}", 0)
        a.goto("start")
        return a.assemble()

    code = [thread_code(i) for i in range(n)]
    return Program(f"lamport-3bit", n, regs, tuple(code), locals=loc,
                   params={"n": n, "variant": variant})


def _choose_f(gamma_mask: int, z_mask: int) -> int:
    gamma = _mask_members(gamma_mask)
    z = {k: z_mask >> k & 1 for k in gamma}
    for p in range(len(gamma)):
        if cg(z, gamma, p):
            return gamma[p]
    return -1


BUILDERS = {
    "peterson": peterson,
    "szymanski-flag": szymanski_flag,
    "szymanski-bits": szymanski_flag_bits,
    "szymanski-3bit": szymanski_3bit,
    "lamport-3bit": lamport_3bit,
    "attiya-welch": attiya_welch_original,
    "attiya-welch-alt": attiya_welch_alternate,
}

TWO_THREAD_ONLY = frozenset({"peterson", "attiya-welch", "attiya-welch-alt"})


def build(name: str, **params) -> Program:
    """Build a program by CLI name; unknown parameters are rejected."""
    if name not in BUILDERS:
        raise ProgramError(f"unknown algorithm {name!r}; choose from {', '.join(BUILDERS)}")
    if name in TWO_THREAD_ONLY:
        n = params.pop("n", 2)
        if n != 2:
            raise ProgramError(f"{name} is defined for exactly two threads")
    try:
        return BUILDERS[name](**params)
    except TypeError as exc:
        raise ProgramError(str(exc)) from None
