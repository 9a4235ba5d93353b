"""Transition systems for multi-writer multi-reader safe, regular and atomic registers.

A register is a pair ``(current, slots)``: the value it currently stores and one
status slot per thread.  The three models differ only in what a slot remembers
and in which responses they allow.  All states are immutable and every operation
is a pure function, so states can be hashed and shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Union

SAFE = "safe"
REGULAR = "regular"
ATOMIC = "atomic"
MODELS = (SAFE, REGULAR, ATOMIC)

# action tags; the position in TAG_ORDER is the canonical sort key
SR = "sr"            # invoke read
FR = "fr"            # finish read (carries the return value)
SW = "sw"            # invoke write (carries the write value)
FW = "fw"            # finish write
OW = "ow"            # order write (regular model only)
ER = "er"            # execute read (atomic model only)
EW = "ew"            # execute write (atomic model only)
CRIT = "crit"
NONCRIT = "noncrit"
ACQUIRE = "acquire"  # semaphore actions, never register actions
RELEASE = "release"

TAG_ORDER = (SR, SW, OW, ER, EW, FR, FW, NONCRIT, CRIT, ACQUIRE, RELEASE)
_TAG_RANK = {tag: k for k, tag in enumerate(TAG_ORDER)}
INVOCATIONS = frozenset({SR, SW})
RESPONSES = frozenset({FR, FW})
BASE_TAGS = frozenset({SR, FR, SW, FW})
INTERNAL_TAGS = frozenset({OW, ER, EW})
_VALUED = frozenset({FR, SW})


class Action(NamedTuple):
    kind: str
    thread: int
    value: Optional[int] = None

    def __str__(self) -> str:
        if self.value is None:
            return f"{self.kind} {self.thread}"
        return f"{self.kind} {self.thread} {self.value}"

    @classmethod
    def parse(cls, text: str) -> "Action":
        parts = text.split()
        if not parts or parts[0] not in _TAG_RANK:
            raise ValueError(f"unknown action {text!r}")
        kind = parts[0]
        want = 3 if kind in _VALUED else 2
        if len(parts) != want:
            raise ValueError(f"action {text!r} needs {want - 1} argument(s)")
        try:
            nums = [int(p) for p in parts[1:]]
        except ValueError:
            raise ValueError(f"non-integer argument in {text!r}") from None
        if any(x < 0 for x in nums):
            raise ValueError(f"negative argument in {text!r}")
        return cls(kind, *nums)


def action_key(a: Action) -> tuple:
    return (_TAG_RANK[a.kind], a.thread, -1 if a.value is None else a.value)


@dataclass(frozen=True)
class RegisterConfig:
    domain_size: int
    initial: int = 0
    n: int = 2

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError("domain_size must be at least 1")
        if not 0 <= self.initial < self.domain_size:
            raise ValueError(f"initial value {self.initial} outside domain 0..{self.domain_size - 1}")
        if self.n < 1:
            raise ValueError("a register needs at least one thread")


# ---- slots -------------------------------------------------------------------

# Slots are dataclasses rather than tuples: equality must tell the kinds apart
# (a tuple-based AtomicReading(None) would equal AtomicWriting(None)).

@dataclass(frozen=True)
class Idle:
    pass


IDLE = Idle()


@dataclass(frozen=True)
class SafeReading:
    overlap: bool = False


@dataclass(frozen=True)
class SafeWriting:
    next: int
    overlap: bool = False


@dataclass(frozen=True)
class RegularReading:
    posval: frozenset


@dataclass(frozen=True)
class RegularWriting:
    pending: bool
    wval: int


@dataclass(frozen=True)
class AtomicReading:
    val: Optional[int] = None


@dataclass(frozen=True)
class AtomicWriting:
    val: Optional[int]


Slot = Union[Idle, SafeReading, SafeWriting, RegularReading, RegularWriting, AtomicReading, AtomicWriting]

_READING = (SafeReading, RegularReading, AtomicReading)
_WRITING = (SafeWriting, RegularWriting, AtomicWriting)


@dataclass(frozen=True)
class RegisterState:
    model: str
    current: int
    slots: tuple
    config: RegisterConfig

    def idle(self) -> frozenset:
        return frozenset(i for i, s in enumerate(self.slots) if type(s) is Idle)

    def readers(self) -> frozenset:
        return frozenset(i for i, s in enumerate(self.slots) if isinstance(s, _READING))

    def writers(self) -> frozenset:
        return frozenset(i for i, s in enumerate(self.slots) if isinstance(s, _WRITING))

    def pending(self) -> frozenset:
        return frozenset(i for i, s in enumerate(self.slots)
                         if type(s) is RegularWriting and s.pending)

    def _with(self, current: int, slots) -> "RegisterState":
        return RegisterState(self.model, current, tuple(slots), self.config)


class NotEnabled(ValueError):
    """The requested action is not enabled in the register state."""


def initial_register(model: str, config: RegisterConfig) -> RegisterState:
    if model not in MODELS:
        raise ValueError(f"unknown register model {model!r}")
    return RegisterState(model, config.initial, (IDLE,) * config.n, config)


# ---- transition relation -------------------------------------------------------

def transitions(state: RegisterState) -> list:
    """All ``(action, successor)`` pairs of ``state`` in canonical order.

    Nondeterministic summands contribute one pair per admissible value, so the
    same action may occur several times with different successors.
    """
    fn = _TRANSITIONS[state.model]
    out = fn(state)
    out.sort(key=lambda p: (action_key(p[0]), p[1].current))
    return out


def _invokes(state, out, start_read, start_write):
    d = state.config.domain_size
    for i, s in enumerate(state.slots):
        if type(s) is Idle:
            out.append((Action(SR, i), start_read(i)))
            for v in range(d):
                out.append((Action(SW, i, v), start_write(i, v)))


def _safe(state: RegisterState) -> list:
    slots = state.slots
    d = state.config.domain_size
    out: list = []

    def other_writing(i):
        return any(type(s) is SafeWriting for j, s in enumerate(slots) if j != i)

    def start_read(i):
        new = list(slots)
        new[i] = SafeReading(other_writing(i))
        return state._with(state.current, new)

    def start_write(i, v):
        new = list(slots)
        for j, s in enumerate(slots):
            if j != i and type(s) is not Idle and not s.overlap:
                new[j] = replace(s, overlap=True)
        new[i] = SafeWriting(v, other_writing(i))
        return state._with(state.current, new)

    _invokes(state, out, start_read, start_write)
    for i, s in enumerate(slots):
        if type(s) is SafeReading:
            done = list(slots)
            done[i] = IDLE
            succ = state._with(state.current, done)
            values = range(d) if s.overlap else (state.current,)
            for v in values:
                out.append((Action(FR, i, v), succ))
        elif type(s) is SafeWriting:
            done = list(slots)
            done[i] = IDLE
            values = range(d) if s.overlap else (s.next,)
            for v in values:
                out.append((Action(FW, i), state._with(v, done)))
    return out


def _regular(state: RegisterState) -> list:
    slots = state.slots
    out: list = []

    def start_read(i):
        vals = {state.current}
        vals.update(s.wval for s in slots if type(s) is RegularWriting)
        new = list(slots)
        new[i] = RegularReading(frozenset(vals))
        return state._with(state.current, new)

    def start_write(i, v):
        new = [RegularReading(s.posval | {v}) if type(s) is RegularReading else s for s in slots]
        new[i] = RegularWriting(True, v)
        return state._with(state.current, new)

    _invokes(state, out, start_read, start_write)
    for i, s in enumerate(slots):
        if type(s) is RegularReading:
            done = list(slots)
            done[i] = IDLE
            succ = state._with(state.current, done)
            for v in sorted(s.posval):
                out.append((Action(FR, i, v), succ))
        elif type(s) is RegularWriting:
            new = list(slots)
            if s.pending:
                new[i] = RegularWriting(False, s.wval)
                out.append((Action(OW, i), state._with(s.wval, new)))
            else:
                new[i] = IDLE
                out.append((Action(FW, i), state._with(state.current, new)))
    return out


def _atomic(state: RegisterState) -> list:
    slots = state.slots
    out: list = []

    def start_read(i):
        new = list(slots)
        new[i] = AtomicReading(None)
        return state._with(state.current, new)

    def start_write(i, v):
        new = list(slots)
        new[i] = AtomicWriting(v)
        return state._with(state.current, new)

    _invokes(state, out, start_read, start_write)
    for i, s in enumerate(slots):
        new = list(slots)
        if type(s) is AtomicReading:
            if s.val is None:
                new[i] = AtomicReading(state.current)
                out.append((Action(ER, i), state._with(state.current, new)))
            else:
                new[i] = IDLE
                out.append((Action(FR, i, s.val), state._with(state.current, new)))
        elif type(s) is AtomicWriting:
            if s.val is not None:
                new[i] = AtomicWriting(None)
                out.append((Action(EW, i), state._with(s.val, new)))
            else:
                new[i] = IDLE
                out.append((Action(FW, i), state._with(state.current, new)))
    return out


_TRANSITIONS = {SAFE: _safe, REGULAR: _regular, ATOMIC: _atomic}


def enabled(state: RegisterState) -> dict:
    """Map each enabled action to the tuple of its successor states."""
    res: dict = {}
    for a, succ in transitions(state):
        res.setdefault(a, [])
        if succ not in res[a]:
            res[a].append(succ)
    return {a: tuple(v) for a, v in res.items()}


def step(state: RegisterState, action: Action) -> tuple:
    succs = tuple(dict.fromkeys(s for a, s in transitions(state) if a == action))
    if not succs:
        raise NotEnabled(f"{action} is not enabled in the {state.model} register")
    return succs


def check_state(state: RegisterState) -> None:
    """Raise ``AssertionError`` if ``state`` breaks a model invariant."""
    cfg = state.config
    assert 0 <= state.current < cfg.domain_size
    assert len(state.slots) == cfg.n
    allowed = {
        SAFE: (Idle, SafeReading, SafeWriting),
        REGULAR: (Idle, RegularReading, RegularWriting),
        ATOMIC: (Idle, AtomicReading, AtomicWriting),
    }[state.model]
    for s in state.slots:
        assert type(s) in allowed, s
        if type(s) is SafeWriting:
            assert 0 <= s.next < cfg.domain_size
        elif type(s) is RegularReading:
            assert s.posval and all(0 <= v < cfg.domain_size for v in s.posval)
        elif type(s) is RegularWriting:
            assert 0 <= s.wval < cfg.domain_size
        elif type(s) in (AtomicReading, AtomicWriting) and s.val is not None:
            assert 0 <= s.val < cfg.domain_size
