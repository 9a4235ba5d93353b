import itertools

import pytest

from regmc import register_models as rm
from regmc.register_models import (
    ATOMIC, EW, ER, FR, FW, OW, REGULAR, SAFE, SR, SW, Action, AtomicReading, AtomicWriting,
    IDLE, RegisterConfig, RegularWriting, SafeReading, SafeWriting,
)
from regmc.trace_bridge import enumerate_traces


def cfg(d=2, init=0, n=2):
    return RegisterConfig(d, init, n)


def actions(state):
    return set(rm.enabled(state))


class TestConfig:
    def test_initial_safe(self):
        s = rm.initial_register(SAFE, cfg())
        assert s.current == 0 and s.slots == (IDLE, IDLE)
        assert s.idle() == {0, 1} and not s.readers() and not s.writers()

    def test_initial_regular_has_no_pending(self):
        s = rm.initial_register(REGULAR, cfg(5, 0, 3))
        assert s.current == 0 and s.pending() == frozenset() and s.idle() == {0, 1, 2}

    @pytest.mark.parametrize("d,init,n", [(0, 0, 2), (2, 2, 2), (2, -1, 2), (2, 0, 0)])
    def test_invalid_config(self, d, init, n):
        with pytest.raises(ValueError):
            RegisterConfig(d, init, n)

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            rm.initial_register("sequential", cfg())


class TestAction:
    @pytest.mark.parametrize("text", ["sr 0", "fr 1 3", "sw 2 0", "fw 0", "ow 1", "er 0", "ew 2",
                                      "crit 1", "noncrit 0"])
    def test_round_trip(self, text):
        assert str(Action.parse(text)) == text

    @pytest.mark.parametrize("bad", ["", "xx 0", "sr", "fr 0", "sw 0 1 2", "sr a", "sr -1"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            Action.parse(bad)


class TestSafe:
    def test_initial_enabled(self):
        s = rm.initial_register(SAFE, cfg())
        assert actions(s) == {Action(SR, 0), Action(SR, 1), Action(SW, 0, 0), Action(SW, 0, 1),
                              Action(SW, 1, 0), Action(SW, 1, 1)}

    def test_overlapped_read_returns_anything(self):
        s = rm.initial_register(SAFE, cfg())
        (s,) = rm.step(s, Action(SR, 0))
        (s,) = rm.step(s, Action(SW, 1, 1))
        assert s.slots[0] == SafeReading(True)
        assert {a for a in actions(s) if a.kind == FR} == {Action(FR, 0, 0), Action(FR, 0, 1)}

    def test_clean_read_returns_current(self):
        s = rm.initial_register(SAFE, cfg(3, 2))
        (s,) = rm.step(s, Action(SR, 0))
        assert {a for a in actions(s) if a.kind == FR} == {Action(FR, 0, 2)}

    def test_overlapping_writes_leave_arbitrary_value(self):
        s = rm.initial_register(SAFE, cfg())
        (s,) = rm.step(s, Action(SW, 0, 1))
        (s,) = rm.step(s, Action(SW, 1, 1))
        assert s.slots == (SafeWriting(1, True), SafeWriting(1, True))
        succ = rm.step(s, Action(FW, 0))
        assert sorted(x.current for x in succ) == [0, 1]

    def test_clean_write_sets_value(self):
        s = rm.initial_register(SAFE, cfg(3))
        (s,) = rm.step(s, Action(SW, 0, 2))
        (s,) = rm.step(s, Action(FW, 0))
        assert s.current == 2 and s.slots == (IDLE, IDLE)

    def test_write_of_same_value_still_overlaps(self):
        s = rm.initial_register(SAFE, cfg())
        (s,) = rm.step(s, Action(SR, 1))
        (s,) = rm.step(s, Action(SW, 0, 0))
        assert s.slots[1].overlap

    def test_overlap_is_sticky_after_write_ends(self):
        s = rm.initial_register(SAFE, cfg())
        (s,) = rm.step(s, Action(SR, 1))
        (s,) = rm.step(s, Action(SW, 0, 1))
        (s,) = rm.step(s, Action(FW, 0))
        assert {a.value for a in actions(s) if a.kind == FR} == {0, 1}

    def test_step_rejects_disabled(self):
        s = rm.initial_register(SAFE, cfg())
        with pytest.raises(rm.NotEnabled):
            rm.step(s, Action(FR, 0, 0))


class TestRegular:
    def test_posval_collects_overlapping_writes(self):
        s = rm.initial_register(REGULAR, cfg(3, 0, 3))
        (s,) = rm.step(s, Action(SW, 0, 1))
        (s,) = rm.step(s, Action(OW, 0))
        (s,) = rm.step(s, Action(FW, 0))
        (s,) = rm.step(s, Action(SW, 1, 2))
        (s,) = rm.step(s, Action(SR, 2))
        assert s.slots[2].posval == {1, 2}

    def test_finish_write_needs_order(self):
        s = rm.initial_register(REGULAR, cfg())
        (s,) = rm.step(s, Action(SW, 0, 1))
        assert s.slots[0] == RegularWriting(True, 1)
        assert Action(FW, 0) not in actions(s) and Action(OW, 0) in actions(s)
        (s,) = rm.step(s, Action(OW, 0))
        assert s.current == 1 and Action(FW, 0) in actions(s)

    def test_read_started_before_write_learns_its_value(self):
        s = rm.initial_register(REGULAR, cfg())
        (s,) = rm.step(s, Action(SR, 1))
        (s,) = rm.step(s, Action(SW, 0, 1))
        assert s.slots[1].posval == {0, 1}


class TestAtomic:
    def test_read_needs_execute(self):
        s = rm.initial_register(ATOMIC, cfg())
        (s,) = rm.step(s, Action(SR, 0))
        assert s.slots[0] == AtomicReading(None)
        acts = actions(s)
        assert Action(ER, 0) in acts and not any(a.kind == FR for a in acts)

    def test_execute_read_copies_current(self):
        s = rm.initial_register(ATOMIC, cfg(4, 3))
        (s,) = rm.step(s, Action(SR, 0))
        (s,) = rm.step(s, Action(ER, 0))
        assert s.slots[0] == AtomicReading(3) and s.current == 3

    def test_write_executes_then_finishes(self):
        s = rm.initial_register(ATOMIC, cfg())
        (s,) = rm.step(s, Action(SW, 0, 1))
        assert Action(FW, 0) not in actions(s)
        (s,) = rm.step(s, Action(EW, 0))
        assert s.current == 1 and s.slots[0] == AtomicWriting(None)
        assert Action(FW, 0) in actions(s)

    def test_reading_and_writing_slots_are_distinct(self):
        # same payload, different slot kinds: must not compare equal
        assert AtomicReading(None) != AtomicWriting(None)
        assert hash(rm.initial_register(ATOMIC, cfg())) is not None


def _reachable(model, c, depth):
    seen = {rm.initial_register(model, c)}
    frontier = list(seen)
    for _ in range(depth):
        nxt = []
        for s in frontier:
            for _, t in rm.transitions(s):
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return seen


@pytest.mark.parametrize("model", [SAFE, REGULAR, ATOMIC])
def test_partition_and_state_invariants(model):
    c = cfg(2, 0, 3)
    for s in _reachable(model, c, 7):
        rm.check_state(s)
        parts = [s.idle(), s.readers(), s.writers()]
        assert frozenset().union(*parts) == frozenset(range(3))
        assert sum(len(p) for p in parts) == 3
        assert s.pending() <= s.writers()


@pytest.mark.parametrize("model", [SAFE, REGULAR, ATOMIC])
def test_transitions_sorted_and_deterministic(model):
    for s in _reachable(model, cfg(), 5):
        a = rm.transitions(s)
        assert a == rm.transitions(s)
        keys = [rm.action_key(x) for x, _ in a]
        assert keys == sorted(keys)


def test_safe_without_overlap_returns_latest_write():
    """Runs where no two operations of different threads overlap behave sequentially."""
    c = cfg(2, 0, 2)
    for tr in enumerate_traces(SAFE, c, 8):
        active, overlapped, last = {}, False, 0
        for e in tr.events:
            if e.kind in (SR, SW):
                if active:
                    overlapped = True
                active[e.thread] = e
            elif e.kind == FW:
                last = active.pop(e.thread).value
            elif e.kind == FR:
                active.pop(e.thread)
                if not overlapped:
                    assert e.value == last, tr.events
        # once any overlap happened the run is no longer constrained


def _runs(model, c, depth):
    """Every (trace, final state set) pair up to ``depth``."""
    for tr in enumerate_traces(model, c, depth):
        states = {rm.initial_register(model, c)}
        for e in tr.events:
            states = {t for s in states for a, t in rm.transitions(s) if a == e}
        yield tr.events, states


def test_regular_posval_soundness():
    """A reader's posval only holds the value current at its start or values written since."""
    c = cfg(3, 0, 2)
    for events, states in _runs(REGULAR, c, 7):
        allowed = {}
        writing = {}
        current = 0
        for e in events:
            if e.kind == SR:
                allowed[e.thread] = {current} | set(writing.values())
            elif e.kind == SW:
                writing[e.thread] = e.value
                for r in allowed:
                    allowed[r].add(e.value)
            elif e.kind == OW:
                current = writing[e.thread]
            elif e.kind == FW:
                del writing[e.thread]
            elif e.kind == FR:
                del allowed[e.thread]
        for s in states:
            assert s.current == current
            for i, slot in enumerate(s.slots):
                if hasattr(slot, "posval"):
                    assert slot.posval <= allowed[i], events


def test_interning_equality_matches_structure():
    a = rm.initial_register(SAFE, cfg())
    b = rm.initial_register(SAFE, cfg())
    assert a == b and hash(a) == hash(b)
    for x, y in itertools.combinations(_reachable(ATOMIC, cfg(), 4), 2):
        assert (x == y) == ((x.current, x.slots) == (y.current, y.slots))
