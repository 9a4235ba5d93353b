import itertools

import pytest

from regmc import schedules as sc
from regmc.register_models import Action
from regmc.schedules import (
    FAILS, HOLDS, INIT, UNKNOWN, OperationRef, Schedule, ScheduleError, parse_schedule,
)


def S(text, n=2, d=2, init=0):
    return parse_schedule(f"schedule n={n} domain={d} init={init}\n{text}")


def ref(t, k):
    return OperationRef(t, k)


class TestParse:
    def test_minimal(self):
        s = parse_schedule("sw 0 1 / fw 0 / sr 1 / fr 1 1")
        assert len(s.events) == 4 and s.complete
        assert [o.label() for o in s.ops] == ["w_init(0)", "w0.0(1)", "r1.0(1)"]

    def test_double_invocation(self):
        with pytest.raises(ScheduleError):
            parse_schedule("sr 0 / sr 0")

    def test_response_without_invocation(self):
        with pytest.raises(ScheduleError):
            parse_schedule("fr 0 1")

    def test_mismatched_response(self):
        with pytest.raises(ScheduleError):
            parse_schedule("sr 0 / fw 0")

    def test_value_out_of_domain(self):
        with pytest.raises(ScheduleError):
            S("sw 0 2 / fw 0")

    def test_thread_out_of_range(self):
        with pytest.raises(ScheduleError):
            S("sr 2 / fr 2 0")

    def test_internal_actions_rejected(self):
        with pytest.raises(ScheduleError):
            parse_schedule("sw 0 1 / ow 0 / fw 0")

    def test_comments_and_header(self):
        s = parse_schedule("# a comment\nschedule n=3 domain=4 init=2\nsr 2  # read\nfr 2 2\n")
        assert (s.n, s.domain_size, s.initial) == (3, 4, 2)

    def test_bad_header(self):
        with pytest.raises(ScheduleError):
            parse_schedule("schedule n=x\n")

    def test_incomplete(self):
        assert not parse_schedule("sr 0").complete

    def test_round_trip_text(self, crossed_reads):
        assert parse_schedule(crossed_reads.to_text()) == crossed_reads

    def test_crossed_reads_has_five_operations(self, crossed_reads):
        assert len(crossed_reads.ops) == 5


class TestOrder:
    def test_init_precedes_everything(self, crossed_reads):
        for o in crossed_reads.ops:
            if o.ref != INIT:
                assert sc.precedes(crossed_reads, INIT, o.ref)
                assert not sc.precedes(crossed_reads, o.ref, INIT)

    def test_sequential(self):
        s = S("sw 0 1 / fw 0 / sr 1 / fr 1 1")
        assert sc.precedes(s, ref(0, 0), ref(1, 0))

    def test_overlap_is_incomparable(self):
        s = S("sw 0 1 / sr 1 / fw 0 / fr 1 1")
        assert not sc.precedes(s, ref(0, 0), ref(1, 0))
        assert not sc.precedes(s, ref(1, 0), ref(0, 0))

    def test_unknown_ref(self):
        s = S("sr 0 / fr 0 0")
        with pytest.raises(KeyError):
            sc.precedes(s, ref(1, 0), INIT)

    def test_strict_partial_order_on_generated(self):
        for s in sc.generate_schedules(2, 2, 4):
            refs = [o.ref for o in s.ops]
            for a in refs:
                assert not sc.precedes(s, a, a)
            for a, b in itertools.permutations(refs, 2):
                if sc.precedes(s, a, b):
                    assert not sc.precedes(s, b, a)
            for a, b, c in itertools.permutations(refs, 3):
                if sc.precedes(s, a, b) and sc.precedes(s, b, c):
                    assert sc.precedes(s, a, c)


class TestWriteSets:
    def test_single_write_then_read(self):
        s = S("sw 0 1 / fw 0 / sr 1 / fr 1 1")
        r = ref(1, 0)
        assert sc.fixed_writes(s, r) == {INIT, ref(0, 0)}
        assert sc.relevant_writes(s, r) == {INIT, ref(0, 0)}
        assert sc.can_read_from(s, r, ref(0, 0)) and not sc.can_read_from(s, r, INIT)

    def test_crossed_reads_sets(self, crossed_reads):
        r1, r2 = ref(2, 0), ref(2, 1)
        assert sc.relevant_writes(crossed_reads, r2) == {INIT, ref(0, 0), ref(1, 0)}
        assert sc.fixed_writes(crossed_reads, r1) == {INIT, ref(0, 0)}

    def test_read_before_write(self):
        s = S("sr 1 / fr 1 0 / sw 0 1 / fw 0")
        assert ref(0, 0) not in sc.relevant_writes(s, ref(1, 0))

    def test_kinds_checked(self):
        s = S("sw 0 1 / fw 0 / sr 1 / fr 1 1")
        with pytest.raises(ScheduleError):
            sc.fixed_writes(s, ref(0, 0))
        with pytest.raises(ScheduleError):
            sc.can_read_from(s, ref(1, 0), ref(1, 0))

    def test_overlapping(self):
        s = S("sw 0 1 / sr 1 / fw 0 / fr 1 1")
        assert sc.has_overlapping_writes(s, ref(1, 0))
        assert not sc.has_overlapping_writes(S("sr 1 / fr 1 0"), ref(1, 0))

    def test_sets_never_empty(self):
        for s in sc.generate_schedules(2, 2, 3):
            for r in s.reads:
                assert sc.fixed_writes(s, r) and sc.relevant_writes(s, r)


class TestSingleWriterConditions:
    def test_safe_sequential(self):
        assert sc.check_safe(S("sw 0 1 / fw 0 / sr 1 / fr 1 1")).holds

    def test_safe_wrong_value(self):
        v = sc.check_safe(S("sw 0 1 / fw 0 / sr 1 / fr 1 0"))
        assert v.status == FAILS and v.witness == ref(1, 0)

    def test_safe_overlap_returns_old(self):
        assert sc.check_safe(S("sw 0 1 / sr 1 / fr 1 0 / fw 0")).holds

    def test_regular_overlapping_value(self):
        assert sc.check_regular(S("sw 0 1 / sr 1 / fr 1 1 / fw 0")).holds

    def test_regular_rejects_foreign_value(self):
        v = sc.check_regular(S("sw 0 1 / sr 1 / fr 1 2 / fw 0", d=3))
        assert v.status == FAILS

    def test_regular_new_old_inversion(self):
        s = S("sw 0 1 / fw 0 / sw 0 3 / sr 1 / fr 1 3 / sr 1 / fr 1 1 / fw 0", d=4)
        assert sc.check_regular(s).holds
        assert sc.check_atomic(s).status == FAILS

    def test_multi_writer_rejected(self, split_reads):
        with pytest.raises(ScheduleError):
            sc.check_safe(split_reads)
        with pytest.raises(ScheduleError):
            sc.check_regular(split_reads)


class TestSerialisationConditions:
    def test_atomic_sequential_witness(self):
        s = S("sw 0 1 / fw 0 / sr 1 / fr 1 1")
        v = sc.check_atomic(s)
        assert v.holds and v.witness == (INIT, ref(0, 0), ref(1, 0))

    def test_atomic_overlap(self):
        s = S("sw 0 1 / sr 1 / fr 1 1 / fw 0")
        v = sc.check_atomic(s)
        assert v.holds and v.witness == (INIT, ref(0, 0), ref(1, 0))

    def test_split_reads(self, split_reads):
        assert sc.check_atomic(split_reads).status == FAILS
        assert sc.check_weak(split_reads).holds
        assert sc.check_write_order(split_reads).status == FAILS

    def test_crossed_reads(self, crossed_reads):
        assert sc.check_write_order(crossed_reads).status == FAILS

    def test_weak_fails_on_invented_value(self):
        s = S("sw 0 1 / sw 1 2 / fw 0 / fw 1 / sr 0 / fr 0 3", n=2, d=4)
        assert sc.check_weak(s).status == FAILS

    def test_empty_schedule(self):
        s = S("")
        for name, fn in sc.CONDITIONS.items():
            assert fn(s).holds, name

    def test_limit_gives_unknown(self):
        s = S(" / ".join(["sw 0 1 / fw 0"] * 6))
        assert sc.check_atomic(s, limit=3).status == UNKNOWN
        assert sc.check_write_order(s, limit=3).status == UNKNOWN
        assert sc.check_weak(s, limit=3).status == UNKNOWN

    def test_incomplete_rejected(self):
        with pytest.raises(ScheduleError):
            sc.check_atomic(parse_schedule("sr 0"))

    def test_atomic_implies_write_order_family(self):
        s = S("sw 0 1 / sr 1 / fw 0 / fr 1 1 / sr 1 / fr 1 1")
        v = sc.check_write_order(s)
        assert v.holds
        sc.validate_family(s, v.witness["family"])


def test_reads_from():
    s = S("sw 0 1 / fw 0 / sr 1 / fr 1 1 / sr 0 / fr 0 1")
    fam = sc.check_write_order(s).witness["family"]
    rho = sc.reads_from(s, fam)
    assert rho == {ref(1, 0): ref(0, 0), ref(0, 1): ref(0, 0)}


def test_reads_from_initial():
    s = S("sr 1 / fr 1 0")
    fam = sc.check_write_order(s).witness["family"]
    assert sc.reads_from(s, fam) == {ref(1, 0): INIT}


def test_reads_from_rejects_bad_family(crossed_reads):
    family = {ref(2, 0): (INIT, ref(0, 0), ref(1, 0), ref(2, 0)),
              ref(2, 1): (INIT, ref(1, 0), ref(0, 0), ref(2, 1))}
    with pytest.raises(ScheduleError):
        sc.reads_from(crossed_reads, family)


def _all_schedules(max_ops):
    return sc.generate_schedules(2, 2, max_ops)


def test_implication_chain_exhaustive():
    """atomic => write-order => weak, and on single-writer schedules atomic => regular => safe."""
    count = 0
    for s in _all_schedules(5):
        count += 1
        a = sc.check_atomic(s).holds
        wo = sc.check_write_order(s)
        wk = sc.check_weak(s).holds
        assert not a or wo.holds
        assert not wo.holds or wk
        if wo.holds:
            sc.validate_family(s, wo.witness["family"])
        if s.single_writer:
            reg = sc.check_regular(s).holds
            assert not a or reg
            assert not reg or sc.check_safe(s).holds
    assert count > 10_000


def test_witnesses_revalidate():
    for s in _all_schedules(4):
        v = sc.check_atomic(s)
        if v.holds:
            assert sc.is_legal_serialisation(s, v.witness)
            assert set(v.witness) == {o.ref for o in s.ops}
        w = sc.check_weak(s)
        if w.holds:
            for r, order in w.witness.items():
                assert sc.is_legal_serialisation(s, order)


def _brute_atomic(s):
    refs = [o.ref for o in s.ops]
    return any(sc.is_legal_serialisation(s, p) for p in itertools.permutations(refs))


def test_atomic_matches_brute_force():
    for s in _all_schedules(4):
        assert sc.check_atomic(s).holds == _brute_atomic(s), s.events


def _brute_write_order(s):
    """Per-read legal serialisations over relevant writes, pairwise agreeing."""
    options = []
    for r in s.reads:
        rel = list(sc.relevant_writes(s, r)) + [r.ref]
        options.append([p for p in itertools.permutations(rel) if sc.is_legal_serialisation(s, p)])
    for combo in itertools.product(*options):
        family = {r.ref: c for r, c in zip(s.reads, combo)}
        try:
            sc.validate_family(s, family)
            return True
        except ScheduleError:
            continue
    return False


def test_write_order_matches_brute_force():
    for s in _all_schedules(4):
        assert sc.check_write_order(s).holds == _brute_write_order(s), s.events


def test_generator_counts_and_filters():
    all4 = list(sc.generate_schedules(2, 2, 2))
    assert all(s.complete for s in all4)
    sw = list(sc.generate_schedules(2, 2, 3, single_writer=True))
    assert all(s.single_writer for s in sw)
    pinned = list(sc.generate_schedules(2, 2, 3, single_writer=True, writer=1))
    assert all(w.ref.thread in (None, 1) for s in pinned for w in s.writes)
    assert len({s.events for s in all4}) == len(all4)


def test_schedule_from_events():
    s = sc.schedule_from_events([Action("sr", 0), Action("fr", 0, 0)], 1, 2)
    assert isinstance(s, Schedule) and s.complete
