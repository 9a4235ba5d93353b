"""Acceptance criteria, one ``criterion`` marker per check.

The terminal summary prints one PASS/FAIL line per criterion.  The verdict
matrix explores three-thread Lamport systems with tens of millions of states
and dominates the runtime (about twenty minutes on one core).
"""
import gc
import itertools

import pytest

from regmc import register_models as rm
from regmc import schedules as sc
from regmc import trace_bridge as tb
from regmc.algorithms import build, cg, ord_cycle
from regmc.checker import (
    HOLDS, VIOLATED, SystemConfig, check_properties, explore, render_timeline,
    replay_counterexample, summarize,
)
from regmc.register_models import OW, REGULAR, RegisterConfig

Y, N = HOLDS, VIOLATED

# (algorithm, params) -> {model: (mutex, reach)}
MATRIX = {
    ("peterson", ()): {"safe": (N, Y), "regular": (N, Y), "atomic": (Y, Y)},
    ("attiya-welch", ()): {"safe": (Y, Y), "regular": (Y, Y), "atomic": (Y, Y)},
    ("attiya-welch-alt", ()): {"safe": (Y, N), "regular": (Y, N), "atomic": (Y, Y)},
    ("szymanski-flag", (("n", 3),)): {"safe": (N, N), "regular": (N, Y), "atomic": (Y, Y)},
    ("szymanski-bits", (("n", 3),)): {"safe": (N, Y), "regular": (N, Y), "atomic": (N, Y)},
    ("szymanski-3bit", (("n", 3), ("semaphore", True))):
        {"safe": (N, Y), "regular": (N, Y), "atomic": (N, Y)},
    ("lamport-3bit", (("n", 3), ("variant", "snapshot"))):
        {"safe": (Y, Y), "regular": (Y, Y), "atomic": (Y, Y)},
}

CELLS = [(name, params, model) for (name, params), row in MATRIX.items() for model in row]


def _verdicts(name, params, assignment, props=("mutex", "reach")):
    graph = explore(SystemConfig.make(build(name, **dict(params)), assignment))
    assert graph.complete, f"state limit hit after {graph.n_states} states"
    return graph, check_properties(graph, props)


# ---- 1: verdict matrix -------------------------------------------------------------

@pytest.mark.criterion(1, "mutex/reach verdicts for seven algorithms x three register models")
@pytest.mark.parametrize("name,params,model", CELLS,
                         ids=[f"{n}-{m}" for n, _, m in CELLS])
def test_verdict_matrix(name, params, model):
    graph, verdicts = _verdicts(name, params, {"all": model})
    got = (summarize(verdicts, "mutex"), summarize(verdicts, "reach"))
    del graph, verdicts
    gc.collect()
    assert got == MATRIX[(name, params)][model]


# ---- 2: mixed atomicity ------------------------------------------------------------

@pytest.mark.criterion(2, "Peterson with atomic turn and safe flags keeps mutual exclusion")
def test_mixed_atomicity():
    _, verdicts = _verdicts("peterson", (), {"all": "safe", "turn": "atomic"}, ("mutex",))
    assert summarize(verdicts, "mutex") == HOLDS


# ---- 3: targeted variants ----------------------------------------------------------

@pytest.mark.criterion(3, "variant results: Lamport re-read, reversed reset order, semaphore at 2")
@pytest.mark.parametrize("name,params,model,expected", [
    ("lamport-3bit", (("n", 2), ("variant", "reread")), "atomic", {"reach": N}),
    ("szymanski-bits", (("n", 3), ("reset_order", ("door_out", "door_in", "intent"))), "atomic",
     {"mutex": Y, "reach": Y}),
    ("szymanski-3bit", (("n", 2), ("semaphore", True)), "safe", {"mutex": Y, "reach": Y}),
], ids=["lamport-reread", "bits-reversed-reset", "3bit-semaphore-2"])
def test_targeted_variants(name, params, model, expected):
    _, verdicts = _verdicts(name, params, {"all": model})
    for prop, want in expected.items():
        assert summarize(verdicts, prop) == want, prop


# ---- 4: separating schedules -------------------------------------------------------

@pytest.mark.criterion(4, "weak/write-order/regular separations on the two overlapping-write schedules")
def test_split_reads_separation(split_reads):
    assert sc.check_weak(split_reads).holds
    assert sc.check_write_order(split_reads).status == sc.FAILS
    assert tb.simulate_schedule(REGULAR, split_reads) is None


@pytest.mark.criterion(4, "weak/write-order/regular separations on the two overlapping-write schedules")
def test_crossed_reads_separation(crossed_reads):
    assert sc.check_write_order(crossed_reads).status == sc.FAILS
    trace = tb.simulate_schedule(REGULAR, crossed_reads)
    assert trace is not None and tb.erase(trace) == crossed_reads
    assert tb.is_trace(REGULAR, trace.config, trace.events)
    # w2 is thread 1's write; its order action comes first
    assert [e.thread for e in trace.events if e.kind == OW] == [1, 0]


# ---- 5: register models versus schedule conditions ---------------------------------

C2 = RegisterConfig(2, 0, 2)
TRACE_DEPTH = 10
MAX_OPS = 5          # thread operations; with the initial write that is six operations
SINGLE_WRITER_CHECK = {rm.SAFE: sc.check_safe, rm.REGULAR: sc.check_regular, rm.ATOMIC: sc.check_atomic}


@pytest.mark.criterion(5, "register models agree with the schedule conditions (exhaustive, n=2, domain 2)")
@pytest.mark.parametrize("model", rm.MODELS)
def test_traces_satisfy_conditions(model):
    """Complete traces erase to schedules meeting the matching condition; regular ones also weak."""
    count = 0
    for trace in tb.enumerate_traces(model, C2, TRACE_DEPTH, complete=True):
        count += 1
        s = tb.erase(trace)
        if s.single_writer:
            assert SINGLE_WRITER_CHECK[model](s).holds, trace.events
        if model == REGULAR:
            assert sc.check_weak(s).holds, trace.events
    assert count > 1000


@pytest.mark.criterion(5, "register models agree with the schedule conditions (exhaustive, n=2, domain 2)")
def test_single_writer_conditions_match_simulation():
    """A single-writer schedule meets a condition iff the matching model can produce it."""
    count = 0
    for s in sc.generate_schedules(2, 2, MAX_OPS, single_writer=True):
        count += 1
        for model, check in SINGLE_WRITER_CHECK.items():
            assert check(s).holds == (tb.simulate_schedule(model, s) is not None), (model, s.events)
    assert count > 100_000


@pytest.mark.criterion(5, "register models agree with the schedule conditions (exhaustive, n=2, domain 2)")
def test_write_order_round_trip():
    """Every write-order schedule is rebuilt as a regular trace that erases back to it."""
    total = passing = 0
    for s in sc.generate_schedules(2, 2, MAX_OPS):
        total += 1
        v = sc.check_write_order(s)
        assert v.status != sc.UNKNOWN
        if not v.holds:
            continue
        passing += 1
        family = v.witness["family"]
        assert tb.check_enumeration(s, family, tb.write_enumeration(s, family)) == []
        trace = tb.construct_write_order_trace(s, family)
        assert tb.erase(trace) == s, s.events
        assert tb.is_trace(REGULAR, trace.config, trace.events), s.events
    assert total > 500_000 and passing > 100_000


# ---- 6: counterexamples ------------------------------------------------------------

VIOLATING = [(name, params, model) for name, params, model in CELLS
             if N in MATRIX[(name, params)][model]] + [
    ("lamport-3bit", (("n", 2), ("variant", "reread")), "atomic"),
    ("szymanski-flag", (("n", 2),), "regular"),
]


@pytest.mark.criterion(6, "counterexamples replay; Peterson safe timeline has the overlapping turn writes")
@pytest.mark.parametrize("name,params,model", VIOLATING,
                         ids=[f"{n}-{dict(p).get('n', 2)}-{m}" for n, p, m in VIOLATING])
def test_counterexamples_replay(name, params, model):
    graph, verdicts = _verdicts(name, params, {"all": model})
    emitted = [v for v in verdicts if v.outcome == VIOLATED]
    assert emitted
    for v in emitted:
        replay_counterexample(graph, v.counterexample)
        render_timeline(v.counterexample, graph.system.n)


@pytest.mark.criterion(6, "counterexamples replay; Peterson safe timeline has the overlapping turn writes")
def test_peterson_safe_timeline_shape():
    graph, verdicts = _verdicts("peterson", (), {"all": "safe"}, ("mutex",))
    (v,) = verdicts
    tl = render_timeline(v.counterexample, 2)
    turn_writes = tl.spans_on("turn", "write")
    assert len(turn_writes) == 2
    a, b = turn_writes
    assert a.thread != b.thread and b.name in a.overlaps and a.name in b.overlaps
    turn_reads = tl.spans_on("turn", "read")
    assert any(r.overlaps for r in turn_reads)


@pytest.mark.criterion(6, "counterexamples replay; Peterson safe timeline has the overlapping turn writes")
def test_szymanski_regular_two_reads_in_one_write():
    """Two reads of flag0 inside one write return the new value 3 and then the old value 1."""
    graph, verdicts = _verdicts("szymanski-flag", (("n", 2),), {"all": "regular"}, ("mutex",))
    tl = render_timeline(verdicts[0].counterexample, 2)
    found = []
    for w in tl.spans_on("flag0", "write"):
        inside = [r.value for r in tl.spans_on("flag0", "read") if w.name in r.overlaps]
        if any(inside[k:k + 2] == [3, 1] for k in range(len(inside))):
            found.append(w.name)
    assert found


# ---- 7: cg truth table -------------------------------------------------------------

def _cg_oracle(v, gamma, j):
    last = len(gamma) - 1
    compare = v[gamma[last]] if j == 0 else 1 - v[gamma[j - 1]]
    return 1 if v[gamma[j]] == compare else 0


@pytest.mark.criterion(7, "cg agrees with a brute-force truth table for cycles up to four")
def test_cg_truth_table():
    mismatches = 0
    checked = 0
    for size in range(1, 5):
        for members in itertools.combinations(range(5), size):
            gamma = ord_cycle(members)
            for bits in itertools.product((0, 1), repeat=size):
                v = dict(zip(gamma, bits))
                for j in range(size):
                    checked += 1
                    mismatches += cg(v, gamma, j) != _cg_oracle(v, gamma, j)
    assert checked > 0 and mismatches == 0
