import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import iv
from ringsim.protocols import RingConfig, build_ring
from ringsim.sim import (REGULAR, AdversaryPolicy, OpInterval, RandomStream, Scheduler, SchedulerPolicy, UsageError,
                         chain_witness, concurrent, contains, draw_array, precedes, resolve_read, run_loop,
                         span_of, weak_precedes)
from ringsim.trace import Trace


# -- interval algebra

def test_disjoint_intervals():
    a, b = iv(1, 3), iv(5, 9)
    assert precedes(a, b) and not concurrent(a, b)


def test_overlapping_intervals():
    a, b = iv(1, 6), iv(4, 9)
    assert not precedes(a, b) and concurrent(a, b) and weak_precedes(a, b)
    assert not weak_precedes(b, a)


def test_contains():
    assert contains(iv(1, 10), iv(2, 9))
    assert not contains(iv(2, 9), iv(1, 10))


def test_pending_interval_rejected():
    with pytest.raises(UsageError):
        precedes(iv(1, None), iv(3, 4))


@given(st.lists(st.integers(1, 20), min_size=7, max_size=7))
def test_chain_witness(gaps):
    g = gaps
    # A starts before B0, B0 ends before B1 starts, B1 starts before A2
    A = iv(0, g[0] + g[1])
    B0 = iv(g[0], g[0] + g[2])
    B1 = iv(B0.respond + g[3], B0.respond + g[3] + g[4])
    A2 = iv(B1.invoke + g[5], B1.invoke + g[5] + g[6])
    s = chain_witness(A, [B0, B1], A2)
    assert contains(span_of(A, A2), s)
    assert B0.invoke <= s.invoke <= B0.respond
    assert B1.invoke <= s.respond <= B1.respond


def test_chain_witness_rejects_bad_chain():
    with pytest.raises(UsageError):
        chain_witness(iv(5, 6), [iv(1, 2)], iv(9, 10))
    with pytest.raises(UsageError):
        chain_witness(iv(0, 6), [iv(1, 4), iv(3, 5)], iv(9, 10))


# -- safe register reads

def test_read_without_writes_returns_initial(cell):
    c = cell(initial=3)
    r = OpInterval(0, 1, 0, "read", None, 0)
    assert resolve_read(c, r, AdversaryPolicy(), RandomStream(0)) == 3


def test_read_after_completed_write(cell):
    c = cell(initial=0)
    c.value = 7      # write(7) completed at tick 10
    r = OpInterval(1, 1, 0, "read", None, 12, old=7)
    assert resolve_read(c, r, AdversaryPolicy(), RandomStream(0)) == 7


def test_overlapped_read_uses_target(cell):
    c = cell(initial=0, domain=8)
    w = OpInterval(0, 0, 0, "write", 7, 8)
    c.pending = w
    r = OpInterval(1, 1, 0, "read", None, 9, old=0, overlapped=True)
    assert resolve_read(c, r, AdversaryPolicy("target", target=5), RandomStream(0)) == 5


def test_every_domain_value_reachable(cell):
    """Enumerating forced responses covers the whole domain, even when the
    overlapping write rewrites the stored value."""
    c = cell(initial=7, domain=8)
    c.pending = OpInterval(0, 0, 0, "write", 7, 8)
    r = OpInterval(1, 1, 0, "read", None, 9, old=7, overlapped=True)
    assert {resolve_read(c, r, AdversaryPolicy(), RandomStream(0), choice=v) for v in range(8)} == set(range(8))


@given(st.integers(0, 2 ** 32), st.sampled_from(["random", "old", "new", "target"]), st.integers(2, 9))
def test_adversary_stays_in_domain(seed, variant, domain):
    c = __import__("ringsim.sim", fromlist=["RegisterCell"]).RegisterCell(0, domain, 0, 0, frozenset({0, 1}))
    c.pending = OpInterval(0, 0, 0, "write", domain - 1, 1)
    r = OpInterval(1, 1, 0, "read", None, 2, old=0, overlapped=True)
    v = resolve_read(c, r, AdversaryPolicy(variant, target=seed), RandomStream(seed))
    assert 0 <= v < domain


def test_regular_returns_old_or_new(cell):
    c = cell(initial=1, domain=8, semantics=REGULAR)
    c.pending = OpInterval(0, 0, 0, "write", 6, 1)
    r = OpInterval(1, 1, 0, "read", None, 2, old=1, overlapped=True)
    rng = RandomStream(3)
    assert {resolve_read(c, r, AdversaryPolicy(), rng) for _ in range(50)} == {1, 6}


# -- randomness and scheduling

def test_stream_matches_array():
    rs = RandomStream(42)
    a = draw_array(42, 5000)
    assert [rs.next() for _ in range(5000)] == a.tolist()
    assert a.dtype == np.int64 and (a >= 0).all()


def test_round_robin_alternates():
    s = Scheduler(SchedulerPolicy("rr"), 2, RandomStream(0))
    assert [s.pick(t, [0, 1]) for t in range(6)] == [0, 1, 0, 1, 0, 1]


def test_scheduler_aliases():
    assert SchedulerPolicy("round-robin").variant == "rr"
    assert SchedulerPolicy("seeded-random").variant == "random"
    with pytest.raises(UsageError):
        SchedulerPolicy("fifo")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5), st.integers(2, 10))
def test_random_scheduler_fairness(seed, n, B):
    T = 2000
    s = Scheduler(SchedulerPolicy("random", B), n, RandomStream(seed))
    picks = [s.pick(t, list(range(n))) for t in range(T)]
    run = best = 0
    prev = None
    for p in picks:
        run = run + 1 if p == prev else 1
        prev = p
        best = max(best, run)
    assert best <= B
    for p in range(n):
        assert picks.count(p) >= T // (n * B)
    # every window of n*B ticks contains every processor
    for t in range(T - n * B):
        assert set(picks[t:t + n * B]) == set(range(n))


# -- runs

@pytest.mark.parametrize("variant", ["atomic", "two-reg", "gray"])
def test_same_seed_same_trace(variant):
    def once():
        ring = build_ring(RingConfig(n=3, variant=variant), 11)
        run_loop(ring.engine, ring.scheduler, 3000)
        return Trace.from_engine(ring.engine, ring.config.to_dict(), ring.initial_locals, ring.initial, 11).dumps()
    assert once() == once()


@pytest.mark.parametrize("variant", ["two-reg", "gray"])
def test_ticks_strictly_increase_and_ops_are_sequential(variant):
    ring = build_ring(RingConfig(n=3, variant=variant), 5)
    run_loop(ring.engine, ring.scheduler, 4000)
    tr = Trace.from_engine(ring.engine, ring.config.to_dict(), ring.initial_locals, ring.initial)
    assert [e.tick for e in tr.events] == list(range(4000))
    pend = {}
    for e in tr.events:
        if e.event == "invoke":
            assert e.pid not in pend
            pend[e.pid] = e
        elif e.event == "respond":
            assert pend.pop(e.pid).reg == e.reg
    for op in tr.ops():
        assert op.respond is None or op.invoke < op.respond


@pytest.mark.parametrize("seed", range(4))
def test_safe_register_soundness_and_single_writer_order(seed):
    """Replaying a trace: every read that overlapped no write returned the
    latest completed write (or the initial value), and writes to a register
    never overlap."""
    ring = build_ring(RingConfig(n=3, variant="two-reg"), seed)
    run_loop(ring.engine, ring.scheduler, 5000)
    tr = Trace.from_engine(ring.engine, ring.config.to_dict(), ring.initial_locals, ring.initial)
    ops = tr.ops()
    writes = {}
    for op in ops:
        if op.kind == "write":
            writes.setdefault(op.reg, []).append(op)
    for ws in writes.values():
        for a, b in zip(ws, ws[1:]):
            assert a.respond is not None and a.respond < b.invoke
    init = tr.initial_values()
    for op in ops:
        if op.kind != "read" or op.respond is None:
            continue
        ws = writes.get(op.reg, [])
        if any(w.invoke < op.respond and (w.respond is None or w.respond > op.invoke) for w in ws):
            continue
        done = [w for w in ws if w.respond is not None and w.respond < op.invoke]
        assert op.value == (done[-1].value if done else init[op.reg])


def test_engine_rejects_foreign_writer(cell):
    from ringsim.sim import Engine, Request

    class Bad:
        def request(self, s):
            return Request("write", 0, 1)

        def advance(self, s, r):
            return s

    e = Engine([cell(writer=0)], [Bad(), Bad()], [None, None])
    with pytest.raises(UsageError):
        e.step(1)
