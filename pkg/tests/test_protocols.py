import pytest
from hypothesis import given, settings, strategies as st

from ringsim.gray import gray_encode
from ringsim.protocols import (RD, AtomicDij, AtomicState, Configuration, GrayDij, GrayState, RingConfig,
                               TwoRegDij, TwoRegState, build_ring, default_K, guard, layout, token_holders)
from ringsim.sim import READ, WRITE, UsageError, run_loop


def cycle(prog, state, mem):
    """Run one protocol cycle solo against the register file ``mem``; returns (state, log)."""
    log = []
    while True:
        req = prog.request(state)
        resp = None
        if req.op == READ:
            resp = mem[req.reg]
        elif req.op == WRITE:
            mem[req.reg] = resp = req.value
        log.append((req.op, req.reg, resp if req.op != "hl_end" else req.info))
        prev, state = state.pc, prog.advance(state, resp)
        if state.pc == RD and prev != RD:
            return state, log


def ops(log, kind):
    return [(r, v) for op, r, v in log if op == kind]


def marks(log):
    return [op for op, _, _ in log if op in ("cs_enter", "cs_exit")]


# -- guards

def test_guard_table():
    assert guard(0, 5, 5, 7) == (True, 6)
    assert guard(0, 6, 6, 7) == (True, 0)
    assert guard(0, 5, 4, 7) == (False, 5)
    assert guard(1, 3, 6, 7) == (True, 6)
    assert guard(2, 6, 6, 7) == (False, 6)
    assert guard(1, 3, None, 7) == (False, 3)
    assert guard(0, 3, None, 7) == (False, 3)


def test_token_holders_examples():
    assert token_holders([4, 4, 4]) == {0}
    assert token_holders([2, 1, 1]) == {1}
    assert token_holders([0, 1, 2]) == {1, 2}


@given(st.integers(2, 6), st.data())
def test_some_processor_always_holds(n, data):
    x = data.draw(st.lists(st.integers(0, 2 * n), min_size=n, max_size=n))
    assert token_holders(x)


# -- configuration

def test_defaults():
    assert [default_K(n) for n in (2, 3, 4)] == [8, 8, 16]
    cfg = RingConfig(n=3)
    assert (cfg.K, cfg.phi) == (8, 7)


@pytest.mark.parametrize("kw, msg", [
    (dict(n=3, K=6), "K > 2n"),
    (dict(n=3, K=8, phi=6), "phi > 2n"),
    (dict(n=3, K=9, variant="gray"), "power of two"),
    (dict(n=1), "at least 2"),
    (dict(n=3, variant="ring"), "unknown variant"),
])
def test_config_rejects(kw, msg):
    with pytest.raises(UsageError, match=msg):
        RingConfig(**kw)


def test_unchecked_allows_small_parameters():
    assert RingConfig(n=2, K=3, variant="atomic", unchecked=True).K == 3


def test_config_dict_roundtrip():
    cfg = RingConfig(n=4, variant="gray", K=16)
    assert RingConfig.from_dict(cfg.to_dict()) == cfg


def test_gray_layout_is_per_bit_pairs():
    lay = layout(RingConfig(n=2, variant="gray", K=8))
    assert lay["own"][0] == ((0, 1), (2, 3), (4, 5))
    assert lay["pred"][0] == lay["own"][1]
    assert lay["domain"] == 2


# -- atomic baseline

def test_atomic_p0_advances_on_equal():
    prog = AtomicDij(0, 7, own=0, pred=2)
    mem = [5, 5, 5]
    s, log = cycle(prog, AtomicState(RD, 5, 5), mem)
    assert s.x == 6 and marks(log) == ["cs_enter", "cs_exit"] and mem[0] == 6


def test_atomic_copy_rule():
    prog = AtomicDij(1, 7, own=1, pred=0)
    mem = [6, 3, 3]
    s, log = cycle(prog, AtomicState(RD, 3, 0), mem)
    assert s.x == 6 and "cs_enter" in marks(log)


def test_atomic_no_guard_rewrites():
    prog = AtomicDij(2, 7, own=2, pred=1)
    mem = [6, 6, 6]
    s, log = cycle(prog, AtomicState(RD, 6, 0), mem)
    assert marks(log) == [] and ops(log, WRITE) == [(2, 6)]


# -- two-register

def test_two_reg_busy_input_means_no_cs():
    prog = TwoRegDij(1, 7, 3, own=(2, 3), pred=(0, 1))
    mem = [6, 4, 2, 2]
    s, log = cycle(prog, TwoRegState(RD, 0, 0), mem)
    assert s.y is None and marks(log) == []
    assert ops(log, WRITE) == []   # AWrite(2) on a (2,2) pair is ineffective


def test_two_reg_copy_is_effective():
    prog = TwoRegDij(1, 7, 3, own=(2, 3), pred=(0, 1))
    mem = [6, 6, 2, 2]
    s, log = cycle(prog, TwoRegState(RD, 0, 0), mem)
    assert s.x == 6 and marks(log) == ["cs_enter", "cs_exit"]
    assert ops(log, WRITE) == [(2, 6), (3, 6)]
    # phi scans of the predecessor pair
    assert len([r for r, _ in ops(log, READ) if r in (0, 1)]) == 2 * 3


def test_two_reg_p0_wraps():
    prog = TwoRegDij(0, 7, 3, own=(0, 1), pred=(2, 3))
    mem = [6, 6, 6, 6]
    s, log = cycle(prog, TwoRegState(RD, 0, 0), mem)
    assert s.x == 0 and mem[:2] == [0, 0]


# -- gray code

def _gray_prog(pid=1, k=3):
    own = tuple((2 * b, 2 * b + 1) for b in range(k))
    pred = tuple((2 * (k + b), 2 * (k + b) + 1) for b in range(k))
    return GrayDij(pid, 1 << k, k, own, pred), own, pred


def test_gray_writes_lsb_first():
    prog, own, pred = _gray_prog()
    mem = [0] * 12
    for b, bit in enumerate(gray_encode(5, 3).bits):
        mem[pred[b][0]] = mem[pred[b][1]] = bit
    s, log = cycle(prog, GrayState(RD, 0, (0, 0, 0), (0, 0, 0), 0, 0), mem)
    assert s.x == 5 and "cs_enter" in marks(log)
    written = [r for r, _ in ops(log, WRITE)]
    assert written == [4, 5, 2, 3, 0, 1]        # bit 2, then 1, then 0 (MSB last)
    assert [mem[a] for a, _ in own] == [1, 1, 1]


def test_gray_busy_bit_means_no_cs():
    prog, own, pred = _gray_prog()
    mem = [0] * 12
    mem[pred[1][1]] = 1     # bit 1 pair disagrees
    s, log = cycle(prog, GrayState(RD, 0, (0, 0, 0), (0, 0, 0), 3, 0), mem)
    assert s.y is None and marks(log) == []


@pytest.mark.parametrize("n, K", [(2, 8), (3, 8)])
def test_gray_token_step_changes_one_pair(n, K):
    """From a home state, each completed token pass changes exactly one
    register pair, since consecutive codes differ in one bit."""
    ring = build_ring(RingConfig(n=n, variant="gray", K=K, init="legit", init_value=3), 0)
    eng = ring.engine
    changes = []
    for _ in range(3 * n):
        before = eng.values()
        # step the unique privileged processor through one whole cycle
        holder = ring.configuration().holders()
        assert holder is not None and len(holder) == 1
        pid = holder.pop()
        left = False
        while True:
            eng.step(pid)
            pc = eng.states[pid].pc
            if pc != RD:
                left = True
            elif left:
                break
        after = eng.values()
        diff = {r // 2 for r in range(len(after)) if after[r] != before[r]}
        changes.append(len(diff))
    assert changes == [1] * len(changes)


@pytest.mark.parametrize("variant", ["atomic", "two-reg", "gray"])
def test_legit_start_keeps_one_token(variant):
    ring = build_ring(RingConfig(n=3, variant=variant, init="legit", init_value=5), 4)

    class Watch:
        worst = 1

        def on_event(self, engine, ev):
            h = ring.configuration().holders()
            if h is not None:
                Watch.worst = max(Watch.worst, len(h)) if h else 99
            assert sum(engine.in_cs) <= 1

    ring.engine.observers.append(Watch())
    run_loop(ring.engine, ring.scheduler, 5000)
    assert Watch.worst == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["atomic", "two-reg", "gray"]))
def test_arbitrary_init_stays_in_domain(seed, variant):
    cfg = RingConfig(n=3, variant=variant)
    ring = build_ring(cfg, seed)
    dom = 2 if variant == "gray" else cfg.K
    assert all(0 <= v < dom for v in ring.initial)
    for loc in ring.initial_locals:
        assert 0 <= loc["x"] < cfg.K and 0 <= loc["y"] < cfg.K
