import pytest

from ringsim import checker
from ringsim.explorer import (ExploreSpec, ExplosionError, branch_choices, build_scenario, estimate, explore,
                              replay, witness_trace)
from ringsim.protocols import RingConfig, build_ring
from ringsim.sim import UsageError
from ringsim.trace import Link

LINK = Link(0, 1, (0, 1))


def test_single_write_single_read_is_quasi_atomic():
    res = explore(ExploreSpec("qa-lemma1", k=2, domain=3, awrites=1, areads=1))
    assert res.verdict.result == "pass"
    assert set(res.stats["classes_seen"]) <= {"old", "new", "concurrent", "bottom"}
    assert set(res.stats["read_results"]) <= {0, res.spec.write_args()[0], None}
    assert None in res.stats["read_results"]


def test_results_limited_to_initial_written_or_busy():
    spec = ExploreSpec("qa-lemma1", k=2, domain=4, initial=3, args=(1,), areads=1)
    res = explore(spec)
    assert res.verdict.result == "pass"
    assert set(res.stats["read_results"]) == {3, 1, None}


def test_contamination_bound_m1():
    res = explore(ExploreSpec("qa-contamination", k=2, m=1, domain=3))
    assert res.verdict.result == "pass"
    assert res.stats["max_contaminated"] <= 1


def test_overlap_bound_scenario():
    res = explore(ExploreSpec("qa-corollary", k=2, domain=3, awrites=3, areads=2))
    assert res.verdict.result == "pass"
    assert res.stats["pruned"] > 0


def test_premise_violation_reported_not_failed():
    spec = ExploreSpec("qa-lemma1", k=2, domain=3, awrites=3, areads=1)
    assert not spec.premise_holds
    res = explore(spec)
    assert res.verdict.result == "pass"
    assert "premise violated" in res.verdict.property
    # three overlapping writes over a three-value domain can fool a double scan
    assert res.stats["counterexample_found"] is True
    assert res.witness_script


def test_witness_replays_through_simulator():
    spec = ExploreSpec("qa-lemma1", k=2, domain=3, awrites=3, areads=1)
    script = [tuple(x) for x in explore(spec).witness_script]
    direct = witness_trace(spec, script)
    again = replay(spec, script)
    assert direct.dumps() == again.dumps()
    assert checker.count_contaminated(direct, LINK) == 1


@pytest.mark.parametrize("kw", [
    dict(scenario="qa-corollary", k=1, domain=2, awrites=2, areads=1),
    dict(scenario="qa-lemma1", k=1, domain=3, awrites=1, areads=1),
])
def test_dedup_does_not_change_results(kw):
    on = explore(ExploreSpec(dedup=True, **kw), stop_at_first=False)
    off = explore(ExploreSpec(dedup=False, **kw), stop_at_first=False)
    assert on.verdict.result == off.verdict.result
    for key in ("classes_seen", "read_results", "max_contaminated"):
        assert on.stats[key] == off.stats[key]
    assert (on.witness_script is None) == (off.witness_script is None)


def test_ring_step_legitimate_closure():
    res = explore(ExploreSpec("ring-step", variant="two-reg", n=2, depth=30))
    assert res.verdict.result == "pass"
    res = explore(ExploreSpec("ring-step", variant="gray", n=2, depth=20))
    assert res.verdict.result == "pass"


def test_branch_count_reported_and_capped():
    spec = ExploreSpec("qa-contamination", k=2, m=2, domain=3, dedup=False)
    est = estimate(spec)
    assert est["branches"] > 10 ** 8
    with pytest.raises(ExplosionError) as e:
        explore(spec)
    assert e.value.estimate == est["branches"]


@pytest.mark.parametrize("kw", [dict(k=4), dict(domain=5), dict(awrites=5), dict(areads=4),
                                dict(scenario="qa-x"), dict(args=(1, 2))])
def test_spec_bounds(kw):
    with pytest.raises(UsageError):
        ExploreSpec(**kw)


def test_two_processor_branching():
    """With nothing overlapped, each tick offers one branch per processor."""
    sc = build_scenario(ExploreSpec("qa-lemma1", k=2, domain=3))
    assert branch_choices(sc.engine) == [(0, None), (1, None)]
    ring = build_ring(RingConfig(n=2, variant="atomic"), 0)
    assert len(branch_choices(ring.engine)) == 2


def test_overlapped_read_branches_over_domain():
    sc = build_scenario(ExploreSpec("qa-lemma1", k=2, domain=3, awrites=1, areads=1))
    eng = sc.engine
    # writer: hl_begin, two pre-reads (invoke+respond each), then invoke of the first write
    for _ in range(5):
        eng.step(0)
    eng.step(0)
    eng.step(1)   # reader hl_begin
    eng.step(1)   # reader invokes its first read while the write is pending
    assert branch_choices(eng) == [(0, None), (1, 0), (1, 1), (1, 2)]


@pytest.mark.parametrize("args", [(1, 1), (1, 0)])
def test_repeated_write_values_stay_quasi_atomic(args):
    """Repeating a value, or writing the initial value back, never produces a
    contaminated or inverted read within the k-1 write premise."""
    res = explore(ExploreSpec("qa-lemma1", k=3, domain=2, args=args, areads=2), stop_at_first=False)
    assert res.verdict.result == "pass" and res.stats["max_contaminated"] == 0
