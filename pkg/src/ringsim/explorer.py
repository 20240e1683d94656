"""Exhaustive enumeration of schedules and adversary responses at tiny scale.

Every branch point offers each enabled processor's next event; a response
to an overlapped safe read further splits into one branch per domain value.
States are deduplicated on the engine's core state plus the online
classifiers' state, which together determine every future verdict.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .checker import FAIL, INCONCLUSIVE, PASS, Verdict
from .protocols import RingConfig, build_ring, output_values, token_holders
from .quasiatomic import (CLASSES, CONTAMINATED, AReadSequence, AWriteSequence, OnlineClassifier,
                          default_args)
from .sim import (SAFE, AdversaryPolicy, Engine, RegisterCell, Scheduler, SchedulerPolicy, UsageError,
                  run_loop)
from .trace import Trace

SCENARIOS = ("qa-lemma1", "qa-corollary", "qa-contamination", "ring-step")

BRANCH_CAP = 10 ** 8
MAX_K, MAX_DOMAIN, MAX_AWRITES, MAX_AREADS, MAX_N = 3, 4, 4, 3, 3


@dataclass
class ExploreSpec:
    scenario: str = "qa-lemma1"
    k: int = 2
    domain: int = 3
    awrites: Optional[int] = None
    areads: Optional[int] = None
    m: int = 1
    initial: int = 0
    args: Optional[tuple] = None
    # ring-step
    variant: str = "gray"
    n: int = 2
    depth: int = 40
    dedup: bool = True
    cap: int = BRANCH_CAP

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.awrites is None:
            self.awrites = {"qa-lemma1": self.k - 1, "qa-corollary": self.k + 1,
                            "qa-contamination": self.m * self.k}.get(self.scenario, 0)
        if self.areads is None:
            self.areads = {"qa-contamination": self.m + 1}.get(self.scenario, 2)
        if not 1 <= self.k <= MAX_K:
            raise UsageError(f"k must lie in 1..{MAX_K}")
        if not 2 <= self.domain <= MAX_DOMAIN:
            raise UsageError(f"domain must lie in 2..{MAX_DOMAIN}")
        if not 0 <= self.awrites <= MAX_AWRITES:
            raise UsageError(f"at most {MAX_AWRITES} AWrites")
        if not 0 <= self.areads <= MAX_AREADS:
            raise UsageError(f"at most {MAX_AREADS} AReadk operations")
        if not 2 <= self.n <= MAX_N:
            raise UsageError(f"ring-step needs 2 <= n <= {MAX_N}")
        if not 0 <= self.initial < self.domain:
            raise UsageError("initial value outside the domain")
        if self.args is not None:
            self.args = tuple(self.args)
            if len(self.args) != self.awrites:
                raise UsageError("need one argument per AWrite")
            if any(not 0 <= a < self.domain for a in self.args):
                raise UsageError("AWrite argument outside the domain")

    @property
    def premise_holds(self) -> bool:
        """Whether the scenario satisfies the hypothesis of the statement it checks."""
        if self.scenario == "qa-lemma1":
            return self.awrites <= self.k - 1
        if self.scenario == "qa-contamination":
            return self.awrites <= self.m * self.k
        return True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["args"] = list(self.write_args()) if self.scenario != "ring-step" else None
        return d

    def write_args(self) -> tuple:
        return self.args if self.args is not None else default_args(self.awrites, self.domain, self.initial)


@dataclass
class Scenario:
    engine: Engine
    classifiers: list[OnlineClassifier]
    links: list[tuple]
    ring: object = None


def build_scenario(spec: ExploreSpec, record: bool = False) -> Scenario:
    if spec.scenario == "ring-step":
        cfg = RingConfig(n=spec.n, variant=spec.variant, init="legit")
        ring = build_ring(cfg, 0, record=record)
        eng = ring.engine
        init = ring.initial
        trace_links = Trace(_header(eng, cfg.to_dict(), init), []).links()
        cls = [OnlineClassifier(l.writer, l.reader, l.regs, [init[r] for r in l.regs]) for l in trace_links]
        return Scenario(eng, cls, [(l.writer, l.reader, l.regs) for l in trace_links], ring)
    d = spec.domain
    cells = [RegisterCell(r, d, spec.initial, 0, frozenset({0, 1}), SAFE, keep_history=record) for r in (0, 1)]
    pair = (0, 1)
    w = AWriteSequence(pair, spec.write_args())
    r = AReadSequence(pair, spec.k, spec.areads)
    eng = Engine(cells, [w, r], [w.initial_state(), r.initial_state()],
                 adversary=AdversaryPolicy("scripted"), record=record)
    eng.pairs = [pair]
    return Scenario(eng, [OnlineClassifier(0, 1, pair, [spec.initial])], [(0, 1, pair)])


def _header(engine: Engine, config: Optional[dict], initial) -> dict:
    return Trace.from_engine(engine, config, None, initial).header


def branch_choices(engine: Engine) -> list[tuple[int, Optional[int]]]:
    """Every ``(pid, forced response)`` the next tick could take."""
    out = []
    for pid in engine.enabled():
        dom = engine.choice_domain(pid)
        if dom is None:
            out.append((pid, None))
        else:
            out.extend((pid, v) for v in dom)
    return out


# -- estimates ---------------------------------------------------------------


def _qa_lengths(spec: ExploreSpec) -> tuple[int, int, int]:
    """(writer events, reader events, reader low-level reads), at most."""
    writer = spec.awrites * 10
    reader = spec.areads * (2 + 4 * spec.k)
    return writer, reader, spec.areads * 2 * spec.k


def estimate(spec: ExploreSpec) -> dict:
    """Upper bounds on complete branches (no dedup) and distinct states (dedup)."""
    if spec.scenario == "ring-step":
        sc = build_scenario(spec)
        dom = max(c.domain_size for c in sc.engine.cells)
        paths = (spec.n * dom) ** spec.depth
        return {"branches": paths, "states": paths}
    we, re, reads = _qa_lengths(spec)
    inter = math.comb(we + re, we)
    paths = inter * spec.domain ** reads
    # positions x register contents x the reader's first-scan value x the
    # writer's pre-read value; the classifier state is a function of these
    # plus the write index, already counted in the writer position
    states = (we + 1) * (re + 1) * spec.domain ** 2 * (spec.domain + 1) * (spec.domain + 1) * 2
    return {"branches": paths, "states": states}


# -- search ------------------------------------------------------------------


@dataclass
class ExploreResult:
    spec: ExploreSpec
    verdict: Verdict
    stats: dict = field(default_factory=dict)
    witness_script: Optional[list] = None

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "verdict": self.verdict.to_dict(), "stats": self.stats,
                "witness_script": self.witness_script}


class ExplosionError(UsageError):
    def __init__(self, estimate_: int, cap: int):
        super().__init__(f"estimated {estimate_:.3g} branches exceeds the cap of {cap:.3g}; "
                         "enable dedup or shrink the scenario")
        self.estimate = estimate_


def _violation(spec: ExploreSpec, sc: Scenario, eng: Engine, states) -> Optional[str]:
    """Name of the property the current state breaks, or ``None``."""
    for s in states:
        c = OnlineClassifier.contaminated(s)
        if spec.scenario == "qa-contamination":
            if c > spec.m:
                return "contamination-bound"
        elif c:
            return "contaminated"
        if spec.scenario != "qa-contamination" and s.inversions:
            return "inversion"
    if spec.scenario == "ring-step":
        if sum(eng.in_cs) > 1:
            return "cs-overlap"
        if not any(op is not None and op.kind == "write" for op in eng.pending):
            vals = eng.values()
            if all(vals[a] == vals[b] for a, b in eng.pairs):
                cfg = sc.ring.config
                if len(token_holders(output_values(cfg.variant, sc.ring.layout["own"], vals, cfg.K))) != 1:
                    return "token-count"
    return None


def _pruned(spec: ExploreSpec, states) -> bool:
    if spec.scenario != "qa-corollary":
        return False
    return any(s.r_active and len(s.conc) > spec.k - 1 for s in states)


def _strip(s):
    return s._replace(last=None)


def explore(spec: ExploreSpec, stop_at_first: bool = True) -> ExploreResult:
    est = estimate(spec)
    bound = est["states"] if spec.dedup else est["branches"]
    if bound > spec.cap and not (spec.dedup and spec.scenario == "ring-step"):
        raise ExplosionError(bound, spec.cap)
    sc = build_scenario(spec)
    root_states = tuple(c.start() for c in sc.classifiers)
    seen: set = set()
    stack = [(sc.engine, root_states, ())]
    leaves = transitions = pruned = dedup_hits = 0
    max_cont = 0
    classes: set[str] = set()
    results: set = set()
    witness = None
    failing = 0
    while stack:
        eng, states, script = stack.pop()
        choices = branch_choices(eng)
        depth_done = spec.scenario == "ring-step" and len(script) >= spec.depth
        if not choices or depth_done:
            leaves += 1
            continue
        for pid, choice in reversed(choices):
            child = eng.clone()
            ev = child.step(pid, choice)
            transitions += 1
            new_states = tuple(c.update(s, ev) for c, s in zip(sc.classifiers, states))
            for s_old, s_new in zip(states, new_states):
                if s_new.last is not None and s_new.last is not s_old.last:
                    classes.add(s_new.last.kind)
                    if ev.event == "hl_end":
                        results.add(ev.info.result)
                max_cont = max(max_cont, OnlineClassifier.contaminated(s_new))
            step = script + ((pid, choice),)
            if _pruned(spec, new_states):
                pruned += 1
                continue
            bad = _violation(spec, sc, child, new_states)
            if bad is not None:
                failing += 1
                if witness is None:
                    witness = (bad, step)
                if stop_at_first and spec.premise_holds:
                    stack.clear()
                    break
                continue
            if spec.dedup:
                key = (child.core_key(), tuple(_strip(s) for s in new_states))
                if key in seen:
                    dedup_hits += 1
                    continue
                seen.add(key)
                if len(seen) > spec.cap:
                    raise ExplosionError(len(seen), spec.cap)
            stack.append((child, new_states, step))
    stats = {"estimated_branches": est["branches"], "estimated_states": est["states"], "leaves": leaves,
             "transitions": transitions, "distinct_states": len(seen), "dedup_hits": dedup_hits,
             "pruned": pruned, "classes_seen": sorted(classes, key=CLASSES.index),
             "read_results": sorted(results, key=lambda v: (v is None, v if v is not None else 0)),
             "max_contaminated": max_cont, "violating_branches": failing if not stop_at_first or witness is None
             or not spec.premise_holds else None}
    prop = {"qa-lemma1": "quasi-atomicity", "qa-corollary": "quasi-atomicity (k-1 overlap bound)",
            "qa-contamination": f"contaminated <= {spec.m}", "ring-step": "ring safety"}[spec.scenario]
    script_out = [list(x) for x in witness[1]] if witness else None
    if not spec.premise_holds:
        # a search for evidence that the hypothesis is needed, not a check
        stats["counterexample_found"] = witness is not None
        verdict = Verdict(prop + " (premise violated)", PASS,
                          [{"property": witness[0], "script": script_out}] if witness else [], stats)
    elif witness is not None:
        verdict = Verdict(prop, FAIL, [{"property": witness[0], "script": script_out}], stats)
    else:
        verdict = Verdict(prop, PASS, [], stats)
    return ExploreResult(spec, verdict, stats, script_out)


# -- witnesses ---------------------------------------------------------------


def witness_trace(spec: ExploreSpec, script) -> Trace:
    """Run ``script`` step by step in a recording engine."""
    sc = build_scenario(spec, record=True)
    for pid, choice in script:
        sc.engine.step(pid, choice)
    return _trace(spec, sc)


def replay(spec: ExploreSpec, script) -> Trace:
    """Re-execute ``script`` through a scripted scheduler and adversary."""
    sc = build_scenario(spec, record=True)
    pids = [p for p, _ in script]
    # scripted adversary answers overlapped reads in order; regular cells
    # would need the value, but every scenario here uses safe cells
    answers = [c for _, c in script if c is not None]
    sc.engine.adversary = AdversaryPolicy("scripted", script=answers)
    sched = Scheduler(SchedulerPolicy("scripted", script=pids), sc.engine.n, sc.engine.rng)
    run_loop(sc.engine, sched, len(pids))
    return _trace(spec, sc)


def _trace(spec: ExploreSpec, sc: Scenario) -> Trace:
    cfg = sc.ring.config.to_dict() if sc.ring is not None else {"scenario": spec.to_dict()}
    init = sc.ring.initial if sc.ring is not None else [spec.initial, spec.initial]
    locals_ = sc.ring.initial_locals if sc.ring is not None else None
    return Trace.from_engine(sc.engine, cfg, locals_, init)


__all__ = ["SCENARIOS", "ExploreSpec", "ExploreResult", "ExplosionError", "INCONCLUSIVE", "branch_choices",
           "build_scenario", "estimate", "explore", "replay", "witness_trace"]
