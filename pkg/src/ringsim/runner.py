"""Single runs and seed sweeps with verdicts, on either engine.

``engine="fast"`` uses the compiled runner with online counters;
``engine="python"`` runs the reference engine, keeps the full trace and
applies the post-hoc checkers. Both produce the same verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import checker
from .checker import FAIL, INCONCLUSIVE, PASS, Verdict
from .protocols import RingConfig, build_ring
from .sim import run_loop
from .trace import Link, Trace

CHECKS = ("qa", "contamination", "progress", "convergence", "coherence", "flash-home")


@dataclass
class RunOutcome:
    config: RingConfig
    seed: int
    budget: int
    verdicts: dict[str, Verdict]
    links: list[Verdict] = field(default_factory=list)
    flash_tick: Optional[int] = None
    home_tick: Optional[int] = None
    first_home: Optional[int] = None
    all_written_tick: Optional[int] = None
    retried: bool = False
    trace: Optional[Trace] = None

    @property
    def ok(self) -> bool:
        return all(v.result == PASS for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "budget": self.budget, "retried": self.retried,
            "flash_tick": self.flash_tick, "home_tick": self.home_tick, "first_home_tick": self.first_home,
            "all_written_tick": self.all_written_tick,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
        }

    def row(self) -> dict:
        """One summary-table row."""
        conv = self.verdicts.get("convergence")
        prog = self.verdicts.get("progress")
        cont = self.verdicts.get("contamination")
        qa = self.verdicts.get("qa")
        coh = self.verdicts.get("coherence")
        cfg = self.config
        return {
            "variant": cfg.variant, "n": cfg.n, "K": cfg.K, "phi": cfg.phi if cfg.variant == "two-reg" else "",
            "adversary": cfg.adversary.label(), "scheduler": cfg.scheduler.variant, "seed": self.seed,
            "budget": self.budget, "retried": int(self.retried),
            "convergence": conv.result if conv else "",
            "convergence_tick": _blank(conv.counters["convergence_tick"]) if conv else "",
            "token_convergence_tick": conv.counters["token_convergence_tick"] if conv else "",
            "max_bottom_run": max(prog.counters["max_bottom_run"].values(), default=0) if prog else "",
            "max_bottom_span": max(prog.counters["max_bottom_span"].values(), default=0) if prog else "",
            "contaminated": cont.counters["contaminated"] if cont else "",
            "inversions": qa.counters["inversions"] if qa else "",
            "flash_tick": _blank(self.flash_tick), "home_tick": _blank(self.home_tick),
            "coherence": coh.result if coh else "",
            "ok": int(self.ok),
        }


def _blank(v):
    return "" if v is None else v


def default_checks(cfg: RingConfig) -> tuple[str, ...]:
    if cfg.variant == "gray":
        return CHECKS
    if cfg.variant == "two-reg":
        return ("qa", "contamination", "progress", "convergence", "coherence")
    return ("qa", "contamination", "progress", "convergence")


def _links(cfg: RingConfig) -> list[Link]:
    n = cfg.n
    if cfg.variant == "atomic":
        return [Link(i, (i + 1) % n, (i,)) for i in range(n)]
    kk = cfg.k_bits if cfg.variant == "gray" else 1
    return [Link(p // kk, (p // kk + 1) % n, (2 * p, 2 * p + 1)) for p in range(n * kk)]


def _aggregate(cfg: RingConfig, links: list[Verdict], checks: Sequence[str], verdicts: dict) -> None:
    if "qa" in checks:
        failing = [v.property for v in links if v.result != PASS]
        verdicts["qa"] = Verdict(
            "quasi-atomicity", FAIL if failing else PASS, [{"links": failing}] if failing else [],
            {"links": len(links), "reads": sum(v.counters["reads"] for v in links),
             "contaminated": sum(v.counters["contaminated"] for v in links),
             "inversions": sum(v.counters["inversions"] for v in links)})
    if "contamination" in checks:
        per = {v.property.split("[", 1)[1].rstrip("]"): v.counters["contaminated"] for v in links}
        total = sum(per.values())
        verdicts["contamination"] = Verdict(
            "contamination", FAIL if total else PASS,
            [{"link": k, "count": c} for k, c in per.items() if c], {"contaminated": total, "per_link": per})


def _flash_home(conv: Verdict, flash, home) -> Verdict:
    ct = conv.counters["convergence_tick"]
    ordered = flash is not None and home is not None and ct is not None and flash <= home <= ct
    res = PASS if ordered else (INCONCLUSIVE if home is None or ct is None else FAIL)
    return Verdict("flash-home-order", res, [] if ordered else [{"flash": flash, "home": home, "convergence": ct}],
                   {"flash_tick": flash, "home_tick": home, "convergence_tick": ct})


def run_once(cfg: RingConfig, seed: int, budget: int, *, engine: str = "fast",
             checks: Optional[Iterable[str]] = None, liveness: Optional[int] = None,
             progress: Optional[int] = None, keep_trace: bool = False) -> RunOutcome:
    checks = tuple(checks) if checks is not None else default_checks(cfg)
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown check(s): {', '.join(sorted(unknown))}")
    if engine == "python" or keep_trace:
        return _run_python(cfg, seed, budget, checks, liveness, progress)
    return _run_fast(cfg, seed, budget, checks, liveness, progress)


def _run_fast(cfg, seed, budget, checks, liveness, progress) -> RunOutcome:
    from . import fast

    fr = fast.run_fast(cfg, seed, budget, liveness=liveness)
    links = []
    for l, link in enumerate(_links(cfg)):
        row = fr.links[l]
        tally = [int(row[fast.L_C0 + j]) for j in range(5)]
        witness = []
        if row[fast.L_FIRSTCONT] >= 0:
            witness.append({"first_contaminated_tick": int(row[fast.L_FIRSTCONT])})
        if row[fast.L_FIRSTINV] >= 0:
            witness.append({"first_inversion_tick": int(row[fast.L_FIRSTINV])})
        links.append(checker.qa_verdict(link, tally, int(row[fast.L_INV]), int(row[fast.L_BEGUN]), witness))
    verdicts: dict[str, Verdict] = {}
    _aggregate(cfg, links, checks, verdicts)
    if "progress" in checks:
        verdicts["progress"] = checker.bottom_verdict(checker.progress_window(budget, progress),
                                                      fr.bottom_runs, fr.bottom_spans)
    conv = None
    if "convergence" in checks or "flash-home" in checks:
        res = fr.res
        broken = None
        if res[fast.R_BROKEN_AT] >= 0:
            broken = (int(res[fast.R_BROKEN_FROM]), int(res[fast.R_BROKEN_AT]))
        conv = checker.convergence_verdict(budget, fr.L, int(res[fast.R_LASTBAD]), int(fr.live_bad), broken,
                                           int(res[fast.R_MULTI]), int(res[fast.R_OVERLAP]), fr.entries(),
                                           cfg.variant == "gray", fr.home_tick)
        if "convergence" in checks:
            verdicts["convergence"] = conv
    if "coherence" in checks and cfg.variant != "atomic":
        res = fr.res
        if cfg.variant == "gray":
            start, bad, first = fr.home_tick, res[fast.R_INCOH_HOME], res[fast.R_FIRSTINCOH_HOME]
        else:
            start, bad, first = fr.all_written_tick, res[fast.R_INCOH_ALLW], res[fast.R_FIRSTINCOH_ALLW]
        verdicts["coherence"] = checker.coherence_verdict(start, int(bad), None if first < 0 else int(first))
    if "flash-home" in checks and cfg.variant == "gray":
        verdicts["flash-home"] = _flash_home(conv, fr.flash_tick, fr.home_tick)
    return RunOutcome(cfg, seed, budget, verdicts, links, fr.flash_tick, fr.home_tick, fr.first_home,
                      fr.all_written_tick)


def _run_python(cfg, seed, budget, checks, liveness, progress) -> RunOutcome:
    ring = build_ring(cfg, seed, record=True)
    mon = None
    if cfg.variant == "gray":
        mon = checker.FlashHomeMonitor(ring)
        ring.engine.observers.append(mon)
    run_loop(ring.engine, ring.scheduler, budget)
    trace = Trace.from_engine(ring.engine, cfg.to_dict(), ring.initial_locals, ring.initial, seed)
    links = [checker.check_quasi_atomicity(trace, link) for link in trace.links()]
    verdicts: dict[str, Verdict] = {}
    _aggregate(cfg, links, checks, verdicts)
    if "progress" in checks:
        verdicts["progress"] = checker.check_bottom_progress(trace, progress)
    home = mon.home_tick if mon else None
    conv = None
    if "convergence" in checks or "flash-home" in checks:
        conv = checker.check_convergence(trace, liveness, home_tick=home)
        if "convergence" in checks:
            verdicts["convergence"] = conv
    allw = checker.all_written_tick(trace) if cfg.variant != "atomic" else None
    if "coherence" in checks and cfg.variant != "atomic":
        start = home if cfg.variant == "gray" else allw
        verdicts["coherence"] = (checker.check_coherence(trace, start) if start is not None
                                 else checker.coherence_verdict(None, 0, None))
    if "flash-home" in checks and cfg.variant == "gray":
        verdicts["flash-home"] = _flash_home(conv, mon.flash_tick, home)
    return RunOutcome(cfg, seed, budget, verdicts, links, mon.flash_tick if mon else None, home,
                      mon.first_home if mon else None, allw, trace=trace)


def run_with_retry(cfg: RingConfig, seed: int, budget: int, *, retries: int = 1, **kw) -> RunOutcome:
    """Run, doubling the budget (up to ``retries`` times) while any verdict is inconclusive."""
    out = run_once(cfg, seed, budget, **kw)
    b = budget
    for _ in range(retries):
        if not any(v.result == INCONCLUSIVE for v in out.verdicts.values()):
            break
        b *= 2
        out = run_once(cfg, seed, b, **kw)
        out.retried = True
    return out


def sweep(cfg: RingConfig, seeds: Iterable[int], budget: int, *, retries: int = 1, **kw) -> list[RunOutcome]:
    return [run_with_retry(cfg, s, budget, retries=retries, **kw) for s in seeds]


def verify_trace(trace: Trace, checks: Optional[Iterable[str]] = None, liveness: Optional[int] = None,
                 progress: Optional[int] = None) -> RunOutcome:
    """Re-simulate a trace's run from its header and recompute its verdicts.

    Raises ``ValueError`` when the re-simulated events differ from the file,
    which means the trace was not produced by this configuration and seed.
    """
    cfg_d = trace.header.get("config")
    seed = trace.header.get("seed")
    if not cfg_d or seed is None or "variant" not in cfg_d:
        raise ValueError("trace header lacks the ring configuration or seed")
    cfg = RingConfig.from_dict(cfg_d)
    out = run_once(cfg, seed, trace.ticks, engine="python", checks=checks, liveness=liveness, progress=progress)
    mine = [e.to_dict() for e in out.trace.events]
    theirs = [e.to_dict() for e in trace.events]
    if mine != theirs:
        i = next((j for j, (a, b) in enumerate(zip(mine, theirs)) if a != b), min(len(mine), len(theirs)))
        raise ValueError(f"trace diverges from its re-simulation at event {i}")
    return out
