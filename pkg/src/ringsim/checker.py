"""Verdicts over completed traces, plus an online flash/home monitor.

Everything here except ``FlashHomeMonitor`` is a pure function of a
``Trace`` (events and header), so a trace read back from disk yields the
same verdicts as the live run that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from . import gray as graycode
from .protocols import Configuration, token_holders
from .quasiatomic import (CLASSES, CONTAMINATED, classify_interval, link_initial, link_reads,
                          link_writes)
from .trace import Link, Trace

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Verdict:
    property: str
    result: str
    witness: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.result == PASS

    def to_dict(self) -> dict[str, Any]:
        return {"property": self.property, "result": self.result, "witness": self.witness,
                "counters": self.counters}

    def __str__(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def half(T: int) -> int:
    """Smallest suffix length that is at least half of ``T``."""
    return (T + 1) // 2


# -- quasi-atomicity ---------------------------------------------------------


def classify_link(trace: Trace, link: Link):
    """``(read id, Classification)`` for every completed read on ``link``, in order."""
    writes = link_writes(trace, link)
    init = link_initial(trace, link)
    return [(rid, classify_interval(inv, resp, res, writes, init)) for rid, inv, resp, res in link_reads(trace, link)]


def check_quasi_atomicity(trace: Trace, link: Link) -> Verdict:
    classes = classify_link(trace, link)
    witness = []
    contaminated = 0
    inversions = 0
    floor, floor_id = -1, None
    tally = [0] * len(CLASSES)
    for rid, c in classes:
        tally[CLASSES.index(c.kind)] += 1
        if c.kind == CONTAMINATED:
            contaminated += 1
            if len(witness) < 8:
                witness.append({"contaminated": rid})
        if c.lo is None:
            continue
        if c.hi < floor:
            inversions += 1
            if len(witness) < 8:
                witness.append({"inversion": [floor_id, rid]})
        if c.lo > floor:
            floor, floor_id = c.lo, rid
    return qa_verdict(link, tally, inversions, len(link_writes(trace, link)), witness)


def qa_verdict(link: Link, tally, inversions: int, writes: int, witness: list) -> Verdict:
    contaminated = tally[CLASSES.index(CONTAMINATED)]
    counters = {"reads": int(sum(tally)), "contaminated": int(contaminated), "inversions": int(inversions),
                "writes": int(writes), **{f"class_{k}": int(v) for k, v in zip(CLASSES, tally) if v}}
    ok = contaminated == 0 and inversions == 0
    return Verdict(f"quasi-atomicity[{link.writer}->{link.reader}]", PASS if ok else FAIL, witness, counters)


def count_contaminated(trace: Trace, link: Link) -> int:
    return sum(1 for _, c in classify_link(trace, link) if c.kind == CONTAMINATED)


def contamination_bound(awrites: int, k: int) -> int:
    """Least ``m`` with ``awrites <= m*k``."""
    return -(-awrites // k)


# -- bottom progress ---------------------------------------------------------


def cycle_results(trace: Trace) -> dict[int, list[tuple[int, Optional[int]]]]:
    """Per processor, ``(tick, value)`` of each cycle's input read (``None`` = busy).

    A gray-code cycle combines its per-bit reads; any busy bit makes the
    whole input busy.
    """
    cfg = trace.header.get("config") or {}
    group = cfg.get("k_bits", 1) if cfg.get("variant") == "gray" else 1
    per: dict[int, list] = {}
    partial: dict[int, list] = {}
    for h in trace.hl_ops():
        if h.kind != "areadk" or not h.done:
            continue
        buf = partial.setdefault(h.pid, [])
        buf.append(h.result)
        if len(buf) == group:
            val = buf[0] if group == 1 else graycode.decode_or_bottom(buf)
            per.setdefault(h.pid, []).append((h.end_tick, val))
            partial[h.pid] = []
    return per


def bottom_runs(results: list[tuple[int, Optional[int]]], T: int) -> tuple[int, int]:
    """(longest run of consecutive busy results, longest tick span of such a run).

    A run's span reaches from the previous usable result (or tick 0) to the
    next usable result (or the end of the budget).
    """
    max_run = max_span = 0
    run, start, last_ok = 0, 0, 0
    for tick, v in results:
        if v is None:
            if run == 0:
                start = last_ok
            run += 1
            max_run = max(max_run, run)
        else:
            if run:
                max_span = max(max_span, tick - start)
            run = 0
            last_ok = tick
    if run:
        max_span = max(max_span, T - start)
    return max_run, max_span


def check_bottom_progress(trace: Trace, window: Optional[int] = None) -> Verdict:
    T = trace.ticks
    n = (trace.header.get("config") or {}).get("n") or (max((e.pid for e in trace.events), default=-1) + 1)
    per = cycle_results(trace)
    runs, spans = [], []
    for pid in range(n):
        r, s = bottom_runs(per.get(pid, []), T)
        runs.append(r)
        spans.append(s)
    return bottom_verdict(progress_window(T, window), runs, spans)


def bottom_verdict(W: int, runs, spans) -> Verdict:
    witness = [{"pid": p, "span": int(s)} for p, (r, s) in enumerate(zip(runs, spans)) if r > 0 and s >= W]
    return Verdict("bottom-progress", FAIL if witness else PASS, witness,
                   {"window": W, "max_bottom_run": {str(p): int(r) for p, r in enumerate(runs)},
                    "max_bottom_span": {str(p): int(s) for p, s in enumerate(spans)}})


# -- convergence -------------------------------------------------------------


def output_values(trace: Trace, values: list[int]) -> list[int]:
    cfg = trace.header["config"]
    n, variant = cfg["n"], cfg["variant"]
    if variant == "atomic":
        return values[:n]
    if variant == "two-reg":
        return [values[2 * i] for i in range(n)]
    k = cfg["k_bits"]
    return [graycode.gray_decode([values[2 * (i * k + b)] for b in range(k)]) % cfg["K"] for i in range(n)]


def replay_safety(trace: Trace):
    """Yield ``(tick, holders, cs_count)`` after every event.

    ``holders`` is ``None`` whenever a write is in flight or a pair differs.
    """
    values = list(trace.initial_values())
    pairs = trace.pairs()
    pend: set[int] = set()
    in_cs = 0
    holders: Optional[set] = None
    changed = True
    for ev in trace.events:
        if ev.kind == "write":
            if ev.event == "invoke":
                pend.add(ev.reg)
                changed = True
            elif ev.event == "respond":
                pend.discard(ev.reg)
                values[ev.reg] = ev.value
                changed = True
        elif ev.event == "cs_enter":
            in_cs += 1
        elif ev.event == "cs_exit":
            in_cs -= 1
        if changed:
            if pend or any(values[a] != values[b] for a, b in pairs):
                holders = None
            else:
                holders = token_holders(output_values(trace, values))
            changed = False
        yield ev.tick, holders, in_cs


def check_convergence(trace: Trace, window: Optional[int] = None, home_tick: Optional[int] = None,
                      need_home: Optional[bool] = None) -> Verdict:
    """Least tick after which the run is safe and live until the end of the budget.

    A tick is unsafe when a fully settled snapshot shows a token count other
    than one or two processors are inside their critical sections at once.
    Liveness needs every processor to enter its critical section in every
    window of ``window`` ticks (default: an eighth of the budget). The run
    passes when that suffix covers at least half of the budget, fails when a
    violation follows a clean stretch of half the budget, and is otherwise
    inconclusive. For the gray-code ring the suffix also has to start at or
    after ``home_tick``.
    """
    cfg = trace.header["config"]
    T = trace.ticks
    L = liveness_window(T, window)
    need = half(T)
    last_bad = -1
    broken = None
    multi_token = 0
    overlaps = 0
    for tick, holders, in_cs in replay_safety(trace):
        bad = False
        if holders is not None and len(holders) != 1:
            bad = True
            multi_token += 1
        if in_cs >= 2:
            bad = True
            overlaps += 1
        if bad:
            if broken is None and tick - last_bad - 1 >= need:
                broken = (last_bad + 1, tick)
            last_bad = tick
    n = cfg["n"]
    entries: dict[int, list[int]] = {p: [] for p in range(n)}
    for ev in trace.events:
        if ev.event == "cs_enter":
            entries[ev.pid].append(ev.tick)
    last_live_bad = -1
    for p in range(n):
        prev = -1
        for e in entries[p]:
            if e - L > prev:
                last_live_bad = max(last_live_bad, e - L)
            prev = e
        if T - L > prev:
            last_live_bad = max(last_live_bad, T - L)
    if need_home is None:
        need_home = cfg["variant"] == "gray"
    return convergence_verdict(T, L, last_bad, last_live_bad, broken, multi_token, overlaps, entries,
                               need_home, home_tick)


def liveness_window(T: int, window: Optional[int] = None) -> int:
    return window if window is not None else max(1, T // 8)


def progress_window(T: int, window: Optional[int] = None) -> int:
    return window if window is not None else max(1, T // 4)


def convergence_verdict(T: int, L: int, last_bad: int, last_live_bad: int, broken: Optional[tuple],
                        multi_token: int, overlaps: int, entries: dict, need_home: bool,
                        home_tick: Optional[int]) -> Verdict:
    """Assemble the convergence verdict from per-run tallies (shared with the compiled runner)."""
    need = half(T)
    token_tick = max(last_bad, last_live_bad) + 1
    conv = token_tick
    if need_home:
        conv = None if home_tick is None else max(token_tick, home_tick)
    counters = {
        "budget": T, "liveness_window": L, "token_convergence_tick": token_tick,
        "convergence_tick": conv, "last_safety_violation": last_bad, "last_liveness_violation": last_live_bad,
        "unsafe_ticks": multi_token + overlaps, "multi_token_ticks": multi_token, "cs_overlap_ticks": overlaps,
        "cs_entries_in_suffix": {str(p): sum(1 for e in ticks if conv is not None and e >= conv)
                                 for p, ticks in sorted(entries.items())},
    }
    if need_home:
        counters["home_tick"] = home_tick
    if broken is not None:
        return Verdict("convergence", FAIL, [{"clean_from": broken[0], "violation_tick": broken[1]}], counters)
    if conv is not None and T - conv >= need:
        return Verdict("convergence", PASS, [], counters)
    return Verdict("convergence", INCONCLUSIVE, [], counters)


# -- coherence ---------------------------------------------------------------


def replay_incoherence(trace: Trace):
    """Yield ``(tick, incoherent pair count)`` after every event."""
    values = list(trace.initial_values())
    pairs = trace.pairs()
    partner = {}
    for a, b in pairs:
        partner[a], partner[b] = a, a
    open_: set[int] = set()
    bad = {a for a, b in pairs if values[a] != values[b]}
    for ev in trace.events:
        if ev.event == "respond" and ev.kind == "write" and ev.reg in partner:
            a = partner[ev.reg]
            values[ev.reg] = ev.value
            if values[a] != values[a + 1]:
                bad.add(a)
            else:
                bad.discard(a)
        elif ev.event == "hl_begin" and ev.kind == "awrite":
            open_.add(ev.reg)
        elif ev.event == "hl_end" and ev.kind == "awrite":
            open_.discard(ev.reg)
        yield ev.tick, len(bad - open_)


def all_written_tick(trace: Trace) -> Optional[int]:
    """Tick by which every processor has finished one complete output write
    (its first AWrite of the most significant bit for the gray-code ring)."""
    cfg = trace.header["config"]
    n = cfg["n"]
    last_pair = {}
    for i in range(n):
        if cfg["variant"] == "two-reg":
            last_pair[i] = 2 * i
        elif cfg["variant"] == "gray":
            last_pair[i] = 2 * (i * cfg["k_bits"])
    if not last_pair:
        return None
    done: dict[int, int] = {}
    for ev in trace.events:
        if ev.event == "hl_end" and ev.kind == "awrite" and ev.pid not in done and ev.reg == last_pair[ev.pid]:
            done[ev.pid] = ev.tick
    if len(done) < n:
        return None
    return max(done.values())


def check_coherence(trace: Trace, from_tick: Optional[int] = None) -> Verdict:
    """Every pair is equal or being written at every tick from ``from_tick``
    (default: once every processor has completed one full output write)."""
    start = all_written_tick(trace) if from_tick is None else from_tick
    bad_ticks = 0
    first = None
    if start is not None:
        for tick, count in replay_incoherence(trace):
            if tick >= start and count:
                bad_ticks += 1
                if first is None:
                    first = tick
    return coherence_verdict(start, bad_ticks, first)


def coherence_verdict(start: Optional[int], bad_ticks: int, first: Optional[int]) -> Verdict:
    if start is None:
        return Verdict("coherence", INCONCLUSIVE, [], {"from_tick": None, "incoherent_ticks": 0})
    return Verdict("coherence", FAIL if bad_ticks else PASS, [] if first is None else [{"tick": first}],
                   {"from_tick": start, "incoherent_ticks": bad_ticks})


# -- flash and home states ---------------------------------------------------


def is_flash_state(c: Configuration) -> bool:
    """Every most significant bit, in registers and in X[0]/Y[0], is zero.

    A busy ``Y[0]`` holds no bit and does not count against the state.
    """
    if c.variant != "gray":
        raise ValueError("flash states are defined for the gray-code ring only")
    for own in c.own:
        a, b = own[0]
        if c.values[a] or c.values[b]:
            return False
    for loc in c.locals:
        if loc["X"][0] == 1 or loc["Y"][0] == 1:
            return False
    return True


def is_home_state(c: Configuration) -> bool:
    """Each bit position holds one value everywhere: both registers of every
    link's pair and every processor's X and Y entries."""
    if c.variant != "gray":
        raise ValueError("home states are defined for the gray-code ring only")
    for b in range(c.k_bits):
        seen = set()
        for own in c.own:
            ra, rb = own[b]
            seen.add(c.values[ra])
            seen.add(c.values[rb])
        for loc in c.locals:
            seen.add(loc["X"][b])
            seen.add(loc["Y"][b])
        if len(seen) != 1 or None in seen:
            return False
    return True


class FlashHomeMonitor:
    """Online observer recording the first flash tick and the first home tick at or after it."""

    def __init__(self, ring):
        self.ring = ring
        self.flash_tick: Optional[int] = None
        self.home_tick: Optional[int] = None
        self.first_home: Optional[int] = None

    def on_event(self, engine, event) -> None:
        if self.home_tick is not None:
            return
        c = self.ring.configuration()
        home = is_home_state(c)
        if home and self.first_home is None:
            self.first_home = event.tick
        if self.flash_tick is None and is_flash_state(c):
            self.flash_tick = event.tick
        if self.flash_tick is not None and home:
            self.home_tick = event.tick
