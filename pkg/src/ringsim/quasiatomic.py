"""Duplicate-write / k-scan-read over a pair of single-writer safe registers.

``AWrite(val)`` reads both registers and, unless both already hold ``val``,
writes ``val`` to ``ra`` then ``rb``. ``AReadk`` reads ``ra, rb`` k times and
returns the unanimous value, or ``BOTTOM`` (``None``) when the 2k responses
disagree.

Both operations are step machines (``*_request`` / ``*_advance``) so that the
ring protocols can embed them and the engine can interleave their register
operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .sim import (READ, WRITE, Event, HLInfo, OpInterval, RegisterCell, Request, UsageError)

BOTTOM = None

# sub-machine phases
BEGIN, READ_A, READ_B, WRITE_A, WRITE_B, END, DONE = range(7)


@dataclass
class RegisterPair:
    ra: RegisterCell
    rb: RegisterCell

    def __post_init__(self):
        if self.ra.domain_size != self.rb.domain_size:
            raise UsageError("pair registers must share a domain")
        if self.ra.writer != self.rb.writer or self.ra.readers != self.rb.readers:
            raise UsageError("pair registers must share writer and readers")

    @property
    def ids(self) -> tuple[int, int]:
        return (self.ra.reg_id, self.rb.reg_id)

    def coherent(self, awrite_in_progress: bool = False) -> bool:
        return awrite_in_progress or self.ra.value == self.rb.value


class AWrite(NamedTuple):
    pair: tuple[int, int]
    val: int
    phase: int = BEGIN
    a: int = -1
    effective: bool = False


def awrite_request(s: AWrite) -> Request:
    ra, rb = s.pair
    if s.phase == READ_A:
        return Request(READ, ra)
    if s.phase == READ_B:
        return Request(READ, rb)
    if s.phase == WRITE_A:
        return Request(WRITE, ra, s.val)
    if s.phase == WRITE_B:
        return Request(WRITE, rb, s.val)
    if s.phase == BEGIN:
        return Request("hl_begin", info=HLInfo("awrite", s.pair, arg=s.val))
    if s.phase == END:
        return Request("hl_end", info=HLInfo("awrite", s.pair, arg=s.val, effective=s.effective))
    raise UsageError("finished AWrite has no request")


def awrite_advance(s: AWrite, resp: Optional[int]) -> AWrite:
    p = s.phase
    if p == BEGIN:
        return s._replace(phase=READ_A)
    if p == READ_A:
        return s._replace(phase=READ_B, a=resp)
    if p == READ_B:
        if s.a == s.val and resp == s.val:
            return s._replace(phase=END, effective=False)
        return s._replace(phase=WRITE_A, effective=True)
    if p == WRITE_A:
        return s._replace(phase=WRITE_B)
    if p == WRITE_B:
        return s._replace(phase=END)
    return s._replace(phase=DONE)


class AReadK(NamedTuple):
    pair: tuple[int, int]
    k: int
    phase: int = BEGIN
    i: int = 0
    first: int = -1
    ok: bool = True

    @property
    def result(self) -> Optional[int]:
        return self.first if self.ok else BOTTOM


def areadk_request(s: AReadK) -> Request:
    if s.phase == READ_A:
        return Request(READ, s.pair[0])
    if s.phase == READ_B:
        return Request(READ, s.pair[1])
    if s.phase == BEGIN:
        return Request("hl_begin", info=HLInfo("areadk", s.pair, k=s.k))
    if s.phase == END:
        return Request("hl_end", info=HLInfo("areadk", s.pair, k=s.k, result=s.result))
    raise UsageError("finished AReadk has no request")


def areadk_advance(s: AReadK, resp: Optional[int]) -> AReadK:
    p = s.phase
    if p == BEGIN:
        return s._replace(phase=READ_A)
    if p == READ_A:
        if s.i == 0:
            return s._replace(phase=READ_B, first=resp)
        return s._replace(phase=READ_B, ok=s.ok and resp == s.first)
    if p == READ_B:
        ok = s.ok and resp == s.first
        if s.i + 1 < s.k:
            return s._replace(phase=READ_A, i=s.i + 1, ok=ok)
        return s._replace(phase=END, ok=ok)
    return s._replace(phase=DONE)


# -- stand-alone (sequential) execution --------------------------------------


def _solo(sub, request, advance, cells: dict[int, RegisterCell], pid: int):
    tick = max((w.respond or 0 for c in cells.values() for w in c.writes), default=-1) + 1
    while sub.phase != DONE:
        req = request(sub)
        resp = None
        if req.op == READ:
            resp = cells[req.reg].value
            tick += 2
        elif req.op == WRITE:
            c = cells[req.reg]
            if pid != c.writer:
                raise UsageError(f"processor {pid} is not the writer of register {c.reg_id}")
            c.check_value(req.value)
            c.writes.append(OpInterval(len(c.writes), pid, c.reg_id, WRITE, req.value, tick, tick + 1))
            c.value = req.value
            tick += 2
        sub = advance(sub, resp)
    return sub


def awrite(pair: RegisterPair, val: int, writer: Optional[int] = None) -> bool:
    """Run one AWrite with no concurrent activity; returns whether it wrote."""
    pid = pair.ra.writer if writer is None else writer
    if pid != pair.ra.writer:
        raise UsageError(f"processor {pid} is not the writer of this pair")
    pair.ra.check_value(val)
    s = _solo(AWrite(pair.ids, val), awrite_request, awrite_advance,
              {pair.ra.reg_id: pair.ra, pair.rb.reg_id: pair.rb}, pid)
    return s.effective


def areadk(pair: RegisterPair, k: int, reader: int) -> Optional[int]:
    """Run one AReadk with no concurrent activity."""
    if reader not in pair.ra.readers and reader != pair.ra.writer:
        raise UsageError(f"processor {reader} does not read this pair")
    if k < 1:
        raise UsageError("k must be positive")
    s = _solo(AReadK(pair.ids, k), areadk_request, areadk_advance,
              {pair.ra.reg_id: pair.ra, pair.rb.reg_id: pair.rb}, reader)
    return s.result


def scan_result(a_values: Sequence[int], b_values: Sequence[int]) -> Optional[int]:
    """Result of a k-scan given the responses it collected."""
    vals = list(a_values) + list(b_values)
    if not vals:
        raise UsageError("empty scan")
    return a_values[0] if all(v == a_values[0] for v in vals) else BOTTOM


# -- scenario programs -------------------------------------------------------


@dataclass(frozen=True)
class AWriteSequence:
    """A writer issuing AWrites with the given arguments, back to back."""

    pair: tuple[int, int]
    args: tuple[int, ...]

    def initial_state(self):
        return (0, AWrite(self.pair, self.args[0])) if self.args else (0, None)

    def request(self, state) -> Optional[Request]:
        idx, sub = state
        return None if sub is None else awrite_request(sub)

    def advance(self, state, resp):
        idx, sub = state
        sub = awrite_advance(sub, resp)
        if sub.phase == DONE:
            idx += 1
            sub = AWrite(self.pair, self.args[idx]) if idx < len(self.args) else None
        return (idx, sub)


@dataclass(frozen=True)
class AReadSequence:
    """A reader issuing ``count`` sequential AReadk operations."""

    pair: tuple[int, int]
    k: int
    count: int

    def initial_state(self):
        return (0, AReadK(self.pair, self.k)) if self.count else (0, None)

    def request(self, state) -> Optional[Request]:
        idx, sub = state
        return None if sub is None else areadk_request(sub)

    def advance(self, state, resp):
        idx, sub = state
        sub = areadk_advance(sub, resp)
        if sub.phase == DONE:
            idx += 1
            sub = AReadK(self.pair, self.k) if idx < self.count else None
        return (idx, sub)


def default_args(count: int, domain: int, initial: int = 0) -> tuple[int, ...]:
    """Consecutively distinct AWrite arguments that avoid ``initial`` when the
    domain allows it (so a late read of the initial value is detectable)."""
    if domain < 2:
        raise UsageError("domain must have at least two values")
    others = [v for v in range(domain) if v != initial]
    if len(others) == 1:
        return tuple(others[0] if j % 2 == 0 else initial for j in range(count))
    return tuple(others[j % len(others)] for j in range(count))


# -- classification ----------------------------------------------------------

OLD, NEW, CONCURRENT, BOTTOM_CLASS, CONTAMINATED = "old", "new", "concurrent", "bottom", "contaminated"
CLASSES = (OLD, NEW, CONCURRENT, BOTTOM_CLASS, CONTAMINATED)


class Classification(NamedTuple):
    kind: str
    index: Optional[int] = None   # writer-order index of the matched write (0 = initial contents)
    lo: Optional[int] = None      # smallest and largest index the value could stem from
    hi: Optional[int] = None

    def __str__(self) -> str:
        return self.kind if self.index is None else f"{self.kind}({self.index})"


class WriteRecord(NamedTuple):
    index: int
    arg: int
    invoke: int
    respond: Optional[int]


def classify_value(result: Optional[int], old_idx: int, old_vals: Iterable[int],
                   overlapping: Iterable[tuple[int, int, bool]]) -> Classification:
    """Classify one read response.

    ``overlapping`` holds ``(index, arg, finished_before_read_end)`` for each
    write whose interval overlaps the read.
    """
    if result is None:
        return Classification(BOTTOM_CLASS)
    old_vals = tuple(old_vals)
    matches = [i for i, a, _ in overlapping if a == result]
    if result in old_vals:
        matches.append(old_idx)
        return Classification(OLD, old_idx, min(matches), max(matches))
    if not matches:
        return Classification(CONTAMINATED)
    fin = [i for i, a, f in overlapping if a == result and f]
    if fin:
        return Classification(NEW, max(fin), min(matches), max(matches))
    return Classification(CONCURRENT, max(matches), min(matches), max(matches))


def classify_interval(invoke: int, respond: int, result: Optional[int], writes: Sequence[WriteRecord],
                      initial_vals: Iterable[int]) -> Classification:
    old_idx, old_vals = 0, tuple(initial_vals)
    overlapping = []
    for w in writes:
        if w.respond is not None and w.respond < invoke:
            if w.index > old_idx:
                old_idx, old_vals = w.index, (w.arg,)
        elif w.invoke < respond:
            overlapping.append((w.index, w.arg, w.respond is not None and w.respond < respond))
    return classify_value(result, old_idx, old_vals, overlapping)


def link_writes(trace, link) -> list[WriteRecord]:
    """The writer's AWrites on a pair (or plain writes on a single register), in order."""
    if link.is_pair:
        recs = []
        for h in trace.hl_ops():
            if h.pid == link.writer and h.kind == "awrite" and h.pair == link.regs and h.children:
                recs.append(WriteRecord(len(recs) + 1, h.arg, h.children[0].invoke, h.children[-1].respond))
        return recs
    return [WriteRecord(i + 1, op.value, op.invoke, op.respond)
            for i, op in enumerate(o for o in trace.ops() if o.kind == WRITE and o.reg == link.regs[0])]


def link_reads(trace, link) -> list[tuple[int, int, int, Optional[int]]]:
    """``(id, invoke, respond, result)`` for each completed read by the link's reader."""
    if link.is_pair:
        return [(h.hl_id, h.children[0].invoke, h.children[-1].respond, h.result)
                for h in trace.hl_ops()
                if h.pid == link.reader and h.kind == "areadk" and h.pair == link.regs and h.done]
    return [(op.op_id, op.invoke, op.respond, op.value) for op in trace.ops()
            if op.kind == READ and op.reg == link.regs[0] and op.pid == link.reader and op.done]


def link_initial(trace, link) -> tuple[int, ...]:
    init = trace.initial_values()
    return tuple(sorted({init[r] for r in link.regs}))


def classify_areadk(trace, read, link=None) -> Classification:
    """Classify a completed AReadk (a ``HighLevelOp``) against its writer's AWrites."""
    if link is None:
        link = next(ln for ln in trace.links() if ln.reader == read.pid and ln.regs == tuple(read.pair))
    writes = link_writes(trace, link)
    return classify_interval(read.children[0].invoke, read.children[-1].respond, read.result, writes,
                             link_initial(trace, link))


# -- online classification ---------------------------------------------------


class LinkState(NamedTuple):
    w_in: bool = False
    w_arg: Optional[int] = None
    begun: int = 0
    open_idx: int = 0
    open_arg: Optional[int] = None
    done_idx: int = 0
    done_arg: Optional[int] = None
    r_in: bool = False
    r_active: bool = False
    r_frozen: bool = False
    old_idx: int = 0
    old_vals: tuple = ()
    conc: tuple = ()
    floor: int = -1
    counts: tuple = (0, 0, 0, 0, 0)
    inversions: int = 0
    max_overlap: int = 0
    last: Optional[Classification] = None


class OnlineClassifier:
    """Incremental twin of ``classify_interval`` for one link.

    State is an immutable ``LinkState`` so the explorer can hash and share it.
    """

    def __init__(self, writer: int, reader: int, regs: tuple[int, ...], initial_vals: Iterable[int]):
        self.writer = writer
        self.reader = reader
        self.regs = tuple(regs)
        self.initial = tuple(sorted(set(initial_vals)))
        self.pair = len(self.regs) == 2

    def start(self) -> LinkState:
        return LinkState(old_vals=self.initial)

    def update(self, s: LinkState, ev: Event) -> LinkState:
        if ev.pid == self.writer:
            return self._writer(s, ev)
        if ev.pid == self.reader:
            return self._reader(s, ev)
        return s

    def _writer(self, s: LinkState, ev: Event) -> LinkState:
        e = ev.event
        if self.pair:
            if e == "hl_begin":
                if ev.info.kind == "awrite" and tuple(ev.info.pair) == self.regs:
                    return s._replace(w_in=True, w_arg=ev.info.arg)
                return s
            if e == "hl_end":
                return s._replace(w_in=False) if s.w_in else s
            if not s.w_in:
                return s
            if e == "invoke" and ev.opens_span:
                return self._open(s, s.w_arg)
            if e == "respond" and ev.closes_span:
                return self._close(s)
            return s
        if ev.reg != self.regs[0] or ev.kind != WRITE:
            return s
        if e == "invoke":
            return self._open(s, ev.value)
        if e == "respond":
            return self._close(s)
        return s

    def _open(self, s: LinkState, arg: int) -> LinkState:
        idx = s.begun + 1
        s = s._replace(begun=idx, open_idx=idx, open_arg=arg)
        if s.r_active and not s.r_frozen:
            s = s._replace(conc=s.conc + ((idx, arg, False),))
        return s

    def _close(self, s: LinkState) -> LinkState:
        idx = s.open_idx
        conc = s.conc
        if s.r_active and not s.r_frozen:
            conc = tuple((i, a, True if i == idx else f) for i, a, f in conc)
        return s._replace(open_idx=0, open_arg=None, done_idx=idx, done_arg=s.open_arg, conc=conc)

    def _reader(self, s: LinkState, ev: Event) -> LinkState:
        e = ev.event
        if self.pair:
            if e == "hl_begin":
                if ev.info.kind == "areadk" and tuple(ev.info.pair) == self.regs:
                    return s._replace(r_in=True)
                return s
            if not s.r_in:
                return s
            if e == "invoke" and ev.opens_span:
                return self._start_read(s)
            if e == "respond" and ev.closes_span:
                return s._replace(r_frozen=True)
            if e == "hl_end":
                return self._finish_read(s._replace(r_in=False), ev.info.result)
            return s
        if ev.reg != self.regs[0] or ev.kind != READ:
            return s
        if e == "invoke":
            return self._start_read(s)
        if e == "respond":
            return self._finish_read(s._replace(r_frozen=True), ev.value)
        return s

    def _start_read(self, s: LinkState) -> LinkState:
        if s.done_idx:
            old_idx, old_vals = s.done_idx, (s.done_arg,)
        else:
            old_idx, old_vals = 0, self.initial
        conc = ((s.open_idx, s.open_arg, False),) if s.open_idx else ()
        return s._replace(r_active=True, r_frozen=False, old_idx=old_idx, old_vals=old_vals, conc=conc)

    def _finish_read(self, s: LinkState, result: Optional[int]) -> LinkState:
        c = classify_value(result, s.old_idx, s.old_vals, s.conc)
        counts = list(s.counts)
        counts[CLASSES.index(c.kind)] += 1
        floor, inv = s.floor, s.inversions
        if c.lo is not None:
            if c.hi < floor:
                inv += 1
            floor = max(floor, c.lo)
        return s._replace(r_active=False, r_frozen=False, conc=(), floor=floor, counts=tuple(counts),
                          inversions=inv, max_overlap=max(s.max_overlap, len(s.conc)), last=c)

    @staticmethod
    def contaminated(s: LinkState) -> int:
        return s.counts[CLASSES.index(CONTAMINATED)]
