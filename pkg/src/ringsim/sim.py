"""Deterministic virtual-time engine over single-writer registers.

Every event (low-level invoke/respond, critical-section marker, high-level
operation marker) is one scheduler step and consumes exactly one tick. A
processor is a pure step machine: ``request(state)`` names its next event and
``advance(state, response)`` moves it past that event.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Protocol, Sequence

import numpy as np

VirtualTime = int

READ = "read"
WRITE = "write"

SAFE = "safe"
REGULAR = "regular"
ATOMIC = "atomic"
SEMANTICS = (SAFE, REGULAR, ATOMIC)


class UsageError(ValueError):
    """Raised when an operation is called outside its contract."""


class BudgetExhausted(RuntimeError):
    """The step budget ran out before the run reached the requested condition."""


# -- intervals ---------------------------------------------------------------


class Span(NamedTuple):
    invoke: VirtualTime
    respond: VirtualTime


def _closed(x) -> None:
    if getattr(x, "respond", None) is None:
        raise UsageError(f"interval is still pending: {x!r}")


def precedes(a, b) -> bool:
    _closed(a)
    _closed(b)
    return a.respond < b.invoke


def concurrent(a, b) -> bool:
    return not precedes(a, b) and not precedes(b, a)


def weak_precedes(a, b) -> bool:
    """``a`` starts before ``b`` starts: either ``a`` precedes ``b`` or they overlap."""
    _closed(a)
    _closed(b)
    return a.invoke < b.invoke


def contains(outer, inner) -> bool:
    _closed(outer)
    _closed(inner)
    return outer.invoke <= inner.invoke and inner.respond <= outer.respond


def span_of(first, last) -> Span:
    _closed(first)
    _closed(last)
    return Span(first.invoke, last.respond)


def chain_witness(a, bs: Sequence, a2) -> Span:
    """Given ``a ⪯ bs[0]``, ``bs[j] ≺ bs[j+1]`` and ``bs[-1] ⪯ a2``, return a span
    that starts inside ``bs[0]``, ends inside ``bs[-1]`` and lies within
    ``span_of(a, a2)``."""
    if not bs:
        raise UsageError("chain needs at least one middle interval")
    if not weak_precedes(a, bs[0]) or not weak_precedes(bs[-1], a2):
        raise UsageError("chain endpoints do not weakly precede")
    for x, y in zip(bs, bs[1:]):
        if not precedes(x, y):
            raise UsageError("middle intervals must be strictly ordered")
    return Span(bs[0].invoke, min(bs[-1].respond, a2.respond))


# -- registers ---------------------------------------------------------------


@dataclass(slots=True)
class OpInterval:
    op_id: int
    pid: int
    reg: int
    kind: str
    value: Optional[int]
    invoke: VirtualTime
    respond: Optional[VirtualTime] = None
    hl_op_id: Optional[int] = None
    # reads only: register value when the read started, and whether any
    # write overlapped it
    old: Optional[int] = None
    overlapped: bool = False

    @property
    def done(self) -> bool:
        return self.respond is not None


@dataclass(slots=True)
class RegisterCell:
    reg_id: int
    domain_size: int
    initial: int
    writer: int
    readers: frozenset
    semantics: str = SAFE
    value: int = 0
    pending: Optional[OpInterval] = None
    writes: list = field(default_factory=list)
    keep_history: bool = True

    def __post_init__(self):
        if self.semantics not in SEMANTICS:
            raise UsageError(f"unknown register semantics {self.semantics!r}")
        if not 0 <= self.initial < self.domain_size:
            raise UsageError(f"initial value {self.initial} outside domain {self.domain_size}")
        self.value = self.initial

    def check_value(self, v: int) -> None:
        if not 0 <= v < self.domain_size:
            raise UsageError(f"value {v} outside domain 0..{self.domain_size - 1} of register {self.reg_id}")

    def clone(self) -> "RegisterCell":
        c = copy.copy(self)
        c.pending = copy.copy(self.pending) if self.pending is not None else None
        c.writes = list(self.writes) if self.keep_history else []
        return c


# -- randomness --------------------------------------------------------------


def draw_array(seed: int, size: int) -> np.ndarray:
    """The first ``size`` draws of the stream for ``seed`` as non-negative int64."""
    raw = np.random.PCG64(seed).random_raw(size)
    return (raw >> np.uint64(1)).astype(np.int64)


class RandomStream:
    """Sequential non-negative 63-bit draws from PCG64.

    Draw ``i`` equals ``draw_array(seed, i + 1)[i]``, which lets a compiled
    kernel consume the same sequence from a pre-drawn array.
    """

    _BLOCK = 4096

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.PCG64(seed)
        self._buf: list[int] = []
        self._pos = 0
        self.used = 0

    def next(self) -> int:
        if self._pos == len(self._buf):
            self._buf = (self._gen.random_raw(self._BLOCK) >> np.uint64(1)).tolist()
            self._pos = 0
        v = self._buf[self._pos]
        self._pos += 1
        self.used += 1
        return v

    def below(self, m: int) -> int:
        return self.next() % m


# -- adversary ---------------------------------------------------------------

ADVERSARIES = ("random", "old", "new", "target", "scripted")


@dataclass
class AdversaryPolicy:
    """Chooses the response of a read that overlapped a write.

    ``old`` is the register value when the read started, ``new`` the value of
    the most recent write invoked on the register. ``target`` returns
    ``target % domain``. ``scripted`` replays ``script`` in order.
    """

    variant: str = "random"
    target: int = 0
    script: Sequence[int] = ()
    _cursor: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.variant not in ADVERSARIES:
            raise UsageError(f"unknown adversary {self.variant!r}")

    @classmethod
    def parse(cls, text: str) -> "AdversaryPolicy":
        if text.startswith("target:"):
            return cls("target", target=int(text.split(":", 1)[1]))
        if text in ("return-old",):
            text = "old"
        if text in ("return-new",):
            text = "new"
        return cls(text)

    def label(self) -> str:
        return f"target:{self.target}" if self.variant == "target" else self.variant

    def choose(self, cell: RegisterCell, read: OpInterval, rng: RandomStream) -> int:
        new = cell.pending.value if cell.pending is not None else cell.value
        if cell.semantics == REGULAR:
            old = read.old
            if self.variant == "random":
                return old if rng.below(2) == 0 else new
            if self.variant == "new":
                return new
            if self.variant == "target":
                t = self.target % cell.domain_size
                return t if t in (old, new) else old
            if self.variant == "scripted":
                return self._next_scripted()
            return old
        if self.variant == "random":
            return rng.below(cell.domain_size)
        if self.variant == "old":
            return read.old
        if self.variant == "new":
            return new
        if self.variant == "target":
            return self.target % cell.domain_size
        return self._next_scripted() % cell.domain_size

    def _next_scripted(self) -> int:
        if self._cursor >= len(self.script):
            raise UsageError("adversary script exhausted")
        v = self.script[self._cursor]
        self._cursor += 1
        return v


def resolve_read(cell: RegisterCell, read: OpInterval, adv: AdversaryPolicy, rng: RandomStream,
                 choice: Optional[int] = None) -> int:
    """Response of ``read`` as it completes now.

    Without an overlapping write the register's current value is exact. An
    overlapped safe read returns anything in the domain (``choice`` when
    given, else the adversary's pick), even when the write does not change
    the stored value.
    """
    if not read.overlapped or cell.semantics == ATOMIC:
        return cell.value
    if choice is not None:
        if cell.semantics == REGULAR:
            # choice indexes (old, new)
            return read.old if choice == 0 else (cell.pending.value if cell.pending else cell.value)
        cell.check_value(choice)
        return choice
    return adv.choose(cell, read, rng)


# -- scheduler ---------------------------------------------------------------

SCHEDULERS = ("rr", "random", "scripted")


@dataclass
class SchedulerPolicy:
    """Which enabled processor takes the next step.

    ``random`` draws uniformly, never lets one processor take more than
    ``fairness_bound`` consecutive steps while another is enabled, and forces
    any processor idle for ``n * (fairness_bound - 1) + 1`` ticks, so each
    enabled processor steps at least once in every ``n * fairness_bound``
    ticks.
    """

    variant: str = "random"
    fairness_bound: int = 8
    script: Sequence[int] = ()

    def __post_init__(self):
        if self.variant == "round-robin":
            self.variant = "rr"
        if self.variant == "seeded-random":
            self.variant = "random"
        if self.variant not in SCHEDULERS:
            raise UsageError(f"unknown scheduler {self.variant!r}")
        if self.fairness_bound < 2:
            raise UsageError("fairness bound must be at least 2")


class Scheduler:
    def __init__(self, policy: SchedulerPolicy, n: int, rng: RandomStream):
        self.policy = policy
        self.n = n
        self.rng = rng
        self.last = [-1] * n
        self.run_pid = -1
        self.run_len = 0
        self.cursor = 0
        self.starve_after = n * (policy.fairness_bound - 1) + 1

    def pick(self, tick: VirtualTime, enabled: Sequence[int]) -> int:
        if not enabled:
            raise BudgetExhausted("no processor has an enabled step")
        v = self.policy.variant
        if v == "scripted":
            if self.cursor >= len(self.policy.script):
                raise BudgetExhausted("schedule script exhausted")
            pid = self.policy.script[self.cursor]
            self.cursor += 1
            if pid not in enabled:
                raise UsageError(f"scripted pid {pid} is not enabled at tick {tick}")
        elif v == "rr":
            pid = next((p for p in enabled if p > self.run_pid), enabled[0])
        else:
            pid = self._random_pick(tick, enabled)
        if pid == self.run_pid:
            self.run_len += 1
        else:
            self.run_pid, self.run_len = pid, 1
        self.last[pid] = tick
        return pid

    def _random_pick(self, tick: VirtualTime, enabled: Sequence[int]) -> int:
        starving = [p for p in enabled if tick - self.last[p] >= self.starve_after]
        if starving:
            return min(starving, key=lambda p: (self.last[p], p))
        if self.run_len >= self.policy.fairness_bound and self.run_pid in enabled and len(enabled) > 1:
            others = [p for p in enabled if p != self.run_pid]
            return others[self.rng.below(len(others))]
        return enabled[self.rng.below(len(enabled))]


# -- step machines -----------------------------------------------------------


class HLInfo(NamedTuple):
    kind: str                    # "awrite" | "areadk"
    pair: tuple[int, int]
    arg: Optional[int] = None    # awrite argument
    k: Optional[int] = None      # areadk scan count
    result: Optional[int] = None  # areadk response (None is busy)
    effective: Optional[bool] = None


class Request(NamedTuple):
    op: str                      # read | write | cs_enter | cs_exit | hl_begin | hl_end
    reg: int = -1
    value: Optional[int] = None
    info: Optional[HLInfo] = None


class Program(Protocol):
    def request(self, state) -> Optional[Request]: ...

    def advance(self, state, response: Optional[int]): ...


# -- events ------------------------------------------------------------------

EVENT_KINDS = ("invoke", "respond", "cs_enter", "cs_exit", "hl_begin", "hl_end")


@dataclass(slots=True)
class Event:
    tick: VirtualTime
    pid: int
    event: str
    reg: Optional[int] = None
    kind: Optional[str] = None
    value: Optional[int] = None
    hl_op_id: Optional[int] = None
    info: Optional[HLInfo] = None
    # first child invoke / last child respond of the enclosing high-level op
    opens_span: bool = False
    closes_span: bool = False

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"tick": self.tick, "pid": self.pid, "event": self.event}
        if self.event in ("invoke", "respond"):
            d["reg"] = self.reg
            d["kind"] = self.kind
            if self.value is not None:
                d["value"] = self.value
            if self.hl_op_id is not None:
                d["hl_op_id"] = self.hl_op_id
        elif self.event in ("hl_begin", "hl_end"):
            info = self.info
            d["hl_op_id"] = self.hl_op_id
            d["kind"] = info.kind
            d["reg"] = info.pair[0]
            d["pair"] = list(info.pair)
            if info.kind == "awrite":
                d["arg"] = info.arg
                if self.event == "hl_end":
                    d["effective"] = bool(info.effective)
            else:
                d["k"] = info.k
                if self.event == "hl_end":
                    d["result"] = info.result
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Event":
        ev = d["event"]
        if ev in ("hl_begin", "hl_end"):
            info = HLInfo(d["kind"], tuple(d["pair"]), arg=d.get("arg"), k=d.get("k"),
                          result=d.get("result"), effective=d.get("effective"))
            return cls(d["tick"], d["pid"], ev, reg=d["reg"], kind=d["kind"],
                       hl_op_id=d["hl_op_id"], info=info)
        return cls(d["tick"], d["pid"], ev, reg=d.get("reg"), kind=d.get("kind"),
                   value=d.get("value"), hl_op_id=d.get("hl_op_id"))


class Observer(Protocol):
    def on_event(self, engine: "Engine", event: Event) -> None: ...


# -- engine ------------------------------------------------------------------


class Engine:
    """Executes processor step machines one event per tick.

    The engine owns register contents and pending operations; the caller (a
    run loop or the explorer) decides which processor moves and, for
    overlapped safe reads, may force the response via ``choice``.
    """

    def __init__(self, cells: Sequence[RegisterCell], programs: Sequence[Program], states: Sequence,
                 *, adversary: Optional[AdversaryPolicy] = None, rng: Optional[RandomStream] = None,
                 record: bool = True):
        self.cells = list(cells)
        for i, c in enumerate(self.cells):
            if c.reg_id != i:
                raise UsageError("register ids must be 0..R-1 in order")
        self.programs = list(programs)
        self.states = list(states)
        self.requests = [p.request(s) for p, s in zip(self.programs, self.states)]
        self.n = len(self.programs)
        self.pending: list[Optional[OpInterval]] = [None] * self.n
        self.hl_open: list[Optional[tuple[int, HLInfo, bool]]] = [None] * self.n
        self.in_cs = [False] * self.n
        self.tick: VirtualTime = 0
        self.adversary = adversary or AdversaryPolicy()
        self.rng = rng or RandomStream(0)
        self.record = record
        self.events: list[Event] = []
        self.observers: list[Observer] = []
        self._next_op = 0
        self._next_hl = 0

    # -- queries

    def enabled(self) -> list[int]:
        return [p for p in range(self.n) if self.pending[p] is not None or self.requests[p] is not None]

    def choice_domain(self, pid: int) -> Optional[range]:
        """Domain of the adversary choice that ``step(pid)`` would consume, if any."""
        op = self.pending[pid]
        if op is None or op.kind != READ or not op.overlapped:
            return None
        cell = self.cells[op.reg]
        if cell.semantics == SAFE:
            return range(cell.domain_size)
        if cell.semantics == REGULAR:
            return range(2)
        return None

    def values(self) -> list[int]:
        return [c.value for c in self.cells]

    # -- mutation

    def clone(self) -> "Engine":
        e = copy.copy(self)
        e.cells = [c.clone() for c in self.cells]
        e.states = list(self.states)
        e.requests = list(self.requests)
        e.pending = [copy.copy(op) if op is not None else None for op in self.pending]
        for op in e.pending:
            if op is not None and op.kind == WRITE:
                e.cells[op.reg].pending = op
        e.hl_open = list(self.hl_open)
        e.in_cs = list(self.in_cs)
        e.events = list(self.events) if self.record else []
        e.observers = []
        return e

    def step(self, pid: int, choice: Optional[int] = None) -> Event:
        t = self.tick
        op = self.pending[pid]
        if op is not None:
            ev = self._respond(pid, op, choice)
        else:
            req = self.requests[pid]
            if req is None:
                raise UsageError(f"processor {pid} has no enabled step")
            if req.op in (READ, WRITE):
                ev = self._invoke(pid, req)
            else:
                ev = self._mark(pid, req)
        self.tick = t + 1
        if self.record:
            self.events.append(ev)
        for obs in self.observers:
            obs.on_event(self, ev)
        return ev

    def _invoke(self, pid: int, req: Request) -> Event:
        cell = self.cells[req.reg]
        hl = self.hl_open[pid]
        hl_id = hl[0] if hl is not None else None
        opens = hl is not None and not hl[2]
        if opens:
            self.hl_open[pid] = (hl[0], hl[1], True)
        op = OpInterval(self._next_op, pid, req.reg, req.op, None, self.tick, hl_op_id=hl_id)
        self._next_op += 1
        if req.op == READ:
            if pid not in cell.readers and pid != cell.writer:
                raise UsageError(f"processor {pid} may not read register {cell.reg_id}")
            op.old = cell.value
            op.overlapped = cell.pending is not None
        else:
            if pid != cell.writer:
                raise UsageError(f"processor {pid} is not the writer of register {cell.reg_id}")
            cell.check_value(req.value)
            op.value = req.value
            cell.pending = op
            for other in self.pending:
                if other is not None and other.kind == READ and other.reg == cell.reg_id:
                    other.overlapped = True
            if cell.keep_history:
                cell.writes.append(op)
        self.pending[pid] = op
        return Event(self.tick, pid, "invoke", req.reg, req.op, op.value, hl_id, opens_span=opens)

    def _respond(self, pid: int, op: OpInterval, choice: Optional[int]) -> Event:
        cell = self.cells[op.reg]
        if op.kind == READ:
            value = resolve_read(cell, op, self.adversary, self.rng, choice)
        else:
            value = op.value
            cell.value = value
            cell.pending = None
        op.value = value
        op.respond = self.tick
        self.pending[pid] = None
        self.states[pid] = self.programs[pid].advance(self.states[pid], value)
        req = self.programs[pid].request(self.states[pid])
        self.requests[pid] = req
        closes = op.hl_op_id is not None and req is not None and req.op == "hl_end"
        return Event(self.tick, pid, "respond", op.reg, op.kind, value, op.hl_op_id, closes_span=closes)

    def _mark(self, pid: int, req: Request) -> Event:
        hl_id = None
        if req.op == "hl_begin":
            hl_id = self._next_hl
            self._next_hl += 1
            self.hl_open[pid] = (hl_id, req.info, False)
        elif req.op == "hl_end":
            hl_id = self.hl_open[pid][0] if self.hl_open[pid] is not None else None
            self.hl_open[pid] = None
        elif req.op == "cs_enter":
            self.in_cs[pid] = True
        elif req.op == "cs_exit":
            self.in_cs[pid] = False
        ev = Event(self.tick, pid, req.op, hl_op_id=hl_id, info=req.info,
                   kind=req.info.kind if req.info is not None else None,
                   reg=req.info.pair[0] if req.info is not None else None)
        self.states[pid] = self.programs[pid].advance(self.states[pid], None)
        self.requests[pid] = self.programs[pid].request(self.states[pid])
        return ev

    def core_key(self) -> tuple:
        """Hashable summary of everything that determines future behaviour
        (tick and histories excluded)."""
        pend = tuple(None if op is None else (op.reg, op.kind, op.value, op.old, op.overlapped)
                     for op in self.pending)
        return (tuple(self.states), tuple(c.value for c in self.cells), pend,
                tuple(h is not None and h[2] for h in self.hl_open), tuple(self.in_cs))


def run_loop(engine: Engine, scheduler: Scheduler, max_ticks: int,
             until: Optional[Callable[[Engine], bool]] = None) -> int:
    """Step ``engine`` until ``max_ticks`` events, exhaustion of enabled steps, or ``until``."""
    while engine.tick < max_ticks:
        enabled = engine.enabled()
        if not enabled:
            break
        engine.step(scheduler.pick(engine.tick, enabled))
        if until is not None and until(engine):
            break
    return engine.tick
