"""Dijkstra's K-state token ring over three register substrates.

* ``atomic``  - one register per link, read then write each cycle.
* ``two-reg`` - a register pair per link; AReadk(phi) input, AWrite output.
* ``gray``    - one register pair per gray-code bit; AReadk(2) per bit, bits
  written least significant first.

Each processor is a step machine whose local computation happens in the
transition that follows an event; guards are evaluated in ``request`` of the
``DECIDE`` phase and their assignments applied when that event fires.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

from . import gray as graycode
from .quasiatomic import (DONE, AReadK, AWrite, areadk_advance, areadk_request, awrite_advance,
                          awrite_request)
from .sim import (ATOMIC, READ, SAFE, WRITE, AdversaryPolicy, Engine, RandomStream, RegisterCell,
                  Request, Scheduler, SchedulerPolicy, UsageError)

VARIANTS = ("atomic", "two-reg", "gray")

# program counters
RD, DECIDE, CS_OUT, WR, ARD, AWR = range(6)


def default_K(n: int) -> int:
    """Smallest power of two above 2n."""
    return 1 << (2 * n).bit_length()


def default_phi(n: int) -> int:
    return 2 * n + 1


@dataclass
class RingConfig:
    n: int
    K: Optional[int] = None
    phi: Optional[int] = None
    variant: str = "two-reg"
    semantics: Optional[str] = None
    adversary: AdversaryPolicy = field(default_factory=AdversaryPolicy)
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    init: str = "arbitrary"          # arbitrary | legit
    init_value: int = 0
    unchecked: bool = False          # allow parameters outside the proven range

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}")
        if self.n < 2:
            raise UsageError("ring size n must be at least 2")
        if self.K is None:
            self.K = default_K(self.n)
        if self.phi is None:
            self.phi = default_phi(self.n)
        if self.semantics is None:
            self.semantics = ATOMIC if self.variant == "atomic" else SAFE
        if self.init not in ("arbitrary", "legit"):
            raise UsageError(f"unknown init {self.init!r}")
        if not 0 <= self.init_value < self.K:
            raise UsageError("init_value outside 0..K-1")
        if self.unchecked:
            if self.K < 2:
                raise UsageError("K must be at least 2")
            return
        if self.K <= 2 * self.n:
            raise UsageError(f"K > 2n violated: K={self.K}, n={self.n}")
        if self.variant == "two-reg" and self.phi <= 2 * self.n:
            raise UsageError(f"phi > 2n violated: phi={self.phi}, n={self.n}")
        if self.variant == "gray" and self.K != 1 << self.k_bits:
            raise UsageError(f"gray variant needs K a power of two, got K={self.K}")

    @property
    def k_bits(self) -> int:
        return graycode.bits_needed(self.K)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adversary"] = self.adversary.label()
        d["scheduler"] = {"variant": self.scheduler.variant, "fairness_bound": self.scheduler.fairness_bound}
        d["k_bits"] = self.k_bits
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RingConfig":
        d = dict(d)
        d.pop("k_bits", None)
        adv = d.pop("adversary", "random")
        sch = d.pop("scheduler", {}) or {}
        return cls(adversary=AdversaryPolicy.parse(adv),
                   scheduler=SchedulerPolicy(sch.get("variant", "random"), sch.get("fairness_bound", 8)), **d)


def guard(i: int, x: int, y: Optional[int], K: int) -> tuple[bool, int]:
    """Token guards: returns (privileged, new x)."""
    if y is None:
        return False, x
    if i != 0 and x != y:
        return True, y
    if i == 0 and y == x:
        return True, (x + 1) % K
    return False, x


# -- atomic baseline ---------------------------------------------------------


class AtomicState(NamedTuple):
    pc: int
    x: int
    y: int


@dataclass(frozen=True)
class AtomicDij:
    pid: int
    K: int
    own: int
    pred: int

    def request(self, s: AtomicState) -> Request:
        if s.pc == RD:
            return Request(READ, self.pred)
        if s.pc == DECIDE:
            ok, _ = guard(self.pid, s.x, s.y, self.K)
            return Request("cs_enter") if ok else Request(WRITE, self.own, s.x)
        if s.pc == CS_OUT:
            return Request("cs_exit")
        return Request(WRITE, self.own, s.x)

    def advance(self, s: AtomicState, resp) -> AtomicState:
        if s.pc == RD:
            return s._replace(pc=DECIDE, y=resp)
        if s.pc == DECIDE:
            ok, x = guard(self.pid, s.x, s.y, self.K)
            return s._replace(pc=CS_OUT, x=x) if ok else s._replace(pc=RD)
        if s.pc == CS_OUT:
            return s._replace(pc=WR)
        return s._replace(pc=RD)


# -- two-register ------------------------------------------------------------


class TwoRegState(NamedTuple):
    pc: int
    x: int
    y: Optional[int]
    sub: object = None


@dataclass(frozen=True)
class TwoRegDij:
    pid: int
    K: int
    phi: int
    own: tuple[int, int]
    pred: tuple[int, int]

    def request(self, s: TwoRegState) -> Request:
        pc = s.pc
        if pc == ARD:
            return areadk_request(s.sub)
        if pc == AWR:
            return awrite_request(s.sub)
        if pc == RD:
            return Request(READ, self.own[0])
        if pc == DECIDE:
            ok, _ = guard(self.pid, s.x, s.y, self.K)
            return Request("cs_enter") if ok else awrite_request(AWrite(self.own, s.x))
        return Request("cs_exit")

    def advance(self, s: TwoRegState, resp) -> TwoRegState:
        pc = s.pc
        if pc == ARD:
            sub = areadk_advance(s.sub, resp)
            if sub.phase == DONE:
                return s._replace(pc=DECIDE, y=sub.result, sub=None)
            return s._replace(sub=sub)
        if pc == AWR:
            sub = awrite_advance(s.sub, resp)
            if sub.phase == DONE:
                return s._replace(pc=RD, sub=None)
            return s._replace(sub=sub)
        if pc == RD:
            return s._replace(pc=ARD, x=resp, sub=AReadK(self.pred, self.phi))
        if pc == DECIDE:
            ok, x = guard(self.pid, s.x, s.y, self.K)
            if ok:
                return s._replace(pc=CS_OUT, x=x)
            return s._replace(pc=AWR, sub=awrite_advance(AWrite(self.own, s.x), None))
        # CS_OUT
        return s._replace(pc=AWR, sub=AWrite(self.own, s.x))


# -- gray code ---------------------------------------------------------------


class GrayState(NamedTuple):
    pc: int
    b: int
    X: tuple
    Y: tuple
    x: int
    y: Optional[int]
    sub: object = None


@dataclass(frozen=True)
class GrayDij:
    pid: int
    K: int
    k: int
    own: tuple            # k pairs, index 0 = MSB
    pred: tuple

    def _word(self, x: int) -> tuple:
        return graycode.gray_encode(x, self.k).bits

    def request(self, s: GrayState) -> Request:
        pc = s.pc
        if pc == ARD:
            return areadk_request(s.sub)
        if pc == AWR:
            return awrite_request(s.sub)
        if pc == RD:
            return Request(READ, self.own[s.b][0])
        if pc == DECIDE:
            ok, _ = guard(self.pid, s.x, s.y, self.K)
            if ok:
                return Request("cs_enter")
            return awrite_request(AWrite(self.own[self.k - 1], self._word(s.x)[self.k - 1]))
        return Request("cs_exit")

    def advance(self, s: GrayState, resp) -> GrayState:
        pc, k = s.pc, self.k
        if pc == ARD:
            sub = areadk_advance(s.sub, resp)
            if sub.phase != DONE:
                return s._replace(sub=sub)
            Y = s.Y[:s.b] + (sub.result,) + s.Y[s.b + 1:]
            if s.b + 1 < k:
                return s._replace(b=s.b + 1, Y=Y, sub=AReadK(self.pred[s.b + 1], 2))
            y = graycode.decode_or_bottom(Y)
            return s._replace(pc=DECIDE, b=0, Y=Y, y=None if y is None else y % self.K, sub=None)
        if pc == AWR:
            sub = awrite_advance(s.sub, resp)
            if sub.phase != DONE:
                return s._replace(sub=sub)
            if s.b > 0:
                return s._replace(b=s.b - 1, sub=AWrite(self.own[s.b - 1], s.X[s.b - 1]))
            return s._replace(pc=RD, b=0, sub=None)
        if pc == RD:
            X = s.X[:s.b] + (resp,) + s.X[s.b + 1:]
            if s.b + 1 < k:
                return s._replace(b=s.b + 1, X=X)
            return s._replace(pc=ARD, b=0, X=X, x=graycode.gray_decode(X) % self.K,
                              sub=AReadK(self.pred[0], 2))
        if pc == DECIDE:
            ok, x = guard(self.pid, s.x, s.y, self.K)
            if ok:
                return s._replace(pc=CS_OUT, x=x)
            X = self._word(s.x)
            return s._replace(pc=AWR, b=k - 1, X=X, sub=awrite_advance(AWrite(self.own[k - 1], X[k - 1]), None))
        # CS_OUT: the new code word X lands with the exit event
        X = self._word(s.x)
        return s._replace(pc=AWR, b=k - 1, X=X, sub=AWrite(self.own[k - 1], X[k - 1]))


# -- ring assembly -----------------------------------------------------------


def layout(cfg: RingConfig) -> dict:
    """Register ids per processor: ``own``/``pred`` single ids, pairs, or per-bit pairs."""
    n = cfg.n
    if cfg.variant == "atomic":
        return {"own": [i for i in range(n)], "pred": [(i - 1) % n for i in range(n)], "count": n, "domain": cfg.K}
    if cfg.variant == "two-reg":
        own = [(2 * i, 2 * i + 1) for i in range(n)]
        return {"own": own, "pred": [own[(i - 1) % n] for i in range(n)], "count": 2 * n, "domain": cfg.K}
    k = cfg.k_bits
    own = [tuple((2 * (i * k + b), 2 * (i * k + b) + 1) for b in range(k)) for i in range(n)]
    return {"own": own, "pred": [own[(i - 1) % n] for i in range(n)], "count": 2 * n * k, "domain": 2}


def writer_of(cfg: RingConfig, reg: int) -> int:
    if cfg.variant == "atomic":
        return reg
    if cfg.variant == "two-reg":
        return reg // 2
    return reg // (2 * cfg.k_bits)


@dataclass
class Ring:
    config: RingConfig
    seed: int
    engine: Engine
    scheduler: Scheduler
    rng: RandomStream
    layout: dict
    initial: list[int]
    initial_locals: list[dict]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return self.engine.pairs

    def configuration(self) -> "Configuration":
        return Configuration.of(self)


def build_ring(cfg: RingConfig, seed: int = 0, record: bool = True) -> Ring:
    lay = layout(cfg)
    rng = RandomStream(seed)
    n, K = cfg.n, cfg.K
    dom = lay["domain"]
    if cfg.init == "legit":
        if cfg.variant == "gray":
            word = graycode.gray_encode(cfg.init_value, cfg.k_bits).bits
            initial = [word[(r // 2) % cfg.k_bits] for r in range(lay["count"])]
        else:
            initial = [cfg.init_value] * lay["count"]
    else:
        initial = [rng.below(dom) for _ in range(lay["count"])]

    cells = []
    for r in range(lay["count"]):
        w = writer_of(cfg, r)
        cells.append(RegisterCell(r, dom, initial[r], w, frozenset({w, (w + 1) % n}), cfg.semantics,
                                  keep_history=record))

    programs, states, locals_ = [], [], []
    k = cfg.k_bits
    for i in range(n):
        if cfg.init == "legit":
            x = y = cfg.init_value
            X = Y = graycode.gray_encode(cfg.init_value, k).bits if cfg.variant == "gray" else ()
        elif cfg.variant == "gray":
            X = tuple(rng.below(2) for _ in range(k))
            Y = tuple(rng.below(2) for _ in range(k))
            x, y = rng.below(K), rng.below(K)
        else:
            x, y = rng.below(K), rng.below(K)
            X = Y = ()
        if cfg.variant == "atomic":
            programs.append(AtomicDij(i, K, lay["own"][i], lay["pred"][i]))
            states.append(AtomicState(RD, x, y))
            locals_.append({"x": x, "y": y})
        elif cfg.variant == "two-reg":
            programs.append(TwoRegDij(i, K, cfg.phi, lay["own"][i], lay["pred"][i]))
            states.append(TwoRegState(RD, x, y))
            locals_.append({"x": x, "y": y})
        else:
            programs.append(GrayDij(i, K, k, lay["own"][i], lay["pred"][i]))
            states.append(GrayState(RD, 0, X, Y, x, y))
            locals_.append({"x": x, "y": y, "X": list(X), "Y": list(Y)})

    engine = Engine(cells, programs, states, adversary=cfg.adversary, rng=rng, record=record)
    if cfg.variant == "two-reg":
        engine.pairs = list(lay["own"])
    elif cfg.variant == "gray":
        engine.pairs = [p for own in lay["own"] for p in own]
    else:
        engine.pairs = []
    sched = Scheduler(cfg.scheduler, n, rng)
    return Ring(cfg, seed, engine, sched, rng, lay, initial, locals_)


# -- configurations ----------------------------------------------------------


def output_values(variant: str, own: Sequence, values: Sequence[int], K: int) -> list[int]:
    """Each processor's output as read from the ``R_a`` side of its register(s)."""
    if variant == "atomic":
        return [values[r] for r in own]
    if variant == "two-reg":
        return [values[a] for a, _ in own]
    return [graycode.gray_decode([values[a] for a, _ in o]) % K for o in own]


def token_holders(x: Sequence[int], outputs: Optional[Sequence[int]] = None) -> set[int]:
    """Processors whose guard holds when each p_i compares its value ``x[i]``
    with its predecessor's output ``outputs[i-1]`` (``outputs`` defaults to ``x``)."""
    outputs = x if outputs is None else outputs
    n = len(x)
    held = set()
    for i in range(n):
        pred = outputs[(i - 1) % n]
        if (i == 0 and pred == x[0]) or (i != 0 and pred != x[i]):
            held.add(i)
    return held


@dataclass
class Configuration:
    """A snapshot of register contents, pending writes and processor locals."""

    variant: str
    n: int
    K: int
    k_bits: int
    values: list[int]
    pending_writes: frozenset
    awrite_open: frozenset           # pair ids (ra) with an AWrite between hl_begin and hl_end
    pairs: list[tuple[int, int]]
    own: list
    locals: list[dict]
    in_cs: list[bool]

    @classmethod
    def of(cls, ring: Ring) -> "Configuration":
        e = ring.engine
        cfg = ring.config
        pend = frozenset(op.reg for op in e.pending if op is not None and op.kind == WRITE)
        open_ = frozenset(h[1].pair[0] for h in e.hl_open if h is not None and h[1].kind == "awrite")
        locs = []
        for s in e.states:
            d = {"x": s.x, "y": s.y}
            if cfg.variant == "gray":
                d["X"] = list(s.X)
                d["Y"] = list(s.Y)
            locs.append(d)
        return cls(cfg.variant, cfg.n, cfg.K, cfg.k_bits, e.values(), pend, open_, list(e.pairs),
                   ring.layout["own"], locs, list(e.in_cs))

    def coherent_equal(self) -> bool:
        """No write in flight and every pair holds equal values."""
        if self.pending_writes:
            return False
        return all(self.values[a] == self.values[b] for a, b in self.pairs)

    def incoherent_pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b in self.pairs if self.values[a] != self.values[b] and a not in self.awrite_open]

    def outputs(self) -> list[int]:
        return output_values(self.variant, self.own, self.values, self.K)

    def holders(self) -> Optional[set[int]]:
        """Token holders, or ``None`` when some link is mid-write."""
        if not self.coherent_equal():
            return None
        return token_holders(self.outputs())
