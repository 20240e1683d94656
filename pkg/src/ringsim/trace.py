"""Run event logs and their JSON-lines form.

A trace file starts with one header object (``{"format": ..., ...}``)
describing registers and initial locals; every following line is one event
``{tick, pid, event, reg?, kind?, value?, hl_op_id?, ...}``. The busy read
result is written as ``null``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .sim import Event, OpInterval, RegisterCell, Span, UsageError

FORMAT = "ringsim-trace/1"


@dataclass
class HighLevelOp:
    hl_id: int
    pid: int
    kind: str
    pair: tuple[int, int]
    arg: Optional[int] = None
    k: Optional[int] = None
    result: Optional[int] = None
    effective: Optional[bool] = None
    begin_tick: int = -1
    end_tick: Optional[int] = None
    children: list[OpInterval] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.end_tick is not None

    @property
    def span(self) -> Optional[Span]:
        """First child invoke to last child respond (``None`` without children)."""
        if not self.children or self.children[-1].respond is None:
            return None
        return Span(self.children[0].invoke, self.children[-1].respond)

    # interval protocol, for precedes() and friends
    @property
    def invoke(self) -> int:
        return self.children[0].invoke

    @property
    def respond(self) -> Optional[int]:
        return self.children[-1].respond if self.children else None


@dataclass(frozen=True)
class Link:
    """A writer's output register(s) as seen by one reader."""

    writer: int
    reader: int
    regs: tuple[int, ...]

    @property
    def is_pair(self) -> bool:
        return len(self.regs) == 2


@dataclass
class Trace:
    header: dict[str, Any]
    events: list[Event]

    @classmethod
    def from_engine(cls, engine, config: Optional[dict] = None, locals_: Optional[list] = None,
                    initial: Optional[list[int]] = None, seed: Optional[int] = None) -> "Trace":
        header = {
            "seed": seed,
            "format": FORMAT,
            "config": config,
            "registers": [register_entry(c, initial[c.reg_id] if initial else c.initial) for c in engine.cells],
            "pairs": [list(p) for p in getattr(engine, "pairs", [])],
            "locals": locals_,
            "ticks": engine.tick,
        }
        return cls(header, list(engine.events))

    # -- serialization

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(json.dumps(self.header, sort_keys=True, separators=(",", ":")))
        buf.write("\n")
        for ev in self.events:
            buf.write(json.dumps(ev.to_dict(), separators=(",", ":")))
            buf.write("\n")
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise UsageError("empty trace")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT:
            raise UsageError(f"not a {FORMAT} trace")
        return cls(header, [Event.from_dict(json.loads(ln)) for ln in lines[1:]])

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        return cls.loads(Path(path).read_text())

    # -- derived views

    @property
    def ticks(self) -> int:
        return self.header.get("ticks", len(self.events))

    @property
    def registers(self) -> list[dict[str, Any]]:
        return self.header["registers"]

    def initial_values(self) -> list[int]:
        return [r["initial"] for r in self.registers]

    def pairs(self) -> list[tuple[int, int]]:
        return [tuple(p) for p in self.header.get("pairs") or []]

    def ops(self) -> list[OpInterval]:
        out: list[OpInterval] = []
        pending: dict[int, OpInterval] = {}
        for ev in self.events:
            if ev.event == "invoke":
                op = OpInterval(len(out), ev.pid, ev.reg, ev.kind, ev.value, ev.tick, hl_op_id=ev.hl_op_id)
                pending[ev.pid] = op
                out.append(op)
            elif ev.event == "respond":
                op = pending.pop(ev.pid)
                op.respond = ev.tick
                op.value = ev.value
        return out

    def hl_ops(self) -> list[HighLevelOp]:
        ops: dict[int, HighLevelOp] = {}
        by_id = {}
        for op in self.ops():
            by_id[(op.pid, op.invoke)] = op
        for ev in self.events:
            if ev.event == "hl_begin":
                info = ev.info
                ops[ev.hl_op_id] = HighLevelOp(ev.hl_op_id, ev.pid, info.kind, tuple(info.pair), arg=info.arg,
                                               k=info.k, begin_tick=ev.tick)
            elif ev.event == "hl_end":
                h = ops[ev.hl_op_id]
                h.end_tick = ev.tick
                h.result = ev.info.result
                h.effective = ev.info.effective
            elif ev.event == "invoke" and ev.hl_op_id is not None:
                ops[ev.hl_op_id].children.append(by_id[(ev.pid, ev.tick)])
        return [ops[i] for i in sorted(ops)]

    def links(self) -> list[Link]:
        pairs = self.pairs()
        regs = self.registers
        if pairs:
            out = []
            for ra, rb in pairs:
                w = regs[ra]["writer"]
                for r in regs[ra]["readers"]:
                    if r != w:
                        out.append(Link(w, r, (ra, rb)))
            return out
        return [Link(r["writer"], rd, (r["reg"],)) for r in regs for rd in r["readers"] if rd != r["writer"]]


def register_entry(cell: RegisterCell, initial: int) -> dict[str, Any]:
    return {
        "reg": cell.reg_id,
        "domain": cell.domain_size,
        "initial": initial,
        "writer": cell.writer,
        "readers": sorted(cell.readers),
        "semantics": cell.semantics,
    }


def events_jsonl(events: Iterable[Event]) -> str:
    return "".join(json.dumps(e.to_dict(), separators=(",", ":")) + "\n" for e in events)
