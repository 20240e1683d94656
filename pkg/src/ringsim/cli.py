"""Command-line experiment runner.

    ringsim run --variant two-reg --n 3 --seeds 0..99 --check convergence --report r.json
    ringsim run --explore qa-lemma1 --k 2 --domain 3
    ringsim plot r.json --out figs/
    ringsim check trace.jsonl
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import report as rpt
from .explorer import SCENARIOS, ExploreSpec, explore
from .protocols import VARIANTS, RingConfig
from .runner import CHECKS, default_checks, run_with_retry, verify_trace
from .sim import AdversaryPolicy, SchedulerPolicy, UsageError
from .trace import Trace

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def parse_seeds(text: str) -> list[int]:
    """``7``, ``0..99`` (inclusive) or ``1,4,9``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise UsageError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError("no seeds given")
    return out


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="JSON file whose keys mirror these flags (flags given here win)")
    g = p.add_argument_group("ring")
    g.add_argument("--variant", choices=VARIANTS, default="two-reg")
    g.add_argument("--n", type=int, default=3, help="ring size")
    g.add_argument("--K", type=int, default=None, help="token domain size (default: smallest power of two > 2n)")
    g.add_argument("--phi", type=int, default=None, help="scan count of the two-register ring (default 2n+1)")
    g.add_argument("--semantics", choices=("safe", "regular", "atomic"), default=None)
    g.add_argument("--init", choices=("arbitrary", "legit"), default="arbitrary")
    g.add_argument("--init-value", type=int, default=0)
    g.add_argument("--unchecked", action="store_true", help="allow K <= 2n, phi <= 2n or non power-of-two K")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--seeds", default=None, help="a..b (inclusive), or a comma list")
    g.add_argument("--adversary", default="random", help="random | old | new | target:v")
    g.add_argument("--scheduler", default="random", help="rr | random")
    g.add_argument("--fairness", type=int, default=8, help="max consecutive steps of one processor (random)")
    g.add_argument("--max-steps", type=int, default=100_000, help="tick budget per run")
    g.add_argument("--check", action="append", default=None,
                   help=f"repeatable or comma list from {', '.join(CHECKS)} (default: all that apply)")
    g.add_argument("--liveness", type=int, default=None, help="CS liveness window (default budget/8)")
    g.add_argument("--progress-window", type=int, default=None, help="busy-read span threshold (default budget/4)")
    g.add_argument("--retries", type=int, default=1, help="budget doublings for inconclusive runs")
    g.add_argument("--engine", choices=("fast", "python"), default="fast")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for seed sweeps")
    o = p.add_argument_group("outputs")
    o.add_argument("--trace", help="JSONL trace path; '{seed}' is replaced per seed")
    o.add_argument("--report", help="verdict report JSON path")
    o.add_argument("--summary", help="summary CSV path (also printed to stdout)")
    o.add_argument("--figures", help="directory for PNG figures")
    e = p.add_argument_group("exhaustive exploration")
    e.add_argument("--explore", choices=SCENARIOS, default=None)
    e.add_argument("--k", type=int, default=2, help="scan count k of AReadk")
    e.add_argument("--domain", type=int, default=3)
    e.add_argument("--awrites", type=int, default=None)
    e.add_argument("--areads", type=int, default=None)
    e.add_argument("--m", type=int, default=1)
    e.add_argument("--depth", type=int, default=40, help="event depth for ring-step")
    e.add_argument("--no-dedup", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ringsim", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    _add_run_args(sub.add_parser("run", help="simulate seeds or explore a scenario"))
    pl = sub.add_parser("plot", help="render figures from a report")
    pl.add_argument("report")
    pl.add_argument("--out", required=True)
    ck = sub.add_parser("check", help="re-simulate a trace file and print its verdicts")
    ck.add_argument("trace")
    ck.add_argument("--check", action="append", default=None)
    ck.add_argument("--report")
    return ap


def _load_manifest(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--manifest")
    known, _ = pre.parse_known_args(argv)
    if known.manifest and argv and argv[0] == "run":
        data = json.loads(Path(known.manifest).read_text())
        runp = parser._subparsers._group_actions[0].choices["run"]
        dests = {a.dest for a in runp._actions}
        defaults = {}
        for key, val in data.items():
            dest = key.replace("-", "_")
            if dest not in dests:
                raise UsageError(f"unknown manifest key {key!r}")
            if dest == "check" and isinstance(val, str):
                val = [val]
            if dest == "seeds" and isinstance(val, list):
                val = ",".join(str(v) for v in val)
            defaults[dest] = val
        runp.set_defaults(**defaults)
    return parser.parse_args(argv)


def _checks(raw: Optional[list[str]], cfg: Optional[RingConfig]) -> Optional[tuple[str, ...]]:
    if not raw:
        return default_checks(cfg) if cfg is not None else None
    out = []
    for item in raw:
        for c in item.split(","):
            c = c.strip()
            if c not in CHECKS:
                raise UsageError(f"unknown check {c!r}; expected one of {', '.join(CHECKS)}")
            if cfg is not None and c == "coherence" and cfg.variant == "atomic":
                continue
            if cfg is not None and c == "flash-home" and cfg.variant != "gray":
                raise UsageError("flash-home applies to the gray variant only")
            if c not in out:
                out.append(c)
    return tuple(out)


def manifest_of(a: argparse.Namespace) -> dict:
    """Everything that determines the outputs, in a stable form."""
    skip = {"cmd", "manifest", "trace", "report", "summary", "figures", "jobs"}
    return {k: v for k, v in sorted(vars(a).items()) if k not in skip}


def _trace_path(pattern: str, seed: int, many: bool) -> Path:
    if "{seed}" in pattern:
        return Path(pattern.replace("{seed}", str(seed)))
    p = Path(pattern)
    return p.with_name(f"{p.stem}.{seed}{p.suffix}") if many else p


def _job(args):
    cfg, seed, budget, retries, kw = args
    return run_with_retry(cfg, seed, budget, retries=retries, **kw)


def cmd_run(a: argparse.Namespace) -> int:
    if a.explore:
        return _cmd_explore(a)
    cfg = RingConfig(n=a.n, K=a.K, phi=a.phi, variant=a.variant, semantics=a.semantics,
                     adversary=AdversaryPolicy.parse(a.adversary),
                     scheduler=SchedulerPolicy(a.scheduler, a.fairness), init=a.init, init_value=a.init_value,
                     unchecked=a.unchecked)
    if a.max_steps < 1:
        raise UsageError("--max-steps must be positive")
    seeds = parse_seeds(a.seeds) if a.seeds is not None else [a.seed if a.seed is not None else 0]
    checks = _checks(a.check, cfg)
    engine = "python" if a.trace else a.engine
    if engine == "fast":
        from .fast import _fast_params
        try:
            _fast_params(cfg)
        except ValueError:
            engine = "python"
    kw = dict(engine=engine, checks=checks, liveness=a.liveness, progress=a.progress_window,
              keep_trace=bool(a.trace))
    jobs = [(cfg, s, a.max_steps, a.retries, kw) for s in seeds]
    if a.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(a.jobs) as ex:
            outcomes = list(ex.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]
    if a.trace:
        for o in outcomes:
            if o.trace is not None:
                rpt.write_text(_trace_path(a.trace, o.seed, len(seeds) > 1), o.trace.dumps())
    manifest = manifest_of(a)
    manifest["config"] = cfg.to_dict()
    rep = rpt.run_report(manifest, outcomes)
    if a.report:
        rpt.write_text(a.report, rpt.dumps(rep))
    table = rpt.summary_csv(rep["summary"]["rows"])
    if a.summary:
        rpt.write_text(a.summary, table)
    if a.figures:
        rpt.render_figures(rep, a.figures)
    sys.stdout.write(table)
    ok = all(o.ok for o in outcomes)
    agg = rep["summary"]["aggregate"]
    print(f"# {agg['passed']}/{agg['runs']} runs passed all checks ({', '.join(checks)})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_explore(a: argparse.Namespace) -> int:
    spec = ExploreSpec(scenario=a.explore, k=a.k, domain=a.domain, awrites=a.awrites, areads=a.areads, m=a.m,
                       variant=a.variant, n=a.n, depth=a.depth, dedup=not a.no_dedup)
    from .explorer import estimate

    est = estimate(spec)
    print(f"# estimated branches without dedup: {est['branches']:.3g}; state bound with dedup: "
          f"{est['states']:.3g}", file=sys.stderr)
    res = explore(spec)
    manifest = manifest_of(a)
    rep = rpt.explore_report(manifest, res)
    if a.report:
        rpt.write_text(a.report, rpt.dumps(rep))
    v = res.verdict
    print(json.dumps({"property": v.property, "result": v.result, "leaves": res.stats["leaves"],
                      "distinct_states": res.stats["distinct_states"], "classes": res.stats["classes_seen"],
                      "max_contaminated": res.stats["max_contaminated"],
                      "counterexample_found": res.stats.get("counterexample_found")}, sort_keys=True))
    if a.trace and res.witness_script:
        from .explorer import witness_trace
        rpt.write_text(a.trace, witness_trace(spec, [tuple(x) for x in res.witness_script]).dumps())
    return EXIT_OK if v.result == "pass" else EXIT_FAIL


def cmd_plot(a: argparse.Namespace) -> int:
    rep = rpt.read_report(a.report)
    paths = rpt.render_figures(rep, a.out)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_check(a: argparse.Namespace) -> int:
    trace = Trace.read(a.trace)
    out = verify_trace(trace, checks=_checks(a.check, None))
    rep = {"format": rpt.REPORT_FORMAT, "trace": str(a.trace), "runs": [out.to_dict()]}
    if a.report:
        rpt.write_text(a.report, rpt.dumps(rep))
    for name, v in out.verdicts.items():
        print(f"{name}: {v.result}")
    return EXIT_OK if out.ok else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = _load_manifest(parser, argv)
        return {"run": cmd_run, "plot": cmd_plot, "check": cmd_check}[a.cmd](a)
    except (UsageError, ValueError, FileNotFoundError) as e:
        print(f"ringsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
