"""Report JSON, summary CSV and figures.

Reports contain no timestamps or host details, so rerunning a manifest
reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

REPORT_FORMAT = "ringsim-report/1"

SUMMARY_FIELDS = ("variant", "n", "K", "phi", "adversary", "scheduler", "seed", "budget", "retried",
                  "convergence", "convergence_tick", "token_convergence_tick", "max_bottom_run",
                  "max_bottom_span", "contaminated", "inversions", "flash_tick", "home_tick", "coherence", "ok")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def run_report(manifest: dict, outcomes) -> dict:
    rows = [o.row() for o in outcomes]
    return {
        "format": REPORT_FORMAT,
        "manifest": manifest,
        "runs": [o.to_dict() for o in outcomes],
        "summary": {"rows": rows, "aggregate": aggregate(outcomes)},
    }


def explore_report(manifest: dict, result) -> dict:
    return {"format": REPORT_FORMAT, "manifest": manifest, "explore": result.to_dict()}


def aggregate(outcomes) -> dict:
    out: dict = {"runs": len(outcomes), "passed": sum(1 for o in outcomes if o.ok), "retried": 0}
    out["retried"] = sum(1 for o in outcomes if o.retried)
    by_check: dict[str, dict[str, int]] = {}
    for o in outcomes:
        for name, v in o.verdicts.items():
            slot = by_check.setdefault(name, {"pass": 0, "fail": 0, "inconclusive": 0})
            slot[v.result] += 1
    out["checks"] = by_check
    ticks = [o.verdicts["convergence"].counters["convergence_tick"] for o in outcomes if "convergence" in o.verdicts]
    ticks = [t for t in ticks if t is not None]
    if ticks:
        ticks.sort()
        out["convergence_tick"] = {"min": ticks[0], "median": ticks[len(ticks) // 2], "max": ticks[-1]}
    return out


def summary_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in SUMMARY_FIELDS})
    return buf.getvalue()


def read_report(path: str | Path) -> dict:
    rep = json.loads(Path(path).read_text())
    if rep.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path} is not a {REPORT_FORMAT} report")
    return rep


# -- figures -----------------------------------------------------------------


def _num(v) -> Optional[float]:
    return None if v in ("", None) else float(v)


def render_figures(report: dict, outdir: str | Path) -> list[Path]:
    """Write PNG figures for a sweep report; returns the paths written."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = (report.get("summary") or {}).get("rows") or []
    if not rows:
        return []
    written = []
    seeds = [r["seed"] for r in rows]
    label = f"{rows[0]['variant']} n={rows[0]['n']} K={rows[0]['K']}"
    # identical metadata keeps the PNG bytes reproducible
    meta = {"Software": None}

    fig, ax = plt.subplots(figsize=(7, 3.6))
    conv = [_num(r["convergence_tick"]) for r in rows]
    tok = [_num(r["token_convergence_tick"]) for r in rows]
    ax.scatter(seeds, [c if c is not None else float("nan") for c in conv], s=12, label="convergence tick")
    ax.scatter(seeds, [t if t is not None else float("nan") for t in tok], s=8, marker="x",
               label="single-token suffix start")
    ax.set_xlabel("seed")
    ax.set_ylabel("tick")
    ax.set_title(f"Convergence per seed ({label})")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    p = outdir / "convergence.png"
    fig.savefig(p, dpi=100, metadata=meta)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.bar(seeds, [_num(r["max_bottom_run"]) or 0 for r in rows], width=0.8)
    ax.set_xlabel("seed")
    ax.set_ylabel("longest run of busy reads")
    ax.set_title(f"Consecutive busy (bottom) input reads ({label})")
    fig.tight_layout()
    p = outdir / "bottom_runs.png"
    fig.savefig(p, dpi=100, metadata=meta)
    plt.close(fig)
    written.append(p)

    if rows[0]["variant"] == "gray":
        fig, ax = plt.subplots(figsize=(7, 3.6))
        for key, mk in (("flash_tick", "v"), ("home_tick", "o"), ("convergence_tick", "^")):
            ys = [_num(r[key]) for r in rows]
            ax.scatter(seeds, [y if y is not None else float("nan") for y in ys], s=12, marker=mk,
                       label=key.replace("_", " "))
        ax.set_xlabel("seed")
        ax.set_ylabel("tick")
        ax.set_title(f"Flash, home and convergence ticks ({label})")
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        p = outdir / "gray_phases.png"
        fig.savefig(p, dpi=100, metadata=meta)
        plt.close(fig)
        written.append(p)
    return written


def write_text(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


__all__: Sequence[str] = ("REPORT_FORMAT", "SUMMARY_FIELDS", "aggregate", "dumps", "explore_report",
                          "read_report", "render_figures", "run_report", "summary_csv", "write_text")
