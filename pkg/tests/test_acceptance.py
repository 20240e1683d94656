"""Acceptance gate: one pass/fail line per criterion, at full scale.

Run alone with ``pytest -m acceptance -s``; the lines are also collected in
the terminal summary of any pytest run.
"""

import json
import time
from collections import Counter

import pytest

from ringsim.cli import main
from ringsim.explorer import ExploreSpec, explore
from ringsim.gray import changed_positions, gray_decode, gray_encode
from ringsim.protocols import RingConfig, default_K
from ringsim.runner import run_once, run_with_retry
from ringsim.sim import AdversaryPolicy

pytestmark = pytest.mark.acceptance

BUDGET = 10 ** 6
SEEDS = range(100)
_CONTAMINATION: dict[int, str] = {}


def test_1_gray_code_fidelity(criterion):
    table = ["000", "001", "011", "010", "110", "111", "101", "100"]
    rows = all(str(gray_encode(v, 3)) == c and gray_decode(c) == v for v, c in enumerate(table))
    one_bit = all(len(changed_positions(gray_encode(v, k), gray_encode((v + 1) % (1 << k), k))) == 1
                  for k in (2, 3, 4, 5) for v in range(1 << k))
    criterion(1, "gray code table rows and one-bit increments for k=2..5", rows and one_bit,
              f"table={'ok' if rows else 'mismatch'}, one-bit={'ok' if one_bit else 'broken'}")


def test_2_single_write_reads_are_quasi_atomic(criterion):
    t0 = time.perf_counter()
    res = explore(ExploreSpec("qa-lemma1", k=2, domain=3, awrites=1, areads=2), stop_at_first=False)
    dt = time.perf_counter() - t0
    st = res.stats
    ok = (res.verdict.result == "pass" and st["max_contaminated"] == 0 and st["violating_branches"] == 0
          and set(st["classes_seen"]) <= {"old", "new", "concurrent", "bottom"} and dt < 60)
    criterion(2, "k=2, domain 3, one AWrite, two sequential AReadk: no contamination, no inversion", ok,
              f"classes={st['classes_seen']}, results={st['read_results']}, states={st['distinct_states']}, "
              f"{dt:.1f}s")


@pytest.mark.parametrize("m", [1, 2])
def test_3_contamination_bound(m, criterion):
    t0 = time.perf_counter()
    res = explore(ExploreSpec("qa-contamination", k=2, m=m, domain=3), stop_at_first=False)
    dt = time.perf_counter() - t0
    st = res.stats
    ok = res.verdict.result == "pass" and st["max_contaminated"] <= m and dt < 300
    _CONTAMINATION[m] = (f"m={m} ({res.spec.awrites} AWrites, {res.spec.areads} AReadk): max "
                         f"{st['max_contaminated']} over {st['distinct_states']} states in {dt:.1f}s")
    criterion(3, "contaminated AReadk count <= m, k=2, domain 3", ok,
              "; ".join(_CONTAMINATION[k] for k in sorted(_CONTAMINATION)))


def _two_reg_sweep():
    if hasattr(_two_reg_sweep, "cache"):
        return _two_reg_sweep.cache
    outcomes = {}
    for n in (2, 3, 4):
        for adv in ("random", "target:0"):
            cfg = RingConfig(n=n, K=2 * n + 2, phi=2 * n + 1, variant="two-reg",
                             adversary=AdversaryPolicy.parse(adv))
            outcomes[(n, adv)] = [run_with_retry(cfg, s, BUDGET, retries=1) for s in SEEDS]
    _two_reg_sweep.cache = outcomes
    return outcomes


def test_4_long_scans_never_contaminated(criterion):
    sweep = _two_reg_sweep()
    worst = {key: max(o.verdicts["contamination"].counters["contaminated"] for o in runs)
             for key, runs in sweep.items()}
    ok = all(v == 0 for v in worst.values()) and all(len(r) == 100 for r in sweep.values())
    criterion(4, "two-reg n=2,3,4, K=2n+2, phi=2n+1, random and target adversaries, 100 seeds x 1e6 ticks: "
                 "zero contaminated reads on every link", ok,
              ", ".join(f"n={n} {a}: max {v}" for (n, a), v in worst.items()))


def test_5_two_reg_converges(criterion):
    sweep = _two_reg_sweep()
    parts, ok = [], True
    for (n, adv), runs in sweep.items():
        res = Counter(o.verdicts["convergence"].result for o in runs)
        for o in runs:
            c = o.verdicts["convergence"].counters
            ct = c["convergence_tick"]
            ok = ok and (o.verdicts["convergence"].result == "pass"
                         and o.budget - ct >= (o.budget + 1) // 2
                         and c["last_safety_violation"] < ct
                         and all(v > 0 for v in c["cs_entries_in_suffix"].values()))
        retried = sum(o.retried for o in runs)
        ticks = sorted(o.verdicts["convergence"].counters["convergence_tick"] or 0 for o in runs)
        parts.append(f"n={n} {adv}: {res['pass']}/100 pass, {res['inconclusive']} inconclusive, "
                     f"{retried} retried, max tick {ticks[-1]}")
        ok = ok and res["pass"] == 100
    criterion(5, "two-reg sweep: single-token suffix >= half the budget, disjoint CS, every processor "
                 "enters CS in the suffix", ok, "; ".join(parts))


def test_6_gray_flash_home_convergence(criterion):
    parts, ok = [], True
    for n in (2, 3):
        cfg = RingConfig(n=n, K=default_K(n), variant="gray")
        runs = [run_with_retry(cfg, s, BUDGET, retries=1) for s in SEEDS]
        good = sum(o.ok and o.flash_tick is not None and o.flash_tick <= o.home_tick
                   <= o.verdicts["convergence"].counters["convergence_tick"]
                   and o.verdicts["coherence"].counters["incoherent_ticks"] == 0 for o in runs)
        homes = sorted(o.home_tick for o in runs if o.home_tick is not None)
        parts.append(f"n={n} K={cfg.K}: {good}/100 ordered and coherent, max home tick "
                     f"{homes[-1] if homes else None}")
        ok = ok and good == 100
    criterion(6, "gray ring n=2,3: flash <= home <= convergence, coherent after home", ok, "; ".join(parts))


def test_7_atomic_baseline_soundness(criterion):
    bad = []
    for n in (2, 3, 4):
        for s in range(50):
            for init in ("arbitrary", "legit"):
                cfg = RingConfig(n=n, variant="atomic", init=init, init_value=s % default_K(n))
                o = run_once(cfg, s, 100_000, checks=("qa", "contamination", "progress", "convergence"))
                prog = o.verdicts["progress"].counters["max_bottom_run"]
                conv = o.verdicts["convergence"].counters
                if (o.verdicts["qa"].result != "pass" or o.verdicts["contamination"].counters["contaminated"]
                        or any(prog.values())):
                    bad.append((n, s, init, "qa"))
                if init == "legit" and (conv["unsafe_ticks"] or conv["last_safety_violation"] != -1):
                    bad.append((n, s, init, "tokens"))
    criterion(7, "atomic baseline n=2,3,4, 50 seeds: quasi-atomic, no contamination, no busy reads, one "
                 "token forever from all-equal starts", not bad, f"{len(bad)} offending runs")


def test_8_manifest_rerun_is_byte_identical(tmp_path, criterion, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"variant": "gray", "n": 3, "K": 8, "seeds": "0..2", "max-steps": 20000}))
    outs = []
    for tag in ("a", "b"):
        argv = ["run", "--manifest", str(manifest), "--report", str(tmp_path / f"{tag}.json"),
                "--summary", str(tmp_path / f"{tag}.csv"), "--trace", str(tmp_path / f"{tag}-{{seed}}.jsonl")]
        assert main(argv) == 0
        fast = ["run", "--variant", "two-reg", "--n", "3", "--seeds", "0..9", "--max-steps", "100000",
                "--report", str(tmp_path / f"{tag}-fast.json")]
        assert main(fast) == 0
        outs.append(capsys.readouterr().out)
    names = ["json", "csv", "fast.json"] + [f"{s}.jsonl" for s in range(3)]

    def blob(tag, name):
        sep = "." if name in ("json", "csv") else "-"
        return (tmp_path / f"{tag}{sep}{name}").read_bytes()

    same = [name for name in names if blob("a", name) == blob("b", name)]
    ok = len(same) == len(names) and outs[0] == outs[1]
    criterion(8, "manifest rerun reproduces traces, reports and summaries byte for byte", ok,
              f"{len(same)}/{len(names)} artifacts identical")
