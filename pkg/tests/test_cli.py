import json

import pytest

from ringsim.cli import main, parse_seeds
from ringsim.protocols import RingConfig
from ringsim.runner import run_with_retry, verify_trace
from ringsim.sim import UsageError
from ringsim.trace import Trace


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_seeds():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("1,4,9") == [1, 4, 9]
    assert parse_seeds("7") == [7]
    with pytest.raises(UsageError):
        parse_seeds("5..1")


def test_two_reg_sweep_report(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, err = run(["run", "--variant", "two-reg", "--n", "3", "--K", "8", "--phi", "7", "--seeds", "0..19",
                          "--check", "convergence", "--max-steps", "40000", "--report", str(rep)], capsys)
    assert code == 0, err
    data = json.loads(rep.read_text())
    ticks = [r["verdicts"]["convergence"]["counters"]["convergence_tick"] for r in data["runs"]]
    assert len(ticks) == 20 and all(t is not None for t in ticks)
    assert out.splitlines()[0].startswith("variant,n,K,phi")
    assert len(out.splitlines()) == 21


def test_rerun_is_byte_identical(tmp_path, capsys):
    args = ["run", "--variant", "gray", "--n", "2", "--seeds", "0..4", "--max-steps", "20000"]
    run(args + ["--report", str(tmp_path / "a.json"), "--summary", str(tmp_path / "a.csv"),
                "--trace", str(tmp_path / "a{seed}.jsonl")], capsys)
    run(args + ["--report", str(tmp_path / "b.json"), "--summary", str(tmp_path / "b.csv"),
                "--trace", str(tmp_path / "b{seed}.jsonl")], capsys)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for s in range(5):
        assert (tmp_path / f"a{s}.jsonl").read_bytes() == (tmp_path / f"b{s}.jsonl").read_bytes()


def test_trace_then_check(tmp_path, capsys):
    tr = tmp_path / "out.jsonl"
    rep = tmp_path / "r.json"
    code, _, err = run(["run", "--variant", "gray", "--n", "3", "--K", "8", "--seed", "1", "--trace", str(tr),
                        "--max-steps", "30000", "--report", str(rep)], capsys)
    assert code == 0, err
    code, out, _ = run(["check", str(tr)], capsys)
    assert code == 0
    first = json.loads(rep.read_text())["runs"][0]["verdicts"]
    again = verify_trace(Trace.read(tr))
    assert {k: v.to_dict() for k, v in again.verdicts.items()} == first
    assert "convergence: pass" in out


def test_tampered_trace_rejected(tmp_path, capsys):
    tr = tmp_path / "out.jsonl"
    run(["run", "--variant", "two-reg", "--n", "2", "--seed", "3", "--trace", str(tr), "--max-steps", "2000"], capsys)
    lines = tr.read_text().splitlines()
    lines = lines[:1] + lines[2:] + [lines[1]]
    tr.write_text("\n".join(lines) + "\n")
    code, _, err = run(["check", str(tr)], capsys)
    assert code == 2 and "diverges" in err


def test_explore_single_write_scenario(capsys, tmp_path):
    code, out, _ = run(["run", "--explore", "qa-lemma1", "--k", "2", "--domain", "3", "--report",
                        str(tmp_path / "e.json")], capsys)
    assert code == 0
    assert json.loads(out)["result"] == "pass"
    rep = json.loads((tmp_path / "e.json").read_text())
    assert rep["explore"]["verdict"]["result"] == "pass"


@pytest.mark.parametrize("argv, needle", [
    (["--variant", "two-reg", "--n", "3", "--K", "6"], "K > 2n"),
    (["--variant", "two-reg", "--n", "3", "--phi", "5"], "phi > 2n"),
    (["--variant", "gray", "--n", "3", "--K", "12"], "power of two"),
    (["--check", "speed"], "unknown check"),
    (["--adversary", "sneaky"], "adversary"),
    (["--variant", "atomic", "--check", "flash-home"], "gray variant only"),
])
def test_invalid_parameters(argv, needle, capsys):
    code, _, err = run(["run", *argv, "--max-steps", "100"], capsys)
    assert code == 2
    assert needle in err


def test_manifest_mirrors_flags(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"variant": "two-reg", "n": 2, "seeds": [0, 1, 2], "max-steps": 20000,
                             "check": ["convergence", "contamination"]}))
    code, out, _ = run(["run", "--manifest", str(m), "--report", str(tmp_path / "m.json.out")], capsys)
    assert code == 0
    code2, out2, _ = run(["run", "--variant", "two-reg", "--n", "2", "--seeds", "0,1,2", "--max-steps", "20000",
                          "--check", "convergence,contamination"], capsys)
    assert out == out2
    m.write_text(json.dumps({"colour": "red"}))
    code, _, err = run(["run", "--manifest", str(m)], capsys)
    assert code == 2 and "colour" in err


def test_failing_check_exits_one(capsys):
    # single scans give contaminated reads; the run must say so
    code, out, _ = run(["run", "--variant", "two-reg", "--n", "3", "--K", "8", "--phi", "1", "--unchecked",
                        "--seeds", "0..5", "--check", "contamination", "--max-steps", "5000"], capsys)
    assert code == 1


def test_plot_is_reproducible(tmp_path, capsys):
    rep = tmp_path / "r.json"
    run(["run", "--variant", "gray", "--n", "2", "--seeds", "0..3", "--max-steps", "20000", "--report", str(rep)],
        capsys)
    assert main(["plot", str(rep), "--out", str(tmp_path / "f1")]) == 0
    assert main(["plot", str(rep), "--out", str(tmp_path / "f2")]) == 0
    names = sorted(p.name for p in (tmp_path / "f1").iterdir())
    assert names == ["bottom_runs.png", "convergence.png", "gray_phases.png"]
    for n in names:
        assert (tmp_path / "f1" / n).read_bytes() == (tmp_path / "f2" / n).read_bytes()


def test_inconclusive_retried_with_double_budget():
    cfg = RingConfig(n=4, variant="two-reg")
    out = run_with_retry(cfg, 0, 60, retries=1, checks=("convergence",))
    assert out.retried and out.budget == 120
