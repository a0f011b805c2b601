import json

import pytest

from settlesim.cli import main

SMALL = {"workload": {"duration_ms": 1_000}}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


@pytest.fixture
def run_dir(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["run", "--config", small_cfg, "--out", str(out)]) == 0
    return out


def test_run_writes_artefacts(run_dir):
    for name in ("trace.jsonl", "metrics.json", "metrics.csv", "config.json"):
        assert (run_dir / name).is_file()
    assert (run_dir / "nodes" / "validator-0.sblk").is_file()
    doc = json.loads((run_dir / "metrics.json").read_text())
    assert set(doc["wall_clock"]) == {"elapsed_s"}
    assert doc["metrics"]["conflicting_commits"] == 0


def test_outputs_reproducible_except_wall_clock(tmp_path, small_cfg, run_dir):
    again = tmp_path / "again"
    assert main(["run", "--config", small_cfg, "--out", str(again)]) == 0
    for name in ("trace.jsonl", "metrics.csv", "config.json", "nodes/validator-2.sblk"):
        assert (run_dir / name).read_bytes() == (again / name).read_bytes(), name
    a, b = (json.loads((d / "metrics.json").read_text()) for d in (run_dir, again))
    a.pop("wall_clock"), b.pop("wall_clock")
    assert a == b


def test_saved_config_reproduces_run(tmp_path, run_dir):
    again = tmp_path / "again"
    assert main(["run", "--config", str(run_dir / "config.json"), "--out", str(again)]) == 0
    assert (run_dir / "trace.jsonl").read_bytes() == (again / "trace.jsonl").read_bytes()


def test_seed_override_changes_digest(tmp_path, small_cfg, run_dir):
    other = tmp_path / "other"
    assert main(["run", "--config", small_cfg, "--seed", "3", "--out", str(other)]) == 0
    d = lambda p: json.loads((p / "metrics.json").read_text())["metrics"]["trace_digest"]
    assert d(run_dir) != d(other)
    assert json.loads((other / "config.json").read_text())["seed"] == 3


def test_seed_sweep_parallelism_does_not_change_digests(tmp_path, small_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", small_cfg, "--seeds", "0..2", "--out", str(a)]) == 0
    assert main(["run", "--config", small_cfg, "--seeds", "0..2", "--jobs", "2", "--out", str(b)]) == 0
    for s in range(3):
        assert (a / f"seed-{s}" / "trace.jsonl").read_bytes() == (b / f"seed-{s}" / "trace.jsonl").read_bytes()


def test_env_default_out(tmp_path, small_cfg, monkeypatch):
    monkeypatch.setenv("SETTLESIM_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", small_cfg]) == 0
    assert (tmp_path / "env" / "metrics.json").is_file()


def test_bad_config_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"workload": {"tx_per_dya": 1}}')
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "x")]) == 2
    assert "workload.tx_per_dya" in capsys.readouterr().err
    p.write_text("{")
    assert main(["run", "--config", str(p)]) == 2


def test_verify_tamper_cycle(run_dir, capsys):
    log = run_dir / "nodes" / "validator-1.sblk"
    assert main(["verify", "--ledger", str(log)]) == 0
    assert main(["tamper", "--ledger", str(log), "--height", "2", "--byte", "90"]) == 0
    capsys.readouterr()
    assert main(["verify", "--ledger", str(log) + ".tampered"]) == 1
    assert "first broken height: 2" in capsys.readouterr().out
    assert main(["tamper", "--ledger", str(log), "--height", "999", "--byte", "0"]) == 2


def test_verify_explicit_anchor_catches_tip_edit(run_dir):
    log = run_dir / "nodes" / "validator-0.sblk"
    anchor = (run_dir / "nodes" / "validator-0.sblk.anchor").read_text().strip()
    tip = json.loads((run_dir / "metrics.json").read_text())["nodes"][0]["tip_height"]
    assert main(["tamper", "--ledger", str(log), "--height", str(tip), "--byte", "9"]) == 0
    assert main(["verify", "--ledger", str(log) + ".tampered", "--anchor", anchor]) == 1


def test_verify_truncated_or_missing(run_dir, tmp_path):
    data = (run_dir / "nodes" / "validator-0.sblk").read_bytes()
    cut = tmp_path / "cut.sblk"
    cut.write_bytes(data[:-7])
    assert main(["verify", "--ledger", str(cut)]) == 2
    assert main(["verify", "--ledger", str(tmp_path / "none.sblk")]) == 2


def test_baseline_command(tmp_path, capsys):
    p = tmp_path / "b.json"
    p.write_text(json.dumps({"baseline": {"samples": 500, "injected_errors": 4, "book_txs": 200}}))
    assert main(["baseline", "--config", str(p), "--out", str(tmp_path / "bo")]) == 0
    doc = json.loads((tmp_path / "bo" / "baseline.json").read_text())
    assert doc["discrepancies"] == 4 and doc["samples"] == 500


def test_compare_formats_agree(run_dir, tmp_path, capsys):
    p = tmp_path / "b.json"
    p.write_text(json.dumps({"baseline": {"samples": 500}}))
    capsys.readouterr()
    assert main(["compare", "--sim", str(run_dir), "--baseline-config", str(p), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert main(["compare", "--sim", str(run_dir), "--baseline-config", str(p), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    fee = next(r for r in doc["table"] if r["metric"] == "Transaction Fees")
    assert [fee[c]["value"] for c in ("traditional", "blockchain", "improvement")] == \
        ["5.0% of value", "0.65% of value", "87% cost reduction"]
    assert lines[2].startswith("Transaction Fees,5.0% of value,config,0.65% of value,config,87% cost reduction")
    cycle = next(r for r in doc["table"] if r["metric"] == "Settlement Cycle Time")
    assert float(cycle["improvement"]["value"].split("%")[0]) >= 99.7


def test_compare_missing_sim(tmp_path):
    assert main(["compare", "--sim", str(tmp_path / "nothing")]) == 2


def test_roi_command(capsys):
    assert main(["roi", "--investment", "50e6", "--savings", "75e6", "--years", "5", "--discount", "0"]) == 0
    out = capsys.readouterr().out
    assert "payback_years 0.667" in out and "npv 325000000.00" in out
    assert main(["roi", "--investment", "100e6", "--savings", "1400e6"]) == 0
    assert "payback_years 0.071" in capsys.readouterr().out
    assert main(["roi", "--savings", "0"]) == 2
    assert main(["roi", "--table"]) == 0


def test_bench_command(capsys):
    assert main(["bench", "--txs", "1"]) == 0
    out = capsys.readouterr().out
    assert float(out.split("rate ")[1].split()[0]) > 0
    assert main(["bench", "--txs", "0"]) == 2


def test_bench_digests_repeat(capsys):
    main(["bench", "--txs", "3000"])
    first = capsys.readouterr().out.splitlines()[1:]
    main(["bench", "--txs", "3000"])
    assert capsys.readouterr().out.splitlines()[1:] == first


def test_unknown_command_exit_2():
    assert main(["frobnicate"]) == 2
