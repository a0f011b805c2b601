"""settlesim command line.

Exit codes: 0 success, 1 tampered ledger or violated invariant, 2 bad input
(config, arguments, unreadable files).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import econ
from .bench import run_bench
from .config import RunConfig, default_config_document, load_config
from .errors import ConfigError, FormatError, MissingInput, OutOfRange, SafetyViolation, SettleSimError, ZeroSavings
from .ledger import export_jsonl, read_block_log, save_block_log, state_digest, tamper, verify_chain

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _out_dir(arg: str | None, cfg: RunConfig | None = None) -> Path:
    path = arg or (cfg.output_dir if cfg else None) or os.environ.get("SETTLESIM_OUT") or "settlesim-out"
    return Path(path)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# -- run ------------------------------------------------------------------------

def _write_run(cfg: RunConfig, out: Path) -> dict:
    """Run one simulation and write its artefacts. Returns a summary dict."""
    from .simnet import run_simulation

    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_simulation(cfg.sim)
    wall = time.perf_counter() - t0
    m = result.metrics
    with open(out / "trace.jsonl", "w", encoding="utf-8") as fp:
        result.trace.write_jsonl(fp)
    nodes_dir = out / "nodes"
    nodes_dir.mkdir(exist_ok=True)
    node_info = []
    for node in result.nodes:
        log = nodes_dir / f"{node.name}.sblk"
        save_block_log(node.chain, log)
        (nodes_dir / f"{node.name}.sblk.anchor").write_text(node.chain.anchor.hex() + "\n")
        with open(nodes_dir / f"{node.name}.blocks.jsonl", "w", encoding="utf-8") as fp:
            export_jsonl(node.chain, fp)
        node_info.append({"name": node.name, "honest": node.honest, "crashed": node.crashed,
                          "tip_height": node.chain.tip_height, "tip_digest": node.chain.tip_digest().hex(),
                          "state_digest": state_digest(node.state).hex()})
    metrics = m.to_json()
    metrics["fee_rate_bp"] = cfg.sim.effective_rules.fee_rate_bp
    metrics["trace_digest"] = result.trace_digest.hex()
    doc = {"seed": cfg.sim.seed, "metrics": metrics, "nodes": node_info,
           "reconciliation": result.reconciliation.to_json() if result.reconciliation else None,
           "wall_clock": {"elapsed_s": round(wall, 3)}}
    (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(("metric", "value"))
        for k in sorted(metrics):
            v = metrics[k]
            w.writerow((k, json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v))
    # Top-level keys from the user's file win; the parser fills nested defaults
    # the same way on reload, so this document reproduces the run.
    effective = {**default_config_document(), **cfg.source}
    (out / "config.json").write_text(json.dumps(effective, indent=2, sort_keys=True) + "\n")
    ok = m.conflicting_commits == 0 and m.conservation_violations == 0
    return {"seed": cfg.sim.seed, "out": str(out), "trace_digest": result.trace_digest.hex(),
            "txs": m.txs_generated, "accepted": m.txs_accepted, "rejected": m.txs_rejected, "blocks": m.blocks,
            "pipeline_span_ms": m.pipeline_span_ms, "end_to_end_ms": m.end_to_end_ms,
            "view_changes": m.view_changes, "reconciliation_mismatches": m.reconciliation_mismatches,
            "ok": ok, "wall_s": round(wall, 3)}


def _run_one(args: tuple[str | None, int, str]) -> dict:
    config_path, seed, out = args
    cfg = load_config(config_path).with_seed(seed)
    return _write_run(cfg, Path(out))


def _parse_seeds(text: str) -> range:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise ConfigError(f"--seeds expects A..B, got {text!r}", key="--seeds") from None
    if lo < 0 or hi < lo:
        raise ConfigError("--seeds range must satisfy 0 <= A <= B", key="--seeds")
    return range(lo, hi + 1)


def _print_summary(s: dict) -> None:
    print(f"seed {s['seed']}: {s['txs']} txs ({s['accepted']} accepted, {s['rejected']} rejected) in "
          f"{s['blocks']} blocks, view changes {s['view_changes']}")
    print(f"  pipeline span ms {s['pipeline_span_ms']}, end-to-end ms {s['end_to_end_ms']}")
    print(f"  reconciliation mismatches {s['reconciliation_mismatches']}, invariants {'ok' if s['ok'] else 'VIOLATED'}")
    print(f"  trace_digest {s['trace_digest']}")
    print(f"  output {s['out']}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out, cfg)
    if args.seeds:
        seeds = _parse_seeds(args.seeds)
        jobs = [(args.config, s, str(out / f"seed-{s}")) for s in seeds]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                summaries = list(pool.map(_run_one, jobs))
        else:
            summaries = [_run_one(j) for j in jobs]
    else:
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        summaries = [_write_run(cfg, out)]
    for s in summaries:
        _print_summary(s)
    return EXIT_OK if all(s["ok"] for s in summaries) else EXIT_FAIL


# -- verify / tamper --------------------------------------------------------------

def _anchor_for(path: Path, explicit: str | None) -> bytes | None:
    if explicit:
        try:
            anchor = bytes.fromhex(explicit)
        except ValueError:
            anchor = b""
        if len(anchor) != 32:
            raise ConfigError("--anchor must be 64 hex characters", key="--anchor")
        return anchor
    side = path.with_name(path.name + ".anchor")
    if side.exists():
        try:
            return bytes.fromhex(side.read_text().strip())
        except ValueError:
            raise FormatError(f"anchor file {side} is not hex") from None
    return None


def cmd_verify(args) -> int:
    path = Path(args.ledger)
    anchor = _anchor_for(path, args.anchor)
    chain = read_block_log(path, anchor)
    verdict = verify_chain(chain)
    print(verdict.describe())
    if not verdict.valid:
        print(f"first broken height: {verdict.first_broken_height}")
    print(f"blocks: {chain.tip_height + 1} (tip height {chain.tip_height}); anchor: {'yes' if anchor else 'no'}")
    return EXIT_OK if verdict.valid else EXIT_FAIL


def cmd_tamper(args) -> int:
    path = Path(args.ledger)
    anchor = _anchor_for(path, None)
    chain = read_block_log(path, anchor)
    mutated = tamper(chain, args.height, args.byte, args.mask)
    dest = path.with_name(path.name + ".tampered")
    save_block_log(mutated, dest)
    if anchor is not None:
        dest.with_name(dest.name + ".anchor").write_text(anchor.hex() + "\n")
    print(f"flipped byte {args.byte} of block {args.height} (mask 0x{args.mask:02x}) -> {dest}")
    return EXIT_OK


# -- baseline / compare -----------------------------------------------------------

def _baseline_summary(cfg: RunConfig, seed: int | None = None) -> econ.BaselineSummary:
    b = cfg.baseline
    return econ.run_baseline(cfg.sim.seed if seed is None else seed, cfg.baseline_plan, cfg.cost_model,
                             samples=b.samples, injected_errors=b.injected_errors, book_txs=b.book_txs)


def _baseline_json(s: econ.BaselineSummary) -> dict:
    return {"mean_settlement_days": econ.fixed(s.mean_settlement_s / 86_400, 6),
            "min_days": econ.fixed(s.min_days, 6), "max_days": econ.fixed(s.max_days, 6), "samples": s.samples,
            "fee_rate": str(s.fee_rate), "injected_errors": s.injected_errors, "discrepancies": s.discrepancies}


def cmd_baseline(args) -> int:
    cfg = load_config(args.config)
    s = _baseline_summary(cfg, args.seed)
    doc = _baseline_json(s)
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "baseline.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    sim_dir = Path(args.sim)
    metrics_path = sim_dir / "metrics.json"
    if not metrics_path.exists():
        raise MissingInput(f"no simulation output at {metrics_path}")
    doc = json.loads(metrics_path.read_text())
    cfg = load_config(args.baseline_config)
    sim_cfg = sim_dir / "config.json"
    fee_bp = doc["metrics"].get("fee_rate_bp", 65)
    if sim_cfg.exists():
        fee_bp = load_config(sim_cfg).sim.effective_rules.fee_rate_bp
    chain = econ.BlockchainSummary.from_metrics(doc["metrics"], Fraction(fee_bp, 10_000))
    report = econ.build_comparison_report(chain, _baseline_summary(cfg), cfg.cost_model)
    text = report.to_csv() if args.format == "csv" else report.dumps_json()
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    print(text, end="" if text.endswith("\n") else "\n")
    return EXIT_OK


# -- roi / bench ------------------------------------------------------------------

def cmd_roi(args) -> int:
    try:
        inv, sav, r = Fraction(args.investment), Fraction(args.savings), Fraction(args.discount)
    except ValueError as exc:
        raise ConfigError(f"not a number: {exc}") from None
    if args.table:
        for row in econ.roi_table(discount_rate=r, horizon=args.years):
            print(json.dumps(row, sort_keys=True))
        return EXIT_OK
    res = econ.roi(econ.RoiInput(inv, sav, args.years, r))
    print(f"payback_years {econ.fixed(res.payback_years, 3)}")
    print(f"npv {econ.fixed(res.npv, 2)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.txs < 1:
        raise ConfigError("--txs must be >= 1", key="--txs")
    res = run_bench(args.txs, block_size=args.block_size, seed=args.seed)
    print(f"txs {res.txs} blocks {res.blocks} seconds {res.seconds:.3f} rate {res.rate:.0f} tx/s")
    print(f"tip_digest {res.tip_digest.hex()}")
    print(f"state_digest {res.state_digest.hex()}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="settlesim", description="Permissioned settlement ledger simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a seeded simulation and write its artefacts")
    r.add_argument("--config", help="JSON run config (defaults apply when omitted)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--seeds", help="run a seed sweep A..B (inclusive), one subdirectory per seed")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for --seeds")
    r.add_argument("--out", help="output directory (default: $SETTLESIM_OUT or ./settlesim-out)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="verify a block log")
    v.add_argument("--ledger", required=True)
    v.add_argument("--anchor", help="trusted tip digest (hex); defaults to LEDGER.anchor when present")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tamper", help="flip one byte of a block log, writing LEDGER.tampered")
    t.add_argument("--ledger", required=True)
    t.add_argument("--height", type=int, required=True)
    t.add_argument("--byte", type=int, required=True)
    t.add_argument("--mask", type=lambda s: int(s, 0), default=0xFF)
    t.set_defaults(func=cmd_tamper)

    b = sub.add_parser("baseline", help="sample the traditional settlement timeline")
    b.add_argument("--config")
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_baseline)

    c = sub.add_parser("compare", help="build the traditional vs blockchain comparison report")
    c.add_argument("--sim", required=True, help="output directory of a run")
    c.add_argument("--baseline-config", dest="baseline_config")
    c.add_argument("--format", choices=("csv", "json"), default="json")
    c.add_argument("--out", help="also write the report to this file")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("roi", help="payback period and NPV")
    o.add_argument("--investment", default="50e6")
    o.add_argument("--savings", default="75e6")
    o.add_argument("--years", type=int, default=5)
    o.add_argument("--discount", default="0")
    o.add_argument("--table", action="store_true", help="print the reference ROI table instead")
    o.set_defaults(func=cmd_roi)

    h = sub.add_parser("bench", help="wall-clock benchmark of the settlement hot path")
    h.add_argument("--txs", type=int, default=100_000)
    h.add_argument("--block-size", dest="block_size", type=int, default=1_000)
    h.add_argument("--seed", type=int, default=0)
    h.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(f"{exc.key}: {exc}" if exc.key else str(exc))
        return EXIT_USAGE
    except (FormatError, MissingInput, OutOfRange, ZeroSavings) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror}")
        return EXIT_USAGE
    except SafetyViolation as exc:
        _err(f"invariant violated: {exc}")
        return EXIT_FAIL
    except SettleSimError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
