"""JSON run configuration: strict parsing with documented defaults.

Every key that can change a run lives in this one document so that the trace
digest is a function of the file alone. Unknown keys are errors, and every
error names the dotted path of the offending key.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .compliance import KycRecord, KycStatus
from .econ import BaselineStage, BaselineStagePlan, CostModel, DEFAULT_STAGES
from .errors import ConfigError
from .settlement import ContractRuleSet
from .simnet.config import (Byzantine, ByzantineKind, ComplianceConfig, Crash, FxFeed, LatencyConfig, Partition,
                            SimConfig, TamperAttempt, check_fault, default_rules)
from .simnet.workload import WorkloadProfile

TOP_KEYS = ("seed", "validators", "faults", "latency", "confirmation_window_ms", "consensus", "workload", "rules",
            "compliance", "cost_model", "baseline_plan", "baseline", "output_dir")


@dataclass(frozen=True)
class BaselineOptions:
    samples: int = 10_000
    injected_errors: int = 0
    book_txs: int = 1_000


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = SimConfig()
    cost_model: CostModel = CostModel()
    baseline_plan: BaselineStagePlan = BaselineStagePlan()
    baseline: BaselineOptions = BaselineOptions()
    output_dir: str | None = None
    source: Mapping = field(default_factory=dict, compare=False)

    def with_seed(self, seed: int) -> "RunConfig":
        from dataclasses import replace
        return replace(self, sim=replace(self.sim, seed=_uint64(seed, "seed")), source={**self.source, "seed": seed})


# -- small typed readers --------------------------------------------------------

def _check_keys(obj: Any, allowed, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object", key=path or None)
    for k in obj:
        if k not in allowed:
            key = f"{path}.{k}" if path else k
            raise ConfigError(f"unknown key {key!r}", key=key)
    return obj


def _int(v, key: str, lo: int | None = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer", key=key)
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}", key=key)
    return v


def _uint64(v, key: str) -> int:
    v = _int(v, key)
    if v >= 1 << 64:
        raise ConfigError(f"{key} must fit in 64 bits", key=key)
    return v


def _rational(v, key: str) -> Fraction:
    if isinstance(v, bool):
        raise ConfigError(f"{key} must be a number", key=key)
    try:
        if isinstance(v, float):
            return Fraction(repr(v))
        if isinstance(v, (int, str)):
            return Fraction(v)
    except (ValueError, ZeroDivisionError):
        pass
    raise ConfigError(f"{key} must be a number or a rational string like '7/2'", key=key)


def _range(v, key: str) -> tuple[int, int]:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{key} must be a [min, max] pair", key=key)
    lo, hi = _int(v[0], key), _int(v[1], key)
    if lo > hi:
        raise ConfigError(f"{key} has min > max", key=key)
    return lo, hi


def _rational_range(v, key: str) -> tuple[Fraction, Fraction]:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{key} must be a [min, max] pair", key=key)
    return _rational(v[0], key), _rational(v[1], key)


def _str_list(v, key: str) -> list[str]:
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ConfigError(f"{key} must be a list of strings", key=key)
    return v


def _pair(text: str, key: str) -> tuple[str, str]:
    parts = text.split("/")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"{key}: expected 'FROM/TO', got {text!r}", key=key)
    return parts[0], parts[1]


# -- sections ---------------------------------------------------------------------

def _faults(v, n: int) -> tuple:
    if not isinstance(v, list):
        raise ConfigError("faults must be a list", key="faults")
    out = []
    for i, spec in enumerate(v):
        path = f"faults[{i}]"
        if not isinstance(spec, dict) or "type" not in spec:
            raise ConfigError(f"{path} needs a 'type'", key=path)
        kind = spec["type"]
        val = lambda: _int(spec.get("validator"), f"{path}.validator")
        if kind == "crash":
            _check_keys(spec, ("type", "validator", "at_ms"), path)
            out.append(Crash(val(), _int(spec.get("at_ms", 0), f"{path}.at_ms")))
        elif kind == "byzantine":
            _check_keys(spec, ("type", "validator", "kind"), path)
            try:
                bk = ByzantineKind(spec.get("kind", "equivocate"))
            except ValueError:
                raise ConfigError(f"{path}.kind must be one of {[k.value for k in ByzantineKind]}",
                                  key=f"{path}.kind") from None
            out.append(Byzantine(val(), bk))
        elif kind == "partition":
            _check_keys(spec, ("type", "validator", "start_ms", "end_ms"), path)
            out.append(Partition(val(), _int(spec.get("start_ms"), f"{path}.start_ms"),
                                 _int(spec.get("end_ms"), f"{path}.end_ms")))
        elif kind == "tamper":
            _check_keys(spec, ("type", "validator", "height", "byte", "mask", "at_ms"), path)
            at = spec.get("at_ms")
            out.append(TamperAttempt(val(), _int(spec.get("height"), f"{path}.height"),
                                     _int(spec.get("byte"), f"{path}.byte"),
                                     _int(spec.get("mask", 0xFF), f"{path}.mask", 1),
                                     None if at is None else _int(at, f"{path}.at_ms")))
        else:
            raise ConfigError(f"{path}.type {kind!r} is not a supported fault", key=f"{path}.type")
        try:
            check_fault(out[-1], n)
        except ConfigError as exc:
            raise ConfigError(str(exc), key=path) from None
    return tuple(out)


def _latency(v, window) -> LatencyConfig:
    d = LatencyConfig()
    kw = {}
    if v is not None:
        _check_keys(v, ("validation", "consensus_vote", "append", "network"), "latency")
        kw = {k: _range(x, f"latency.{k}") for k, x in v.items()}
    if window is not None:
        kw["confirmation"] = _range(window, "confirmation_window_ms")
    return LatencyConfig(**{**d.__dict__, **kw})


def _workload(v) -> WorkloadProfile:
    d = WorkloadProfile()
    if v is None:
        return d
    keys = ("tx_per_day", "peak_multiplier", "duration_ms", "operators", "amount_range", "currencies",
            "initial_balance", "bad_party_fraction", "day_offset_ms", "oracle_dispute_rate")
    _check_keys(v, keys, "workload")
    kw: dict[str, Any] = {}
    p = "workload."
    if "tx_per_day" in v:
        kw["tx_per_day"] = _int(v["tx_per_day"], p + "tx_per_day")
    if "peak_multiplier" in v:
        kw["peak_multiplier"] = _rational(v["peak_multiplier"], p + "peak_multiplier")
    if "duration_ms" in v:
        kw["duration_ms"] = _int(v["duration_ms"], p + "duration_ms")
    if "operators" in v:
        ops = v["operators"]
        if isinstance(ops, int) and not isinstance(ops, bool):
            kw["operators"] = tuple(f"OP{i:03d}" for i in range(_int(ops, p + "operators", 2)))
        else:
            kw["operators"] = tuple(_str_list(ops, p + "operators"))
    if "amount_range" in v:
        kw["amount_range"] = _range(v["amount_range"], p + "amount_range")
    if "currencies" in v:
        kw["currencies"] = tuple(_str_list(v["currencies"], p + "currencies"))
    if "initial_balance" in v:
        kw["initial_balance"] = _int(v["initial_balance"], p + "initial_balance")
    if "bad_party_fraction" in v:
        kw["bad_party_fraction"] = float(_rational(v["bad_party_fraction"], p + "bad_party_fraction"))
    if "day_offset_ms" in v:
        kw["day_offset_ms"] = None if v["day_offset_ms"] is None else _int(v["day_offset_ms"], p + "day_offset_ms")
    if "oracle_dispute_rate" in v:
        kw["oracle_dispute_rate"] = float(_rational(v["oracle_dispute_rate"], p + "oracle_dispute_rate"))
    try:
        return WorkloadProfile(**{**d.__dict__, **kw})
    except ValueError as exc:
        raise ConfigError(str(exc), key="workload") from None


def _rules(v, workload: WorkloadProfile) -> ContractRuleSet | None:
    if v is None:
        return None
    keys = ("fee_rate_bp", "fee_splits", "withholding_bp", "jurisdictions", "min_amount", "max_amount",
            "allowed_currencies", "settlement_currency")
    _check_keys(v, keys, "rules")
    base = default_rules(workload.operators, workload.currencies)
    kw: dict[str, Any] = {}
    p = "rules."
    if "fee_rate_bp" in v:
        kw["fee_rate_bp"] = _int(v["fee_rate_bp"], p + "fee_rate_bp")
    if "fee_splits" in v:
        splits = v["fee_splits"]
        if not isinstance(splits, list) or not all(isinstance(s, list) and len(s) == 2 for s in splits):
            raise ConfigError("fee_splits must be a list of [beneficiary, weight] pairs", key=p + "fee_splits")
        kw["fee_splits"] = tuple((str(name), _int(w, p + "fee_splits")) for name, w in splits)
    if "withholding_bp" in v:
        wh = v["withholding_bp"]
        if not isinstance(wh, dict):
            raise ConfigError("withholding_bp must map 'FROM/TO' to basis points", key=p + "withholding_bp")
        kw["withholding_bp"] = {_pair(k, p + "withholding_bp"): _int(bp, f"{p}withholding_bp.{k}")
                                for k, bp in wh.items()}
    if "jurisdictions" in v:
        j = v["jurisdictions"]
        if not isinstance(j, dict) or not all(isinstance(x, str) for x in j.values()):
            raise ConfigError("jurisdictions must map operator to region", key=p + "jurisdictions")
        kw["jurisdictions"] = dict(j)
    for k in ("min_amount", "max_amount"):
        if k in v:
            kw[k] = _int(v[k], p + k)
    if "allowed_currencies" in v:
        kw["allowed_currencies"] = frozenset(_str_list(v["allowed_currencies"], p + "allowed_currencies"))
    if "settlement_currency" in v:
        if not isinstance(v["settlement_currency"], str):
            raise ConfigError("settlement_currency must be a string", key=p + "settlement_currency")
        kw["settlement_currency"] = v["settlement_currency"]
    fields = {f: getattr(base, f) for f in base.__dataclass_fields__}
    return ContractRuleSet(**{**fields, **kw})


def _compliance(v) -> ComplianceConfig:
    d = ComplianceConfig()
    if v is None:
        return d
    _check_keys(v, ("sanctions", "kyc", "fx_feeds", "max_age_ms", "refresh_ms"), "compliance")
    kw: dict[str, Any] = {}
    p = "compliance."
    if "sanctions" in v:
        kw["sanctions"] = frozenset(_str_list(v["sanctions"], p + "sanctions"))
    if "kyc" in v:
        reg = {}
        if not isinstance(v["kyc"], dict):
            raise ConfigError("kyc must map operator to a record", key=p + "kyc")
        for op, rec in v["kyc"].items():
            path = f"{p}kyc.{op}"
            _check_keys(rec, ("status", "expiry_ms"), path)
            try:
                status = KycStatus(rec.get("status", "Verified"))
            except ValueError:
                raise ConfigError(f"{path}.status must be Verified, Expired or Revoked", key=f"{path}.status") from None
            reg[op] = KycRecord(op, status, _int(rec.get("expiry_ms", 1 << 62), f"{path}.expiry_ms"))
        kw["kyc"] = reg
    if "fx_feeds" in v:
        feeds = []
        if not isinstance(v["fx_feeds"], list):
            raise ConfigError("fx_feeds must be a list", key=p + "fx_feeds")
        for i, feed in enumerate(v["fx_feeds"]):
            path = f"{p}fx_feeds[{i}]"
            _check_keys(feed, ("as_of_ms", "rates"), path)
            rates = feed.get("rates", {})
            if not isinstance(rates, dict):
                raise ConfigError("rates must map 'FROM/TO' to micro-units", key=f"{path}.rates")
            feeds.append(FxFeed(_int(feed.get("as_of_ms", 0), f"{path}.as_of_ms"),
                                {_pair(k, f"{path}.rates"): _int(r, f"{path}.rates.{k}", 1) for k, r in rates.items()}))
        kw["fx_feeds"] = tuple(feeds)
    for k in ("max_age_ms", "refresh_ms"):
        if k in v:
            kw[k] = _int(v[k], p + k)
    return ComplianceConfig(**{**d.__dict__, **kw})


def _cost_model(v) -> CostModel:
    if v is None:
        return CostModel()
    d = CostModel()
    ranges = ("intermediary", "labor", "technology", "error", "infrastructure_addon")
    scalars = ("intermediary_factor", "labor_factor", "error_factor", "headline_traditional", "headline_blockchain")
    _check_keys(v, (*ranges, *scalars, "overrides"), "cost_model")
    kw: dict[str, Any] = {}
    for k in ranges:
        if k in v:
            kw[k] = _rational_range(v[k], f"cost_model.{k}")
    for k in scalars:
        if k in v:
            kw[k] = _rational(v[k], f"cost_model.{k}")
    if "overrides" in v:
        if not isinstance(v["overrides"], dict):
            raise ConfigError("overrides must map component to rate", key="cost_model.overrides")
        kw["overrides"] = {k: _rational(x, f"cost_model.overrides.{k}") for k, x in v["overrides"].items()}
    return CostModel(**{**{f: getattr(d, f) for f in d.__dataclass_fields__}, **kw})


def _baseline_plan(v) -> BaselineStagePlan:
    if v is None:
        return BaselineStagePlan()
    if not isinstance(v, list):
        raise ConfigError("baseline_plan must be a list of stages", key="baseline_plan")
    stages = []
    for i, st in enumerate(v):
        path = f"baseline_plan[{i}]"
        _check_keys(st, ("name", "days"), path)
        lo, hi = _rational_range(st.get("days"), f"{path}.days")
        stages.append(BaselineStage(str(st.get("name", f"stage{i}")), lo, hi))
    return BaselineStagePlan(tuple(stages))


def _baseline(v) -> BaselineOptions:
    if v is None:
        return BaselineOptions()
    _check_keys(v, ("samples", "injected_errors", "book_txs"), "baseline")
    d = BaselineOptions()
    return BaselineOptions(
        _int(v.get("samples", d.samples), "baseline.samples", 1),
        _int(v.get("injected_errors", d.injected_errors), "baseline.injected_errors"),
        _int(v.get("book_txs", d.book_txs), "baseline.book_txs"),
    )


def parse_config(doc: Mapping) -> RunConfig:
    _check_keys(doc, TOP_KEYS, "")
    n = _int(doc.get("validators", 4), "validators", 1)
    workload = _workload(doc.get("workload"))
    consensus = doc.get("consensus")
    kw: dict[str, Any] = {}
    if consensus is not None:
        _check_keys(consensus, ("max_block_txs", "timeout_ms"), "consensus")
        if "max_block_txs" in consensus:
            kw["max_block_txs"] = _int(consensus["max_block_txs"], "consensus.max_block_txs", 1)
        if consensus.get("timeout_ms") is not None:
            kw["timeout_ms"] = _int(consensus["timeout_ms"], "consensus.timeout_ms", 1)
    sim = SimConfig(
        seed=_uint64(doc.get("seed", 0), "seed"),
        n_validators=n,
        faults=_faults(doc.get("faults", []), n),
        latency=_latency(doc.get("latency"), doc.get("confirmation_window_ms")),
        workload=workload,
        rules=_rules(doc.get("rules"), workload),
        compliance=_compliance(doc.get("compliance")),
        **kw,
    )
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir must be a string", key="output_dir")
    return RunConfig(sim, _cost_model(doc.get("cost_model")), _baseline_plan(doc.get("baseline_plan")),
                     _baseline(doc.get("baseline")), out, dict(doc))


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config file; ``None`` gives the all-defaults config."""
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key=None) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", key=None) from None
    return parse_config(doc)


def default_config_document() -> dict:
    """The documented defaults, spelled out as a config file."""
    wl = WorkloadProfile()
    lat = LatencyConfig()
    rules = default_rules(wl.operators, wl.currencies)
    cm = CostModel()
    return {
        "seed": 0,
        "validators": 4,
        "faults": [],
        "latency": {"validation": list(lat.validation), "consensus_vote": list(lat.consensus_vote),
                    "append": list(lat.append), "network": list(lat.network)},
        "confirmation_window_ms": list(lat.confirmation),
        "consensus": {"max_block_txs": 500, "timeout_ms": None},
        "workload": {"tx_per_day": wl.tx_per_day, "peak_multiplier": str(wl.peak_multiplier),
                     "duration_ms": wl.duration_ms, "operators": list(wl.operators),
                     "amount_range": list(wl.amount_range), "currencies": list(wl.currencies),
                     "initial_balance": wl.initial_balance, "bad_party_fraction": 0, "day_offset_ms": None,
                     "oracle_dispute_rate": 0},
        "rules": {"fee_rate_bp": rules.fee_rate_bp, "fee_splits": [list(s) for s in rules.fee_splits],
                  "withholding_bp": {f"{a}/{b}": bp for (a, b), bp in rules.withholding_bp.items()},
                  "jurisdictions": dict(rules.jurisdictions), "min_amount": rules.min_amount,
                  "max_amount": rules.max_amount, "allowed_currencies": sorted(rules.allowed_currencies),
                  "settlement_currency": rules.settlement_currency},
        "compliance": {"sanctions": [], "kyc": {},
                       "fx_feeds": [{"as_of_ms": f.as_of_ms, "rates": {f"{a}/{b}": r for (a, b), r in f.rates.items()}}
                                    for f in ComplianceConfig().fx_feeds],
                       "max_age_ms": 60_000, "refresh_ms": 10_000},
        "cost_model": {k: [str(x) for x in getattr(cm, k)] for k in
                       ("intermediary", "labor", "technology", "error", "infrastructure_addon")}
        | {k: str(getattr(cm, k)) for k in ("intermediary_factor", "labor_factor", "error_factor",
                                            "headline_traditional", "headline_blockchain")},
        "baseline_plan": [{"name": s.name, "days": [str(s.first_day), str(s.last_day)]} for s in DEFAULT_STAGES],
        "baseline": {"samples": 10_000, "injected_errors": 0, "book_txs": 1_000},
        "output_dir": None,
    }
