import json
from dataclasses import replace

import pytest

from settlesim.config import RunConfig, default_config_document, load_config, parse_config
from settlesim.errors import ConfigError
from settlesim.simnet import Byzantine, ByzantineKind, Crash, Partition, SimConfig, TamperAttempt, run_simulation


def test_empty_document_is_defaults():
    cfg = parse_config({})
    assert cfg.sim == SimConfig()
    assert load_config(None).sim == SimConfig()


def test_default_document_round_trips():
    doc = default_config_document()
    json.dumps(doc)
    cfg = parse_config(doc)
    assert cfg.sim.effective_rules == SimConfig().effective_rules
    assert replace(cfg.sim, rules=None) == SimConfig()
    assert (cfg.cost_model, cfg.baseline_plan, cfg.baseline) == (RunConfig().cost_model, RunConfig().baseline_plan,
                                                                 RunConfig().baseline)
    small = {**doc, "workload": {**doc["workload"], "duration_ms": 500}}
    a = run_simulation(parse_config(small).sim)
    b = run_simulation(parse_config({"workload": {"duration_ms": 500}}).sim)
    assert a.trace_digest == b.trace_digest


@pytest.mark.parametrize("doc,key", [
    ({"seeed": 1}, "seeed"),
    ({"workload": {"tx_per_dya": 5}}, "workload.tx_per_dya"),
    ({"faults": [{"type": "meteor"}]}, "faults[0].type"),
    ({"faults": [{"type": "crash", "validator": 9}]}, "faults[0]"),
    ({"seed": -1}, "seed"),
    ({"validators": 0}, "validators"),
    ({"rules": {"fee_splits": [["pool:a", 10]]}}, "rules.fee_splits"),
    ({"compliance": {"kyc": {"OP1": {"status": "Maybe"}}}}, "compliance.kyc.OP1.status"),
])
def test_errors_name_the_key(doc, key):
    with pytest.raises(ConfigError) as e:
        parse_config(doc)
    assert e.value.key is not None and e.value.key.startswith(key)


def test_fault_parsing():
    cfg = parse_config({"validators": 7, "faults": [
        {"type": "crash", "validator": 0, "at_ms": 5},
        {"type": "byzantine", "validator": 1, "kind": "silence"},
        {"type": "partition", "validator": 2, "start_ms": 1, "end_ms": 9},
        {"type": "tamper", "validator": 3, "height": 2, "byte": 100},
    ]})
    assert cfg.sim.faults == (Crash(0, 5), Byzantine(1, ByzantineKind.SILENCE), Partition(2, 1, 9),
                              TamperAttempt(3, 2, 100))


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"seed": 1,\n  oops}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_with_seed_updates_source():
    cfg = parse_config({"seed": 1}).with_seed(5)
    assert cfg.sim.seed == 5 and cfg.source["seed"] == 5
