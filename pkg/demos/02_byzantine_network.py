"""Run a seven-validator network with an equivocating leader and a crash.

The honest replicas change view, keep committing, and never disagree on a
height. Run with:

    python3 demos/02_byzantine_network.py
"""
from settlesim.simnet import Byzantine, ByzantineKind, Crash, SimConfig, WorkloadProfile, run_simulation

cfg = SimConfig(
    seed=3,
    n_validators=7,
    faults=(Byzantine(0, ByzantineKind.EQUIVOCATE), Crash(4, 1_500)),
    workload=WorkloadProfile(duration_ms=5_000),
    audit=True,
)
res = run_simulation(cfg)
m = res.metrics
print(f"txs generated {m.txs_generated}, accepted {m.txs_accepted}, blocks {m.blocks}")
print(f"view changes {m.view_changes}, final view {m.final_view}")
print(f"conflicting commits {m.conflicting_commits}, audited events {m.audited_events}, "
      f"conservation violations {m.conservation_violations}")
for node in res.nodes:
    role = "honest" if node.honest else "byzantine"
    state = "crashed" if node.crashed else "up"
    print(f"  {node.name:<12} {role:<9} {state:<7} committed {len(node.committed)} heights")
print("trace digest", res.trace_digest.hex())
