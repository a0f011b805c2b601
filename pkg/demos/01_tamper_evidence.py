"""Build a small hash chain, flip one byte, and watch verification point at it.

    python3 demos/01_tamper_evidence.py
"""
from settlesim.ledger import tamper, verify_chain
from settlesim.simnet import SimConfig, WorkloadProfile, run_simulation

# take the chain an honest validator built during a short run
res = run_simulation(SimConfig(seed=7, workload=WorkloadProfile(duration_ms=8_000)))
chain = res.reference().chain
print(f"chain of {len(chain)} blocks, tip {chain.anchor.hex()[:16]}...")
print("clean:", verify_chain(chain).describe())

# payload byte in block 5, then a timestamp byte in block 3
for height, offset in ((5, 100), (3, 10)):
    broken = tamper(chain, height, offset, 0x5A)
    v = verify_chain(broken)
    print(f"flip byte {offset} of block {height}: first broken height {v.first_broken_height}")
    print("  ", v.describe())
