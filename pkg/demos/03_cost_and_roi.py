"""Compare a simulated run with the correspondent-banking baseline.

Prints the comparison table (measured and paper-claim cells are tagged) and
the ROI table with exact paybacks. Run with:

    python3 demos/03_cost_and_roi.py
"""
from settlesim import econ
from settlesim.simnet import SimConfig, run_simulation

res = run_simulation(SimConfig(seed=0))
chain = econ.BlockchainSummary.from_metrics(res.metrics.to_json())
report = econ.build_comparison_report(chain, econ.run_baseline(seed=0))

print(f"{'metric':<28} {'traditional':<22} {'blockchain':<22} {'improvement':<24} source")
for row in report.rows:
    print(f"{row.metric:<28} {row.traditional.value:<22} {row.blockchain.value:<22} "
          f"{row.improvement.value:<24} {row.improvement.source}")

print()
for row in econ.ROI_TABLE:
    r = econ.roi(econ.RoiInput(row.investment, row.savings))
    ok, diff = econ.payback_matches(row)
    print(f"invest {row.investment / 1e6:>6.0f}M  savings {row.savings / 1e6:>6.0f}M/yr  "
          f"payback {econ.fixed(r.payback_years, 4)} y (printed {row.paper_payback}, match {ok})  "
          f"NPV@0 {r.npv / 1e6:.0f}M")
