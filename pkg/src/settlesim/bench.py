"""Wall-clock micro-benchmark of the settlement hot path.

Per block: screen, validate and apply every transaction, serialise and hash
them into a block, then append it to a chain. No simulated latency.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from .compliance import KycRecord, KycStatus, OracleView, SanctionsList
from .ledger import HashChain, TransactionRecord, TxStatus, build_block, state_digest
from .rng import Xoshiro256
from .settlement import ContractRuleSet, LedgerState, execute_batch


@dataclass(frozen=True)
class BenchResult:
    txs: int
    blocks: int
    seconds: float
    tip_digest: bytes
    state_digest: bytes

    @property
    def rate(self) -> float:
        return self.txs / self.seconds if self.seconds > 0 else float("inf")


def bench_inputs(n: int, seed: int = 0, operators: int = 64) -> list[TransactionRecord]:
    rng = Xoshiro256(seed)
    names = [f"OP{i:03d}" for i in range(operators)]
    out = []
    for i in range(n):
        a = rng.uniform_int(0, operators - 1)
        b = rng.uniform_int(0, operators - 2)
        if b >= a:
            b += 1
        out.append(TransactionRecord(rng.bytes16(), i, names[a], names[b], rng.uniform_int(100, 1_000_000), "USD"))
    return out


def run_bench(n: int, block_size: int = 1_000, seed: int = 0) -> BenchResult:
    if n < 1:
        raise ValueError("need at least one transaction")
    txs = bench_inputs(n, seed)
    ops = sorted({t.sender for t in txs} | {t.receiver for t in txs})
    rules = ContractRuleSet(fee_splits=(("pool:network", 5000), ("pool:validators", 3000), ("pool:treasury", 2000)))
    kyc = {op: KycRecord(op, KycStatus.VERIFIED, 1 << 62) for op in ops}
    view = OracleView({}, SanctionsList(), kyc, {}, 0)
    state = LedgerState({op: 10**15 for op in ops})
    chain = HashChain()
    blocks = 0
    start = time.perf_counter()
    for lo in range(0, n, block_size):
        batch = txs[lo:lo + block_size]
        now = batch[-1].timestamp_ms
        state, records = execute_batch(state, batch, rules, view, now, out_status=TxStatus.APPENDED)
        chain.append_built(build_block(chain.tip_height + 1, chain.anchor, records, now))
        blocks += 1
    elapsed = time.perf_counter() - start
    return BenchResult(n, blocks, elapsed, chain.anchor, state_digest(state))
