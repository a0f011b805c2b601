import hashlib
import random

import pytest

from settlesim.ledger import HashChain, TransactionRecord, TxStatus, Verdict, append_block


def make_tx(i: int, sender="OP-A", receiver="OP-B", amount=None, currency="USD", **kw) -> TransactionRecord:
    tx_id = hashlib.sha256(i.to_bytes(8, "little")).digest()[:16]
    kw.setdefault("status", TxStatus.CONSENSUS_APPROVED)
    kw.setdefault("verdict", Verdict.PASSED)
    return TransactionRecord(tx_id, 1_000 + i, sender, receiver, 100 + i if amount is None else amount,
                             currency, **kw)


def random_chain(blocks: int, seed: int, max_txs: int = 3) -> HashChain:
    rnd = random.Random(seed)
    chain = HashChain()
    n = 0
    for h in range(1, blocks + 1):
        txs = []
        for _ in range(rnd.randint(1, max_txs)):
            txs.append(make_tx(n, f"OP{rnd.randrange(5)}", f"R{rnd.randrange(5)}", rnd.randrange(1, 10**9)))
            n += 1
        append_block(chain, txs, 10_000 * h + rnd.randrange(1000))
    return chain


@pytest.fixture
def chain10():
    return random_chain(10, seed=7)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion, after the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        name, ok, detail = results[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {name}: {detail}")
