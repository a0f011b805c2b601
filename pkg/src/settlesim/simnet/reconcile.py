"""Cross-node ledger comparison, and bilateral book matching for the baseline."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..ledger import HashChain, state_digest, verify_chain


@dataclass
class NodeLedger:
    name: str
    chain: HashChain
    state: object


@dataclass
class ReconciliationReport:
    nodes: list[str]
    # node name -> lowest height where it departs from the majority
    mismatches: dict[str, int] = field(default_factory=dict)
    behind: dict[str, int] = field(default_factory=dict)
    state_digests: dict[str, str] = field(default_factory=dict)
    tips: dict[str, int] = field(default_factory=dict)

    @property
    def mismatch_count(self) -> int:
        return len(self.mismatches)

    def to_json(self) -> dict:
        return {
            "nodes": self.nodes,
            "mismatches": self.mismatches,
            "behind": self.behind,
            "tips": self.tips,
            "state_digests": self.state_digests,
        }


def _majority(values: Sequence[bytes]) -> bytes | None:
    (top, count), = Counter(values).most_common(1)
    return top if 2 * count > len(values) else None


def reconcile(ledgers: Sequence[NodeLedger]) -> ReconciliationReport:
    """Compare nodes block by block against the majority record at each height.

    A node that disagrees at some height, or whose own chain fails
    verification, is flagged with the lowest such height. A node that simply
    has fewer blocks is listed as ``behind`` rather than mismatching. When
    there is no strict majority at a height, every node there is flagged.
    """
    if len(ledgers) < 2:
        raise ValueError("reconcile needs at least two ledgers")
    report = ReconciliationReport([l.name for l in ledgers])
    digests = {}
    for l in ledgers:
        digests[l.name] = [hashlib.sha256(r).digest() for r in l.chain.records()]
        report.tips[l.name] = l.chain.tip_height
        report.state_digests[l.name] = state_digest(l.state).hex()
        verdict = verify_chain(l.chain)
        if not verdict.valid:
            report.mismatches[l.name] = verdict.first_broken_height
    top = max(report.tips.values())
    for h in range(top + 1):
        present = [l.name for l in ledgers if h < len(digests[l.name])]
        ref = _majority([digests[name][h] for name in present])
        for name in present:
            if digests[name][h] != ref:
                report.mismatches[name] = min(report.mismatches.get(name, h), h)
    for l in ledgers:
        if report.tips[l.name] < top and l.name not in report.mismatches:
            report.behind[l.name] = report.tips[l.name]
    # Same tip, same blocks, different balances: flag at the tip.
    by_tip: dict[int, list[str]] = {}
    for name, tip in report.tips.items():
        by_tip.setdefault(tip, []).append(name)
    for tip, names in by_tip.items():
        if len(names) < 2:
            continue
        ref = _majority([report.state_digests[n] for n in names])
        for n in names:
            if report.state_digests[n] != ref and n not in report.mismatches:
                report.mismatches[n] = tip
    return report


# -- baseline dual-ledger mode --------------------------------------------------

BookEntry = tuple[str, int]  # (counterparty, signed amount from the book owner's view)


def bilateral_books(txs) -> dict[str, dict[bytes, BookEntry]]:
    """Each operator's own record of every transfer it took part in."""
    books: dict[str, dict[bytes, BookEntry]] = {}
    for tx in txs:
        books.setdefault(tx.sender, {})[tx.tx_id] = (tx.receiver, -tx.amount)
        books.setdefault(tx.receiver, {})[tx.tx_id] = (tx.sender, tx.amount)
    return books


def reconcile_bilateral(books: Mapping[str, Mapping[bytes, BookEntry]]) -> tuple[int, list[bytes]]:
    """Count transactions whose two sides disagree or where one side is missing.

    Each transaction id counts at most once.
    """
    bad: set[bytes] = set()
    for owner, book in books.items():
        for tx_id, (other, amt) in book.items():
            mirror = books.get(other, {}).get(tx_id)
            if mirror != (owner, -amt):
                bad.add(tx_id)
    return len(bad), sorted(bad)
