"""Contract rules: validation, fees, withholding, transfers, lifecycle, disputes.

All money is integer minor units. Fees and withholding are charged on top of
the transferred amount, so the sender pays ``amount + fee + withholding``.
"""
from __future__ import annotations

import enum
import hashlib
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Container, Mapping, Sequence

from .compliance import OracleView, check_parties, fx_convert
from .errors import (
    AlreadyResolved,
    ConfigError,
    InsufficientBalance,
    OutOfOrderTransition,
    StaleOracle,
    StatusViolation,
    UnknownCurrencyPair,
    UnknownTransaction,
    Violation,
)
from .ledger import RejectReason, TransactionRecord, TxStatus, Verdict

BP_SCALE = 10_000
POOL_PREFIX = "pool:"


def _round_half_up(num: int, den: int) -> int:
    q, r = divmod(num, den)
    return q + (2 * r >= den)


@dataclass(frozen=True)
class ContractRuleSet:
    fee_rate_bp: int = 65
    fee_splits: tuple[tuple[str, int], ...] = (("pool:network", 10_000),)
    withholding_bp: Mapping[tuple[str, str], int] = field(default_factory=dict)
    jurisdictions: Mapping[str, str] = field(default_factory=dict)
    min_amount: int = 1
    max_amount: int = 10**15
    allowed_currencies: frozenset[str] = frozenset({"USD"})
    settlement_currency: str = "USD"

    def __post_init__(self):
        if sum(w for _, w in self.fee_splits) != BP_SCALE:
            raise ConfigError("fee split weights must sum to 10000", key="rules.fee_splits")
        if any(w < 0 for _, w in self.fee_splits):
            raise ConfigError("fee split weights must be non-negative", key="rules.fee_splits")
        if self.fee_rate_bp < 0 or any(bp < 0 for bp in self.withholding_bp.values()):
            raise ConfigError("rates must be non-negative", key="rules")
        if self.min_amount > self.max_amount:
            raise ConfigError("min_amount exceeds max_amount", key="rules.min_amount")

    def withholding_rate(self, sender: str, receiver: str) -> int:
        pair = (self.jurisdictions.get(sender, ""), self.jurisdictions.get(receiver, ""))
        return self.withholding_bp.get(pair, 0)


@dataclass(frozen=True)
class FeeBreakdown:
    total_fee: int
    allocations: tuple[tuple[str, int], ...]
    withholding: int

    def __post_init__(self):
        assert sum(a for _, a in self.allocations) == self.total_fee


@dataclass
class LedgerState:
    balances: dict[str, int] = field(default_factory=dict)
    fee_pools: dict[str, int] = field(default_factory=dict)
    withholding_pool: int = 0

    def copy(self) -> "LedgerState":
        return LedgerState(dict(self.balances), dict(self.fee_pools), self.withholding_pool)

    def total(self) -> int:
        return sum(self.balances.values()) + sum(self.fee_pools.values()) + self.withholding_pool

    def credit(self, beneficiary: str, units: int) -> None:
        if beneficiary.startswith(POOL_PREFIX):
            self.fee_pools[beneficiary] = self.fee_pools.get(beneficiary, 0) + units
        else:
            self.balances[beneficiary] = self.balances.get(beneficiary, 0) + units


def compute_fee(amount: int, fee_rate_bp: int) -> int:
    if amount < 0:
        raise ValueError("amount must be non-negative")
    return _round_half_up(amount * fee_rate_bp, BP_SCALE)


def distribute_fee(total_fee: int, fee_splits: Sequence[tuple[str, int]]) -> list[tuple[str, int]]:
    """Largest-remainder apportionment of ``total_fee`` over weights summing
    to 10000. Ties go to the earlier split."""
    floors = []
    remainders = []
    for i, (_, w) in enumerate(fee_splits):
        q, r = divmod(total_fee * w, BP_SCALE)
        floors.append(q)
        remainders.append((-r, i))
    leftover = total_fee - sum(floors)
    for _, i in sorted(remainders)[:leftover]:
        floors[i] += 1
    return [(name, units) for (name, _), units in zip(fee_splits, floors)]


@lru_cache(maxsize=65_536)
def _split_cached(total_fee: int, fee_splits: tuple[tuple[str, int], ...]) -> tuple[tuple[str, int], ...]:
    return tuple((who, units) for who, units in distribute_fee(total_fee, fee_splits) if units)


def compute_withholding(amount: int, pair: tuple[str, str], rules: ContractRuleSet) -> int:
    if amount < 0:
        raise ValueError("amount must be non-negative")
    return _round_half_up(amount * rules.withholding_bp.get(pair, 0), BP_SCALE)


def settled_amount(tx: TransactionRecord, rules: ContractRuleSet, view: OracleView | None) -> int:
    """``tx.amount`` expressed in the settlement currency."""
    if tx.currency == rules.settlement_currency:
        return tx.amount
    if view is None:
        raise UnknownCurrencyPair(f"no oracle view to convert {tx.currency}")
    return fx_convert(tx.amount, tx.currency, rules.settlement_currency, view)


def fee_breakdown(tx: TransactionRecord, rules: ContractRuleSet, view: OracleView | None = None) -> FeeBreakdown:
    base = settled_amount(tx, rules, view)
    fee = compute_fee(base, rules.fee_rate_bp)
    pair = (rules.jurisdictions.get(tx.sender, ""), rules.jurisdictions.get(tx.receiver, ""))
    wh = compute_withholding(base, pair, rules)
    return FeeBreakdown(fee, tuple(distribute_fee(fee, rules.fee_splits)), wh)


def validate_instruction(tx: TransactionRecord, state: LedgerState, rules: ContractRuleSet,
                         view: OracleView | None = None) -> TransactionRecord:
    """Check authorization bounds, currency, then balance. Returns the
    Validated record or raises ``Violation`` (state is never touched)."""
    if tx.status is not TxStatus.INITIATED:
        raise StatusViolation(f"expected Initiated, got {tx.status.name}")
    if not rules.min_amount <= tx.amount <= rules.max_amount:
        raise Violation(RejectReason.AMOUNT_OUT_OF_BOUNDS)
    if tx.currency not in rules.allowed_currencies:
        raise Violation(RejectReason.CURRENCY_NOT_ALLOWED)
    try:
        fb = fee_breakdown(tx, rules, view)
    except UnknownCurrencyPair:
        raise Violation(RejectReason.UNKNOWN_CURRENCY_PAIR) from None
    base = settled_amount(tx, rules, view)
    if state.balances.get(tx.sender, 0) < base + fb.total_fee + fb.withholding:
        raise InsufficientBalance(f"{tx.sender} cannot cover {base + fb.total_fee + fb.withholding}")
    return replace(tx, status=TxStatus.VALIDATED, fee=fb.total_fee, withholding=fb.withholding)


def _apply_in_place(state: LedgerState, tx: TransactionRecord, base: int, fb: FeeBreakdown) -> None:
    debit = base + fb.total_fee + fb.withholding
    balances = state.balances
    if balances.get(tx.sender, 0) < debit:
        raise InsufficientBalance(f"{tx.sender} cannot cover {debit}")
    # every check is done; the mutations below cannot fail
    balances[tx.sender] -= debit
    balances[tx.receiver] = balances.get(tx.receiver, 0) + base
    for who, units in fb.allocations:
        if units:
            state.credit(who, units)
    state.withholding_pool += fb.withholding


def apply_settlement(state: LedgerState, tx: TransactionRecord, rules: ContractRuleSet,
                     view: OracleView | None = None) -> tuple[LedgerState, TransactionRecord]:
    """Execute a validated, compliance-passed transfer atomically.

    Returns the new state and the Executed record. On ``InsufficientBalance``
    the input state is untouched.
    """
    if tx.status is not TxStatus.VALIDATED or tx.verdict is not Verdict.PASSED:
        raise StatusViolation("apply_settlement needs a Validated, compliance-passed transaction")
    fb = fee_breakdown(tx, rules, view)
    new_state = state.copy()
    _apply_in_place(new_state, tx, settled_amount(tx, rules, view), fb)
    return new_state, replace(tx, status=TxStatus.EXECUTED, fee=fb.total_fee, withholding=fb.withholding)


def rejected(tx: TransactionRecord, reason: RejectReason) -> TransactionRecord:
    return TransactionRecord(tx.tx_id, tx.timestamp_ms, tx.sender, tx.receiver, tx.amount, tx.currency,
                             0, 0, tx.status, Verdict.REJECTED, reason)


def execute_batch(state: LedgerState, txs: Sequence[TransactionRecord], rules: ContractRuleSet,
                  view: OracleView, now_ms: int,
                  out_status: TxStatus = TxStatus.EXECUTED) -> tuple[LedgerState, list[TransactionRecord]]:
    """Screen, validate and apply ``txs`` in order against a copy of ``state``.

    Each transaction is all-or-nothing. Non-compliant or invalid ones become
    rejection records (no value moves, status stays Initiated). Accepted ones
    come back with ``out_status``; a block builder can ask for the stored
    status directly instead of stepping through each stage.
    """
    if view.stale:
        raise StaleOracle(f"oracle view from t={view.as_of_ms} is stale at t={now_ms}")
    work = state.copy()
    out = []
    base_ccy = rules.settlement_currency
    allowed = rules.allowed_currencies
    lo, hi = rules.min_amount, rules.max_amount
    fee_bp = rules.fee_rate_bp
    splits = rules.fee_splits
    jur = rules.jurisdictions
    wh_map = rules.withholding_bp
    balances = work.balances
    # Pool credits are summed per batch and booked at the end; the batch works
    # on a private copy, so nothing observes the interim. Operator
    # beneficiaries are credited at once since a later tx may spend it.
    credits: dict[str, int] = {}
    withheld = 0
    for tx in txs:
        reason = check_parties(tx.sender, tx.receiver, view, now_ms)
        if reason is RejectReason.NONE:
            if not lo <= tx.amount <= hi:
                reason = RejectReason.AMOUNT_OUT_OF_BOUNDS
            elif tx.currency not in allowed:
                reason = RejectReason.CURRENCY_NOT_ALLOWED
        if reason is RejectReason.NONE:
            if tx.currency == base_ccy:
                base = tx.amount
            else:
                try:
                    base = fx_convert(tx.amount, tx.currency, base_ccy, view)
                except UnknownCurrencyPair:
                    base = None
                    reason = RejectReason.UNKNOWN_CURRENCY_PAIR
        if reason is not RejectReason.NONE:
            out.append(rejected(tx, reason))
            continue
        fee = _round_half_up(base * fee_bp, BP_SCALE)
        wh_bp = wh_map.get((jur.get(tx.sender, ""), jur.get(tx.receiver, "")), 0) if wh_map else 0
        wh = _round_half_up(base * wh_bp, BP_SCALE) if wh_bp else 0
        debit = base + fee + wh
        if balances.get(tx.sender, 0) < debit:
            out.append(rejected(tx, RejectReason.INSUFFICIENT_BALANCE))
            continue
        balances[tx.sender] -= debit
        balances[tx.receiver] = balances.get(tx.receiver, 0) + base
        if fee:
            for who, units in _split_cached(fee, splits):
                if who.startswith(POOL_PREFIX):
                    credits[who] = credits.get(who, 0) + units
                else:
                    balances[who] = balances.get(who, 0) + units
        withheld += wh
        out.append(TransactionRecord(tx.tx_id, tx.timestamp_ms, tx.sender, tx.receiver, tx.amount,
                                     tx.currency, fee, wh, out_status, Verdict.PASSED, RejectReason.NONE))
    for who, units in credits.items():
        work.credit(who, units)
    work.withholding_pool += withheld
    return work, out


# -- lifecycle --------------------------------------------------------------

class LifecycleEvent(enum.Enum):
    VALIDATE = TxStatus.VALIDATED
    EXECUTE = TxStatus.EXECUTED
    APPROVE = TxStatus.CONSENSUS_APPROVED
    APPEND = TxStatus.APPENDED
    FINALIZE = TxStatus.FINAL


def advance_status(tx: TransactionRecord, event: LifecycleEvent, at_ms: int | None = None,
                   stamps: dict | None = None) -> TransactionRecord:
    """Move ``tx`` exactly one stage forward. When ``stamps`` is given the
    stage time is recorded there (keyed by ``TxStatus``)."""
    target = event.value
    if target != tx.status + 1:
        raise OutOfOrderTransition(f"{tx.status.name} cannot take {event.name}")
    if stamps is not None:
        stamps.setdefault(TxStatus.INITIATED, tx.timestamp_ms)
        when = at_ms if at_ms is not None else stamps[TxStatus(tx.status)]
        if when < stamps[TxStatus(tx.status)]:
            raise OutOfOrderTransition("stage timestamps must be nondecreasing")
        stamps[target] = when
    return tx.with_status(target)


# -- disputes ---------------------------------------------------------------

class DisputeReason(enum.Enum):
    LEDGER_DISCREPANCY = "LedgerDiscrepancy"
    FEE_DISAGREEMENT = "FeeDisagreement"
    ORACLE_DATA = "OracleData"


class Resolution(enum.Enum):
    OPEN = "Open"
    UPHELD = "Upheld"
    CORRECTED = "Corrected"
    DISMISSED = "Dismissed"


@dataclass(frozen=True)
class Dispute:
    dispute_id: bytes
    tx_id: bytes
    raised_by: str
    reason: DisputeReason
    opened_at: int
    resolved_at: int | None = None
    resolution: Resolution = Resolution.OPEN

    def __post_init__(self):
        if self.resolved_at is not None and self.resolved_at < self.opened_at:
            raise ValueError("resolved_at precedes opened_at")

    def canonical_bytes(self) -> bytes:
        def s(text: str) -> bytes:
            raw = text.encode()
            return len(raw).to_bytes(2, "little") + raw

        return b"".join((
            self.dispute_id, self.tx_id, s(self.raised_by), s(self.reason.value),
            self.opened_at.to_bytes(8, "little"),
            (self.resolved_at if self.resolved_at is not None else 2**64 - 1).to_bytes(8, "little"),
            s(self.resolution.value),
        ))


def open_dispute(tx_id: bytes, raised_by: str, reason: DisputeReason, now_ms: int,
                 known_txs: Container[bytes]) -> Dispute:
    if tx_id not in known_txs:
        raise UnknownTransaction(tx_id.hex())
    did = hashlib.sha256(tx_id + raised_by.encode() + reason.value.encode() + now_ms.to_bytes(8, "little")).digest()[:16]
    return Dispute(did, tx_id, raised_by, reason, now_ms)


def resolve_dispute(dispute: Dispute, resolution: Resolution, now_ms: int) -> Dispute:
    if dispute.resolution is not Resolution.OPEN:
        raise AlreadyResolved(dispute.dispute_id.hex())
    if resolution is Resolution.OPEN:
        raise ValueError("a resolution must close the dispute")
    return replace(dispute, resolved_at=now_ms, resolution=resolution)


class DisputeLog:
    """Hash-chained audit trail of dispute openings and resolutions."""

    def __init__(self, known_txs: Container[bytes]):
        self.known_txs = known_txs
        self.entries: list[tuple[bytes, Dispute]] = []  # (chain hash, snapshot)
        self.disputes: dict[bytes, Dispute] = {}

    @property
    def head(self) -> bytes:
        return self.entries[-1][0] if self.entries else bytes(32)

    def _record(self, dispute: Dispute) -> None:
        link = hashlib.sha256(self.head + dispute.canonical_bytes()).digest()
        self.entries.append((link, dispute))
        self.disputes[dispute.dispute_id] = dispute

    def open(self, tx_id: bytes, raised_by: str, reason: DisputeReason, now_ms: int) -> Dispute:
        d = open_dispute(tx_id, raised_by, reason, now_ms, self.known_txs)
        self._record(d)
        return d

    def resolve(self, dispute_id: bytes, resolution: Resolution, now_ms: int) -> Dispute:
        d = resolve_dispute(self.disputes[dispute_id], resolution, now_ms)
        self._record(d)
        return d

    def verify(self) -> bool:
        head = bytes(32)
        for link, d in self.entries:
            head = hashlib.sha256(head + d.canonical_bytes()).digest()
            if head != link:
                return False
        return True

    def count(self, reason: DisputeReason) -> int:
        return sum(1 for d in self.disputes.values() if d.reason is reason)
