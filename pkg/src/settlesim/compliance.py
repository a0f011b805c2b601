"""Oracle snapshots and compliance screening: sanctions, KYC expiry, FX."""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import NoFeedData, StaleOracle, UnknownCurrencyPair
from .ledger import RejectReason, TransactionRecord

RATE_SCALE = 1_000_000
DEFAULT_MAX_AGE_MS = 60_000


class KycStatus(enum.Enum):
    VERIFIED = "Verified"
    EXPIRED = "Expired"
    REVOKED = "Revoked"


@dataclass(frozen=True)
class KycRecord:
    operator: str
    status: KycStatus
    expiry_ms: int

    def valid_at(self, now_ms: int) -> bool:
        # Expiry is strict: a record is still good at exactly expiry_ms.
        return self.status is KycStatus.VERIFIED and now_ms <= self.expiry_ms


@dataclass(frozen=True)
class SanctionsList:
    operators: frozenset[str] = frozenset()
    version: int = 0
    as_of_ms: int = 0

    def __contains__(self, operator: str) -> bool:
        return operator in self.operators


@dataclass(frozen=True)
class OracleFeed:
    """One timestamped publication from the oracle service."""

    as_of_ms: int
    fx_rates: Mapping[tuple[str, str], int] = field(default_factory=dict)
    sanctions: SanctionsList = SanctionsList()
    kyc: Mapping[str, KycRecord] = field(default_factory=dict)
    billing: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class OracleView:
    fx_rates: Mapping[tuple[str, str], int]
    sanctions: SanctionsList
    kyc: Mapping[str, KycRecord]
    billing: Mapping[str, int]
    as_of_ms: int
    stale: bool = False

    def rate(self, src: str, dst: str) -> int:
        if src == dst:
            return RATE_SCALE
        try:
            return self.fx_rates[(src, dst)]
        except KeyError:
            raise UnknownCurrencyPair(f"no rate for {src}->{dst}") from None


def oracle_snapshot(feeds: Sequence[OracleFeed], now_ms: int, max_age_ms: int = DEFAULT_MAX_AGE_MS) -> OracleView:
    """Latest feed published at or before ``now_ms``; flagged stale when older
    than ``max_age_ms``. ``feeds`` must be sorted by ``as_of_ms``."""
    idx = bisect.bisect_right([f.as_of_ms for f in feeds], now_ms) - 1
    if idx < 0:
        raise NoFeedData(f"no oracle feed at or before t={now_ms}")
    feed = feeds[idx]
    return OracleView(
        fx_rates=feed.fx_rates,
        sanctions=feed.sanctions,
        kyc=feed.kyc,
        billing=feed.billing,
        as_of_ms=feed.as_of_ms,
        stale=now_ms - feed.as_of_ms > max_age_ms,
    )


def fx_convert(amount: int, src: str, dst: str, view: OracleView) -> int:
    """round-half-up(amount * rate / 1e6), exact integers."""
    rate = view.rate(src, dst)
    q, r = divmod(amount * rate, RATE_SCALE)
    return q + (2 * r >= RATE_SCALE)


def check_parties(sender: str, receiver: str, view: OracleView, now_ms: int) -> RejectReason:
    """Sanctions first, then KYC. Parties without a KYC record fail KYC."""
    sanctions = view.sanctions.operators
    if sender in sanctions or receiver in sanctions:
        return RejectReason.SANCTIONED
    kyc = view.kyc
    for party in (sender, receiver):
        rec = kyc.get(party)
        if rec is None or not rec.valid_at(now_ms):
            return RejectReason.KYC_EXPIRED
    return RejectReason.NONE


def screen(tx: TransactionRecord, view: OracleView, now_ms: int) -> RejectReason:
    """``RejectReason.NONE`` means Passed.

    Raises ``StaleOracle`` when the view is too old to decide; the caller
    should hold the transaction for a fresher snapshot.
    """
    if view.stale:
        raise StaleOracle(f"oracle view from t={view.as_of_ms} is stale at t={now_ms}")
    return check_parties(tx.sender, tx.receiver, view, now_ms)
