"""Simulation parameters, fault catalog, latency sampling and the oracle service."""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

from ..compliance import DEFAULT_MAX_AGE_MS, KycRecord, KycStatus, OracleView, SanctionsList
from ..errors import ConfigError, NoFeedData, UnknownFault
from ..rng import Xoshiro256
from ..settlement import ContractRuleSet
from .workload import WorkloadProfile

FOREVER_MS = 1 << 62


class Stage(enum.Enum):
    VALIDATION = "validation"
    CONSENSUS_VOTE = "consensus_vote"
    APPEND = "append"
    CONFIRMATION = "confirmation"
    NETWORK = "network"


@dataclass(frozen=True)
class LatencyConfig:
    """Inclusive [min, max] ranges in virtual ms."""

    validation: tuple[int, int] = (100, 200)
    consensus_vote: tuple[int, int] = (500, 1000)
    append: tuple[int, int] = (50, 100)
    confirmation: tuple[int, int] = (57_000, 178_700)
    # Hop delay for traffic outside the block pipeline (view changes).
    network: tuple[int, int] = (100, 250)

    def __post_init__(self):
        for stage in Stage:
            lo, hi = self.range(stage)
            if not 0 <= lo <= hi:
                raise ConfigError(f"latency range for {stage.value} must satisfy 0 <= min <= max",
                                  key=f"latency.{stage.value}")

    def range(self, stage: Stage) -> tuple[int, int]:
        return getattr(self, stage.value)

    @property
    def pipeline_bounds(self) -> tuple[int, int]:
        stages = (self.validation, self.consensus_vote, self.append)
        return sum(r[0] for r in stages), sum(r[1] for r in stages)


def sample_latency(stage: Stage, rng: Xoshiro256, config: LatencyConfig) -> int:
    lo, hi = config.range(stage)
    return rng.uniform_int(lo, hi)


# -- faults -------------------------------------------------------------------

class ByzantineKind(enum.Enum):
    EQUIVOCATE = "equivocate"
    SILENCE = "silence"
    VOTE_GARBAGE = "vote-garbage"


@dataclass(frozen=True)
class Crash:
    validator: int
    at_ms: int = 0


@dataclass(frozen=True)
class Byzantine:
    validator: int
    kind: ByzantineKind = ByzantineKind.EQUIVOCATE


@dataclass(frozen=True)
class Partition:
    validator: int
    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.end_ms < self.start_ms:
            raise ConfigError("partition window ends before it starts", key="faults")


@dataclass(frozen=True)
class TamperAttempt:
    """Flip bits in one node's stored chain. ``at_ms=None`` means at end of run."""

    validator: int
    height: int
    byte_offset: int
    mask: int = 0xFF
    at_ms: int | None = None


Fault = Union[Crash, Byzantine, Partition, TamperAttempt]
FAULT_TYPES = (Crash, Byzantine, Partition, TamperAttempt)


def check_fault(fault, n_validators: int) -> None:
    if not isinstance(fault, FAULT_TYPES):
        raise UnknownFault(f"unsupported fault {fault!r}")
    if not 0 <= fault.validator < n_validators:
        raise ConfigError(f"fault targets validator {fault.validator} of {n_validators}", key="faults")


# -- compliance data ----------------------------------------------------------

@dataclass(frozen=True)
class FxFeed:
    as_of_ms: int
    rates: Mapping[tuple[str, str], int]


DEFAULT_FX = (FxFeed(0, {
    ("EUR", "USD"): 1_085_000, ("USD", "EUR"): 921_659,
    ("SGD", "USD"): 742_000, ("USD", "SGD"): 1_347_709,
    ("EUR", "SGD"): 1_462_264, ("SGD", "EUR"): 683_871,
}),)


@dataclass(frozen=True)
class ComplianceConfig:
    sanctions: frozenset[str] = frozenset()
    # Operators absent here get a Verified record that never expires.
    kyc: Mapping[str, KycRecord] = field(default_factory=dict)
    fx_feeds: tuple[FxFeed, ...] = DEFAULT_FX
    max_age_ms: int = DEFAULT_MAX_AGE_MS
    # Oracle heartbeat: the latest feed is republished on this grid (0 = never).
    refresh_ms: int = 10_000

    def __post_init__(self):
        if not self.fx_feeds:
            raise ConfigError("at least one fx feed is required", key="compliance.fx_feeds")
        times = [f.as_of_ms for f in self.fx_feeds]
        if times != sorted(times):
            raise ConfigError("fx feeds must be sorted by as_of_ms", key="compliance.fx_feeds")
        if self.refresh_ms < 0 or self.max_age_ms < 0:
            raise ConfigError("refresh_ms and max_age_ms must be non-negative", key="compliance")

    def kyc_registry(self, operators: Sequence[str]) -> dict[str, KycRecord]:
        reg = {op: KycRecord(op, KycStatus.VERIFIED, FOREVER_MS) for op in operators}
        reg.update(self.kyc)
        return reg

    def bad_parties(self, operators: Sequence[str], horizon_ms: int) -> tuple[list[str], list[str]]:
        """Split operators into (clean, bad) over the whole run.

        Bad means sanctioned, or KYC not valid at some point before the horizon.
        """
        reg = self.kyc_registry(operators)
        clean, bad = [], []
        for op in operators:
            rec = reg[op]
            ok = op not in self.sanctions and rec.status is KycStatus.VERIFIED and rec.expiry_ms >= horizon_ms
            (clean if ok else bad).append(op)
        return clean, bad


class OracleService:
    """Deterministic oracle: feed contents are config, publication times are a
    pure function of virtual time, so every node sees the same view for a
    given timestamp no matter when it asks."""

    def __init__(self, cfg: ComplianceConfig, operators: Sequence[str]):
        self.cfg = cfg
        self.sanctions = SanctionsList(frozenset(cfg.sanctions), 1, 0)
        self.kyc = cfg.kyc_registry(operators)
        self._times = [f.as_of_ms for f in cfg.fx_feeds]
        self._cache: dict[int, OracleView] = {}

    def published_at(self, now_ms: int) -> int:
        """as_of of the most recent publication at or before ``now_ms`` (-1: none)."""
        idx = bisect.bisect_right(self._times, now_ms) - 1
        if idx < 0:
            return -1
        base = self._times[idx]
        r = self.cfg.refresh_ms
        return max(base, now_ms - now_ms % r) if r else base

    def view_at(self, now_ms: int) -> OracleView:
        as_of = self.published_at(now_ms)
        if as_of < 0:
            raise NoFeedData(f"no oracle feed at or before t={now_ms}")
        view = self._cache.get(as_of)
        if view is None:
            src = self.cfg.fx_feeds[bisect.bisect_right(self._times, as_of) - 1]
            view = OracleView(src.rates, self.sanctions, self.kyc, {}, as_of)
            self._cache[as_of] = view
        if now_ms - as_of > self.cfg.max_age_ms:
            return replace(view, stale=True)
        return view


# -- top level ----------------------------------------------------------------

def default_rules(operators: Sequence[str], currencies: Sequence[str] = ("USD", "EUR", "SGD")) -> ContractRuleSet:
    regions = ("US", "EU", "SG")
    return ContractRuleSet(
        fee_rate_bp=65,
        fee_splits=(("pool:network", 5000), ("pool:validators", 3000), ("pool:treasury", 2000)),
        withholding_bp={("EU", "US"): 150, ("SG", "US"): 100, ("US", "SG"): 100},
        jurisdictions={op: regions[i % len(regions)] for i, op in enumerate(operators)},
        allowed_currencies=frozenset(currencies),
    )


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_validators: int = 4
    faults: tuple = ()
    latency: LatencyConfig = LatencyConfig()
    workload: WorkloadProfile = WorkloadProfile()
    rules: ContractRuleSet | None = None
    compliance: ComplianceConfig = ComplianceConfig()
    max_block_txs: int = 500
    timeout_ms: int | None = None
    dispute_resolution_ms: tuple[int, int] = (7_200_000, 14_400_000)
    # Grace period after the workload ends before the run is cut off.
    drain_ms: int = 600_000
    # Observability switches; they never change the trace digest.
    keep_events: bool = True
    audit: bool = False

    def __post_init__(self):
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer", key="seed")
        if self.n_validators < 1:
            raise ConfigError("need at least one validator", key="validators")
        if self.max_block_txs < 1:
            raise ConfigError("max_block_txs must be positive", key="consensus.max_block_txs")
        if self.timeout_ms is not None and self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive", key="consensus.timeout_ms")
        for fault in self.faults:
            check_fault(fault, self.n_validators)

    @property
    def effective_rules(self) -> ContractRuleSet:
        return self.rules if self.rules is not None else default_rules(self.workload.operators, self.workload.currencies)

    @property
    def effective_timeout_ms(self) -> int:
        return self.timeout_ms if self.timeout_ms is not None else 2 * self.latency.consensus_vote[1]

    @property
    def horizon_ms(self) -> int:
        return self.workload.duration_ms + self.drain_ms
