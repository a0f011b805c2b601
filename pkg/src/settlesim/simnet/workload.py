"""Transaction arrival stream: Poisson arrivals under a daily peak profile.

The intensity over a day is a raised cosine to a power ``k``, normalised so
that its daily mean is exactly ``tx_per_day / 86400`` per second and its peak
is exactly ``peak_multiplier`` times that mean. ``k`` has a closed-form mean
(a gamma-function ratio), so it is solved with a scalar root finder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

from scipy.optimize import brentq
from scipy.special import gammaln

from ..ledger import TransactionRecord
from ..rng import Xoshiro256

DAY_MS = 86_400_000


def _shape_mean(k: float) -> float:
    """Mean over one period of ((1 + cos t) / 2) ** k."""
    return math.exp(gammaln(k + 0.5) - gammaln(k + 1.0)) / math.sqrt(math.pi)


@lru_cache(maxsize=64)
def shape_exponent(peak_multiplier: float) -> float:
    if peak_multiplier < 1.0:
        raise ValueError("peak_multiplier must be >= 1")
    if peak_multiplier == 1.0:
        return 0.0
    return brentq(lambda k: 1.0 / _shape_mean(k) - peak_multiplier, 0.0, 1e6, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class WorkloadProfile:
    tx_per_day: int = 8_640_000
    peak_multiplier: Fraction = Fraction(7, 2)
    duration_ms: int = 10_000
    operators: tuple[str, ...] = tuple(f"OP{i:03d}" for i in range(8))
    amount_range: tuple[int, int] = (100, 1_000_000)
    currencies: tuple[str, ...] = ("USD", "EUR", "SGD")
    initial_balance: int = 10**10
    bad_party_fraction: float = 0.0
    # Position of the virtual epoch within the day; None starts on the rising
    # edge where the intensity equals the daily mean.
    day_offset_ms: int | None = None
    oracle_dispute_rate: float = 0.0

    def __post_init__(self):
        if self.tx_per_day < 0 or self.duration_ms < 0:
            raise ValueError("tx_per_day and duration_ms must be non-negative")
        if self.peak_multiplier < 1:
            raise ValueError("peak_multiplier must be >= 1")
        if len(set(self.operators)) < 2:
            raise ValueError("need at least two distinct operators")
        lo, hi = self.amount_range
        if not 0 <= lo <= hi:
            raise ValueError("amount_range must satisfy 0 <= min <= max")
        if not 0.0 <= self.bad_party_fraction <= 1.0:
            raise ValueError("bad_party_fraction must lie in [0, 1]")

    @property
    def mean_rate_per_s(self) -> float:
        return self.tx_per_day / 86_400

    @property
    def peak_rate_per_s(self) -> float:
        return self.mean_rate_per_s * float(self.peak_multiplier)

    def start_offset_ms(self) -> float:
        if self.day_offset_ms is not None:
            return float(self.day_offset_ms)
        k = shape_exponent(float(self.peak_multiplier))
        if k == 0.0:
            return 0.0
        # intensity(θ) = mean  <=>  ((1+cos θ)/2)^k = M(k); rising edge is θ in (-π, 0)
        c = 2.0 * _shape_mean(k) ** (1.0 / k) - 1.0
        theta = -math.acos(c)
        return (theta / (2 * math.pi) + 0.5) * DAY_MS


def rate_at(profile: WorkloadProfile, t_ms: float) -> float:
    """Arrival intensity (tx per second) at virtual time ``t_ms``."""
    mean = profile.mean_rate_per_s
    k = shape_exponent(float(profile.peak_multiplier))
    if k == 0.0:
        return mean
    day_pos = (t_ms + profile.start_offset_ms()) % DAY_MS
    theta = 2 * math.pi * day_pos / DAY_MS - math.pi  # peak at midday, trough at midnight
    return mean * ((1 + math.cos(theta)) / 2) ** k / _shape_mean(k)


@dataclass
class GeneratedTx:
    seq: int
    arrival_ms: float
    tx: TransactionRecord
    adversarial: bool = False


@dataclass
class PartyPools:
    clean: Sequence[str]
    bad: Sequence[str] = field(default_factory=tuple)


def generate_workload(profile: WorkloadProfile, rng: Xoshiro256, parties: PartyPools | None = None,
                      run_tag: bytes = b"\0" * 8) -> Iterator[GeneratedTx]:
    """Lazily yield transactions in arrival order over ``duration_ms``.

    Arrivals are a non-homogeneous Poisson process sampled by thinning against
    the peak rate. With ``bad_party_fraction`` > 0, that fraction of
    transactions draws one party from ``parties.bad``.
    """
    if profile.tx_per_day == 0 or profile.duration_ms == 0:
        return
    if parties is None:
        parties = PartyPools(profile.operators)
    clean = list(parties.clean)
    bad = list(parties.bad)
    if len(clean) < 2:
        raise ValueError("need at least two clean operators")
    k = shape_exponent(float(profile.peak_multiplier))
    peak_per_ms = profile.peak_rate_per_s / 1000.0
    mean_per_ms = profile.mean_rate_per_s / 1000.0
    offset = profile.start_offset_ms()
    norm = _shape_mean(k) if k else 1.0
    lo, hi = profile.amount_range
    currencies = profile.currencies
    p_bad = profile.bad_party_fraction if bad else 0.0
    two_pi_over_day = 2 * math.pi / DAY_MS
    t = 0.0
    seq = 0
    while True:
        t += -math.log1p(-rng.random()) / peak_per_ms
        if t >= profile.duration_ms:
            return
        if k:
            theta = two_pi_over_day * ((t + offset) % DAY_MS) - math.pi
            accept = mean_per_ms * ((1 + math.cos(theta)) / 2) ** k / norm / peak_per_ms
            if rng.random() >= accept:
                continue
        adversarial = p_bad > 0.0 and rng.random() < p_bad
        if adversarial:
            villain = bad[rng.uniform_int(0, len(bad) - 1)]
            other = clean[rng.uniform_int(0, len(clean) - 1)]
            sender, receiver = (villain, other) if rng.uniform_int(0, 1) == 0 else (other, villain)
        else:
            i = rng.uniform_int(0, len(clean) - 1)
            j = rng.uniform_int(0, len(clean) - 2)
            if j >= i:
                j += 1
            sender, receiver = clean[i], clean[j]
        amount = rng.uniform_int(lo, hi)
        currency = currencies[rng.uniform_int(0, len(currencies) - 1)] if len(currencies) > 1 else currencies[0]
        tx = TransactionRecord(run_tag + seq.to_bytes(8, "little"), int(t), sender, receiver, amount, currency)
        yield GeneratedTx(seq, t, tx, adversarial)
        seq += 1
