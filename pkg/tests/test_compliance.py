import pytest
from hypothesis import given, strategies as st

from settlesim.compliance import (KycRecord, KycStatus, OracleFeed, OracleView, SanctionsList, check_parties,
                                  fx_convert, oracle_snapshot, screen)
from settlesim.errors import NoFeedData, StaleOracle, UnknownCurrencyPair
from settlesim.ledger import RejectReason, TransactionRecord


def kyc(*parties, expiry=10**12, status=KycStatus.VERIFIED):
    return {p: KycRecord(p, status, expiry) for p in parties}


def view(fx=None, sanctions=(), kyc_map=None, as_of=0, stale=False):
    return OracleView(fx or {}, SanctionsList(frozenset(sanctions)), kyc_map or kyc("A", "B"), {}, as_of, stale)


def tx(sender="A", receiver="B"):
    return TransactionRecord(b"\x00" * 16, 0, sender, receiver, 10, "USD")


def test_sanctioned_sender_rejected():
    assert screen(tx(), view(sanctions={"A"}), 0) is RejectReason.SANCTIONED
    assert screen(tx(), view(sanctions={"B"}), 0) is RejectReason.SANCTIONED


def test_clean_parties_pass():
    assert screen(tx(), view(), 0) is RejectReason.NONE


def test_kyc_expiry_boundary():
    v = view(kyc_map={**kyc("A"), **kyc("B", expiry=100)})
    assert screen(tx(), v, 100) is RejectReason.NONE
    assert screen(tx(), v, 101) is RejectReason.KYC_EXPIRED


def test_missing_or_revoked_kyc_fails():
    assert screen(tx("A", "Z"), view(), 0) is RejectReason.KYC_EXPIRED
    v = view(kyc_map={**kyc("A"), **kyc("B", status=KycStatus.REVOKED)})
    assert screen(tx(), v, 0) is RejectReason.KYC_EXPIRED


def test_sanctions_checked_before_kyc():
    assert check_parties("A", "Z", view(sanctions={"Z"}), 0) is RejectReason.SANCTIONED


def test_stale_view_raises():
    with pytest.raises(StaleOracle):
        screen(tx(), view(stale=True), 0)


@given(st.booleans(), st.integers(0, 200))
def test_screen_is_pure(sanctioned, now):
    v = view(sanctions={"A"} if sanctioned else (), kyc_map={**kyc("A"), **kyc("B", expiry=100)})
    first = screen(tx(), v, now)
    assert screen(tx(), v, now) is first
    assert v.sanctions.operators == (frozenset({"A"}) if sanctioned else frozenset())


@pytest.mark.parametrize("amount,rate,out", [(100, 1_000_000, 100), (100, 2_000_000, 200), (1_000, 1_234_567, 1_235)])
def test_fx_convert(amount, rate, out):
    assert fx_convert(amount, "EUR", "USD", view(fx={("EUR", "USD"): rate})) == out


def test_fx_same_currency_and_unknown_pair():
    assert fx_convert(77, "USD", "USD", view()) == 77
    with pytest.raises(UnknownCurrencyPair):
        fx_convert(1, "GBP", "USD", view())


@given(st.integers(0, 10**12), st.integers(500_000, 2_000_000))
def test_fx_round_trip_within_two_units(a, rate):
    back_rate = (10**12 + rate // 2) // rate
    v = view(fx={("X", "Y"): rate, ("Y", "X"): back_rate})
    # |error| <= 1 unit per conversion plus the back-rate rounding on large amounts
    there = fx_convert(a, "X", "Y", v)
    back = fx_convert(there, "Y", "X", v)
    bound = 2 + a * abs(rate * back_rate - 10**12) // 10**12
    assert abs(back - a) <= bound


@given(st.integers(0, 10**6), st.integers(500_000, 2_000_000))
def test_fx_round_trip_two_units_for_moderate_amounts(a, rate):
    back_rate = (10**12 + rate // 2) // rate
    v = view(fx={("X", "Y"): rate, ("Y", "X"): back_rate})
    assert abs(fx_convert(fx_convert(a, "X", "Y", v), "Y", "X", v) - a) <= 2


def test_fx_round_trip_exact_rates():
    v = view(fx={("X", "Y"): 2_000_000, ("Y", "X"): 500_000})
    for a in (1, 3, 999, 123_457):
        assert abs(fx_convert(fx_convert(a, "X", "Y", v), "Y", "X", v) - a) <= 2


def test_snapshot_freshness_and_ordering():
    feeds = [OracleFeed(0), OracleFeed(5), OracleFeed(9)]
    assert not oracle_snapshot(feeds[:1], 0).stale
    assert oracle_snapshot([OracleFeed(0)], 1_001, max_age_ms=1_000).stale
    assert not oracle_snapshot([OracleFeed(0)], 1_000, max_age_ms=1_000).stale
    assert oracle_snapshot(feeds, 7).as_of_ms == 5
    with pytest.raises(NoFeedData):
        oracle_snapshot(feeds, -1)
