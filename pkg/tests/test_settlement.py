from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from settlesim.compliance import KycRecord, KycStatus, OracleView, SanctionsList
from settlesim.errors import (AlreadyResolved, InsufficientBalance, OutOfOrderTransition, StatusViolation,
                              UnknownTransaction, Violation)
from settlesim.ledger import RejectReason, TransactionRecord, TxStatus, Verdict, state_digest
from settlesim.settlement import (
    ContractRuleSet, DisputeLog, DisputeReason, LedgerState, LifecycleEvent, Resolution, advance_status,
    apply_settlement, compute_fee, compute_withholding, distribute_fee, execute_batch, open_dispute,
    resolve_dispute, validate_instruction,
)

SPLITS = (("pool:network", 5000), ("pool:validators", 3000), ("pool:treasury", 2000))
PARTIES = ("A", "B", "C", "D")


def view(now=0, **kw):
    kyc = {p: KycRecord(p, KycStatus.VERIFIED, 10**12) for p in PARTIES}
    return OracleView(kw.get("fx", {}), kw.get("sanctions", SanctionsList()), kw.get("kyc", kyc), {}, now)


def tx(n, sender="A", receiver="B", amount=50, currency="USD", status=TxStatus.INITIATED, **kw):
    return TransactionRecord(n.to_bytes(16, "little"), 0, sender, receiver, amount, currency, status=status, **kw)


# -- fees and withholding -----------------------------------------------------------

@pytest.mark.parametrize("amount,bp,fee", [
    (1_000_000, 65, 6_500),     # 0.65% of value
    (1_000_000, 500, 50_000),   # 5.0% of value
    (0, 65, 0),
    (150, 1, 0),                # 0.015 rounds down
    (77, 65, 1),                # 0.5005 rounds up
])
def test_compute_fee(amount, bp, fee):
    assert compute_fee(amount, bp) == fee


@given(st.integers(0, 10**15), st.integers(0, 10_000))
def test_compute_fee_is_half_up_of_exact_rational(amount, bp):
    exact = Fraction(amount * bp, 10_000)
    assert compute_fee(amount, bp) == int(exact + Fraction(1, 2))


def test_distribute_fee_examples():
    assert [u for _, u in distribute_fee(6_500, SPLITS)] == [3_250, 1_950, 1_300]
    assert [u for _, u in distribute_fee(101, (("a", 3333), ("b", 3333), ("c", 3334)))] == [34, 33, 34]
    assert [u for _, u in distribute_fee(0, SPLITS)] == [0, 0, 0]


@st.composite
def splits(draw):
    k = draw(st.integers(1, 6))
    cuts = sorted(draw(st.lists(st.integers(0, 10_000), min_size=k - 1, max_size=k - 1)))
    bounds = [0, *cuts, 10_000]
    return tuple((f"s{i}", bounds[i + 1] - bounds[i]) for i in range(k))


@given(st.integers(0, 10**12), splits())
def test_distribute_fee_sums_and_stays_within_one_unit(fee, sp):
    out = distribute_fee(fee, sp)
    assert sum(u for _, u in out) == fee
    for (_, w), (_, u) in zip(sp, out):
        assert abs(u - Fraction(fee * w, 10_000)) < 1


def test_withholding_examples():
    rules = ContractRuleSet(withholding_bp={("EU", "US"): 1000, ("SG", "US"): 150})
    assert compute_withholding(10_000, ("EU", "US"), rules) == 1_000
    assert compute_withholding(333, ("SG", "US"), rules) == 5
    assert compute_withholding(10**9, ("US", "EU"), rules) == 0


@given(st.integers(10_000, 10**15))
def test_fee_rate_reduction_is_87_percent(v):
    old, new = compute_fee(v, 500), compute_fee(v, 65)
    # each fee carries at most half a unit of rounding
    assert abs(Fraction(old - new, old) - Fraction(87, 100)) <= Fraction(1, old)


# -- validation and execution ---------------------------------------------------------

def test_validate_ok_with_projected_fee():
    rules = ContractRuleSet(fee_rate_bp=65)
    state = LedgerState({"A": 1_000_000})
    out = validate_instruction(tx(1, amount=500_000), state, rules)
    assert out.status is TxStatus.VALIDATED and out.fee == 3_250


def test_validate_violations_leave_state_alone():
    rules = ContractRuleSet(fee_rate_bp=65)
    state = LedgerState({"A": 100})
    before = state_digest(state)
    with pytest.raises(InsufficientBalance):
        validate_instruction(tx(1, amount=100), state, rules)
    with pytest.raises(Violation) as e:
        validate_instruction(tx(2, amount=0), state, rules)
    assert e.value.reason is RejectReason.AMOUNT_OUT_OF_BOUNDS
    with pytest.raises(Violation) as e:
        validate_instruction(tx(3, currency="JPY"), state, rules)
    assert e.value.reason is RejectReason.CURRENCY_NOT_ALLOWED
    with pytest.raises(StatusViolation):
        validate_instruction(tx(4, status=TxStatus.VALIDATED), state, rules)
    assert state_digest(state) == before


def test_apply_plain_transfer():
    rules = ContractRuleSet(fee_rate_bp=0)
    t = tx(1, status=TxStatus.VALIDATED, verdict=Verdict.PASSED)
    new, out = apply_settlement(LedgerState({"A": 100, "B": 0}), t, rules)
    assert new.balances == {"A": 50, "B": 50} and out.status is TxStatus.EXECUTED


def test_apply_with_fee_to_pool_conserves():
    rules = ContractRuleSet(fee_rate_bp=1000)  # 10% of 50 = 5
    t = tx(1, status=TxStatus.VALIDATED, verdict=Verdict.PASSED)
    new, _ = apply_settlement(LedgerState({"A": 100, "B": 0}), t, rules)
    assert new.balances == {"A": 45, "B": 50} and new.fee_pools == {"pool:network": 5}
    assert new.total() == 100


def test_apply_failure_is_atomic():
    rules = ContractRuleSet(fee_rate_bp=65)
    state = LedgerState({"A": 10})
    before = state_digest(state)
    with pytest.raises(InsufficientBalance):
        apply_settlement(state, tx(1, status=TxStatus.VALIDATED, verdict=Verdict.PASSED), rules)
    assert state_digest(state) == before


def test_batch_rejects_second_tx_after_sender_is_drained():
    rules = ContractRuleSet(fee_rate_bp=0)
    state = LedgerState({"A": 100, "B": 0, "C": 0})
    new, out = execute_batch(state, [tx(1, "A", "B", 80), tx(2, "A", "C", 80)], rules, view(), 0)
    assert out[0].verdict is Verdict.PASSED
    assert out[1].reason is RejectReason.INSUFFICIENT_BALANCE and out[1].status is TxStatus.INITIATED
    assert new.balances == {"A": 20, "B": 80, "C": 0}
    assert state.balances["A"] == 100  # input untouched


def test_batch_screens_before_fees():
    rules = ContractRuleSet(fee_rate_bp=65)
    v = view(sanctions=SanctionsList(frozenset({"C"})))
    new, out = execute_batch(LedgerState({"A": 10**6, "C": 10**6}), [tx(1, "C", "B", 10)], rules, v, 0)
    assert out[0].reason is RejectReason.SANCTIONED and out[0].fee == 0
    assert new.balances == {"A": 10**6, "C": 10**6}


tx_strategy = st.builds(
    lambda i, s, r, a, c: (i, PARTIES[s], PARTIES[(s + 1 + r) % 4], a, c),
    st.integers(0, 10**6), st.integers(0, 3), st.integers(0, 2), st.integers(0, 5 * 10**6),
    st.sampled_from(["USD", "USD", "EUR", "JPY"]),
)


@settings(max_examples=200)
@given(st.lists(tx_strategy, max_size=40), st.integers(0, 1000), st.lists(st.integers(0, 10**7), min_size=4, max_size=4))
def test_batch_conserves_value_exactly(txs, fee_bp, balances):
    rules = ContractRuleSet(fee_rate_bp=fee_bp, fee_splits=SPLITS + (("D", 0),),
                            withholding_bp={("X", "Y"): 150}, jurisdictions={"A": "X", "B": "Y"},
                            allowed_currencies=frozenset({"USD", "EUR"}))
    v = view(fx={("EUR", "USD"): 1_085_000})
    state = LedgerState(dict(zip(PARTIES, balances)))
    batch = [tx(i, s, r, a, c) for i, s, r, a, c in txs]
    new, out = execute_batch(state, batch, rules, v, 0)
    assert new.total() == state.total()
    assert len(out) == len(batch)
    assert all(b >= 0 for b in new.balances.values())
    for o in out:
        if o.verdict is Verdict.REJECTED:
            assert o.fee == o.withholding == 0


def test_stale_view_refused():
    from settlesim.errors import StaleOracle
    v = OracleView({}, SanctionsList(), {}, {}, 0, stale=True)
    with pytest.raises(StaleOracle):
        execute_batch(LedgerState(), [tx(1)], ContractRuleSet(), v, 0)


# -- lifecycle -------------------------------------------------------------------------

def test_lifecycle_order():
    t = tx(1)
    assert advance_status(t, LifecycleEvent.VALIDATE).status is TxStatus.VALIDATED
    with pytest.raises(OutOfOrderTransition):
        advance_status(t, LifecycleEvent.APPEND)


def test_full_lifecycle_records_monotone_stamps():
    t, stamps = tx(1), {}
    for when, ev in zip((5, 5, 9, 40, 100), LifecycleEvent):
        t = advance_status(t, ev, when, stamps)
    assert t.status is TxStatus.FINAL
    times = [stamps[s] for s in TxStatus]
    assert len(times) == 6 and times == sorted(times)
    with pytest.raises(OutOfOrderTransition):
        advance_status(tx(2), LifecycleEvent.VALIDATE, -1, {TxStatus.INITIATED: 0})


# -- disputes ---------------------------------------------------------------------------

def test_dispute_open_resolve():
    known = {b"\x01" * 16}
    d = open_dispute(b"\x01" * 16, "OP1", DisputeReason.FEE_DISAGREEMENT, 100, known)
    r = resolve_dispute(d, Resolution.UPHELD, 250)
    assert r.resolved_at >= r.opened_at
    with pytest.raises(AlreadyResolved):
        resolve_dispute(r, Resolution.DISMISSED, 300)
    with pytest.raises(UnknownTransaction):
        open_dispute(b"\x02" * 16, "OP1", DisputeReason.ORACLE_DATA, 0, known)


def test_dispute_log_is_hash_chained():
    log = DisputeLog({b"\x01" * 16})
    d = log.open(b"\x01" * 16, "OP1", DisputeReason.LEDGER_DISCREPANCY, 0)
    log.resolve(d.dispute_id, Resolution.CORRECTED, 10)
    assert log.verify() and log.count(DisputeReason.LEDGER_DISCREPANCY) == 1
    link, snap = log.entries[0]
    log.entries[0] = (link, resolve_dispute(snap, Resolution.DISMISSED, 5))
    assert not log.verify()
