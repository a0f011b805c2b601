"""Traditional-settlement baseline, cost model, ROI and the comparison report.

Everything here is exact rational arithmetic (``fractions.Fraction``); values
are only rounded when formatted.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import ConfigError, MissingInput, NonPositiveBaseline, ZeroSavings
from .rng import Xoshiro256

DAY_MS = 86_400_000
F = Fraction


# -- baseline timeline --------------------------------------------------------

@dataclass(frozen=True)
class BaselineStage:
    name: str
    first_day: Fraction
    last_day: Fraction


DEFAULT_STAGES = (
    BaselineStage("Initiation", F(0), F(0)),
    BaselineStage("BatchTransmission", F(1), F(2)),
    BaselineStage("RecipientProcessing", F(2), F(3)),
    BaselineStage("Clearinghouse", F(3), F(5)),
    BaselineStage("CorrespondentBanking", F(5), F(20)),
    BaselineStage("RegulatoryVerification", F(20), F(40)),
    BaselineStage("FinalSettlement", F(40), F(120)),
)


@dataclass(frozen=True)
class BaselineStagePlan:
    stages: tuple[BaselineStage, ...] = DEFAULT_STAGES

    def __post_init__(self):
        if not self.stages:
            raise ConfigError("baseline plan needs at least one stage", key="baseline_plan")
        prev = None
        for st in self.stages:
            if not 0 <= st.first_day <= st.last_day:
                raise ConfigError(f"stage {st.name}: need 0 <= first_day <= last_day", key="baseline_plan")
            if prev is not None and (st.first_day < prev.first_day or st.last_day < prev.last_day):
                raise ConfigError(f"stage {st.name} starts before {prev.name}", key="baseline_plan")
            prev = st

    @property
    def final_range(self) -> tuple[Fraction, Fraction]:
        last = self.stages[-1]
        return last.first_day, last.last_day


def simulate_traditional_stages(rng: Xoshiro256, plan: BaselineStagePlan = BaselineStagePlan()) -> list[tuple[str, Fraction]]:
    """End day of every stage, drawn uniformly on a millisecond grid.

    Each draw is bounded below by the previous stage's end, so the timeline
    is monotone; with nondecreasing stage ranges this never empties a range.
    """
    out = []
    end_ms = 0
    for st in plan.stages:
        lo = max(int(st.first_day * DAY_MS), end_ms)
        hi = int(st.last_day * DAY_MS)
        end_ms = rng.uniform_int(lo, hi)
        out.append((st.name, F(end_ms, DAY_MS)))
    return out


def simulate_traditional_timeline(rng: Xoshiro256, plan: BaselineStagePlan = BaselineStagePlan()) -> Fraction:
    """Final-settlement day for one sampled transaction."""
    return simulate_traditional_stages(rng, plan)[-1][1]


# -- cost model ---------------------------------------------------------------

COMPONENTS = ("intermediary", "labor", "technology", "error")


def _mid(r: tuple[Fraction, Fraction]) -> Fraction:
    return (r[0] + r[1]) / 2


@dataclass(frozen=True)
class CostModel:
    """Rates are fractions of transaction value."""

    intermediary: tuple[Fraction, Fraction] = (F(3, 100), F(5, 100))
    labor: tuple[Fraction, Fraction] = (F(2, 100), F(3, 100))
    technology: tuple[Fraction, Fraction] = (F(5, 1000), F(1, 100))
    error: tuple[Fraction, Fraction] = (F(5, 1000), F(2, 100))
    intermediary_factor: Fraction = F(13, 100)
    labor_factor: Fraction = F(30, 100)
    error_factor: Fraction = F(12, 100)
    infrastructure_addon: tuple[Fraction, Fraction] = (F(5, 10_000), F(2, 1000))
    headline_traditional: Fraction = F(5, 100)
    headline_blockchain: Fraction = F(65, 10_000)
    # Explicit blockchain component rates that replace the derived ones.
    overrides: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        rates = [*self.intermediary, *self.labor, *self.technology, *self.error, *self.infrastructure_addon,
                 self.intermediary_factor, self.labor_factor, self.error_factor,
                 self.headline_traditional, self.headline_blockchain, *self.overrides.values()]
        if any(r < 0 for r in rates):
            raise ConfigError("cost model rates must be non-negative", key="cost_model")
        for lo, hi in (self.intermediary, self.labor, self.technology, self.error, self.infrastructure_addon):
            if lo > hi:
                raise ConfigError("cost model range has min > max", key="cost_model")
        unknown = set(self.overrides) - set(COMPONENTS)
        if unknown:
            raise ConfigError(f"unknown cost component {sorted(unknown)[0]!r}", key="cost_model.overrides")

    def traditional_rates(self) -> dict[str, Fraction]:
        return {c: _mid(getattr(self, c)) for c in COMPONENTS}

    def blockchain_rates(self) -> dict[str, Fraction]:
        t = self.traditional_rates()
        rates = {
            "intermediary": t["intermediary"] * self.intermediary_factor,
            "labor": t["labor"] * self.labor_factor,
            # Existing technology spend stays; the permissioned network adds to it.
            "technology": t["technology"] + _mid(self.infrastructure_addon),
            "error": t["error"] * self.error_factor,
        }
        rates.update(self.overrides)
        return rates


@dataclass(frozen=True)
class CostBreakdown:
    mode: str
    value: Fraction
    components: dict[str, Fraction]
    component_total: Fraction
    headline_total: Fraction


def cost_breakdown(value, model: CostModel = CostModel(), mode: str = "Traditional") -> CostBreakdown:
    value = F(value)
    if value < 0:
        raise ValueError("value must be non-negative")
    if mode == "Traditional":
        rates, headline = model.traditional_rates(), model.headline_traditional
    elif mode == "Blockchain":
        rates, headline = model.blockchain_rates(), model.headline_blockchain
    else:
        raise ValueError(f"mode must be Traditional or Blockchain, not {mode!r}")
    comps = {c: value * r for c, r in rates.items()}
    return CostBreakdown(mode, value, comps, sum(comps.values(), F(0)), value * headline)


def reduction(old, new) -> Fraction:
    """1 - new/old, exact."""
    old, new = F(old), F(new)
    if old <= 0:
        raise NonPositiveBaseline(f"baseline must be positive, got {old}")
    return 1 - new / old


def sig_figs(x, digits: int = 4) -> str:
    """Round half-up to ``digits`` significant figures."""
    d = Decimal(F(x).numerator) / Decimal(F(x).denominator) if F(x) else Decimal(0)
    if d == 0:
        return "0"
    q = Decimal(1).scaleb(d.adjusted() - digits + 1)
    out = d.quantize(q, rounding=ROUND_HALF_UP)
    if out.adjusted() != d.adjusted():  # rounding carried into a new leading digit
        out = out.quantize(q.scaleb(1), rounding=ROUND_HALF_UP)
    return format(out, "f")


def fixed(x, places: int) -> str:
    x = F(x)
    d = Decimal(x.numerator) / Decimal(x.denominator)
    return str(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


# -- ROI ----------------------------------------------------------------------

@dataclass(frozen=True)
class RoiInput:
    investment: Fraction
    annual_savings: Fraction
    horizon_years: int = 5
    discount_rate: Fraction = F(0)


@dataclass(frozen=True)
class RoiResult:
    payback_years: Fraction
    npv: Fraction


def roi(inp: RoiInput) -> RoiResult:
    inv, sav, r = F(inp.investment), F(inp.annual_savings), F(inp.discount_rate)
    if sav <= 0:
        raise ZeroSavings("annual savings must be positive")
    if inp.horizon_years < 1:
        raise ValueError("horizon must be at least one year")
    if r <= -1:
        raise ValueError("discount rate must exceed -100%")
    npv = sum((sav / (1 + r) ** t for t in range(1, inp.horizon_years + 1)), F(0)) - inv
    return RoiResult(inv / sav, npv)


M = 1_000_000


@dataclass(frozen=True)
class RoiRow:
    organization: str
    volume: int
    investment: int
    savings: int
    paper_payback: str  # as printed
    paper_npv: int


ROI_TABLE = (
    RoiRow("Small (< 1B USD)", 500 * M, 15 * M, 8 * M, "1.9", 20 * M),
    RoiRow("Mid-size (1-10B USD)", 5_000 * M, 50 * M, 75 * M, "0.67", 310 * M),
    RoiRow("Large (10-50B USD)", 25_000 * M, 75 * M, 350 * M, "0.21", 1_650 * M),
    RoiRow("Enterprise (50B+ USD)", 100_000 * M, 100 * M, 1_400 * M, "0.07", 6_500 * M),
)

ROI_COLUMNS = ("Organization Size", "Annual Settlement Volume", "Infrastructure Investment", "Annual Savings",
               "Payback Period", "5-Year NPV")


def payback_matches(row: RoiRow, tolerance=F(1, 100)) -> tuple[bool, Fraction]:
    """Compare computed payback with the printed figure at the printed precision.

    Returns (match, raw difference). The printed value carries as many
    decimals as the table shows, so the computed value is rounded the same
    way before applying the tolerance.
    """
    raw = roi(RoiInput(row.investment, row.savings)).payback_years
    places = len(row.paper_payback.split(".")[1]) if "." in row.paper_payback else 0
    printed = F(row.paper_payback)
    shown = F(fixed(raw, places))
    return abs(shown - printed) <= tolerance, raw - printed


def roi_table(model: CostModel = CostModel(), discount_rate=F(0), horizon: int = 5) -> list[dict]:
    rows = []
    delta = model.headline_traditional - model.headline_blockchain
    for row in ROI_TABLE:
        res = roi(RoiInput(row.investment, row.savings, horizon, discount_rate))
        ok, diff = payback_matches(row)
        rows.append({
            "Organization Size": row.organization,
            "Annual Settlement Volume": row.volume,
            "Infrastructure Investment": row.investment,
            "Annual Savings": row.savings,
            "Annual Savings (rate-derived)": {"value": float(row.volume * delta), "source": "computed"},
            "Payback Period": {"value": fixed(res.payback_years, 4), "paper": row.paper_payback,
                               "matches_printed": ok, "raw_minus_printed": fixed(diff, 4), "source": "computed"},
            "5-Year NPV": {"value": float(res.npv), "discount_rate": str(F(discount_rate)), "source": "computed",
                           "paper": row.paper_npv, "paper_source": "paper-claim",
                           "note": "not reproducible under any single discount rate"},
        })
    return rows


# -- comparison report --------------------------------------------------------

PAPER_CLAIM = "paper-claim"
SIMULATED = "simulated"
COMPUTED = "computed"
CONFIG = "config"
SOURCES = (PAPER_CLAIM, SIMULATED, COMPUTED, CONFIG)

COMPARISON_ROWS = (
    "Settlement Cycle Time", "Transaction Fees", "Labor Cost", "Reconciliation Time", "Dispute Resolution",
    "Audit Trail Completeness", "Manual Intervention", "Fraud Detection", "Transaction Throughput",
    "Data Immutability",
)

# Printed reference values, per row: traditional, blockchain, improvement.
PUBLISHED_COMPARISON = {
    "Settlement Cycle Time": ("120 days", "3 minutes", "99.75% reduction"),
    "Transaction Fees": ("5.0% of value", "0.65% of value", "87% cost reduction"),
    "Labor Cost": ("2.5% of value", "0.75% of value", "70% reduction"),
    "Reconciliation Time": ("12-15 hours", "15 minutes", "98% reduction"),
    "Dispute Resolution": ("20-40 days", "2-4 hours", "99.5% reduction"),
    "Audit Trail Completeness": ("65-75% (sampled)", "100% (complete)", "Complete coverage"),
    "Manual Intervention": ("65%", "8%", "92% automation"),
    "Fraud Detection": ("78%", "96%", "18% improvement"),
    "Transaction Throughput": ("1,000 TPS", "12,000 TPS", "12× increase"),
    "Data Immutability": ("Subjective", "100% cryptographic", "Guaranteed"),
}

# Figures the simulation cannot measure; reported as given, never as outputs.
PAPER_CLAIMS = {
    "dispute_reduction": {"value": "88%", "source": PAPER_CLAIM},
    "labor_cost_reduction": {"value": "70%", "source": PAPER_CLAIM},
    "fraud_detection": {"value": "78% -> 96%", "source": PAPER_CLAIM},
    "fraud_vectors_prevented": {"value": "96%", "source": PAPER_CLAIM},
    "manual_intervention_reduction": {"value": "92%", "source": PAPER_CLAIM},
    "adoption_rate_by_year": {"value": {"2020": "8%", "2021": "15%", "2022": "24%", "2023": "38%",
                                        "2024-04": "52%"}, "source": PAPER_CLAIM},
    "mid_size_annual_savings_usd": {"value": 217_000_000, "source": PAPER_CLAIM,
                                    "note": "50B USD x (5% - 0.65%) = 2.175B USD; the quoted figure is 10x lower"},
}


@dataclass
class Cell:
    value: object
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source tag {self.source!r}")

    def to_json(self) -> dict:
        return {"value": self.value, "source": self.source}


@dataclass
class ReportRow:
    metric: str
    traditional: Cell
    blockchain: Cell
    improvement: Cell
    paper: tuple[str, str, str] | None = None
    note: str = ""

    def to_json(self) -> dict:
        out = {"metric": self.metric, "traditional": self.traditional.to_json(),
               "blockchain": self.blockchain.to_json(), "improvement": self.improvement.to_json()}
        if self.paper:
            out["paper"] = dict(zip(("traditional", "blockchain", "improvement"), self.paper))
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class BlockchainSummary:
    """What the comparison needs from a simulation run."""

    mean_settlement_s: Fraction
    fee_rate: Fraction
    audit_coverage: Fraction
    tamper_detection: Fraction | None
    throughput_tps: Fraction
    reconciliation_mismatches: int
    ledger_discrepancy_disputes: int
    reconciliation_minutes: Fraction = F(15)

    @classmethod
    def from_metrics(cls, metrics: Mapping, fee_rate: Fraction | None = None) -> "BlockchainSummary":
        try:
            e2e = metrics["mean_end_to_end_ms"]
            if e2e is None:
                raise MissingInput("simulation finalised no blocks")
            gen = metrics["txs_generated"]
            recorded = metrics["txs_accepted"] + metrics["txs_rejected"]
            tamper = (F(metrics["tamper_detected"], metrics["tamper_attempts"])
                      if metrics["tamper_attempts"] else None)
            rate = fee_rate if fee_rate is not None else F(metrics.get("fee_rate_bp", 65), 10_000)
            return cls(F(e2e) / 1000, rate, F(recorded, gen) if gen else F(1), tamper,
                       F(metrics["throughput_tps"]).limit_denominator(10**6), metrics["reconciliation_mismatches"],
                       metrics["disputes"].get("LedgerDiscrepancy", 0))
        except KeyError as exc:
            raise MissingInput(f"simulation metrics lack {exc.args[0]!r}") from None


@dataclass(frozen=True)
class BaselineSummary:
    mean_settlement_s: Fraction
    min_days: Fraction
    max_days: Fraction
    samples: int
    fee_rate: Fraction
    discrepancies: int
    injected_errors: int
    reconciliation_hours: tuple[Fraction, Fraction] = (F(12), F(15))


def run_baseline(seed: int = 0, plan: BaselineStagePlan = BaselineStagePlan(), model: CostModel = CostModel(),
                 samples: int = 10_000, injected_errors: int = 0, book_txs: int = 1_000) -> BaselineSummary:
    """Sample the traditional timeline and run a dual-ledger reconciliation
    with ``injected_errors`` corrupted bilateral records."""
    from .simnet.reconcile import bilateral_books, reconcile_bilateral
    from .simnet.workload import WorkloadProfile, generate_workload

    if samples < 1:
        raise ValueError("need at least one sample")
    root = Xoshiro256(seed)
    timeline_rng, books_rng = root.spawn(), root.spawn()
    days = [simulate_traditional_timeline(timeline_rng, plan) for _ in range(samples)]
    mean_days = sum(days, F(0)) / samples

    discrepancies = 0
    if book_txs:
        profile = WorkloadProfile(tx_per_day=86_400_000, peak_multiplier=F(1), duration_ms=book_txs)
        txs = [g.tx for g in generate_workload(profile, books_rng)]
        books = bilateral_books(txs)
        inject_book_errors(books, txs, injected_errors, books_rng)
        discrepancies, _ = reconcile_bilateral(books)
    elif injected_errors:
        raise ValueError("cannot inject errors into empty books")
    return BaselineSummary(mean_days * 86_400, min(days), max(days), samples, model.headline_traditional,
                           discrepancies, injected_errors)


def inject_book_errors(books, txs, k: int, rng: Xoshiro256) -> list[bytes]:
    """Corrupt ``k`` distinct transactions in the bilateral books, one record each."""
    if k > len(txs):
        raise ValueError("more errors than transactions")
    order = list(range(len(txs)))
    for i in range(len(order) - 1, 0, -1):  # Fisher-Yates
        j = rng.uniform_int(0, i)
        order[i], order[j] = order[j], order[i]
    hit = []
    for idx in order[:k]:
        tx = txs[idx]
        side = tx.sender if rng.uniform_int(0, 1) == 0 else tx.receiver
        other, amt = books[side][tx.tx_id]
        kind = rng.uniform_int(0, 2)
        if kind == 0:
            del books[side][tx.tx_id]
        elif kind == 1:
            books[side][tx.tx_id] = (other, amt + (1 if amt >= 0 else -1))
        else:
            books[side][tx.tx_id] = (other, -amt if amt else 1)
        hit.append(tx.tx_id)
    return hit


@dataclass
class MetricsReport:
    rows: list[ReportRow]
    extra_rows: list[ReportRow]
    paper_claims: dict
    notes: list[str]
    exact: dict

    def row(self, metric: str) -> ReportRow:
        for r in self.rows + self.extra_rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def to_json(self) -> dict:
        return {
            "table": [r.to_json() for r in self.rows],
            "measured_extras": [r.to_json() for r in self.extra_rows],
            "paper_claims": self.paper_claims,
            "exact": self.exact,
            "notes": self.notes,
        }

    def dumps_json(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    CSV_FIELDS = ("metric", "traditional", "traditional_source", "blockchain", "blockchain_source",
                  "improvement", "improvement_source", "paper_traditional", "paper_blockchain",
                  "paper_improvement")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.rows + self.extra_rows:
            p = r.paper or ("", "", "")
            w.writerow([r.metric, r.traditional.value, r.traditional.source, r.blockchain.value,
                        r.blockchain.source, r.improvement.value, r.improvement.source, *p])
        return buf.getvalue()


def _pct(x: Fraction, places: int = 2) -> str:
    return fixed(x * 100, places) + "%"


def build_comparison_report(blockchain: BlockchainSummary | None, baseline: BaselineSummary | None,
                            model: CostModel | None = CostModel()) -> MetricsReport:
    if blockchain is None or baseline is None or model is None:
        raise MissingInput("the comparison needs a simulation summary, a baseline summary and a cost model")
    b, t = blockchain, baseline
    rows = []

    cycle = reduction(t.mean_settlement_s, b.mean_settlement_s)
    rows.append(ReportRow(
        "Settlement Cycle Time",
        Cell(f"{fixed(t.mean_settlement_s / 86_400, 2)} days", SIMULATED),
        Cell(f"{fixed(b.mean_settlement_s, 1)} seconds", SIMULATED),
        Cell(_pct(cycle, 4) + " reduction", COMPUTED),
        PUBLISHED_COMPARISON["Settlement Cycle Time"],
        note=f"exact 120 days -> 3 minutes: {fixed(reduction(120 * 86_400, 180), 6)}; printed figure 0.9975",
    ))
    fee_red = reduction(t.fee_rate, b.fee_rate)
    rows.append(ReportRow(
        "Transaction Fees",
        Cell(_pct(t.fee_rate, 1) + " of value", CONFIG),
        Cell(_pct(b.fee_rate, 2) + " of value", CONFIG),
        Cell(_pct(fee_red, 0) + " cost reduction", COMPUTED),
        PUBLISHED_COMPARISON["Transaction Fees"],
    ))
    p = PUBLISHED_COMPARISON["Labor Cost"]
    rows.append(ReportRow("Labor Cost", Cell(p[0], PAPER_CLAIM), Cell(p[1], PAPER_CLAIM), Cell(p[2], PAPER_CLAIM), p,
                          note="labor is not simulated"))
    lo, hi = t.reconciliation_hours
    recon = reduction(_mid((lo, hi)) * 60, b.reconciliation_minutes)
    rows.append(ReportRow(
        "Reconciliation Time",
        Cell(f"{lo}-{hi} hours", CONFIG),
        Cell(f"{b.reconciliation_minutes} minutes", CONFIG),
        Cell(_pct(recon, 1) + " reduction", COMPUTED),
        PUBLISHED_COMPARISON["Reconciliation Time"],
        note="durations are configured constants; the measured mismatch counts are in measured_extras",
    ))
    p = PUBLISHED_COMPARISON["Dispute Resolution"]
    rows.append(ReportRow("Dispute Resolution", Cell(p[0], PAPER_CLAIM), Cell(p[1], PAPER_CLAIM),
                          Cell(p[2], PAPER_CLAIM), p))
    p = PUBLISHED_COMPARISON["Audit Trail Completeness"]
    rows.append(ReportRow("Audit Trail Completeness", Cell(p[0], PAPER_CLAIM),
                          Cell(_pct(b.audit_coverage, 2) + " (recorded on-chain)", SIMULATED),
                          Cell(p[2], PAPER_CLAIM), p))
    p = PUBLISHED_COMPARISON["Manual Intervention"]
    rows.append(ReportRow("Manual Intervention", Cell(p[0], PAPER_CLAIM), Cell(p[1], PAPER_CLAIM),
                          Cell(p[2], PAPER_CLAIM), p))
    p = PUBLISHED_COMPARISON["Fraud Detection"]
    rows.append(ReportRow("Fraud Detection", Cell(p[0], PAPER_CLAIM), Cell(p[1], PAPER_CLAIM),
                          Cell(p[2], PAPER_CLAIM), p,
                          note="only the cryptographic tamper class is measured; see measured_extras"))
    p = PUBLISHED_COMPARISON["Transaction Throughput"]
    rows.append(ReportRow("Transaction Throughput", Cell(p[0], PAPER_CLAIM),
                          Cell(f"{fixed(b.throughput_tps, 1)} TPS (offered load, virtual time)", SIMULATED),
                          Cell(p[2], PAPER_CLAIM), p,
                          note="wall-clock capacity comes from the bench command"))
    p = PUBLISHED_COMPARISON["Data Immutability"]
    detect = b.tamper_detection
    rows.append(ReportRow("Data Immutability", Cell(p[0], PAPER_CLAIM),
                          Cell(_pct(detect, 0) + " of tamper attempts detected", SIMULATED) if detect is not None
                          else Cell("no tamper attempts in this run", SIMULATED),
                          Cell(p[2], PAPER_CLAIM), p))

    extras = [
        ReportRow("Ledger Discrepancies (reconciliation)",
                  Cell(t.discrepancies, SIMULATED), Cell(b.reconciliation_mismatches, SIMULATED),
                  Cell(_pct(reduction(t.discrepancies, b.reconciliation_mismatches), 0) + " reduction", COMPUTED)
                  if t.discrepancies else Cell("n/a (no baseline discrepancies)", COMPUTED),
                  note=f"baseline discrepancies from {t.injected_errors} injected record errors"),
        ReportRow("LedgerDiscrepancy Disputes Opened",
                  Cell(t.discrepancies, SIMULATED), Cell(b.ledger_discrepancy_disputes, SIMULATED),
                  Cell(t.discrepancies - b.ledger_discrepancy_disputes, COMPUTED)),
    ]
    if detect is not None:
        extras.append(ReportRow("Tamper Detection Rate (cryptographic vectors)", Cell("n/a", COMPUTED),
                                Cell(_pct(detect, 2), SIMULATED), Cell("n/a", COMPUTED)))
    exact = {
        "cycle_time_reduction": str(cycle),
        "cycle_time_reduction_4sf": sig_figs(cycle, 4),
        "cycle_time_reduction_paper_bracket": str(reduction(120 * 86_400, 180)),
        "fee_reduction": str(fee_red),
        "baseline_days_range": [str(t.min_days), str(t.max_days)],
        "baseline_samples": t.samples,
        "cost_components": {
            "traditional": {k: str(v) for k, v in model.traditional_rates().items()},
            "blockchain": {k: str(v) for k, v in model.blockchain_rates().items()},
        },
    }
    notes = [
        "Cells tagged paper-claim are copied from the source tables and are not simulation outputs.",
        "Printed cycle-time improvement 99.75% differs from the exact 120 days -> 3 minutes figure "
        f"{fixed(reduction(120 * 86_400, 180) * 100, 4)}%.",
        "The quoted 217M USD savings for a 50B USD operator conflicts with 50B x 4.35% = 2.175B USD.",
        "Component cost rates (cost_components) do not add up to the headline 5.0% / 0.65% rates; "
        "the fee row uses the headline rates.",
    ]
    return MetricsReport(rows, extras, json.loads(json.dumps(PAPER_CLAIMS)), notes, exact)
