"""Discrete-event simulator hosting one replica, chain and ledger state per validator.

Block pipeline for a proposal made at virtual time ``p`` in some (view, height)
slot, with stage durations V, C, A, W drawn once per slot:

* the leader executes the batch and publishes the block body at ``p``;
* every validator receives the PrePrepare at ``p + V`` and re-executes the body
  before voting (validation);
* Prepares travel ``C // 2`` and Commits ``C - C // 2`` so honest nodes commit
  at ``p + V + C`` (consensus voting);
* the block lands in each node's chain ``A`` later (append) and is Final after
  a further confirmation window ``W``.

Bodies live in a shared content-addressed store, which stands in for block
gossip. The store derives the digest itself, so a body can never disagree
with the digest it is filed under.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterator

from ..consensus import ConsensusMessage, MsgKind, Replica, default_validators, max_faulty, sign
from ..errors import ConfigError, SafetyViolation, UnknownFault
from ..ledger import Block, HashChain, GENESIS_HEADER, TxStatus, build_block, tamper, verify_chain
from ..rng import Xoshiro256
from ..settlement import DisputeLog, DisputeReason, LedgerState, Resolution, execute_batch
from .config import (Byzantine, ByzantineKind, Crash, Partition, SimConfig, Stage, TamperAttempt,
                     OracleService, check_fault, sample_latency)
from .reconcile import NodeLedger, ReconciliationReport, reconcile
from .trace import EventTrace
from .workload import GeneratedTx, PartyPools, generate_workload

# event kinds, in tie-break-irrelevant order (ties are broken by sequence number)
_ARRIVE, _DELIVER, _TIMER, _APPEND, _FINAL, _FAULT, _RESOLVE = range(7)


class BlockStore:
    def __init__(self):
        self._blocks: dict[bytes, Block] = {}

    def publish(self, height: int, prev: bytes, txs, timestamp_ms: int) -> Block:
        block = build_block(height, prev, txs, timestamp_ms)
        self._blocks.setdefault(block.digest(), block)
        return block

    def get(self, digest: bytes) -> Block | None:
        return self._blocks.get(digest)


@dataclass
class SlotTiming:
    proposed_at: int
    validation: int
    consensus: int
    append: int
    confirmation: int


@dataclass
class BlockStamps:
    """Per-node stage times for one block (virtual ms)."""

    height: int
    tx_count: int
    accepted: int
    entry: int
    validated: int
    committed: int
    appended: int | None = None
    final: int | None = None
    oldest_arrival: int = 0
    arrival_sum: int = 0


class Node:
    def __init__(self, index: int, name: str, replica: Replica, state: LedgerState):
        self.index = index
        self.name = name
        self.replica = replica
        self.chain = HashChain()
        self.state = state
        self.pending: dict[bytes, object] = {}
        self.crashed = False
        self.byzantine: ByzantineKind | None = None
        self.partitions: list[tuple[int, int]] = []
        self.tip_digest = GENESIS_HEADER.digest()
        self.last_ts = 0
        self.candidates: dict[bytes, LedgerState] = {}
        self.validated_at: dict[bytes, int] = {}
        self.buffer: list[ConsensusMessage] = []
        self.committed: list[bytes] = []  # digest per height, height 1 first
        self.appended_upto = 0
        self.next_append_at = 0
        self.stamps: dict[int, BlockStamps] = {}
        self.invalid_proposals = 0
        self.tampered = False
        self.view_entries = 0

    @property
    def honest(self) -> bool:
        return self.byzantine is None

    def partitioned(self, t: int) -> bool:
        return any(s <= t < e for s, e in self.partitions)


@dataclass
class SimMetrics:
    txs_generated: int = 0
    txs_accepted: int = 0
    txs_rejected: int = 0
    rejections: dict[str, int] = field(default_factory=dict)
    blocks: int = 0
    pipeline_span_ms: tuple[int, int] | None = None
    end_to_end_ms: tuple[int, int] | None = None
    mean_end_to_end_ms: float | None = None
    mean_mempool_wait_ms: float | None = None
    max_mempool_wait_ms: int | None = None
    throughput_tps: float = 0.0
    final_view: int = 0
    view_changes: int = 0
    dropped_messages: int = 0
    equivocations_seen: int = 0
    invalid_proposals: int = 0
    conflicting_commits: int = 0
    conservation_violations: int = 0
    disputes: dict[str, int] = field(default_factory=dict)
    mean_dispute_resolution_ms: float | None = None
    adversarial_total: int = 0
    adversarial_rejected: int = 0
    adversarial_final: int = 0
    tamper_attempts: int = 0
    tamper_detected: int = 0
    reconciliation_mismatches: int = 0
    audited_events: int = 0
    commit_log_rewrites: int = 0
    pending_at_end: int = 0
    virtual_end_ms: int = 0

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        for k in ("pipeline_span_ms", "end_to_end_ms"):
            if out[k] is not None:
                out[k] = list(out[k])
        return out


@dataclass
class SimResult:
    config: SimConfig
    trace: EventTrace
    nodes: list[Node]
    metrics: SimMetrics
    reconciliation: ReconciliationReport | None
    disputes: DisputeLog
    initial_total: int
    adversarial_ids: set[bytes]

    @property
    def trace_digest(self) -> bytes:
        return self.trace.digest

    def honest_nodes(self, include_crashed: bool = False) -> list[Node]:
        return [n for n in self.nodes if n.honest and (include_crashed or not n.crashed)]

    def reference(self) -> Node:
        live = self.honest_nodes()
        return live[0] if live else self.nodes[0]

    def block_stamps(self) -> Iterator[tuple[Node, BlockStamps]]:
        for node in self.honest_nodes():
            for h in sorted(node.stamps):
                yield node, node.stamps[h]


class Simulator:
    def __init__(self, config: SimConfig):
        self.cfg = config
        self.rules = config.effective_rules
        self.timeout = config.effective_timeout_ms
        wl = config.workload
        root = Xoshiro256(config.seed)
        self.rng_workload = root.spawn()
        self.rng_latency = root.spawn()
        self.rng_byz = root.spawn()
        self.rng_dispute = root.spawn()
        self.trace = EventTrace(keep=config.keep_events)
        self.oracle = OracleService(config.compliance, wl.operators)
        self.store = BlockStore()
        self.validators = default_validators(config.n_validators)
        self.f = max_faulty(config.n_validators)
        genesis_state = LedgerState({op: wl.initial_balance for op in wl.operators})
        self.initial_total = genesis_state.total()
        self.nodes = [Node(v.index, v.name, Replica(v.index, self.validators), genesis_state.copy())
                      for v in self.validators]
        self.timing: dict[tuple[int, int], SlotTiming] = {}
        self.global_commits: dict[int, bytes] = {}
        self.first_append: set[int] = set()
        self.known_txs: set[bytes] = set()
        self.disputes = DisputeLog(self.known_txs)
        self.metrics = SimMetrics()
        self.adversarial_ids: set[bytes] = set()
        self.faults: list = []
        self.now = 0
        self._heap: list = []
        self._seq = itertools.count()
        self._ran = False
        self._audit_marks = [(0, None)] * len(self.nodes)
        clean, bad = config.compliance.bad_parties(wl.operators, config.horizon_ms)
        self.parties = PartyPools(clean, bad)
        self._arrivals = generate_workload(wl, self.rng_workload, self.parties,
                                           run_tag=config.seed.to_bytes(8, "little"))
        for fault in config.faults:
            self.inject_fault(fault)

    # -- scheduling ---------------------------------------------------------

    def _push(self, t: int, kind: int, *payload) -> None:
        heapq.heappush(self._heap, (t, next(self._seq), kind, payload))

    def inject_fault(self, fault) -> None:
        """Register a fault from the catalog; it activates on its own schedule."""
        check_fault(fault, len(self.nodes))
        self.faults.append(fault)
        if isinstance(fault, Byzantine):
            self.nodes[fault.validator].byzantine = fault.kind
            self._push(max(self.now, 0), _FAULT, fault, "start")
        elif isinstance(fault, Crash):
            self._push(max(self.now, fault.at_ms), _FAULT, fault, "start")
        elif isinstance(fault, Partition):
            self.nodes[fault.validator].partitions.append((fault.start_ms, fault.end_ms))
            self._push(max(self.now, fault.start_ms), _FAULT, fault, "start")
            self._push(max(self.now, fault.end_ms), _FAULT, fault, "end")
        elif isinstance(fault, TamperAttempt) and fault.at_ms is not None:
            self._push(max(self.now, fault.at_ms), _FAULT, fault, "start")

    def _next_arrival(self) -> None:
        gtx = next(self._arrivals, None)
        if gtx is not None:
            self._push(gtx.tx.timestamp_ms, _ARRIVE, gtx)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SimResult:
        if self._ran:
            raise RuntimeError("a Simulator instance runs once")
        self._ran = True
        self._next_arrival()
        self._loop(self.cfg.horizon_ms)
        self._end_of_run()
        self._loop(None)
        return self._result()

    def _loop(self, horizon: int | None) -> None:
        heap = self._heap
        handlers = (self._on_arrive, self._on_deliver, self._on_timer, self._on_append,
                    self._on_final, self._on_fault, self._on_resolve)
        audit = self.cfg.audit
        while heap:
            t, _, kind, payload = heapq.heappop(heap)
            if horizon is not None and t > horizon:
                # Out of time: keep only dispute resolutions, which run on a
                # much longer clock than the protocol.
                heapq.heappush(heap, (t, _, kind, payload))
                heap[:] = [e for e in heap if e[2] == _RESOLVE]
                heapq.heapify(heap)
                break
            self.now = t
            handlers[kind](*payload)
            if audit:
                self._audit()

    def _audit(self) -> None:
        """Per-event invariant sweep (audit mode only; slow on big workloads).

        Conservation is checked on every node, and each commit log must extend
        the one seen after the previous event.
        """
        m = self.metrics
        m.audited_events += 1
        if any(n.state.total() != self.initial_total for n in self.nodes):
            m.conservation_violations += 1
        marks = self._audit_marks
        for i, node in enumerate(self.nodes):
            log = node.committed
            prev_len, prev_last = marks[i]
            if len(log) < prev_len or (prev_len and log[prev_len - 1] != prev_last):
                m.commit_log_rewrites += 1
            marks[i] = (len(log), log[-1] if log else None)

    # -- workload -----------------------------------------------------------

    def _on_arrive(self, gtx: GeneratedTx) -> None:
        tx = gtx.tx
        now = self.now
        self.metrics.txs_generated += 1
        if gtx.adversarial:
            self.adversarial_ids.add(tx.tx_id)
        self.trace.emit(now, "tx", id=tx.tx_id.hex(), s=tx.sender, r=tx.receiver, amt=tx.amount, ccy=tx.currency)
        for node in self.nodes:
            if node.crashed or (node.partitions and node.partitioned(now)):
                continue
            node.pending[tx.tx_id] = tx
            if node.replica.deadline is None:
                self._arm(node)
        for node in self.nodes:
            if not node.crashed and node.replica.is_leader:
                self._try_propose(node)
        self._next_arrival()

    # -- proposing ----------------------------------------------------------

    def _try_propose(self, node: Node) -> None:
        r = node.replica
        now = self.now
        if node.crashed or node.byzantine is ByzantineKind.SILENCE or not r.is_leader:
            return
        if node.partitions and node.partitioned(now):
            return
        slot = (r.view, r.next_height)
        if slot in r.own_proposals:
            return
        digest = r.reproposal()
        again = digest is not None
        if again:
            block = self.store.get(digest)
            if block is None:
                return
        else:
            if not node.pending:
                return
            view = self.oracle.view_at(now)
            if view.stale:
                self.trace.emit(now, "oracle_stale", node=node.index, as_of=view.as_of_ms)
                return
            batch = list(itertools.islice(node.pending.values(), self.cfg.max_block_txs))
            post, records = execute_batch(node.state, batch, self.rules, view, now, out_status=TxStatus.APPENDED)
            block = self.store.publish(r.next_height, node.tip_digest, records, now)
            digest = block.digest()
            node.candidates[digest] = post
            node.validated_at.setdefault(digest, now)
        msg = r.propose(digest, block.txs)
        lat = self.cfg.latency
        rng = self.rng_latency
        timing = SlotTiming(now, sample_latency(Stage.VALIDATION, rng, lat),
                            sample_latency(Stage.CONSENSUS_VOTE, rng, lat),
                            sample_latency(Stage.APPEND, rng, lat),
                            sample_latency(Stage.CONFIRMATION, rng, lat))
        self.timing[slot] = timing
        self.trace.emit(now, "propose", node=node.index, view=slot[0], h=slot[1], d=digest.hex(),
                        n=len(block.txs), re=again)
        at = now + timing.validation
        others = [p for p in self.nodes if p is not node]
        if node.byzantine is ByzantineKind.EQUIVOCATE and others:
            alt = self.store.publish(block.height, block.header.prev_hash, block.txs, block.header.timestamp_ms + 1)
            alt_msg = sign(ConsensusMessage(MsgKind.PRE_PREPARE, msg.view, msg.height, alt.digest(), node.index),
                           r.key)
            half = len(others) // 2
            self._deliver_group(node, msg, [node, *others[:half]], at)
            self._deliver_group(node, alt_msg, others[half:], at)
        elif node.byzantine is ByzantineKind.VOTE_GARBAGE and others:
            junk = sign(ConsensusMessage(MsgKind.PRE_PREPARE, msg.view, msg.height, self._garbage(), node.index),
                        r.key)
            self._deliver_group(node, msg, [node], at)
            self._deliver_group(node, junk, others, at)
        else:
            self._deliver_group(node, msg, [node, *others], at)

    def _garbage(self) -> bytes:
        rng = self.rng_byz
        return b"".join(rng.next_u64().to_bytes(8, "little") for _ in range(4))

    # -- messaging ----------------------------------------------------------

    def _deliver_group(self, sender: Node, msg: ConsensusMessage, dests: list[Node], at: int) -> None:
        if not dests:
            return
        if sender.partitions and sender.partitioned(self.now):
            dests = [sender] if sender in dests else []
        if not dests:
            return
        self.trace.emit(self.now, "msg", kind=msg.kind.name, view=msg.view, h=msg.height,
                        d=msg.block_digest.hex(), src=sender.index, dst=[d.index for d in dests], at=at)
        for d in dests:
            self._push(at, _DELIVER, d, msg)

    def _hop(self, msg: ConsensusMessage) -> int:
        timing = self.timing.get((msg.view, msg.height))
        if msg.kind is MsgKind.VIEW_CHANGE or timing is None:
            return sample_latency(Stage.NETWORK, self.rng_latency, self.cfg.latency)
        c = timing.consensus
        return c // 2 if msg.kind is MsgKind.PREPARE else c - c // 2

    def _broadcast(self, node: Node, out: list[ConsensusMessage]) -> None:
        if not out or node.byzantine is ByzantineKind.SILENCE:
            return
        others = [p for p in self.nodes if p is not node]
        for msg in out:
            at = self.now + self._hop(msg)
            if msg.kind is MsgKind.VIEW_CHANGE or node.byzantine is None:
                self._deliver_group(node, msg, others, at)
                continue
            junk = sign(ConsensusMessage(msg.kind, msg.view, msg.height, self._garbage(), node.index), node.replica.key)
            if node.byzantine is ByzantineKind.VOTE_GARBAGE:
                self._deliver_group(node, junk, others, at)
            else:  # equivocate: the real vote to half the peers, a different one to the rest
                half = len(others) // 2
                self._deliver_group(node, msg, others[:half], at)
                self._deliver_group(node, junk, others[half:], at)

    def _on_deliver(self, node: Node, msg: ConsensusMessage) -> None:
        if node.crashed or (node.partitions and node.partitioned(self.now)):
            return
        self._handle(node, msg)

    def _handle(self, node: Node, msg: ConsensusMessage) -> None:
        r = node.replica
        if msg.kind is not MsgKind.VIEW_CHANGE:
            if msg.view > r.view or (msg.view == r.view and msg.height > r.next_height):
                node.buffer.append(msg)
                self._check_lag(node)
                return
            if msg.view < r.view or msg.height < r.next_height:
                return
            if msg.kind is MsgKind.PRE_PREPARE and msg.sender == r.leader(msg.view):
                if not self._validate(node, msg.block_digest):
                    node.invalid_proposals += 1
                    self.trace.emit(self.now, "invalid_proposal", node=node.index, view=msg.view, h=msg.height,
                                    d=msg.block_digest.hex())
                    return
        height = r.next_height
        view = r.view
        out, committed = r.handle_message(msg)
        self._broadcast(node, out)
        if committed is not None:
            self._on_commit(node, height, committed)
        if r.view != view:
            self._on_new_view(node)
        if msg.kind is MsgKind.VIEW_CHANGE and r.peers_ahead() >= self.f + 1:
            self._sync(node)

    def _validate(self, node: Node, digest: bytes, height: int | None = None) -> bool:
        """Re-execute a proposed body against this node's committed state."""
        if digest in node.candidates:
            return True
        block = self.store.get(digest)
        if block is None:
            return False
        h = block.header
        if height is None:
            height = node.replica.next_height
        if (h.height != height or h.prev_hash != node.tip_digest
                or h.timestamp_ms < node.last_ts or h.timestamp_ms > self.now or not block.txs):
            return False
        view = self.oracle.view_at(h.timestamp_ms)
        if view.stale:
            return False
        post, records = execute_batch(node.state, block.txs, self.rules, view, h.timestamp_ms,
                                      out_status=TxStatus.APPENDED)
        if tuple(records) != block.txs:
            return False
        if any(t.rejected and t.status is not TxStatus.INITIATED for t in records):
            return False
        node.candidates[digest] = post
        node.validated_at.setdefault(digest, self.now)
        return True

    # -- commit / append / final --------------------------------------------

    def _on_commit(self, node: Node, height: int, digest: bytes, via_cert: bool = False) -> None:
        now = self.now
        if not self._validate(node, digest, height):
            raise SafetyViolation(f"{node.name} committed height {height} to a body it cannot execute")
        block = self.store.get(digest)
        node.state = node.candidates[digest]
        node.candidates.clear()
        node.tip_digest = digest
        node.last_ts = block.header.timestamp_ms
        node.committed.append(digest)
        pending = node.pending
        arrival_sum = 0
        oldest = block.header.timestamp_ms
        accepted = 0
        for tx in block.txs:
            pending.pop(tx.tx_id, None)
            arrival_sum += tx.timestamp_ms
            if tx.timestamp_ms < oldest:
                oldest = tx.timestamp_ms
            if not tx.rejected:
                accepted += 1
        total = node.state.total()
        if total != self.initial_total:
            self.metrics.conservation_violations += 1
        if node.honest:
            first = self.global_commits.setdefault(height, digest)
            if first != digest:
                self.metrics.conflicting_commits += 1
                self.trace.emit(now, "conflict", node=node.index, h=height, d=digest.hex(), other=first.hex())
        cert_view = node.replica.commit_certs[height][0].view
        timing = self.timing.get((cert_view, height))
        entry = timing.proposed_at if timing else block.header.timestamp_ms
        a = timing.append if timing and not via_cert else sample_latency(Stage.APPEND, self.rng_latency, self.cfg.latency)
        node.stamps[height] = BlockStamps(height, len(block.txs), accepted, entry,
                                          node.validated_at.get(digest, now), now,
                                          oldest_arrival=oldest, arrival_sum=arrival_sum)
        node.validated_at.clear()
        self.trace.emit(now, "commit", node=node.index, view=cert_view, h=height, d=digest.hex(),
                        n=len(block.txs), ok=accepted, total=total, cert=via_cert)
        at = max(now + a, node.next_append_at)
        node.next_append_at = at
        self._push(at, _APPEND, node, height)
        if not via_cert:
            self._after_progress(node)

    def _after_progress(self, node: Node) -> None:
        if node.pending:
            self._arm(node)
        else:
            node.replica.disarm()
        self._replay(node)
        self._try_propose(node)

    def _on_append(self, node: Node, height: int) -> None:
        if node.crashed:
            return
        now = self.now
        while node.appended_upto < height:
            h = node.appended_upto + 1
            block = self.store.get(node.committed[h - 1])
            node.chain.append_built(block)
            node.appended_upto = h
            stamps = node.stamps[h]
            stamps.appended = now
            self.trace.emit(now, "append", node=node.index, h=h, d=block.digest().hex())
            cert_view = node.replica.commit_certs[h][0].view
            timing = self.timing.get((cert_view, h))
            w = timing.confirmation if timing else sample_latency(Stage.CONFIRMATION, self.rng_latency,
                                                                  self.cfg.latency)
            self._push(now + w, _FINAL, node, h)
            if h not in self.first_append and node.honest:
                self.first_append.add(h)
                self._on_block_published(block)

    def _on_block_published(self, block: Block) -> None:
        rate = self.cfg.workload.oracle_dispute_rate
        for tx in block.txs:
            self.known_txs.add(tx.tx_id)
        if rate <= 0:
            return
        for tx in block.txs:
            if not tx.rejected and self.rng_dispute.bernoulli(rate):
                self._open_dispute(tx.tx_id, tx.receiver, DisputeReason.ORACLE_DATA)

    def _on_final(self, node: Node, height: int) -> None:
        if node.crashed:
            return
        node.stamps[height].final = self.now
        self.trace.emit(self.now, "final", node=node.index, h=height)

    # -- disputes -----------------------------------------------------------

    def _open_dispute(self, tx_id: bytes, raised_by: str, reason: DisputeReason) -> None:
        d = self.disputes.open(tx_id, raised_by, reason, self.now)
        self.trace.emit(self.now, "dispute_open", id=d.dispute_id.hex(), tx=tx_id.hex(), reason=reason.value,
                        by=raised_by)
        lo, hi = self.cfg.dispute_resolution_ms
        self._push(self.now + self.rng_dispute.uniform_int(lo, hi), _RESOLVE, d.dispute_id)

    def _on_resolve(self, dispute_id: bytes) -> None:
        d = self.disputes.resolve(dispute_id, Resolution.CORRECTED, self.now)
        self.trace.emit(self.now, "dispute_resolve", id=dispute_id.hex(), resolution=d.resolution.value)

    # -- timers and view changes --------------------------------------------

    def _arm(self, node: Node) -> None:
        node.replica.arm(self.now, self.timeout)
        self._push(node.replica.deadline, _TIMER, node, node.replica.deadline)

    def _on_timer(self, node: Node, deadline: int) -> None:
        r = node.replica
        if node.crashed or r.deadline != deadline:
            return
        view = r.view
        vc = r.on_timeout(self.now)
        if vc is None:
            return
        self.trace.emit(self.now, "timeout", node=node.index, view=view, target=vc.view)
        self._broadcast(node, [vc])
        if r.view != view:
            self._on_new_view(node)
        elif node.pending:
            self._arm(node)

    def _on_new_view(self, node: Node) -> None:
        r = node.replica
        node.view_entries += 1
        self.trace.emit(self.now, "view", node=node.index, view=r.view, leader=r.leader())
        if node.pending or r.reproposal() is not None:
            self._arm(node)
        else:
            r.disarm()
        self._replay(node)
        self._try_propose(node)

    def _replay(self, node: Node) -> None:
        if not node.buffer:
            return
        msgs, node.buffer = node.buffer, []
        for msg in msgs:
            self._handle(node, msg)

    def _check_lag(self, node: Node) -> None:
        r = node.replica
        ahead = {m.sender for m in node.buffer if m.height > r.next_height}
        if len(ahead) >= self.f + 1:
            self._sync(node)

    def _sync(self, node: Node) -> None:
        """State transfer: adopt commits proven by peers' certificates, then
        the highest view that at least f+1 reachable peers share."""
        r = node.replica
        now = self.now
        if node.crashed or (node.partitions and node.partitioned(now)):
            return
        peers = [p for p in self.nodes if p is not node and not p.crashed
                 and not (p.partitions and p.partitioned(now))]
        start = r.next_height
        while True:
            h = r.next_height
            src = next((p for p in peers if h in p.replica.commit_certs), None)
            if src is None or not r.accept_certificate(h, src.replica.commit_log[h], src.replica.commit_certs[h]):
                break
            self._on_commit(node, h, src.replica.commit_log[h], via_cert=True)
        views = sorted((p.replica.view for p in peers), reverse=True)
        moved = len(views) > self.f and r.adopt_view(views[self.f])
        if r.next_height == start and not moved:
            return
        self.trace.emit(now, "sync", node=node.index, h_from=start, h_to=r.next_height, view=r.view)
        if moved:
            self._on_new_view(node)
        else:
            self._after_progress(node)

    # -- faults -------------------------------------------------------------

    def _on_fault(self, fault, phase: str) -> None:
        node = self.nodes[fault.validator]
        now = self.now
        if isinstance(fault, Byzantine):
            self.trace.emit(now, "fault", type="byzantine", kind=fault.kind.value, node=node.index)
        elif isinstance(fault, Crash):
            node.crashed = True
            node.replica.disarm()
            self.trace.emit(now, "fault", type="crash", node=node.index)
        elif isinstance(fault, Partition):
            self.trace.emit(now, "fault", type="partition", phase=phase, node=node.index)
            if phase == "end" and not node.crashed:
                self._sync(node)
                if node.pending and node.replica.deadline is None:
                    self._arm(node)
        elif isinstance(fault, TamperAttempt):
            self._apply_tamper(node, fault)

    def _apply_tamper(self, node: Node, fault: TamperAttempt) -> None:
        self.metrics.tamper_attempts += 1
        try:
            node.chain = tamper(node.chain, fault.height, fault.byte_offset, fault.mask)
        except Exception as exc:  # out of range: recorded, chain untouched
            self.trace.emit(self.now, "fault", type="tamper", node=node.index, h=fault.height,
                            byte=fault.byte_offset, applied=False, error=type(exc).__name__)
            return
        node.tampered = True
        self.trace.emit(self.now, "fault", type="tamper", node=node.index, h=fault.height,
                        byte=fault.byte_offset, applied=True)

    # -- wrap-up ------------------------------------------------------------

    def _end_of_run(self) -> None:
        for fault in self.faults:
            if isinstance(fault, TamperAttempt) and fault.at_ms is None:
                self._apply_tamper(self.nodes[fault.validator], fault)
        live = [n for n in self.nodes if not n.crashed]
        self.reconciliation = None
        if len(live) >= 2:
            self.reconciliation = reconcile([NodeLedger(n.name, n.chain, n.state) for n in live])
            rep = self.reconciliation
            self.trace.emit(self.now, "reconcile", mismatches=sorted(rep.mismatches.items()),
                            behind=sorted(rep.behind.items()))
            by_name = {n.name: n for n in live}
            for name, h in sorted(rep.mismatches.items()):
                ref = self._reference()
                if ref is None or h < 1 or h > ref.chain.tip_height:
                    continue
                txs = ref.chain.block(h).txs
                if txs:
                    self._open_dispute(txs[0].tx_id, by_name[name].name, DisputeReason.LEDGER_DISCREPANCY)

    def _reference(self) -> Node | None:
        for n in self.nodes:
            if n.honest and not n.crashed and not n.tampered:
                return n
        return None

    def _result(self) -> SimResult:
        m = self.metrics
        m.virtual_end_ms = self.now
        ref = self._reference() or self.nodes[0]
        rejections: dict[str, int] = {}
        accepted = rejected = 0
        for h in range(1, len(ref.committed) + 1):
            for tx in self.store.get(ref.committed[h - 1]).txs:
                if tx.rejected:
                    rejected += 1
                    rejections[tx.reason.name] = rejections.get(tx.reason.name, 0) + 1
                else:
                    accepted += 1
        m.txs_accepted, m.txs_rejected, m.rejections = accepted, rejected, rejections
        m.blocks = len(ref.committed)
        m.final_view = ref.replica.view
        m.view_changes = ref.view_entries
        m.dropped_messages = sum(n.replica.dropped for n in self.nodes)
        m.equivocations_seen = sum(n.replica.equivocations_seen for n in self.nodes)
        m.invalid_proposals = sum(n.invalid_proposals for n in self.nodes)
        m.pending_at_end = len(ref.pending)
        spans = []
        e2e = []
        waits_sum = waits_n = 0
        max_wait = None
        for node in self.nodes:
            if not node.honest or node.crashed:
                continue
            for st in node.stamps.values():
                if st.appended is not None:
                    spans.append(st.appended - st.entry)
                if st.final is not None:
                    e2e.append((st.final - st.entry, st.tx_count))
                if node is ref:
                    waits_sum += st.entry * st.tx_count - st.arrival_sum
                    waits_n += st.tx_count
                    w = st.entry - st.oldest_arrival
                    max_wait = w if max_wait is None else max(max_wait, w)
        if spans:
            m.pipeline_span_ms = (min(spans), max(spans))
        if e2e:
            m.end_to_end_ms = (min(s for s, _ in e2e), max(s for s, _ in e2e))
            m.mean_end_to_end_ms = sum(s * c for s, c in e2e) / max(1, sum(c for _, c in e2e))
        if waits_n:
            m.mean_mempool_wait_ms = waits_sum / waits_n
            m.max_mempool_wait_ms = max_wait
        dur = self.cfg.workload.duration_ms
        m.throughput_tps = accepted / (dur / 1000) if dur else 0.0
        m.disputes = {r.value: self.disputes.count(r) for r in DisputeReason}
        closed = [d for d in self.disputes.disputes.values() if d.resolved_at is not None]
        if closed:
            m.mean_dispute_resolution_ms = sum(d.resolved_at - d.opened_at for d in closed) / len(closed)
        m.adversarial_total = len(self.adversarial_ids)
        adv = self.adversarial_ids
        if adv:
            rejected_ids = set()
            passed_anywhere = set()
            for node in self.nodes:
                for digest in node.committed:
                    for tx in self.store.get(digest).txs:
                        if tx.tx_id in adv:
                            (rejected_ids if tx.rejected else passed_anywhere).add(tx.tx_id)
            m.adversarial_rejected = len(rejected_ids - passed_anywhere)
            m.adversarial_final = len(passed_anywhere)
        rep = self.reconciliation
        if rep is not None:
            honest_names = {n.name for n in self.nodes if n.honest and not n.crashed and not n.tampered}
            m.reconciliation_mismatches = sum(1 for name in rep.mismatches if name in honest_names)
        m.tamper_detected = sum(
            1 for n in self.nodes if n.tampered and (not verify_chain(n.chain).valid
                                                     or (rep is not None and n.name in rep.mismatches)))
        return SimResult(self.cfg, self.trace, self.nodes, m, rep, self.disputes, self.initial_total,
                         set(self.adversarial_ids))


def run_simulation(config: SimConfig) -> SimResult:
    """Run one seeded simulation to quiescence (or the configured horizon)."""
    if not isinstance(config, SimConfig):
        raise ConfigError("run_simulation expects a SimConfig", key="config")
    return Simulator(config).run()


def inject_fault(sim: Simulator, fault) -> None:
    sim.inject_fault(fault)
