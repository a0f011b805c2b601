"""PBFT-style replica for a fixed, permissioned validator set.

The replica is a plain state machine: the simulator hands it one message at a
time and forwards whatever it emits. It never touches the ledger itself; block
validation happens before a PrePrepare is delivered, and commits are reported
back as digests.

Signatures are simulated as HMAC-SHA256 keyed by the validator name.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DuplicateProposal, EmptyBatch, NotLeader, ZeroValidators
from .ledger import ZERO_DIGEST


def quorum_threshold(n: int) -> int:
    """Smallest quorum whose pairwise overlap holds f+1 validators.

    ceil((n + f + 1) / 2) with f = floor((n-1)/3). This is the classic 2f+1
    whenever n = 3f+1; for other committee sizes plain 2f+1 would let two
    quorums meet in only f validators, all of which may be faulty.
    """
    if n < 1:
        raise ZeroValidators("need at least one validator")
    f = (n - 1) // 3
    return (n + f + 2) // 2


def max_faulty(n: int) -> int:
    return (n - 1) // 3


@dataclass(frozen=True)
class ValidatorId:
    index: int
    name: str

    @property
    def key(self) -> bytes:
        return self.name.encode("utf-8")


def default_validators(n: int) -> list[ValidatorId]:
    return [ValidatorId(i, f"validator-{i}") for i in range(n)]


class MsgKind(enum.IntEnum):
    PRE_PREPARE = 0
    PREPARE = 1
    COMMIT = 2
    VIEW_CHANGE = 3


class Phase(enum.IntEnum):
    IDLE = 0
    PRE_PREPARED = 1
    PREPARED = 2
    COMMITTED = 3


_SIGNED = struct.Struct("<BQQ32sHq")


@dataclass(frozen=True, slots=True)
class ConsensusMessage:
    kind: MsgKind
    view: int
    height: int
    block_digest: bytes
    sender: int
    auth_tag: bytes = b""
    # ViewChange only: the view in which block_digest was prepared (-1: none)
    # and the (sender, tag) pairs of the Prepare messages proving it.
    prepared_view: int = -1
    cert: tuple[tuple[int, bytes], ...] = ()

    def signing_bytes(self) -> bytes:
        head = _SIGNED.pack(self.kind, self.view, self.height, self.block_digest, self.sender, self.prepared_view)
        return head + b"".join(s.to_bytes(2, "little") + t for s, t in self.cert)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.name,
            "view": self.view,
            "height": self.height,
            "digest": self.block_digest.hex(),
            "sender": self.sender,
        }


def sign(msg: ConsensusMessage, key: bytes) -> ConsensusMessage:
    tag = hmac.new(key, msg.signing_bytes(), hashlib.sha256).digest()
    return ConsensusMessage(msg.kind, msg.view, msg.height, msg.block_digest, msg.sender, tag,
                            msg.prepared_view, msg.cert)


def tag_for(kind: MsgKind, view: int, height: int, digest: bytes, sender: int, key: bytes) -> bytes:
    return sign(ConsensusMessage(kind, view, height, digest, sender), key).auth_tag


@dataclass
class PreparedClaim:
    view: int
    height: int
    digest: bytes
    cert: tuple[tuple[int, bytes], ...]


class Replica:
    """Consensus state of one validator.

    ``handle_message`` returns ``(outbound, committed_digest)``. Messages
    addressed to another view, or to a height other than ``next_height``, are
    no-ops here; buffering them is the caller's business.
    """

    def __init__(self, index: int, validators: Sequence[ValidatorId]):
        self.n = len(validators)
        self.f = max_faulty(self.n)
        self.quorum = quorum_threshold(self.n)
        self.index = index
        self.validators = list(validators)
        self.key = validators[index].key
        self.view = 0
        self.next_height = 1
        self.phase: dict[tuple[int, int], Phase] = {}
        self.proposals: dict[tuple[int, int], bytes] = {}
        self.own_proposals: set[tuple[int, int]] = set()
        self.log: dict[tuple[int, int, int, int], ConsensusMessage] = {}
        self.votes: dict[tuple[int, int, int, bytes], dict[int, bytes]] = defaultdict(dict)
        self.commit_log: dict[int, bytes] = {}
        self.commit_certs: dict[int, tuple[ConsensusMessage, ...]] = {}
        self.prepared: PreparedClaim | None = None
        self.vc_votes: dict[int, dict[int, ConsensusMessage]] = defaultdict(dict)
        self.vc_target = 0
        self.deadline: int | None = None
        self.dropped = 0
        self.equivocations_seen = 0

    # -- helpers ------------------------------------------------------------

    def leader(self, view: int | None = None) -> int:
        return (self.view if view is None else view) % self.n

    @property
    def is_leader(self) -> bool:
        return self.leader() == self.index

    def _sign(self, kind: MsgKind, view: int, height: int, digest: bytes, **extra) -> ConsensusMessage:
        return sign(ConsensusMessage(kind, view, height, digest, self.index, **extra), self.key)

    def _tag_ok(self, msg: ConsensusMessage) -> bool:
        if not 0 <= msg.sender < self.n:
            return False
        expected = sign(msg, self.validators[msg.sender].key).auth_tag
        return hmac.compare_digest(expected, msg.auth_tag)

    def _cert_ok(self, kind: MsgKind, view: int, height: int, digest: bytes,
                 cert: Sequence[tuple[int, bytes]]) -> bool:
        senders = set()
        for sender, tag in cert:
            if not 0 <= sender < self.n or sender in senders:
                return False
            if not hmac.compare_digest(tag, tag_for(kind, view, height, digest, sender, self.validators[sender].key)):
                return False
            senders.add(sender)
        return len(senders) >= self.quorum

    def is_final(self, height: int) -> bool:
        return height in self.commit_log

    def snapshot(self) -> tuple:
        """Comparable summary of the mutable protocol state."""
        return (
            self.view, self.next_height, dict(self.phase), dict(self.proposals), frozenset(self.log),
            {k: dict(v) for k, v in self.votes.items()}, dict(self.commit_log), self.prepared,
            self.vc_target, {k: dict(v) for k, v in self.vc_votes.items()},
        )

    # -- timer --------------------------------------------------------------

    def arm(self, now_ms: int, timeout_ms: int) -> None:
        self.deadline = now_ms + timeout_ms

    def disarm(self) -> None:
        self.deadline = None

    # -- proposing ----------------------------------------------------------

    def propose(self, block_digest: bytes, batch: Sequence) -> ConsensusMessage:
        if not self.is_leader:
            raise NotLeader(f"validator {self.index} is not leader of view {self.view}")
        if not batch:
            raise EmptyBatch("nothing to propose")
        slot = (self.view, self.next_height)
        if slot in self.own_proposals:
            raise DuplicateProposal(f"already proposed height {self.next_height} in view {self.view}")
        self.own_proposals.add(slot)
        return self._sign(MsgKind.PRE_PREPARE, self.view, self.next_height, block_digest)

    def reproposal(self) -> bytes | None:
        """Digest the leader of the current view must re-propose, if any.

        Taken from the highest-view prepared certificate among the ViewChange
        quorum that moved us into this view.
        """
        best: PreparedClaim | None = None
        for msg in self.vc_votes.get(self.view, {}).values():
            if msg.prepared_view >= 0 and msg.height == self.next_height:
                if best is None or msg.prepared_view > best.view:
                    best = PreparedClaim(msg.prepared_view, msg.height, msg.block_digest, msg.cert)
        if self.prepared and self.prepared.height == self.next_height:
            if best is None or self.prepared.view > best.view:
                best = self.prepared
        return best.digest if best else None

    # -- message handling ---------------------------------------------------

    def handle_message(self, msg: ConsensusMessage) -> tuple[list[ConsensusMessage], bytes | None]:
        if not self._tag_ok(msg):
            self.dropped += 1
            return [], None
        if msg.kind is MsgKind.VIEW_CHANGE:
            return self._on_view_change(msg), None
        if msg.view != self.view or msg.height != self.next_height:
            return [], None
        if msg.kind is MsgKind.PRE_PREPARE and msg.sender != self.leader(msg.view):
            self.dropped += 1
            return [], None
        return self._accept(msg)

    def _accept(self, msg: ConsensusMessage) -> tuple[list[ConsensusMessage], bytes | None]:
        key = (msg.kind, msg.view, msg.height, msg.sender)
        if key in self.log:
            return [], None
        self.log[key] = msg
        slot = (msg.view, msg.height)
        if msg.kind is MsgKind.PRE_PREPARE:
            if slot in self.proposals:
                if self.proposals[slot] != msg.block_digest:
                    self.equivocations_seen += 1
                return [], None
            self.proposals[slot] = msg.block_digest
            self.phase[slot] = Phase.PRE_PREPARED
            return self._emit(MsgKind.PREPARE, msg.view, msg.height, msg.block_digest)

        votes = self.votes[(msg.kind, msg.view, msg.height, msg.block_digest)]
        votes[msg.sender] = msg.auth_tag
        if msg.kind is MsgKind.PREPARE:
            if (self.proposals.get(slot) == msg.block_digest and len(votes) >= self.quorum
                    and self.phase.get(slot, Phase.IDLE) < Phase.PREPARED):
                self.phase[slot] = Phase.PREPARED
                self.prepared = PreparedClaim(msg.view, msg.height, msg.block_digest, tuple(sorted(votes.items())))
                return self._emit(MsgKind.COMMIT, msg.view, msg.height, msg.block_digest)
            return [], None
        if len(votes) >= self.quorum and msg.height not in self.commit_log:
            cert = tuple(self.log[(MsgKind.COMMIT, msg.view, msg.height, s)] for s in sorted(votes))
            self._commit(msg.height, msg.block_digest, cert)
            return [], msg.block_digest
        return [], None

    def _emit(self, kind: MsgKind, view: int, height: int, digest: bytes) -> tuple[list[ConsensusMessage], bytes | None]:
        """Sign a vote, count it locally, and return it with any follow-ups."""
        msg = self._sign(kind, view, height, digest)
        out, committed = self._accept(msg)
        return [msg, *out], committed

    def _commit(self, height: int, digest: bytes, cert: tuple[ConsensusMessage, ...]) -> None:
        self.commit_log[height] = digest
        self.commit_certs[height] = cert
        for slot in list(self.phase):
            if slot[1] == height:
                self.phase[slot] = Phase.COMMITTED
        self.next_height = height + 1
        self.prepared = None

    def accept_certificate(self, height: int, digest: bytes, cert: Sequence[ConsensusMessage]) -> bool:
        """Commit ``height`` from a peer's commit certificate (state transfer)."""
        if height != self.next_height or not cert:
            return False
        view = cert[0].view
        ok = all(m.kind is MsgKind.COMMIT and m.view == view and m.height == height
                 and m.block_digest == digest and self._tag_ok(m) for m in cert)
        if not ok or len({m.sender for m in cert}) < self.quorum:
            return False
        self._commit(height, digest, tuple(cert))
        return True

    # -- view change --------------------------------------------------------

    def on_timeout(self, now_ms: int) -> ConsensusMessage | None:
        """Vote to leave the current view once the deadline has passed."""
        if self.deadline is None or now_ms < self.deadline:
            return None
        self.deadline = None
        target = max(self.view, self.vc_target) + 1
        return self._send_view_change(target)

    def _send_view_change(self, target: int) -> ConsensusMessage:
        self.vc_target = target
        p = self.prepared if self.prepared and self.prepared.height == self.next_height else None
        msg = self._sign(
            MsgKind.VIEW_CHANGE, target, self.next_height, p.digest if p else ZERO_DIGEST,
            prepared_view=p.view if p else -1, cert=p.cert if p else (),
        )
        self.vc_votes[target][self.index] = msg
        self._maybe_enter(target)
        return msg

    def _on_view_change(self, msg: ConsensusMessage) -> list[ConsensusMessage]:
        if msg.view <= self.view:
            return []
        if msg.prepared_view >= 0 and not self._cert_ok(
                MsgKind.PREPARE, msg.prepared_view, msg.height, msg.block_digest, msg.cert):
            self.dropped += 1
            return []
        self.vc_votes[msg.view][msg.sender] = msg
        out = []
        # f+1 peers want a higher view: at least one is honest, so join.
        if msg.view > self.vc_target:
            senders = set()
            for v, votes in self.vc_votes.items():
                if v > self.vc_target:
                    senders.update(votes)
            if len(senders) >= self.f + 1:
                join = min(v for v, votes in self.vc_votes.items() if v > self.vc_target and votes)
                out.append(self._send_view_change(join))
        self._maybe_enter(msg.view)
        return out

    def _maybe_enter(self, target: int) -> None:
        if target > self.view and len(self.vc_votes[target]) >= self.quorum:
            self.view = target
            self.vc_target = max(self.vc_target, target)
            for v in [v for v in self.vc_votes if v < target]:
                del self.vc_votes[v]

    def adopt_view(self, view: int) -> bool:
        """Jump forward to a view that f+1 peers already hold (state transfer)."""
        if view <= self.view:
            return False
        self.view = view
        self.vc_target = max(self.vc_target, view)
        for v in [v for v in self.vc_votes if v < view]:
            del self.vc_votes[v]
        return True

    def peers_ahead(self) -> int:
        """How many distinct peers reported a next_height above ours in a ViewChange."""
        ahead = set()
        for votes in self.vc_votes.values():
            for sender, m in votes.items():
                if m.height > self.next_height:
                    ahead.add(sender)
        return len(ahead)
