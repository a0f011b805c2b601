"""Append-only hash-chained block ledger.

Transactions serialize to a fixed canonical byte layout, blocks commit to their
transactions through a binary Merkle root, and each header links to the SHA-256
digest of its predecessor. The same layout backs the ``SBLK`` block-log file.
"""
from __future__ import annotations

import enum
import hashlib
import io
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator, Sequence

from .errors import EmptyBatch, FormatError, OutOfRange, StatusViolation

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)
EMPTY_ROOT = hashlib.sha256(b"").digest()

MAGIC = b"SBLK"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<QQ32s32sI")
HEADER_SIZE = _HEADER.size  # 84
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_TAIL = struct.Struct("<QBBB")  # withholding, status, verdict, reason
_MAX_OPERATOR_BYTES = 32


class TxStatus(enum.IntEnum):
    INITIATED = 0
    VALIDATED = 1
    EXECUTED = 2
    CONSENSUS_APPROVED = 3
    APPENDED = 4
    FINAL = 5


class Verdict(enum.IntEnum):
    UNCHECKED = 0
    PASSED = 1
    REJECTED = 2


class RejectReason(enum.IntEnum):
    NONE = 0
    SANCTIONED = 1
    KYC_EXPIRED = 2
    INSUFFICIENT_BALANCE = 3
    AMOUNT_OUT_OF_BOUNDS = 4
    CURRENCY_NOT_ALLOWED = 5
    UNKNOWN_CURRENCY_PAIR = 6


class BrokenLink(enum.Enum):
    PREV_HASH_MISMATCH = "PrevHashMismatch"
    PAYLOAD_ROOT_MISMATCH = "PayloadRootMismatch"
    HEIGHT_GAP = "HeightGap"


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    tx_id: bytes
    timestamp_ms: int
    sender: str
    receiver: str
    amount: int
    currency: str
    fee: int = 0
    withholding: int = 0
    status: TxStatus = TxStatus.INITIATED
    verdict: Verdict = Verdict.UNCHECKED
    reason: RejectReason = RejectReason.NONE

    def __post_init__(self):
        if len(self.tx_id) != 16:
            raise ValueError("tx_id must be 16 bytes")
        if self.sender == self.receiver:
            raise ValueError("sender and receiver must differ")
        if len(self.sender.encode()) > _MAX_OPERATOR_BYTES or len(self.receiver.encode()) > _MAX_OPERATOR_BYTES:
            raise ValueError("operator ids are limited to 32 bytes")
        if self.amount < 0 or self.fee < 0 or self.withholding < 0:
            raise ValueError("amounts must be non-negative")

    @property
    def rejected(self) -> bool:
        return self.verdict is Verdict.REJECTED

    def with_status(self, status: TxStatus) -> "TransactionRecord":
        return TransactionRecord(
            self.tx_id, self.timestamp_ms, self.sender, self.receiver, self.amount,
            self.currency, self.fee, self.withholding, status, self.verdict, self.reason,
        )

    def to_json(self) -> dict:
        return {
            "tx_id": self.tx_id.hex(),
            "timestamp_ms": self.timestamp_ms,
            "sender": self.sender,
            "receiver": self.receiver,
            "amount": self.amount,
            "currency": self.currency,
            "fee": self.fee,
            "withholding": self.withholding,
            "status": self.status.name,
            "verdict": self.verdict.name,
            "reason": self.reason.name,
        }


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _U16.pack(len(raw)) + raw


def canonical_bytes(tx: TransactionRecord) -> bytes:
    """Canonical layout: declared field order, fixed-width LE integers,
    u16-length-prefixed UTF-8 strings, enums as u8."""
    s = tx.sender.encode("utf-8")
    r = tx.receiver.encode("utf-8")
    c = tx.currency.encode("utf-8")
    return b"".join((
        tx.tx_id,
        _U64.pack(tx.timestamp_ms),
        _U16.pack(len(s)), s,
        _U16.pack(len(r)), r,
        _U64.pack(tx.amount),
        _U16.pack(len(c)), c,
        _U64.pack(tx.fee),
        _TAIL.pack(tx.withholding, tx.status, tx.verdict, tx.reason),
    ))


def compute_tx_hash(tx: TransactionRecord) -> bytes:
    return hashlib.sha256(canonical_bytes(tx)).digest()


def _tx_extent(buf: bytes, off: int) -> int:
    """Return the end offset of the transaction record starting at ``off``."""
    try:
        pos = off + 24
        (n,) = _U16.unpack_from(buf, pos)
        pos += 2 + n
        (n,) = _U16.unpack_from(buf, pos)
        pos += 2 + n + 8
        (n,) = _U16.unpack_from(buf, pos)
        pos += 2 + n + 8 + 11
    except struct.error as exc:
        raise FormatError("truncated transaction record") from exc
    if pos > len(buf):
        raise FormatError("truncated transaction record")
    return pos


def decode_tx(buf: bytes, off: int = 0) -> tuple[TransactionRecord, int]:
    """Parse one canonical record at ``off``; returns the record and end offset."""
    end = _tx_extent(buf, off)
    tx_id = bytes(buf[off:off + 16])
    (ts,) = _U64.unpack_from(buf, off + 16)
    pos = off + 24

    def read_str() -> str:
        nonlocal pos
        (n,) = _U16.unpack_from(buf, pos)
        raw = bytes(buf[pos + 2:pos + 2 + n])
        pos += 2 + n
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("invalid UTF-8 in record") from exc

    sender = read_str()
    receiver = read_str()
    (amount,) = _U64.unpack_from(buf, pos)
    pos += 8
    currency = read_str()
    (fee,) = _U64.unpack_from(buf, pos)
    withholding, status, verdict, reason = _TAIL.unpack_from(buf, pos + 8)
    try:
        tx = TransactionRecord(
            tx_id, ts, sender, receiver, amount, currency, fee, withholding,
            TxStatus(status), Verdict(verdict), RejectReason(reason),
        )
    except ValueError as exc:
        raise FormatError(f"invalid transaction record: {exc}") from exc
    return tx, end


def payload_root(hashes: Sequence[bytes]) -> bytes:
    """Binary Merkle root; an odd node at any level is paired with itself."""
    if not hashes:
        return EMPTY_ROOT
    sha = hashlib.sha256
    level = list(hashes)
    while True:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha(level[i] + level[i + 1]).digest() for i in range(0, len(level), 2)]
        if len(level) == 1:
            return level[0]


@dataclass(frozen=True, slots=True)
class BlockHeader:
    height: int
    timestamp_ms: int
    prev_hash: bytes
    payload_root: bytes
    tx_count: int

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.height, self.timestamp_ms, self.prev_hash, self.payload_root, self.tx_count)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BlockHeader":
        if len(raw) < HEADER_SIZE:
            raise FormatError("truncated block header")
        return cls(*_HEADER.unpack_from(raw, 0))

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()


GENESIS_HEADER = BlockHeader(0, 0, ZERO_DIGEST, EMPTY_ROOT, 0)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    txs: tuple[TransactionRecord, ...]
    raw: bytes  # header bytes followed by the canonical transaction bytes

    @property
    def height(self) -> int:
        return self.header.height

    def digest(self) -> bytes:
        return hashlib.sha256(self.raw[:HEADER_SIZE]).digest()

    @classmethod
    def from_record(cls, raw: bytes) -> "Block":
        header = BlockHeader.from_bytes(raw)
        txs = []
        off = HEADER_SIZE
        for _ in range(header.tx_count):
            tx, off = decode_tx(raw, off)
            txs.append(tx)
        if off != len(raw):
            raise FormatError("trailing bytes after block transactions")
        return cls(header, tuple(txs), raw)

    def to_json(self) -> dict:
        h = self.header
        return {
            "height": h.height,
            "timestamp_ms": h.timestamp_ms,
            "prev_hash": h.prev_hash.hex(),
            "payload_root": h.payload_root.hex(),
            "tx_count": h.tx_count,
            "digest": self.digest().hex(),
            "txs": [tx.to_json() for tx in self.txs],
        }


def build_block(height: int, prev_hash: bytes, txs: Sequence[TransactionRecord], timestamp_ms: int,
                tx_bytes: Sequence[bytes] | None = None) -> Block:
    """Assemble a block without touching any chain. ``tx_bytes`` may carry
    precomputed canonical encodings of ``txs``."""
    if tx_bytes is None:
        tx_bytes = [canonical_bytes(tx) for tx in txs]
    sha = hashlib.sha256
    root = payload_root([sha(b).digest() for b in tx_bytes])
    header = BlockHeader(height, timestamp_ms, prev_hash, root, len(txs))
    return Block(header, tuple(txs), header.to_bytes() + b"".join(tx_bytes))


@dataclass(frozen=True)
class ChainVerdict:
    valid: bool
    first_broken_height: int | None = None
    broken_link_kind: BrokenLink | None = None

    def __post_init__(self):
        if self.valid != (self.first_broken_height is None):
            raise ValueError("valid verdicts carry no broken height and vice versa")

    def describe(self) -> str:
        if self.valid:
            return "Valid"
        return f"Invalid at height {self.first_broken_height} ({self.broken_link_kind.value})"


VALID = ChainVerdict(True)


class HashChain:
    """Ordered block records, genesis first.

    Records are kept as raw bytes so verification sees exactly what is stored.
    ``anchor`` is the trusted digest of the tip header as of the last append;
    it lets verification catch edits to the tip header that no later block
    links to. Chains decoded from a file carry no anchor unless one is given.
    """

    def __init__(self, records: Iterable[bytes] | None = None, anchor: bytes | None = None):
        if records is None:
            genesis = GENESIS_HEADER.to_bytes()
            self._records = [genesis]
            self.anchor = hashlib.sha256(genesis).digest()
        else:
            self._records = list(records)
            if not self._records:
                raise FormatError("a chain needs at least a genesis block")
            self.anchor = anchor

    @property
    def tip_height(self) -> int:
        return len(self._records) - 1

    def __len__(self) -> int:
        return len(self._records)

    def record(self, height: int) -> bytes:
        return self._records[height]

    def records(self) -> list[bytes]:
        return list(self._records)

    def header(self, height: int) -> BlockHeader:
        return BlockHeader.from_bytes(self._records[height])

    def block(self, height: int) -> Block:
        return Block.from_record(self._records[height])

    def blocks(self) -> Iterator[Block]:
        for h in range(len(self._records)):
            yield self.block(h)

    def header_digest(self, height: int) -> bytes:
        return hashlib.sha256(self._records[height][:HEADER_SIZE]).digest()

    def tip_digest(self) -> bytes:
        return self.header_digest(self.tip_height)

    def copy(self) -> "HashChain":
        return HashChain(self._records, self.anchor)

    def append_built(self, block: Block) -> None:
        """Append a block assembled elsewhere (e.g. agreed by consensus)."""
        expected_prev = self.anchor if self.anchor is not None else self.tip_digest()
        if block.header.height != len(self._records) or block.header.prev_hash != expected_prev:
            raise StatusViolation(f"block {block.header.height} does not extend the tip")
        self._records.append(block.raw)
        self.anchor = block.digest()

    def __eq__(self, other):
        return isinstance(other, HashChain) and self._records == other._records


def append_block(chain: HashChain, txs: Sequence[TransactionRecord], timestamp_ms: int) -> Block:
    """Append ``txs`` as a new block. Accepted transactions advance to Appended;
    rejection records are stored as-is."""
    if not txs:
        raise EmptyBatch("cannot append an empty batch")
    stored = []
    for tx in txs:
        if tx.rejected:
            stored.append(tx)
        elif tx.status < TxStatus.CONSENSUS_APPROVED:
            raise StatusViolation(f"tx {tx.tx_id.hex()} is {tx.status.name}, not consensus-approved")
        else:
            stored.append(tx.with_status(TxStatus.APPENDED))
    block = build_block(chain.tip_height + 1, chain.tip_digest(), stored, timestamp_ms)
    chain.append_built(block)
    return block


def _tx_slices(raw: bytes, count: int) -> list[bytes]:
    out = []
    off = HEADER_SIZE
    for _ in range(count):
        end = _tx_extent(raw, off)
        out.append(raw[off:end])
        off = end
    if off != len(raw):
        raise FormatError("trailing bytes")
    return out


def verify_chain(chain: HashChain) -> ChainVerdict:
    """Recompute every link and payload root; report the lowest broken height.

    A header field that only the successor commits to (the timestamp) is
    reported at the successor's height, or at ``tip + 1`` when the anchor is
    what exposes it. A block sitting where an earlier height is expected and
    not linking to its predecessor is reported under its own height (blocks
    were removed in front of it).
    """
    sha = hashlib.sha256
    prev = ZERO_DIGEST
    for pos, raw in enumerate(chain._records):
        try:
            header = BlockHeader.from_bytes(raw)
        except FormatError:
            return ChainVerdict(False, pos, BrokenLink.PAYLOAD_ROOT_MISMATCH)
        link_ok = header.prev_hash == prev
        if header.height != pos:
            at = header.height if (not link_ok and header.height > pos) else pos
            return ChainVerdict(False, at, BrokenLink.HEIGHT_GAP)
        if not link_ok:
            return ChainVerdict(False, pos, BrokenLink.PREV_HASH_MISMATCH)
        try:
            leaves = [sha(s).digest() for s in _tx_slices(raw, header.tx_count)]
        except FormatError:
            return ChainVerdict(False, pos, BrokenLink.PAYLOAD_ROOT_MISMATCH)
        if payload_root(leaves) != header.payload_root:
            return ChainVerdict(False, pos, BrokenLink.PAYLOAD_ROOT_MISMATCH)
        prev = sha(raw[:HEADER_SIZE]).digest()
    if chain.anchor is not None and prev != chain.anchor:
        return ChainVerdict(False, len(chain._records), BrokenLink.PREV_HASH_MISMATCH)
    return VALID


def tamper(chain: HashChain, height: int, byte_offset: int, mask: int = 0xFF) -> HashChain:
    """Copy of ``chain`` with one byte of block ``height`` XOR-ed by ``mask``."""
    if not 0 <= height <= chain.tip_height:
        raise OutOfRange(f"height {height} outside 0..{chain.tip_height}")
    raw = chain.record(height)
    if not 0 <= byte_offset < len(raw):
        raise OutOfRange(f"byte offset {byte_offset} outside 0..{len(raw) - 1}")
    if not 1 <= mask <= 0xFF:
        raise ValueError("mask must flip at least one bit of a byte")
    mutated = bytearray(raw)
    mutated[byte_offset] ^= mask
    records = chain.records()
    records[height] = bytes(mutated)
    return HashChain(records, chain.anchor)


def state_digest(state) -> bytes:
    """Digest of balances and pools, each sorted by id; signed 128-bit LE amounts.

    ``state`` needs ``balances``, ``fee_pools`` (mappings) and
    ``withholding_pool`` (int).
    """
    out = io.BytesIO()
    for mapping in (state.balances, state.fee_pools):
        out.write(_U32.pack(len(mapping)))
        for key in sorted(mapping):
            out.write(_pack_str(key))
            out.write(int(mapping[key]).to_bytes(16, "little", signed=True))
    out.write(int(state.withholding_pool).to_bytes(16, "little", signed=True))
    return hashlib.sha256(out.getvalue()).digest()


# -- block-log file ---------------------------------------------------------

def write_block_log(chain: HashChain, fp: BinaryIO) -> None:
    fp.write(MAGIC)
    fp.write(_U16.pack(FORMAT_VERSION))
    for raw in chain._records:
        fp.write(_U32.pack(len(raw)))
        fp.write(raw)


def encode_block_log(chain: HashChain) -> bytes:
    buf = io.BytesIO()
    write_block_log(chain, buf)
    return buf.getvalue()


def decode_block_log(data: bytes, anchor: bytes | None = None) -> HashChain:
    """Parse an ``SBLK`` file. Record contents are not validated here; that
    is ``verify_chain``'s job. Only framing errors raise ``FormatError``."""
    if len(data) < 6 or data[:4] != MAGIC:
        raise FormatError("not a block log (bad magic)")
    (version,) = _U16.unpack_from(data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported block-log version {version}")
    pos = 6
    records = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise FormatError("truncated record length")
        (n,) = _U32.unpack_from(data, pos)
        pos += 4
        if n < HEADER_SIZE or pos + n > len(data):
            raise FormatError(f"truncated block record at offset {pos - 4}")
        records.append(data[pos:pos + n])
        pos += n
    if not records:
        raise FormatError("block log holds no blocks")
    return HashChain(records, anchor)


def read_block_log(path, anchor: bytes | None = None) -> HashChain:
    with open(path, "rb") as fp:
        return decode_block_log(fp.read(), anchor)


def save_block_log(chain: HashChain, path) -> None:
    with open(path, "wb") as fp:
        write_block_log(chain, fp)


def export_jsonl(chain: HashChain, fp) -> None:
    """One JSON object per block, for human inspection."""
    for block in chain.blocks():
        fp.write(json.dumps(block.to_json(), sort_keys=True, separators=(",", ":")))
        fp.write("\n")
