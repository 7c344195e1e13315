"""Protocol messages, their byte-level codec, and the in-memory transport.

Frame layout: 4-byte big-endian unsigned length, then the payload.
Payload: 1-byte protocol version (0x01), 1-byte message tag, then the
message fields in declared order.  Integers are big-endian fixed-width
(4 bytes unless noted), reals are 8-byte IEEE 754 big-endian, vectors are
a 4-byte count followed by elements, and big integers are a 4-byte count
followed by big-endian magnitude bytes.

The in-memory transport runs the same codec on every message so that byte
accounting reflects what a stream socket would carry.  No message type can
carry raw samples; the only payloads are prototypes, ciphertexts,
decryption shares and head weights.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

import numpy as np
from gmpy2 import mpz

from .paillier import Ciphertext, DecryptionShare
from .prototype import PrototypeSet

PROTOCOL_VERSION = 1

SERVER = -1  # peer id of the server

_TAG_GLOBAL_PROTOTYPES = 1
_TAG_PLAIN_UPDATE = 2
_TAG_ENCRYPTED_UPDATE = 3
_TAG_SHARE_REQUEST = 4
_TAG_SHARE_RESPONSE = 5
_TAG_HEAD_WEIGHTS = 6


class DecodeError(ValueError):
    """A frame failed to decode (bad tag, version, length or truncation)."""


class TransportError(RuntimeError):
    """Delivery contract violated (no message pending, stale round, ...)."""


@dataclass(frozen=True)
class GlobalPrototypes:
    round_no: int
    prototypes: PrototypeSet
    initialized: bool


@dataclass(frozen=True)
class PlainUpdate:
    round_no: int
    client_id: int
    prototypes: PrototypeSet


@dataclass(frozen=True)
class EncryptedUpdate:
    round_no: int
    client_id: int
    vectors: dict[int, list[Ciphertext]]  # class id -> per-coordinate ciphertexts


@dataclass(frozen=True)
class ShareRequest:
    round_no: int
    ciphertexts: list[Ciphertext]


@dataclass(frozen=True)
class ShareResponse:
    round_no: int
    client_id: int
    shares: list[DecryptionShare]


@dataclass(frozen=True)
class HeadWeights:
    round_no: int
    client_id: int
    n_samples: int
    values: np.ndarray


Message = (
    GlobalPrototypes
    | PlainUpdate
    | EncryptedUpdate
    | ShareRequest
    | ShareResponse
    | HeadWeights
)


def payload_value_count(msg: Message) -> int:
    """Number of payload values (reals or ciphertexts) a message carries."""
    if isinstance(msg, (GlobalPrototypes, PlainUpdate)):
        return sum(vec.shape[0] for _, vec, _ in msg.prototypes.items())
    if isinstance(msg, EncryptedUpdate):
        return sum(len(cts) for cts in msg.vectors.values())
    if isinstance(msg, ShareRequest):
        return len(msg.ciphertexts)
    if isinstance(msg, ShareResponse):
        return len(msg.shares)
    if isinstance(msg, HeadWeights):
        return int(msg.values.shape[0])
    raise TypeError(f"unknown message type {type(msg)!r}")


# ---------------------------------------------------------------------------
# primitive writers/readers
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated frame")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def i32(self) -> int:
        return struct.unpack(">i", self.take(4))[0]

    def f64_array(self) -> np.ndarray:
        n = self.u32()
        raw = self.take(8 * n)
        return np.frombuffer(raw, dtype=">f8").astype(np.float64)

    def bigint(self) -> mpz:
        n = self.u32()
        return mpz(int.from_bytes(self.take(n), "big"))


def _u32(v: int) -> bytes:
    return struct.pack(">I", v)


def _i32(v: int) -> bytes:
    return struct.pack(">i", v)


def _f64_array(a: np.ndarray) -> bytes:
    return _u32(len(a)) + np.asarray(a, dtype=">f8").tobytes()


def _bigint(v, width: int | None = None) -> bytes:
    v = int(v)
    raw = v.to_bytes(width if width is not None else max(1, (v.bit_length() + 7) // 8), "big")
    return _u32(len(raw)) + raw


def _prototype_set(ps: PrototypeSet) -> bytes:
    parts = [_u32(len(ps))]
    for j, vec, count in ps.items():
        parts.append(_u32(j))
        parts.append(_u32(count))
        parts.append(_f64_array(vec))
    return b"".join(parts)


def _read_prototype_set(r: _Reader) -> PrototypeSet:
    n = r.u32()
    vectors: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for _ in range(n):
        j = r.u32()
        counts[j] = r.u32()
        vectors[j] = r.f64_array()
    try:
        return PrototypeSet(vectors, counts)
    except ValueError as exc:
        raise DecodeError(f"invalid prototype payload: {exc}") from None


# ---------------------------------------------------------------------------
# message codec
# ---------------------------------------------------------------------------


def encode_message(msg: Message, ciphertext_width: int | None = None) -> bytes:
    """Encode to a full frame including the 4-byte length prefix.

    ciphertext_width pads big integers to a fixed byte width so frame
    sizes do not depend on ciphertext values.
    """
    body = bytearray([PROTOCOL_VERSION])
    if isinstance(msg, GlobalPrototypes):
        body.append(_TAG_GLOBAL_PROTOTYPES)
        body += _u32(msg.round_no)
        body.append(1 if msg.initialized else 0)
        body += _prototype_set(msg.prototypes)
    elif isinstance(msg, PlainUpdate):
        body.append(_TAG_PLAIN_UPDATE)
        body += _u32(msg.round_no)
        body += _u32(msg.client_id)
        body += _prototype_set(msg.prototypes)
    elif isinstance(msg, EncryptedUpdate):
        body.append(_TAG_ENCRYPTED_UPDATE)
        body += _u32(msg.round_no)
        body += _u32(msg.client_id)
        body += _u32(len(msg.vectors))
        for j in sorted(msg.vectors):
            body += _u32(j)
            cts = msg.vectors[j]
            body += _u32(len(cts))
            for c in cts:
                body += _bigint(c.value, ciphertext_width)
    elif isinstance(msg, ShareRequest):
        body.append(_TAG_SHARE_REQUEST)
        body += _u32(msg.round_no)
        body += _u32(len(msg.ciphertexts))
        for c in msg.ciphertexts:
            body += _bigint(c.value, ciphertext_width)
    elif isinstance(msg, ShareResponse):
        body.append(_TAG_SHARE_RESPONSE)
        body += _u32(msg.round_no)
        body += _u32(msg.client_id)
        body += _u32(len(msg.shares))
        for s in msg.shares:
            body += _u32(s.party)
            body += _bigint(s.value, ciphertext_width)
    elif isinstance(msg, HeadWeights):
        body.append(_TAG_HEAD_WEIGHTS)
        body += _u32(msg.round_no)
        body += _u32(msg.client_id)
        body += _u32(msg.n_samples)
        body += _f64_array(msg.values)
    else:
        raise TypeError(f"cannot encode {type(msg)!r}")
    return _u32(len(body)) + bytes(body)


def decode_message(frame: bytes) -> Message:
    """Decode one full frame (length prefix included)."""
    if len(frame) < 4:
        raise DecodeError("frame shorter than its length prefix")
    (length,) = struct.unpack(">I", frame[:4])
    if len(frame) != 4 + length:
        raise DecodeError(
            f"frame length mismatch: prefix says {length}, got {len(frame) - 4}"
        )
    r = _Reader(frame, 4)
    version = r.u8()
    if version != PROTOCOL_VERSION:
        raise DecodeError(f"unsupported protocol version {version}")
    tag = r.u8()
    if tag == _TAG_GLOBAL_PROTOTYPES:
        round_no = r.u32()
        initialized = r.u8() != 0
        ps = _read_prototype_set(r)
        msg: Message = GlobalPrototypes(round_no, ps, initialized)
    elif tag == _TAG_PLAIN_UPDATE:
        round_no = r.u32()
        client_id = r.u32()
        msg = PlainUpdate(round_no, client_id, _read_prototype_set(r))
    elif tag == _TAG_ENCRYPTED_UPDATE:
        round_no = r.u32()
        client_id = r.u32()
        n_classes = r.u32()
        vectors: dict[int, list[Ciphertext]] = {}
        for _ in range(n_classes):
            j = r.u32()
            cnt = r.u32()
            vectors[j] = [Ciphertext(r.bigint()) for _ in range(cnt)]
        msg = EncryptedUpdate(round_no, client_id, vectors)
    elif tag == _TAG_SHARE_REQUEST:
        round_no = r.u32()
        cnt = r.u32()
        msg = ShareRequest(round_no, [Ciphertext(r.bigint()) for _ in range(cnt)])
    elif tag == _TAG_SHARE_RESPONSE:
        round_no = r.u32()
        client_id = r.u32()
        cnt = r.u32()
        shares = []
        for _ in range(cnt):
            party = r.u32()
            shares.append(DecryptionShare(party=party, value=r.bigint()))
        msg = ShareResponse(round_no, client_id, shares)
    elif tag == _TAG_HEAD_WEIGHTS:
        round_no = r.u32()
        client_id = r.u32()
        n_samples = r.u32()
        msg = HeadWeights(round_no, client_id, n_samples, r.f64_array())
    else:
        raise DecodeError(f"unknown message tag {tag}")
    if r.pos != len(frame):
        raise DecodeError(f"{len(frame) - r.pos} trailing bytes after message")
    return msg


# ---------------------------------------------------------------------------
# in-memory transport with honest byte accounting
# ---------------------------------------------------------------------------


class InMemoryTransport:
    """Exactly-once, order-preserving delivery per (src, dst) pair.

    Every message goes through encode_message/decode_message so byte
    counters equal what a stream socket would have carried.  With
    capture_frames=True all raw frames are retained for inspection.
    """

    def __init__(self, ciphertext_width: int | None = None, capture_frames: bool = False):
        self.ciphertext_width = ciphertext_width
        self._queues: dict[tuple[int, int], deque[bytes]] = {}
        self._bytes: dict[tuple[int, int], int] = {}
        self._last_round: dict[tuple[int, int], int] = {}
        self.captured: list[bytes] = []
        self._capture = capture_frames

    def send(self, src: int, dst: int, msg: Message) -> int:
        """Encode and enqueue; returns the frame size in bytes."""
        round_no = msg.round_no
        key = (src, dst)
        if round_no < self._last_round.get(key, 0):
            raise TransportError(
                f"round {round_no} precedes round {self._last_round[key]} "
                f"already sent on {key}"
            )
        self._last_round[key] = round_no
        frame = encode_message(msg, self.ciphertext_width)
        self._queues.setdefault(key, deque()).append(frame)
        self._bytes[key] = self._bytes.get(key, 0) + len(frame)
        if self._capture:
            self.captured.append(frame)
        return len(frame)

    def recv(self, src: int, dst: int) -> Message:
        key = (src, dst)
        queue = self._queues.get(key)
        if not queue:
            raise TransportError(f"no message pending from {src} to {dst}")
        return decode_message(queue.popleft())

    def bytes_sent(self, src: int, dst: int) -> int:
        return self._bytes.get((src, dst), 0)

    def reset_byte_counters(self) -> None:
        self._bytes.clear()

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())
