import numpy as np
import pytest
from gmpy2 import mpz

from fedph.paillier import Ciphertext, DecryptionShare
from fedph.prototype import PrototypeSet
from fedph.wire import (
    SERVER,
    DecodeError,
    EncryptedUpdate,
    GlobalPrototypes,
    HeadWeights,
    InMemoryTransport,
    PlainUpdate,
    ShareRequest,
    ShareResponse,
    TransportError,
    decode_message,
    encode_message,
    payload_value_count,
)


def proto_set():
    return PrototypeSet(
        {0: np.array([1.5, -2.5]), 3: np.array([0.0, 0.25])},
        {0: 4, 3: 1},
    )


def sample_messages():
    ps = proto_set()
    cts = [Ciphertext(mpz(123456789)), Ciphertext(mpz(42))]
    return [
        GlobalPrototypes(1, ps, True),
        GlobalPrototypes(1, PrototypeSet.empty(), False),
        PlainUpdate(2, 3, ps),
        EncryptedUpdate(2, 1, {0: cts, 5: [Ciphertext(mpz(7))]}),
        ShareRequest(3, cts),
        ShareResponse(3, 2, [DecryptionShare(1, mpz(99)), DecryptionShare(4, mpz(1))]),
        HeadWeights(4, 0, 120, np.array([1.0, -0.5, 3.25])),
    ]


class TestCodec:
    @pytest.mark.parametrize("idx", range(7))
    def test_roundtrip_identity(self, idx):
        msg = sample_messages()[idx]
        back = decode_message(encode_message(msg))
        assert type(back) is type(msg)
        assert back.round_no == msg.round_no
        if isinstance(msg, (GlobalPrototypes, PlainUpdate)):
            assert back.prototypes.classes == msg.prototypes.classes
            for j in msg.prototypes.classes:
                assert np.array_equal(back.prototypes.vector(j), msg.prototypes.vector(j))
                assert back.prototypes.count(j) == msg.prototypes.count(j)
        if isinstance(msg, GlobalPrototypes):
            assert back.initialized == msg.initialized
        if isinstance(msg, EncryptedUpdate):
            assert {
                j: [c.value for c in cts] for j, cts in back.vectors.items()
            } == {j: [c.value for c in cts] for j, cts in msg.vectors.items()}
        if isinstance(msg, ShareResponse):
            assert back.shares == msg.shares
        if isinstance(msg, HeadWeights):
            assert back.n_samples == msg.n_samples
            assert np.array_equal(back.values, msg.values)

    def test_truncated_frame_raises_decode_error(self):
        frame = encode_message(sample_messages()[0])
        for cut in (2, 5, len(frame) // 2, len(frame) - 1):
            with pytest.raises(DecodeError):
                decode_message(frame[:cut])

    def test_bad_version_rejected(self):
        frame = bytearray(encode_message(sample_messages()[2]))
        frame[4] = 0x7F
        with pytest.raises(DecodeError):
            decode_message(bytes(frame))

    def test_bad_tag_rejected(self):
        frame = bytearray(encode_message(sample_messages()[2]))
        frame[5] = 0xEE
        with pytest.raises(DecodeError):
            decode_message(bytes(frame))

    def test_trailing_garbage_rejected(self):
        frame = encode_message(sample_messages()[6])
        grown = frame[:4] + frame[4:] + b"xx"
        with pytest.raises(DecodeError):
            decode_message(grown)

    def test_fuzz_random_bytes_never_crash(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(0, 64))
            blob = rng.bytes(n)
            try:
                decode_message(blob)
            except DecodeError:
                pass  # the only acceptable failure mode

    def test_ciphertext_width_pads_frames(self):
        small = EncryptedUpdate(1, 0, {0: [Ciphertext(mpz(1))]})
        big = EncryptedUpdate(1, 0, {0: [Ciphertext(mpz(2) ** 1000)]})
        w = 130
        assert len(encode_message(small, w)) == len(encode_message(big, w))


class TestPayloadValueCount:
    def test_prototype_payload(self):
        assert payload_value_count(PlainUpdate(1, 0, proto_set())) == 4

    def test_encrypted_payload(self):
        msg = EncryptedUpdate(1, 0, {0: [Ciphertext(mpz(1))] * 3})
        assert payload_value_count(msg) == 3

    def test_head_weights_payload(self):
        assert payload_value_count(HeadWeights(1, 0, 10, np.zeros(33222))) == 33222


class TestInMemoryTransport:
    def test_order_preserving_exactly_once(self):
        t = InMemoryTransport()
        a = PlainUpdate(1, 0, proto_set())
        b = PlainUpdate(2, 0, proto_set())
        t.send(0, SERVER, a)
        t.send(0, SERVER, b)
        assert t.recv(0, SERVER).round_no == 1
        assert t.recv(0, SERVER).round_no == 2
        with pytest.raises(TransportError):
            t.recv(0, SERVER)

    def test_byte_count_matches_frame_length(self):
        t = InMemoryTransport()
        msg = HeadWeights(1, 2, 50, np.arange(10.0))
        frame_len = len(encode_message(msg))
        sent = t.send(2, SERVER, msg)
        assert sent == frame_len
        assert t.bytes_sent(2, SERVER) == frame_len
        assert t.bytes_sent(SERVER, 2) == 0

    def test_round_monotonicity_enforced(self):
        t = InMemoryTransport()
        t.send(0, SERVER, PlainUpdate(5, 0, proto_set()))
        with pytest.raises(TransportError):
            t.send(0, SERVER, PlainUpdate(4, 0, proto_set()))

    def test_capture_collects_frames(self):
        t = InMemoryTransport(capture_frames=True)
        msg = PlainUpdate(1, 0, proto_set())
        t.send(0, SERVER, msg)
        assert t.captured == [encode_message(msg)]
