"""Threshold additively-homomorphic encryption with a fixed-point codec.

Paillier encryption over N = p*q with safe primes, where the decryption
exponent is Shamir-shared so that any k of m parties can jointly decrypt
and fewer cannot.  Key generation is trusted-dealer: the simulator plays
dealer and hands each party its share.  Ciphertexts multiply to add their
plaintexts, which is what lets a server aggregate client vectors it can
never read individually.

Performance notes.  Encryption randomness is r = h^alpha for a fixed
public h of large order and a short random exponent alpha, so the
randomizer is a fixed-base power accelerated by a per-key precomputed
table; this trades the conservative full-length exponent for speed and is
why desk-scale benchmarks at 2048-bit keys are feasible in minutes.
Arithmetic is NOT constant time anywhere.  This module is a
protocol-fidelity artifact, not production cryptography.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np
from gmpy2 import mpz

from .mathcore import RngStream

VALID_KEY_BITS = (512, 1024, 2048)

# short randomizer exponent; statistical parameter for the fixed-base scheme
RANDOMIZER_BITS = 256

# fixed-base table window (bits per digit)
_WINDOW = 8

# give up on safe-prime search after this many candidates
_PRIME_RETRY_BOUND = 20_000_000


class CryptoError(RuntimeError):
    pass


class PrimeGenerationError(CryptoError):
    """Safe-prime search exhausted its retry bound."""


class ThresholdError(CryptoError):
    """Fewer distinct decryption shares than the threshold requires."""


class CombinationError(CryptoError):
    """Decryption shares are mutually inconsistent."""


class EncodingRangeError(CryptoError, ValueError):
    """A value falls outside what the fixed-point codec can represent."""


@dataclass(frozen=True)
class PublicKey:
    modulus: mpz  # N
    n_squared: mpz
    threshold: int  # k: shares needed to decrypt
    parties: int  # m
    randomizer_base: mpz  # h^N mod N^2, base for encryption randomness
    verification_base: mpz  # v, a random square mod N^2
    verifications: tuple[mpz, ...]  # v^(delta * s_i) per party

    @property
    def generator(self) -> mpz:
        return self.modulus + 1

    @property
    def delta(self) -> int:
        return math.factorial(self.parties)

    @property
    def bits(self) -> int:
        return self.modulus.bit_length()

    def ciphertext_bytes(self) -> int:
        return (self.n_squared.bit_length() + 7) // 8


@dataclass(frozen=True)
class KeyShare:
    party: int  # 1-based party index
    value: mpz  # share of the secret exponent


@dataclass(frozen=True)
class Ciphertext:
    value: mpz


@dataclass(frozen=True)
class DecryptionShare:
    party: int
    value: mpz


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed reals in [-value_bound, value_bound] as integers mod N.

    max_summands bounds how many encodings may be homomorphically added
    before decoding; the no-wraparound guard max_summands * value_bound *
    2^frac_bits < N/2 is checked against the key in use.
    """

    frac_bits: int = 24
    value_bound: float = 1.0
    max_summands: int = 1

    def __post_init__(self):
        if self.frac_bits < 1:
            raise ValueError("frac_bits must be positive")
        if self.value_bound <= 0:
            raise ValueError("value_bound must be positive")
        if self.max_summands < 1:
            raise ValueError("max_summands must be at least 1")

    def check_key(self, pk: PublicKey) -> None:
        limit = mpz(self.max_summands) * mpz(
            int(math.ceil(self.value_bound * (1 << self.frac_bits)))
        )
        if not 2 * limit < pk.modulus:
            raise EncodingRangeError(
                "codec range exceeds the plaintext space: "
                f"{self.max_summands} summands of bound {self.value_bound} "
                f"at {self.frac_bits} fractional bits do not fit under a "
                f"{pk.bits}-bit modulus"
            )


# ---------------------------------------------------------------------------
# key generation
# ---------------------------------------------------------------------------


def _rand_bits(rng: RngStream, bits: int) -> mpz:
    return mpz(int.from_bytes(rng.bytes((bits + 7) // 8), "big")) & (
        (mpz(1) << bits) - 1
    )


def _rand_below(rng: RngStream, bound: mpz) -> mpz:
    bits = bound.bit_length() + 64
    return _rand_bits(rng, bits) % bound


@lru_cache(maxsize=1)
def _sieve_primes(limit: int = 50_000) -> tuple[int, ...]:
    flags = np.ones(limit, dtype=bool)
    flags[:2] = False
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = False
    return tuple(int(p) for p in np.nonzero(flags)[0][1:])  # odd primes only


def _safe_prime(rng: RngStream, half_bits: int, lower: mpz) -> mpz:
    """Random safe prime p = 2q+1 of half_bits bits with p >= lower."""
    small = _sieve_primes()
    for _ in range(_PRIME_RETRY_BOUND):
        q = _rand_bits(rng, half_bits - 1)
        q |= mpz(1) << (half_bits - 2)
        q |= 1
        p = 2 * q + 1
        if p < lower:
            continue
        composite = False
        for r in small:
            if q % r == 0 or p % r == 0:
                composite = True
                break
        if composite:
            continue
        if gmpy2.is_prime(q) and gmpy2.is_prime(p):
            return p
    raise PrimeGenerationError(
        f"no {half_bits}-bit safe prime found in {_PRIME_RETRY_BOUND} candidates"
    )


def keygen(bits: int, parties: int, threshold: int, rng: RngStream):
    """Trusted-dealer key generation.

    Returns (PublicKey, [KeyShare]) where any `threshold` distinct shares
    decrypt and fewer do not.
    """
    if bits not in VALID_KEY_BITS:
        raise ValueError(f"bits must be one of {VALID_KEY_BITS}")
    if not 2 <= threshold <= parties:
        raise ValueError("need 2 <= threshold <= parties")
    half = bits // 2
    # force p, q >= sqrt(2) * 2^(half-1) so N has exactly `bits` bits
    lower = gmpy2.isqrt(mpz(1) << (bits - 1)) + 1
    p = _safe_prime(rng, half, lower)
    while True:
        q = _safe_prime(rng, half, lower)
        if q != p:
            break
    n = p * q
    n2 = n * n
    m_secret = ((p - 1) // 2) * ((q - 1) // 2)
    # d = 0 mod m_secret, d = 1 mod n: decryption exponent
    d = m_secret * gmpy2.invert(m_secret, n) % (n * m_secret)
    share_mod = n * m_secret

    coeffs = [d] + [_rand_below(rng, share_mod) for _ in range(threshold - 1)]
    shares = []
    for i in range(1, parties + 1):
        acc = mpz(0)
        x = mpz(1)
        for a in coeffs:
            acc = (acc + a * x) % share_mod
            x *= i
        shares.append(KeyShare(party=i, value=acc))

    # encryption randomizer base: (-x^2)^N has large order in Z*_{N^2}
    x = _rand_below(rng, n - 2) + 2
    h = (-(x * x)) % n
    randomizer_base = gmpy2.powmod(h, n, n2)

    # share-verification data per the threshold scheme (kept for wire
    # compatibility; correctness proofs of shares are out of scope)
    y = _rand_below(rng, n2 - 2) + 2
    v = y * y % n2
    delta = math.factorial(parties)
    verifications = tuple(
        gmpy2.powmod(v, delta * s.value, n2) for s in shares
    )

    pk = PublicKey(
        modulus=n,
        n_squared=n2,
        threshold=threshold,
        parties=parties,
        randomizer_base=randomizer_base,
        verification_base=v,
        verifications=verifications,
    )
    return pk, shares


# ---------------------------------------------------------------------------
# encryption and homomorphic addition
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _fixed_base_table(base: mpz, mod: mpz, exp_bits: int):
    """table[i][w] = base^(w << (i*WINDOW)) mod `mod`."""
    nblocks = (exp_bits + _WINDOW - 1) // _WINDOW
    table = []
    g = base
    for _ in range(nblocks):
        row = [mpz(1)] * (1 << _WINDOW)
        for w in range(1, 1 << _WINDOW):
            row[w] = row[w - 1] * g % mod
        table.append(row)
        g = row[-1] * g % mod
    return table


def _fixed_base_pow(table, exponent: mpz, mod: mpz) -> mpz:
    acc = mpz(1)
    mask = (1 << _WINDOW) - 1
    e = int(exponent)
    i = 0
    while e:
        digit = e & mask
        if digit:
            acc = acc * table[i][digit] % mod
        e >>= _WINDOW
        i += 1
    return acc


def encrypt(pk: PublicKey, plaintext, rng: RngStream) -> Ciphertext:
    """Randomized encryption of an integer in [0, N)."""
    pt = mpz(plaintext)
    if not 0 <= pt < pk.modulus:
        raise ValueError("plaintext out of range [0, N)")
    table = _fixed_base_table(pk.randomizer_base, pk.n_squared, RANDOMIZER_BITS)
    alpha = _rand_bits(rng, RANDOMIZER_BITS) | 1
    r = _fixed_base_pow(table, alpha, pk.n_squared)
    c = (1 + pt * pk.modulus) % pk.n_squared * r % pk.n_squared
    return Ciphertext(value=c)


def add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of the sum (mod N) of the two plaintexts."""
    for c in (c1, c2):
        if not 0 <= c.value < pk.n_squared:
            raise ValueError("ciphertext out of range for this key")
    return Ciphertext(value=c1.value * c2.value % pk.n_squared)


# ---------------------------------------------------------------------------
# threshold decryption
# ---------------------------------------------------------------------------


def partial_decrypt(pk: PublicKey, c: Ciphertext, share: KeyShare) -> DecryptionShare:
    """One party's decryption share: c^(2*delta*s_i) mod N^2."""
    if not 1 <= share.party <= pk.parties:
        raise ValueError(f"party index {share.party} outside [1, {pk.parties}]")
    if not 0 <= c.value < pk.n_squared:
        raise ValueError("ciphertext out of range for this key")
    value = gmpy2.powmod(c.value, 2 * pk.delta * share.value, pk.n_squared)
    return DecryptionShare(party=share.party, value=value)


def combine(pk: PublicKey, c: Ciphertext, shares) -> int:
    """Combine >= threshold decryption shares into the plaintext in [0, N).

    Any k-subset of valid shares of the same ciphertext yields the same
    result; the lowest k party indices are used.  Raises ThresholdError
    when too few distinct parties contributed and CombinationError when
    the shares are inconsistent.
    """
    by_party: dict[int, DecryptionShare] = {}
    for s in shares:
        if s.party in by_party and by_party[s.party].value != s.value:
            raise CombinationError(f"conflicting shares for party {s.party}")
        by_party[s.party] = s
    if len(by_party) < pk.threshold:
        raise ThresholdError(
            f"{len(by_party)} distinct shares, need {pk.threshold}"
        )
    chosen = [by_party[p] for p in sorted(by_party)[: pk.threshold]]
    indices = [s.party for s in chosen]
    n2 = pk.n_squared
    acc = mpz(1)
    for s in chosen:
        num, den = 1, 1
        for j in indices:
            if j == s.party:
                continue
            num *= -j
            den *= s.party - j
        lam = pk.delta * num
        if lam % den != 0:
            raise CombinationError("non-integral interpolation coefficient")
        exponent = 2 * (lam // den)
        base = s.value
        if exponent < 0:
            try:
                base = gmpy2.invert(base, n2)
            except ZeroDivisionError:
                raise CombinationError("non-invertible decryption share") from None
            exponent = -exponent
        acc = acc * gmpy2.powmod(base, exponent, n2) % n2
    if (acc - 1) % pk.modulus != 0:
        raise CombinationError("inconsistent decryption shares")
    ell = (acc - 1) // pk.modulus
    scale = gmpy2.invert(4 * mpz(pk.delta) ** 2, pk.modulus)
    return int(ell * scale % pk.modulus)


# ---------------------------------------------------------------------------
# fixed-point codec
# ---------------------------------------------------------------------------


def encode_fixed(value: float, codec: FixedPointCodec, pk: PublicKey) -> mpz:
    """round(value * 2^f) mod N, negatives wrapped to the top of the range."""
    if not math.isfinite(value):
        raise EncodingRangeError("cannot encode a non-finite value")
    if abs(value) > codec.value_bound:
        raise EncodingRangeError(
            f"|{value}| exceeds the codec bound {codec.value_bound}"
        )
    q = mpz(round(value * (1 << codec.frac_bits)))
    return q % pk.modulus


def decode_fixed(
    plaintext, codec: FixedPointCodec, pk: PublicKey, summands: int = 1
) -> float:
    """Inverse of encode_fixed after up to `summands` homomorphic additions."""
    if not 1 <= summands <= codec.max_summands:
        raise EncodingRangeError(
            f"summands must be in [1, {codec.max_summands}], got {summands}"
        )
    p = mpz(plaintext) % pk.modulus
    if p > pk.modulus // 2:
        p -= pk.modulus
    limit = mpz(summands) * (
        mpz(int(math.ceil(codec.value_bound * (1 << codec.frac_bits)))) + 1
    )
    if abs(p) > limit:
        raise EncodingRangeError(
            "decoded magnitude exceeds the summand bound (wraparound?)"
        )
    return float(p) / (1 << codec.frac_bits)


def encrypt_vector(
    pk: PublicKey, vec, codec: FixedPointCodec, rng: RngStream
) -> list[Ciphertext]:
    """Per-coordinate encode + encrypt; order preserved."""
    codec.check_key(pk)
    vec = np.asarray(vec, dtype=np.float64)
    out = []
    for i, v in enumerate(vec):
        try:
            out.append(encrypt(pk, encode_fixed(float(v), codec, pk), rng))
        except EncodingRangeError as exc:
            raise EncodingRangeError(f"coordinate {i}: {exc}") from None
    return out


def decrypt_vector(
    pk: PublicKey,
    ciphertexts,
    key_shares,
    codec: FixedPointCodec,
    summands: int = 1,
) -> np.ndarray:
    """Threshold-decrypt and decode a ciphertext sequence."""
    out = np.empty(len(ciphertexts))
    for i, c in enumerate(ciphertexts):
        parts = [partial_decrypt(pk, c, s) for s in key_shares]
        try:
            out[i] = decode_fixed(combine(pk, c, parts), codec, pk, summands)
        except EncodingRangeError as exc:
            raise EncodingRangeError(f"coordinate {i}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# serialization: length-prefixed big-endian magnitudes
# ---------------------------------------------------------------------------

_TAG_PUBLIC_KEY = 0x01
_TAG_KEY_SHARE = 0x02


def _write_mpz(value: mpz, width: int | None = None) -> bytes:
    raw = int(value).to_bytes(
        width if width is not None else max(1, (value.bit_length() + 7) // 8),
        "big",
    )
    return len(raw).to_bytes(4, "big") + raw


def _read_mpz(buf: bytes, pos: int) -> tuple[mpz, int]:
    if pos + 4 > len(buf):
        raise ValueError("truncated length prefix")
    n = int.from_bytes(buf[pos : pos + 4], "big")
    pos += 4
    if pos + n > len(buf):
        raise ValueError("truncated integer body")
    return mpz(int.from_bytes(buf[pos : pos + n], "big")), pos + n


def ciphertext_to_bytes(c: Ciphertext, pk: PublicKey) -> bytes:
    # fixed width keeps frame sizes independent of the ciphertext value
    return _write_mpz(c.value, pk.ciphertext_bytes())


def ciphertext_from_bytes(buf: bytes, pos: int = 0) -> tuple[Ciphertext, int]:
    value, pos = _read_mpz(buf, pos)
    return Ciphertext(value=value), pos


def public_key_to_bytes(pk: PublicKey) -> bytes:
    parts = [bytes([_TAG_PUBLIC_KEY])]
    parts.append(pk.threshold.to_bytes(4, "big"))
    parts.append(pk.parties.to_bytes(4, "big"))
    parts.append(_write_mpz(pk.modulus))
    parts.append(_write_mpz(pk.randomizer_base))
    parts.append(_write_mpz(pk.verification_base))
    for v in pk.verifications:
        parts.append(_write_mpz(v))
    return b"".join(parts)


def public_key_from_bytes(buf: bytes) -> PublicKey:
    if not buf or buf[0] != _TAG_PUBLIC_KEY:
        raise ValueError("not a serialized public key")
    pos = 1
    threshold = int.from_bytes(buf[pos : pos + 4], "big")
    parties = int.from_bytes(buf[pos + 4 : pos + 8], "big")
    pos += 8
    modulus, pos = _read_mpz(buf, pos)
    randomizer_base, pos = _read_mpz(buf, pos)
    verification_base, pos = _read_mpz(buf, pos)
    verifications = []
    for _ in range(parties):
        v, pos = _read_mpz(buf, pos)
        verifications.append(v)
    return PublicKey(
        modulus=modulus,
        n_squared=modulus * modulus,
        threshold=threshold,
        parties=parties,
        randomizer_base=randomizer_base,
        verification_base=verification_base,
        verifications=tuple(verifications),
    )


def key_share_to_bytes(share: KeyShare) -> bytes:
    return bytes([_TAG_KEY_SHARE]) + share.party.to_bytes(4, "big") + _write_mpz(
        share.value
    )


def key_share_from_bytes(buf: bytes) -> KeyShare:
    if not buf or buf[0] != _TAG_KEY_SHARE:
        raise ValueError("not a serialized key share")
    party = int.from_bytes(buf[1:5], "big")
    value, _ = _read_mpz(buf, 5)
    return KeyShare(party=party, value=value)
