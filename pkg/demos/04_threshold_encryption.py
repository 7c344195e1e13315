"""Threshold additively-homomorphic encryption end to end.

The dealer generates one public key and m key shares; any k shares
jointly decrypt, fewer learn nothing.  Real-valued vectors ride through a
fixed-point codec.  The server multiplies ciphertexts to add the hidden
plaintexts, so it only ever sees the sum.
"""

import numpy as np

from fedph.mathcore import RngStream
from fedph.paillier import (
    FixedPointCodec,
    ThresholdError,
    add,
    combine,
    decode_fixed,
    encrypt_vector,
    keygen,
    partial_decrypt,
)

rng = RngStream(99, 1)
pk, shares = keygen(bits=512, parties=5, threshold=3, rng=rng)
print(f"modulus bits: {pk.bits}, parties: {pk.parties}, threshold: {pk.threshold}")

codec = FixedPointCodec(frac_bits=24, value_bound=1.0, max_summands=5)
vectors = [rng.uniform(-0.4, 0.4, 6) for _ in range(5)]
print("\nclient vectors (first coordinates):",
      [round(float(v[0]), 4) for v in vectors])

folded = encrypt_vector(pk, vectors[0], codec, rng)
for v in vectors[1:]:
    cts = encrypt_vector(pk, v, codec, rng)
    folded = [add(pk, a, b) for a, b in zip(folded, cts)]

# three parties contribute decryption shares for the first coordinate
parts = [partial_decrypt(pk, folded[0], s) for s in shares[:3]]
total = decode_fixed(combine(pk, folded[0], parts), codec, pk, summands=5)
print(f"\ndecrypted sum of coordinate 0: {total:.6f}")
print(f"plaintext sum of coordinate 0: {sum(float(v[0]) for v in vectors):.6f}")

try:
    combine(pk, folded[0], parts[:2])
except ThresholdError as exc:
    print(f"\ntwo shares are not enough: {exc}")
