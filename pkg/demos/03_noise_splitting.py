"""Why threshold encryption lets every client add less noise.

Without encryption, each client's published prototype must individually
carry the full calibrated noise (std = S_f * sigma).  When the server can
only ever decrypt the aggregate, each of m clients may divide the
variance by t-1 (t = assumed honest clients): the decrypted sum then
carries m/(t-1) times the target variance, still enough, while each
client's own upload is sqrt(t-1) times quieter.
"""

import numpy as np

from fedph.mathcore import RngStream
from fedph.privacy import NoiseSpec, calibrate_sigma, perturb_local, perturb_split, sensitivity
from fedph.prototype import PrototypeSet

epsilon, delta = 1.0, 1e-5
clip_bound, n_min = 1.0, 4
t, m = 3, 5

spec = NoiseSpec(
    sensitivity=sensitivity(clip_bound, n_min),
    sigma=calibrate_sigma(epsilon, delta),
    honest_min=t,
    n_clients=m,
)
print(f"sensitivity 2B/n_min          = {spec.sensitivity:.4f}")
print(f"noise multiplier sigma        = {spec.sigma:.4f}")
print(f"unsplit per-client noise std  = {spec.full_std:.4f}")
print(f"split per-client noise std    = {spec.per_client_std:.4f}  (/= sqrt(t-1))")
print(f"decrypted-aggregate noise std = {spec.aggregate_std:.4f}")

dim = 500_000
base = PrototypeSet({0: np.zeros(dim)}, {0: 1})
summed = np.zeros(dim)
for client in range(m):
    summed += perturb_split(base, spec, RngStream(1, client)).vector(0)
print(f"\nempirical variance of the summed split noise: {summed.var():.4f}")
print(f"law says m sigma^2 S_f^2 / (t-1)             : {spec.aggregate_std**2:.4f}")

unsplit = perturb_local(base, spec, RngStream(2, 0)).vector(0)
split = perturb_split(base, spec, RngStream(2, 1)).vector(0)
print(f"\nempirical unsplit/split variance ratio: {unsplit.var() / split.var():.3f}"
      f"  (t-1 = {t - 1})")
