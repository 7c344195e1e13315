"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest -v -s tests/test_acceptance.py` to see the per-criterion
report.  Criteria interact with the library exactly the way a user would:
full-scale configs, the real CLI, and independent oracles computed here.
"""

import copy
import csv
import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from fedph.cli import main as cli_main
from fedph.datagen import DataConfig
from fedph.federation import (
    ExperimentConfig,
    ModelHeterogeneityError,
    build_experiment,
    head_param_count,
    local_training,
    run_experiment,
    run_round,
)
from fedph.mathcore import RngStream
from fedph.metrics import strip_timing_columns
from fedph.model import BackboneSpec, init_head
from fedph.objective import LossConfig, batch_loss_and_grads
from fedph.paillier import (
    FixedPointCodec,
    ThresholdError,
    add,
    combine,
    decrypt_vector,
    encrypt,
    encrypt_vector,
    keygen,
    partial_decrypt,
)
from fedph.privacy import DpConfig, NoiseSpec, perturb_local, perturb_split
from fedph.prototype import PrototypeSet, aggregate_uniform, aggregate_weighted
from fedph.wire import InMemoryTransport

from gradcheck import finite_difference_grads, max_relative_error

SEEDS = (0, 1, 2)


def report(n: int, label: str) -> None:
    print(f"\n[criterion {n:02d}] PASS - {label}")


def test_criterion_01_crypto_correctness(keypair_512):
    t0 = time.perf_counter()
    pk, shares = keypair_512
    assert (pk.parties, pk.threshold) == (5, 3)
    rng = RngStream(101, 1)

    for _ in range(200):
        pt = int.from_bytes(rng.bytes(60), "big") % int(pk.modulus)
        c = encrypt(pk, pt, rng)
        parts = [partial_decrypt(pk, c, s) for s in shares[:3]]
        assert combine(pk, c, parts) == pt

    c = encrypt(pk, 987654321, rng)
    results = {
        combine(pk, c, [partial_decrypt(pk, c, s) for s in subset])
        for subset in itertools.combinations(shares, 3)
    }
    assert results == {987654321}

    for subset in itertools.combinations(shares, 2):
        parts = [partial_decrypt(pk, c, s) for s in subset]
        with pytest.raises(ThresholdError):
            combine(pk, c, parts)

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report(1, f"200 roundtrips exact, 10/10 subsets agree, k-1 always "
              f"errors ({elapsed:.1f}s < 60s)")


def test_criterion_02_homomorphism_and_codec(keypair_512):
    pk, shares = keypair_512
    clip = 1.0
    codec = FixedPointCodec(frac_bits=24, value_bound=clip, max_summands=5)
    rng = RngStream(102, 1)
    tol = 5 * 2.0**-24
    worst = 0.0
    for _ in range(50):
        vecs = []
        for _ in range(5):
            v = rng.normal(0.0, 0.7, 384)
            norm = np.linalg.norm(v)
            if norm > clip:
                v = v * (clip / norm)
            vecs.append(v)
        folded = encrypt_vector(pk, vecs[0], codec, rng)
        for v in vecs[1:]:
            cts = encrypt_vector(pk, v, codec, rng)
            folded = [add(pk, a, b) for a, b in zip(folded, cts)]
        decoded = decrypt_vector(pk, folded, shares[:3], codec, summands=5)
        worst = max(worst, float(np.max(np.abs(decoded - sum(vecs)))))
    assert worst <= tol
    report(2, f"decoded 5-vector sums within 5*2^-24 per coordinate over "
              f"50 trials (worst {worst:.3e} <= {tol:.3e})")


def test_criterion_03_noise_splitting_variance_law():
    spec = NoiseSpec(sensitivity=1.0, sigma=1.0, honest_min=3, n_clients=5)
    n = 10**6

    summed = np.zeros(n)
    for client in range(5):
        rng = RngStream(103, 10 + client)
        noisy = perturb_split(PrototypeSet({0: np.zeros(n)}, {0: 1}), spec, rng)
        summed += noisy.vector(0)
    target = 5 * 1.0 / (3 - 1)  # m sigma^2 / (t-1) = 2.5
    var = summed.var()
    assert abs(var - target) / target < 0.02

    base = PrototypeSet({0: np.zeros(n)}, {0: 1})
    v_local = perturb_local(base, spec, RngStream(103, 20)).vector(0).var()
    v_split = perturb_split(base, spec, RngStream(103, 21)).vector(0).var()
    ratio = v_local / v_split
    assert abs(ratio - 2.0) / 2.0 < 0.03
    report(3, f"summed split-noise variance {var:.4f} ~ 2.5 (2%), "
              f"unsplit/split ratio {ratio:.4f} ~ t-1 = 2 (3%)")


def test_criterion_04_gradient_fidelity():
    combos = list(itertools.product((0.0, 1.0), ("cosine", "l2"), (1, 2)))
    configs = [(lam, measure, depth, rep)
               for rep in (0, 1) for (lam, measure, depth) in combos]
    configs += [(1.0, "cosine", 2, 2), (1.0, "l2", 1, 2),
                (0.0, "cosine", 1, 2), (1.0, "cosine", 1, 3)]
    assert len(configs) == 20
    worst = 0.0
    for i, (lam, measure, depth, rep) in enumerate(configs):
        rng = RngStream(104, i * 7 + rep)
        backbone = BackboneSpec.from_seed(104 + i, 7, 9)
        params = init_head(rng, 9, 5, 4, hidden_dim=8 if depth == 2 else None)
        xs = rng.normal(0, 1, (6, 7))
        ys = rng.integers(0, 4, 6)
        protos = PrototypeSet(
            {j: rng.normal(0, 1, 5) for j in range(4)}, {j: 1 for j in range(4)}
        )
        cfg = LossConfig(contrast_weight=lam, measure=measure)
        clip = 1e9
        _, grads = batch_loss_and_grads(params, xs, ys, protos, cfg, backbone, clip)
        fd, masks = finite_difference_grads(
            params, xs, ys, protos, cfg, backbone, clip, step=1e-5
        )
        worst = max(worst, max_relative_error(grads, fd, masks))
    assert worst <= 1e-4
    report(4, f"analytic vs central finite-difference gradients over 20 "
              f"configs: max relative error {worst:.2e} <= 1e-4")


def test_criterion_05_aggregation_oracles():
    # (a) weighted aggregate equals the pooled per-sample mean
    rng = RngStream(105, 1)
    worst_pool = 0.0
    for _ in range(10):
        sets, pooled = [], {j: [] for j in range(3)}
        for _client in range(5):
            vectors, counts = {}, {}
            for j in range(3):
                pts = rng.normal(0, 1, (int(rng.integers(1, 8)), 6))
                pooled[j].append(pts)
                vectors[j] = pts.mean(axis=0)
                counts[j] = len(pts)
            sets.append(PrototypeSet(vectors, counts))
        agg = aggregate_weighted(sets)
        for j in range(3):
            expected = np.concatenate(pooled[j]).mean(axis=0)
            worst_pool = max(
                worst_pool, float(np.max(np.abs(agg.vector(j) - expected)))
            )
    assert worst_pool <= 1e-9

    # (b) encrypted path vs plaintext uniform aggregation, 5 rounds, noise
    #     replayed by running deep-copied clients on the plaintext path
    m = 5
    dp = DpConfig(epsilon=5.0, delta=1e-5, clip_bound=1.0, honest_min=3, n_clients=m)
    cfg = ExperimentConfig(
        method="fedph",
        rounds=5,
        seed=105,
        data=DataConfig(n_clients=m, samples_per_client=100, raw_dim=16,
                        n_classes=4, n_conditions=3),
        backbone_dim=32,
        embed_dim=8,
        dp=dp,
        crypto=True,
        crypto_bits=512,
        aggregation="uniform",
    )
    server, clients, ctx = build_experiment(cfg)
    plain_ctx = replace(
        ctx, cfg=replace(cfg, crypto=False), transport=InMemoryTransport()
    )
    tol = m * 2.0**-24
    worst_enc = 0.0
    for round_no in range(1, 6):
        twins = [copy.deepcopy(c) for c in clients]
        for t in twins:
            t.cached_globals = server.global_protos
            t.cached_initialized = server.initialized
        run_round(server, clients, ctx)
        local_sets = [
            local_training(t, plain_ctx, round_no)[0].prototypes for t in twins
        ]
        oracle = aggregate_uniform(local_sets, m)
        for j in oracle.classes:
            gap = np.max(np.abs(server.global_protos.vector(j) - oracle.vector(j)))
            worst_enc = max(worst_enc, float(gap))
    assert worst_enc <= tol
    report(5, f"pooled-mean oracle {worst_pool:.2e} <= 1e-9; encrypted vs "
              f"plaintext uniform over 5 rounds {worst_enc:.3e} <= m*2^-24")


def _final_accuracy(method: str, seed: int, **kwargs) -> float:
    kw = dict(method=method, rounds=50, local_epochs=1, seed=seed)
    if method == "fedproto":
        kw["fedproto_weight"] = 1.0
    if method == "fedprox":
        kw["fedprox_mu"] = 0.01
    kw.update(kwargs)
    return run_experiment(ExperimentConfig(**kw))[-1].mean_accuracy


def test_criterion_06_directional_accuracy():
    t0 = time.perf_counter()
    means = {}
    for method in ("solo", "fedavg", "fedprox", "fedproto", "fedph"):
        means[method] = float(
            np.mean([_final_accuracy(method, s) for s in SEEDS])
        )
    elapsed = time.perf_counter() - t0
    ordering = "  ".join(
        f"{m}={means[m] * 100:.2f}%"
        for m in sorted(means, key=means.get, reverse=True)
    )
    print(f"\n[criterion 06] five-method final accuracy (3 seeds): {ordering}")
    assert means["fedph"] - means["solo"] >= 0.02, ordering
    assert means["fedph"] - means["fedproto"] >= -0.005, ordering
    assert elapsed < 600.0
    report(6, f"fedph beats solo by {100 * (means['fedph'] - means['solo']):.2f} "
              f"pts (>= 2) and fedproto by "
              f"{100 * (means['fedph'] - means['fedproto']):.2f} pts (>= -0.5); "
              f"{elapsed:.0f}s < 10min")


def test_criterion_07_communication_payload():
    ph_cfg = ExperimentConfig(method="fedph", rounds=1, seed=0)
    ph_rows = run_experiment(ph_cfg)
    assert ph_rows[-1].uplink_values_per_client == 384.0

    avg_cfg = ExperimentConfig(method="fedavg", rounds=1, seed=0)
    avg_rows = run_experiment(avg_cfg)
    expected = head_param_count(avg_cfg)
    assert avg_rows[-1].uplink_values_per_client == float(expected)

    ratio = expected / 384.0
    assert ratio >= 80.0
    report(7, f"fedph uplink exactly 384 values/client; fedavg uplink "
              f"{expected} values; ratio {ratio:.1f} >= 80")


def test_criterion_08_privacy_sweep():
    def sweep_mean(eps: float | None, mode: str) -> float:
        accs = []
        for seed in SEEDS:
            dp = None
            if eps is not None:
                dp = DpConfig(epsilon=eps, delta=1e-5, clip_bound=1.0,
                              honest_min=3, n_clients=5)
            accs.append(
                _final_accuracy(
                    "fedph", seed, dp=dp, noise_mode=mode, aggregation="uniform"
                )
            )
        return float(np.mean(accs))

    control = sweep_mean(None, "split")
    split = {eps: sweep_mean(eps, "split") for eps in (0.5, 1.0, 5.0)}
    local = {eps: sweep_mean(eps, "local") for eps in (0.5, 1.0, 5.0)}

    ladder = [split[0.5], split[1.0], split[5.0], control]
    print(f"\n[criterion 08] split-mode accuracy over eps 0.5/1/5/inf: "
          f"{['%.4f' % a for a in ladder]}; local at eps=5: {local[5.0]:.4f}")
    for lo, hi in zip(ladder, ladder[1:]):
        assert hi >= lo - 0.01, ladder  # nondecreasing within 1 point
    assert split[5.0] >= local[5.0] - 0.01
    report(8, f"accuracy nondecreasing in eps within 1pt; split {split[5.0]:.4f} "
              f">= local {local[5.0]:.4f} - 1pt at eps=5")


def test_criterion_09_model_heterogeneity():
    depths = (1, 2, 1, 2, 2)
    cfg = ExperimentConfig(
        method="fedph", rounds=20, seed=0, projection_depths=depths
    )
    rows = run_experiment(cfg)
    assert len(rows) == 21
    gain = rows[-1].mean_accuracy - rows[0].mean_accuracy
    assert gain > 0.0

    with pytest.raises(ModelHeterogeneityError):
        run_experiment(
            ExperimentConfig(method="fedavg", rounds=1, seed=0,
                             projection_depths=depths)
        )
    report(9, f"mixed-depth fedph improves by {100 * gain:.1f} pts over 20 "
              f"rounds; fedavg rejects the same config")


def test_criterion_10_encryption_timing(tmp_path):
    proto_dim = 384
    head_dim = head_param_count(ExperimentConfig(method="fedavg", rounds=1))
    out = tmp_path / "bench.csv"
    rc = cli_main(["bench-crypto", "--bits", "2048",
                   "--dims", f"{proto_dim},{head_dim}", "--out", str(out)])
    assert rc == 0
    with open(out, newline="") as fh:
        rows = {int(r["dim"]): r for r in csv.DictReader(fh)}
    ratio = float(rows[head_dim]["ratio_to_first"])
    assert int(rows[proto_dim]["reps"]) >= 20
    assert ratio >= 10.0
    report(10, f"2048-bit encryption: head payload ({head_dim}) costs "
               f"{ratio:.1f}x a prototype payload ({proto_dim}); >= 10x")


def test_criterion_11_run_determinism(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(
        '{"methods": ["fedph"], "seeds": [3], "rounds": 3}'
    )
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli_main(["run", "--config", str(config), "--out", str(out1)]) == 0
    assert cli_main(["run", "--config", str(config), "--out", str(out2)]) == 0
    a = strip_timing_columns((out1 / "metrics.csv").read_text())
    b = strip_timing_columns((out2 / "metrics.csv").read_text())
    assert a == b
    report(11, "two identical runs produce byte-identical metrics CSVs "
               "(wall-time columns excluded)")
