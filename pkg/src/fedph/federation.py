"""The round protocol: broadcast globals, train locally, upload updates,
aggregate — in plaintext or under threshold encryption — plus the SOLO,
FedAvg, FedProx and FedProto baselines.

All clients participate every round.  Aggregation folds updates in
client-id order, so results are independent of completion order.  The
server never holds key shares or datasets; clients never send samples
(no message type can carry them).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import paillier
from .datagen import ClientDataset, DataConfig, generate
from .mathcore import RngStream
from .model import (
    BackboneSpec,
    HeadParams,
    OptimConfig,
    backbone_forward,
    classify,
    init_head,
    param_count,
    project,
    sgd_step,
)
from .objective import LossConfig, batch_loss_and_grads
from .paillier import Ciphertext, FixedPointCodec, KeyShare, PublicKey, keygen
from .privacy import DpConfig, NoiseSpec, noise_spec_for, perturb_local, perturb_split
from .prototype import (
    PrototypeSet,
    aggregate_uniform,
    aggregate_weighted,
    local_prototypes,
)
from .wire import (
    SERVER,
    EncryptedUpdate,
    GlobalPrototypes,
    HeadWeights,
    InMemoryTransport,
    PlainUpdate,
    ShareRequest,
    ShareResponse,
    TransportError,
)

METHODS = ("solo", "fedavg", "fedprox", "fedproto", "fedph")
NOISE_MODES = ("split", "local")
AGGREGATIONS = ("weighted", "uniform")

# stream ids under the experiment seed
_SID_SERVER_SELECT = 1
_SID_KEYGEN = 2
_SID_GLOBAL_HEAD = 3
_SID_CLIENT_BASE = 16
_PURPOSE_INIT = 0
_PURPOSE_BATCH = 1
_PURPOSE_NOISE = 2
_PURPOSE_ENCRYPT = 3


def _client_sid(client_id: int, purpose: int) -> int:
    return _SID_CLIENT_BASE + client_id * 8 + purpose


class ConfigError(ValueError):
    pass


class ModelHeterogeneityError(ConfigError):
    """Weight averaging requires every client to share one head shape."""


class RoundAbortError(RuntimeError):
    """A round could not complete (missing update, share failure, divergence)."""


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "fedph"
    rounds: int = 50
    local_epochs: int = 1
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    clip_bound: float = 1.0
    backbone_dim: int = 512
    embed_dim: int = 64
    hidden_dim: int = 128
    # one depth for every client, or one per client (values 1 or 2:
    # projection layers; total affine layers are depth + 1)
    projection_depths: int | tuple[int, ...] = 1
    dp: DpConfig | None = None
    noise_mode: str = "split"
    crypto: bool = False
    crypto_bits: int = 512
    crypto_honest_min: int | None = None  # t when dp is absent
    aggregation: str = "weighted"
    fedprox_mu: float | None = None
    fedproto_weight: float | None = None

    def client_depths(self) -> tuple[int, ...]:
        d = self.projection_depths
        if isinstance(d, int):
            return (d,) * self.data.n_clients
        return tuple(d)

    @property
    def honest_min(self) -> int:
        if self.dp is not None:
            return self.dp.honest_min
        return self.crypto_honest_min if self.crypto_honest_min is not None else 2

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.rounds < 0 or self.local_epochs < 0:
            raise ConfigError("rounds and local_epochs must be nonnegative")
        if self.clip_bound <= 0:
            raise ConfigError("clip_bound must be positive")
        if self.backbone_dim < 1 or self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("model dimensions must be positive")
        depths = self.client_depths()
        if len(depths) != self.data.n_clients:
            raise ConfigError(
                f"projection_depths must give one depth per client "
                f"({self.data.n_clients}), got {len(depths)}"
            )
        if any(d not in (1, 2) for d in depths):
            raise ConfigError("projection depths must be 1 or 2")
        if self.method in ("fedavg", "fedprox") and len(set(depths)) > 1:
            raise ModelHeterogeneityError(
                f"{self.method} averages head weights and cannot mix "
                f"projection depths {sorted(set(depths))}"
            )
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"noise_mode must be one of {NOISE_MODES}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")
        if (self.fedprox_mu is not None) != (self.method == "fedprox"):
            raise ConfigError("fedprox_mu must be set exactly when method is fedprox")
        if self.fedprox_mu is not None and self.fedprox_mu < 0:
            raise ConfigError("fedprox_mu must be nonnegative")
        if (self.fedproto_weight is not None) != (self.method == "fedproto"):
            raise ConfigError(
                "fedproto_weight must be set exactly when method is fedproto"
            )
        if self.fedproto_weight is not None and self.fedproto_weight < 0:
            raise ConfigError("fedproto_weight must be nonnegative")
        if self.crypto or self.dp is not None:
            if self.method != "fedph":
                raise ConfigError("crypto and dp apply only to the fedph method")
        if self.crypto:
            if self.aggregation != "uniform":
                raise ConfigError("the encrypted path requires uniform aggregation")
            if self.crypto_bits not in paillier.VALID_KEY_BITS:
                raise ConfigError(
                    f"crypto_bits must be one of {paillier.VALID_KEY_BITS}"
                )
            if not 2 <= self.honest_min <= self.data.n_clients:
                raise ConfigError("need 2 <= honest_min <= n_clients")
        if self.dp is not None:
            if self.dp.n_clients != self.data.n_clients:
                raise ConfigError("dp.n_clients must match data.n_clients")
            if self.dp.clip_bound != self.clip_bound:
                raise ConfigError("dp.clip_bound must equal the training clip_bound")
            if (
                self.crypto_honest_min is not None
                and self.crypto_honest_min != self.dp.honest_min
            ):
                raise ConfigError("crypto_honest_min conflicts with dp.honest_min")


@dataclass
class ClientState:
    client_id: int
    dataset: ClientDataset
    params: HeadParams
    batch_stream: RngStream
    noise_stream: RngStream
    encrypt_stream: RngStream
    key_share: KeyShare | None = None
    cached_globals: PrototypeSet | None = None
    cached_initialized: bool = False
    prox_anchor: list[np.ndarray] | None = None


@dataclass
class ServerState:
    n_clients: int
    global_protos: PrototypeSet
    select_stream: RngStream
    initialized: bool = False
    round_no: int = 0
    public_key: PublicKey | None = None
    global_head: np.ndarray | None = None  # fedavg/fedprox only


def assert_server_holds_no_secrets(server: ServerState) -> None:
    """The server must never hold key shares or client datasets."""
    for name, value in vars(server).items():
        if isinstance(value, (KeyShare, ClientDataset)):
            raise AssertionError(f"server state field {name} holds client secrets")


@dataclass
class RunContext:
    cfg: ExperimentConfig
    backbone: BackboneSpec
    transport: InMemoryTransport
    public_key: PublicKey | None = None
    codec: FixedPointCodec | None = None
    noise_spec: NoiseSpec | None = None


@dataclass
class TrainStats:
    mean_supervised: float = math.nan
    mean_contrastive: float = math.nan
    encrypt_s: float = 0.0


@dataclass
class RoundResult:
    accuracies: list[float]
    mean_supervised: float
    mean_contrastive: float
    uplink_values_per_client: float
    uplink_bytes_per_client: float
    downlink_bytes_per_client: float
    wall_s: float
    encrypt_s: float


# ---------------------------------------------------------------------------
# experiment assembly
# ---------------------------------------------------------------------------


def min_class_count(datasets: list[ClientDataset]) -> int:
    """Smallest positive per-class per-client training count in the run."""
    counts = [
        c for ds in datasets for c in ds.class_counts().values() if c > 0
    ]
    if not counts:
        raise ValueError("no training samples anywhere")
    return min(counts)


def build_experiment(cfg: ExperimentConfig):
    """Generate data, init models and key material; returns (server, clients, ctx)."""
    cfg.validate()
    needs_coverage = cfg.crypto or cfg.aggregation == "uniform"
    data_cfg = replace(
        cfg.data,
        seed=cfg.seed,
        ensure_class_coverage=cfg.data.ensure_class_coverage or needs_coverage,
    )
    datasets = generate(data_cfg)
    backbone = BackboneSpec.from_seed(cfg.seed, cfg.data.raw_dim, cfg.backbone_dim)
    depths = cfg.client_depths()

    public_key = None
    shares: list[KeyShare | None] = [None] * cfg.data.n_clients
    codec = None
    noise_spec = None
    if cfg.dp is not None:
        noise_spec = noise_spec_for(cfg.dp, min_class_count(datasets))
    if cfg.crypto:
        threshold = cfg.data.n_clients - cfg.honest_min + 1
        public_key, key_shares = keygen(
            cfg.crypto_bits,
            cfg.data.n_clients,
            threshold,
            RngStream(cfg.seed, _SID_KEYGEN),
        )
        shares = list(key_shares)
        noise_std = 0.0
        if noise_spec is not None:
            noise_std = (
                noise_spec.per_client_std
                if cfg.noise_mode == "split"
                else noise_spec.full_std
            )
        codec = FixedPointCodec(
            frac_bits=24,
            value_bound=cfg.clip_bound + 8.0 * noise_std,
            max_summands=cfg.data.n_clients,
        )
        codec.check_key(public_key)

    clients = []
    for i in range(cfg.data.n_clients):
        init_rng = RngStream(cfg.seed, _client_sid(i, _PURPOSE_INIT))
        params = init_head(
            init_rng,
            cfg.backbone_dim,
            cfg.embed_dim,
            cfg.data.n_classes,
            hidden_dim=cfg.hidden_dim if depths[i] == 2 else None,
        )
        clients.append(
            ClientState(
                client_id=i,
                dataset=datasets[i],
                params=params,
                batch_stream=RngStream(cfg.seed, _client_sid(i, _PURPOSE_BATCH)),
                noise_stream=RngStream(cfg.seed, _client_sid(i, _PURPOSE_NOISE)),
                encrypt_stream=RngStream(cfg.seed, _client_sid(i, _PURPOSE_ENCRYPT)),
                key_share=shares[i],
            )
        )

    server = ServerState(
        n_clients=cfg.data.n_clients,
        global_protos=PrototypeSet.zeros(range(cfg.data.n_classes), cfg.embed_dim),
        select_stream=RngStream(cfg.seed, _SID_SERVER_SELECT),
        public_key=public_key,
    )
    if cfg.method in ("fedavg", "fedprox"):
        template = init_head(
            RngStream(cfg.seed, _SID_GLOBAL_HEAD),
            cfg.backbone_dim,
            cfg.embed_dim,
            cfg.data.n_classes,
            hidden_dim=cfg.hidden_dim if depths[0] == 2 else None,
        )
        server.global_head = template.flatten()

    transport = InMemoryTransport(
        ciphertext_width=public_key.ciphertext_bytes() if public_key else None
    )
    ctx = RunContext(
        cfg=cfg,
        backbone=backbone,
        transport=transport,
        public_key=public_key,
        codec=codec,
        noise_spec=noise_spec,
    )
    return server, clients, ctx


# ---------------------------------------------------------------------------
# local training
# ---------------------------------------------------------------------------


def _train_epochs(
    client: ClientState,
    ctx: RunContext,
    global_protos: PrototypeSet | None,
    regularizer: str,
    loss_cfg: LossConfig,
    prox_mu: float | None = None,
) -> TrainStats:
    cfg = ctx.cfg
    stats = TrainStats()
    n = client.dataset.n_train
    if cfg.local_epochs == 0 or n == 0:
        return stats
    sup_sum = 0.0
    reg_sum = 0.0
    batches = 0
    bs = cfg.optim.batch_size
    for _ in range(cfg.local_epochs):
        order = client.batch_stream.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            breakdown, grads = batch_loss_and_grads(
                client.params,
                client.dataset.train_x[idx],
                client.dataset.train_y[idx],
                global_protos,
                loss_cfg,
                ctx.backbone,
                cfg.clip_bound,
                regularizer=regularizer,
            )
            if not math.isfinite(breakdown.total):
                raise RoundAbortError(
                    f"client {client.client_id}: non-finite loss "
                    f"{breakdown.total} during local training"
                )
            if prox_mu is not None and client.prox_anchor is not None:
                for g, w, a in zip(
                    grads, client.params.param_arrays(), client.prox_anchor
                ):
                    g += prox_mu * (w - a)
            sgd_step(client.params, grads, cfg.optim)
            sup_sum += breakdown.supervised
            reg_sum += breakdown.contrastive
            batches += 1
    stats.mean_supervised = sup_sum / batches
    stats.mean_contrastive = reg_sum / batches
    return stats


def local_training(client: ClientState, ctx: RunContext, round_no: int):
    """One client's round for the prototype methods (fedph, fedproto, solo).

    Trains for E epochs against the cached globals, recomputes local
    prototypes, applies noise, and builds the outbound update (encrypted
    when the crypto path is on).  Returns (message_or_None, TrainStats);
    solo produces no message.
    """
    cfg = ctx.cfg
    if cfg.method == "fedproto":
        regularizer = "l2_pull"
        loss_cfg = LossConfig(
            contrast_weight=cfg.fedproto_weight,
            temperature=cfg.loss.temperature,
            measure="l2",
        )
    else:
        regularizer = "contrastive"
        loss_cfg = cfg.loss

    use_globals = (
        cfg.method in ("fedph", "fedproto")
        and client.cached_initialized
        and client.cached_globals is not None
        and len(client.cached_globals) > 0
    )
    stats = _train_epochs(
        client,
        ctx,
        client.cached_globals if use_globals else None,
        regularizer,
        loss_cfg,
    )
    if cfg.method == "solo":
        return None, stats

    protos = local_prototypes(
        client.dataset, client.params, ctx.backbone, cfg.clip_bound
    )
    if ctx.noise_spec is not None:
        perturb = perturb_split if cfg.noise_mode == "split" else perturb_local
        protos = perturb(protos, ctx.noise_spec, client.noise_stream)

    if cfg.crypto:
        t0 = time.perf_counter()
        vectors = {
            j: paillier.encrypt_vector(
                ctx.public_key, vec, ctx.codec, client.encrypt_stream
            )
            for j, vec, _ in protos.items()
        }
        stats.encrypt_s = time.perf_counter() - t0
        return EncryptedUpdate(round_no, client.client_id, vectors), stats
    return PlainUpdate(round_no, client.client_id, protos), stats


def fedavg_local(client: ClientState, ctx: RunContext, round_no: int):
    """Load the broadcast weights, train CE-only, return the new weights."""
    cfg = ctx.cfg
    mu = cfg.fedprox_mu if cfg.method == "fedprox" else None
    if mu is not None:
        client.prox_anchor = [a.copy() for a in client.params.param_arrays()]
    stats = _train_epochs(
        client,
        ctx,
        None,
        "contrastive",
        LossConfig(contrast_weight=0.0),
        prox_mu=mu,
    )
    msg = HeadWeights(
        round_no, client.client_id, client.dataset.n_train, client.params.flatten()
    )
    return msg, stats


def evaluate_client(client: ClientState, backbone: BackboneSpec) -> float:
    """Top-1 accuracy on the client's own test split; nan when it is empty."""
    ds = client.dataset
    if ds.n_test == 0:
        return math.nan
    feats = backbone_forward(backbone, ds.test_x)
    logits = classify(client.params, project(client.params, feats))
    pred = logits.argmax(axis=1)
    return float((pred == ds.test_y).mean())


# ---------------------------------------------------------------------------
# server round
# ---------------------------------------------------------------------------


def _aggregate_encrypted(server, clients, ctx, updates, round_no) -> PrototypeSet:
    cfg = ctx.cfg
    pk = ctx.public_key
    classes = list(range(cfg.data.n_classes))
    dim = cfg.embed_dim
    folded: list[Ciphertext] = []
    for j in classes:
        acc: list[Ciphertext] | None = None
        for update in updates:  # client-id order
            vecs = update.vectors
            if j not in vecs or len(vecs[j]) != dim:
                raise RoundAbortError(
                    f"client {update.client_id}: encrypted update lacks a "
                    f"complete class-{j} vector"
                )
            acc = vecs[j] if acc is None else [
                paillier.add(pk, a, b) for a, b in zip(acc, vecs[j])
            ]
        folded.extend(acc)

    # gather decryption shares from a fresh committee of size k
    committee = sorted(
        int(i) for i in server.select_stream.choice(server.n_clients, pk.threshold)
    )
    request = ShareRequest(round_no, folded)
    for cid in committee:
        ctx.transport.send(SERVER, cid, request)
    responses = []
    for cid in committee:
        req = ctx.transport.recv(SERVER, cid)
        shares = [
            paillier.partial_decrypt(pk, c, clients[cid].key_share)
            for c in req.ciphertexts
        ]
        ctx.transport.send(cid, SERVER, ShareResponse(round_no, cid, shares))
    for cid in committee:
        responses.append(ctx.transport.recv(cid, SERVER))

    vectors = {}
    counts = {}
    m = server.n_clients
    for ci, j in enumerate(classes):
        vec = np.empty(dim)
        for d in range(dim):
            idx = ci * dim + d
            coord_shares = [resp.shares[idx] for resp in responses]
            try:
                total = paillier.combine(pk, folded[idx], coord_shares)
            except paillier.CryptoError as exc:
                raise RoundAbortError(
                    f"share combination failed for class {j} coord {d}: {exc}"
                ) from exc
            vec[d] = paillier.decode_fixed(total, ctx.codec, pk, summands=m) / m
        vectors[j] = vec
        counts[j] = 0  # true counts stay hidden on the encrypted path
    return PrototypeSet(vectors, counts)


def run_round(server: ServerState, clients: list[ClientState], ctx: RunContext) -> RoundResult:
    """Execute one full communication round and return its metrics."""
    cfg = ctx.cfg
    t_start = time.perf_counter()
    ctx.transport.reset_byte_counters()
    server.round_no += 1
    round_no = server.round_no

    if cfg.method in ("fedavg", "fedprox"):
        result = _round_head_average(server, clients, ctx, round_no)
    else:
        result = _round_prototype(server, clients, ctx, round_no)

    result.wall_s = time.perf_counter() - t_start
    return result


def _round_prototype(server, clients, ctx, round_no) -> RoundResult:
    cfg = ctx.cfg
    for client in clients:
        ctx.transport.send(
            SERVER,
            client.client_id,
            GlobalPrototypes(round_no, server.global_protos, server.initialized),
        )
    for client in clients:
        msg = ctx.transport.recv(SERVER, client.client_id)
        client.cached_globals = msg.prototypes
        client.cached_initialized = msg.initialized

    stats_by_client = []
    for client in clients:
        msg, stats = local_training(client, ctx, round_no)
        ctx.transport.send(client.client_id, SERVER, msg)
        stats_by_client.append(stats)

    updates = []
    for client in clients:
        try:
            updates.append(ctx.transport.recv(client.client_id, SERVER))
        except TransportError as exc:
            raise RoundAbortError(
                f"round {round_no}: missing update from client "
                f"{client.client_id}"
            ) from exc

    uplink_values = float(
        np.mean([_update_value_count(u) for u in updates])
    )

    if cfg.crypto:
        new_globals = _aggregate_encrypted(server, clients, ctx, updates, round_no)
    else:
        local_sets = [u.prototypes for u in updates]
        if cfg.aggregation == "uniform":
            new_globals = aggregate_uniform(local_sets, server.n_clients)
        else:
            new_globals = aggregate_weighted(local_sets)
    server.global_protos = new_globals
    server.initialized = True

    return _finish_round(server, clients, ctx, stats_by_client, uplink_values)


def _round_head_average(server, clients, ctx, round_no) -> RoundResult:
    for client in clients:
        ctx.transport.send(
            SERVER,
            client.client_id,
            HeadWeights(round_no, client.client_id, 0, server.global_head),
        )
    for client in clients:
        msg = ctx.transport.recv(SERVER, client.client_id)
        client.params.load_flat(msg.values)
        for v in client.params.velocity:
            v[...] = 0.0

    stats_by_client = []
    for client in clients:
        msg, stats = fedavg_local(client, ctx, round_no)
        ctx.transport.send(client.client_id, SERVER, msg)
        stats_by_client.append(stats)

    updates = []
    for client in clients:
        try:
            updates.append(ctx.transport.recv(client.client_id, SERVER))
        except TransportError as exc:
            raise RoundAbortError(
                f"round {round_no}: missing update from client "
                f"{client.client_id}"
            ) from exc

    server.global_head = fedavg_aggregate(updates)

    uplink_values = float(np.mean([len(u.values) for u in updates]))
    return _finish_round(server, clients, ctx, stats_by_client, uplink_values)


def fedavg_aggregate(updates: list[HeadWeights]) -> np.ndarray:
    """Sample-size-weighted average of flat head weights."""
    total = sum(u.n_samples for u in updates)
    if total == 0:
        raise RoundAbortError("no training samples across clients")
    return sum((u.n_samples / total) * u.values for u in updates)


def _update_value_count(update) -> int:
    if isinstance(update, PlainUpdate):
        return sum(v.shape[0] for _, v, _ in update.prototypes.items())
    if isinstance(update, EncryptedUpdate):
        return sum(len(c) for c in update.vectors.values())
    raise TypeError(f"unexpected update type {type(update)!r}")


def _finish_round(server, clients, ctx, stats_by_client, uplink_values) -> RoundResult:
    accuracies = [evaluate_client(c, ctx.backbone) for c in clients]
    up_bytes = np.mean(
        [ctx.transport.bytes_sent(c.client_id, SERVER) for c in clients]
    )
    down_bytes = np.mean(
        [ctx.transport.bytes_sent(SERVER, c.client_id) for c in clients]
    )
    sup = [s.mean_supervised for s in stats_by_client]
    reg = [s.mean_contrastive for s in stats_by_client]
    return RoundResult(
        accuracies=accuracies,
        mean_supervised=float(np.mean(sup)) if not all(map(math.isnan, sup)) else math.nan,
        mean_contrastive=float(np.mean(reg)) if not all(map(math.isnan, reg)) else math.nan,
        uplink_values_per_client=uplink_values,
        uplink_bytes_per_client=float(up_bytes),
        downlink_bytes_per_client=float(down_bytes),
        wall_s=0.0,  # filled by run_round
        encrypt_s=float(np.mean([s.encrypt_s for s in stats_by_client])),
    )


# ---------------------------------------------------------------------------
# full experiment
# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig) -> list["MetricsRow"]:
    """Run the method for cfg.rounds rounds; returns one row per round plus
    a round-0 row evaluating the untrained models."""
    from .metrics import MetricsRow  # local import to keep metrics standalone

    cfg.validate()
    server, clients, ctx = build_experiment(cfg)

    rows = []
    t0 = time.perf_counter()
    accuracies = [evaluate_client(c, ctx.backbone) for c in clients]
    rows.append(
        MetricsRow(
            method=cfg.method,
            seed=cfg.seed,
            round=0,
            mean_accuracy=float(np.nanmean(accuracies)),
            client_accuracies=tuple(accuracies),
            mean_supervised_loss=math.nan,
            mean_contrastive_loss=math.nan,
            uplink_values_per_client=0.0,
            uplink_bytes_per_client=0.0,
            downlink_bytes_per_client=0.0,
            round_wall_ms=(time.perf_counter() - t0) * 1e3,
            encrypt_ms=math.nan,
        )
    )

    for round_no in range(1, cfg.rounds + 1):
        if cfg.method == "solo":
            t_round = time.perf_counter()
            stats = [local_training(c, ctx, round_no)[1] for c in clients]
            accuracies = [evaluate_client(c, ctx.backbone) for c in clients]
            sup = [s.mean_supervised for s in stats]
            reg = [s.mean_contrastive for s in stats]
            result = RoundResult(
                accuracies=accuracies,
                mean_supervised=float(np.mean(sup)),
                mean_contrastive=float(np.mean(reg)),
                uplink_values_per_client=0.0,
                uplink_bytes_per_client=0.0,
                downlink_bytes_per_client=0.0,
                wall_s=time.perf_counter() - t_round,
                encrypt_s=0.0,
            )
        else:
            result = run_round(server, clients, ctx)
        rows.append(
            MetricsRow(
                method=cfg.method,
                seed=cfg.seed,
                round=round_no,
                mean_accuracy=float(np.nanmean(result.accuracies)),
                client_accuracies=tuple(result.accuracies),
                mean_supervised_loss=result.mean_supervised,
                mean_contrastive_loss=result.mean_contrastive,
                uplink_values_per_client=result.uplink_values_per_client,
                uplink_bytes_per_client=result.uplink_bytes_per_client,
                downlink_bytes_per_client=result.downlink_bytes_per_client,
                round_wall_ms=result.wall_s * 1e3,
                encrypt_ms=result.encrypt_s * 1e3 if cfg.crypto else math.nan,
            )
        )
    return rows


def head_param_count(cfg: ExperimentConfig) -> int:
    """Scalar parameter count of one client head under this config."""
    depths = cfg.client_depths()
    template = init_head(
        RngStream(0, 0),
        cfg.backbone_dim,
        cfg.embed_dim,
        cfg.data.n_classes,
        hidden_dim=cfg.hidden_dim if depths[0] == 2 else None,
    )
    return param_count(template)
