"""Desk-scale simulator for privacy-enhanced federated learning via
shared class-prototype aggregation.

Clients train personal heads on top of a frozen backbone and exchange
only per-class embedding means with the server.  Privacy comes from
per-client Gaussian noise sized so that the *aggregate*, decrypted only
through threshold additively-homomorphic encryption, meets the budget.
"""

from .datagen import ClientDataset, DataConfig, generate, load_features_csv
from .federation import ExperimentConfig, build_experiment, run_experiment, run_round
from .mathcore import RngStream
from .metrics import MetricsRow, summarize, write_metrics_csv
from .model import BackboneSpec, HeadParams, OptimConfig, init_head
from .objective import LossConfig, batch_loss_and_grads
from .paillier import FixedPointCodec, keygen
from .privacy import DpConfig, NoiseSpec, calibrate_sigma, sensitivity
from .prototype import PrototypeSet, aggregate_uniform, aggregate_weighted, local_prototypes

__version__ = "0.1.0"

__all__ = [
    "BackboneSpec",
    "ClientDataset",
    "DataConfig",
    "DpConfig",
    "ExperimentConfig",
    "FixedPointCodec",
    "HeadParams",
    "LossConfig",
    "MetricsRow",
    "NoiseSpec",
    "OptimConfig",
    "PrototypeSet",
    "RngStream",
    "aggregate_uniform",
    "aggregate_weighted",
    "batch_loss_and_grads",
    "build_experiment",
    "calibrate_sigma",
    "generate",
    "init_head",
    "keygen",
    "load_features_csv",
    "local_prototypes",
    "run_experiment",
    "run_round",
    "sensitivity",
    "summarize",
    "write_metrics_csv",
]
