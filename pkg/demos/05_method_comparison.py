"""Comparing methods on one synthetic federation.

SOLO never communicates; FedAvg/FedProx average full head weights (and
refuse heterogeneous heads); FedProto and the prototype-contrastive
method exchange only per-class embedding means -- two orders of magnitude
less traffic per round.
"""

import numpy as np

from fedph.federation import ExperimentConfig, head_param_count, run_experiment

ROUNDS = 25
results = {}
for method in ("solo", "fedavg", "fedproto", "fedph"):
    kwargs = dict(method=method, rounds=ROUNDS, seed=0)
    if method == "fedproto":
        kwargs["fedproto_weight"] = 1.0
    rows = run_experiment(ExperimentConfig(**kwargs))
    results[method] = rows
    print(f"{method:9s} final accuracy {rows[-1].mean_accuracy * 100:5.2f}%  "
          f"uplink/client/round: {rows[-1].uplink_values_per_client:,.0f} values "
          f"({rows[-1].uplink_bytes_per_client:,.0f} bytes)")

cfg = ExperimentConfig(method="fedavg", rounds=1)
print(f"\nhead parameter count: {head_param_count(cfg):,} vs prototype payload "
      f"{cfg.data.n_classes * cfg.embed_dim} "
      f"(ratio {head_param_count(cfg) / (cfg.data.n_classes * cfg.embed_dim):.1f}x)")

print("\naccuracy trajectory (every 5 rounds):")
for method, rows in results.items():
    traj = [f"{rows[r].mean_accuracy * 100:5.1f}" for r in range(0, ROUNDS + 1, 5)]
    print(f"  {method:9s} {' '.join(traj)}")
