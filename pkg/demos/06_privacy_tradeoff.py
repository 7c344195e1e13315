"""Accuracy versus privacy budget.

Smaller epsilon means more noise on every uploaded prototype and noisier
global anchors, so final accuracy climbs as the budget is relaxed.  The
table also shows what each client actually adds under the two modes: the
split mode (the one threshold encryption makes safe) uses 1/sqrt(t-1) of
the unsplit standard deviation at every budget.

Single-seed curves for the two modes can coincide when the noise is large:
both scale the same draws, and a noise-dominated anchor keeps the same
direction either way.  The modes separate in multi-seed means, which is
how the acceptance suite gates them; run with more seeds to see it.
"""

from fedph.datagen import DataConfig, generate
from fedph.federation import ExperimentConfig, min_class_count, run_experiment
from fedph.privacy import DpConfig, noise_spec_for

ROUNDS = 50
DATA = DataConfig(n_clients=5)


def run(eps):
    dp = None
    if eps is not None:
        dp = DpConfig(epsilon=eps, delta=1e-5, clip_bound=1.0,
                      honest_min=3, n_clients=5)
    cfg = ExperimentConfig(method="fedph", rounds=ROUNDS, seed=0, data=DATA,
                           dp=dp, noise_mode="split", aggregation="uniform")
    acc = run_experiment(cfg)[-1].mean_accuracy
    if dp is None:
        return acc, 0.0, 0.0
    n_min = min_class_count(generate(cfg.data))
    spec = noise_spec_for(dp, n_min)
    return acc, spec.per_client_std, spec.full_std


print(f"{'epsilon':>8} {'accuracy':>9} {'split std':>10} {'unsplit std':>12}")
for eps in (0.5, 1.0, 5.0, None):
    acc, split_std, full_std = run(eps)
    label = "inf" if eps is None else f"{eps:.1f}"
    print(f"{label:>8} {acc * 100:8.2f}% {split_std:10.3f} {full_std:12.3f}")
