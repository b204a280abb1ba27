"""
Node classification: two-directional layer vs plain GCN baseline
================================================================

Trains both architectures on a 400-node synthetic benchmark whose
feature columns come in correlated blocks, then repeats under feature
noise and random edge toggles. The two-directional layer learns a
feature graph (sparsified by an L1 penalty) and degrades more slowly.

Runs in about a minute; lower `seeds` for a quicker pass.
"""

import dataclasses

import numpy as np

from bipass.bifilter import FilterParams
from bipass.data import sbm_generate
from bipass.model import ModelConfig
from bipass.noise import apply_noise_level, apply_structure_mistakes
from bipass.training import TrainConfig, train

seeds = range(3)
config = ModelConfig((32, 16, 4), FilterParams(1.0, 1.0, 3.0, k=2),
                     l2_mode="learnable", l1_reg_weight=1e-2)


def benchmark(corrupt):
    both, baseline = [], []
    for seed in seeds:
        ds = sbm_generate(4, 100, 0.03, 0.012, 32, 8, 0.8, seed=seed, mean_scale=1.3)
        ds = corrupt(ds, seed)
        tc = TrainConfig(max_epochs=400, patience=100, seed=seed)
        both.append(train(config, ds, tc).test_metric)
        baseline.append(train(config, ds, tc, baseline=True).test_metric)
    return np.mean(both), np.mean(baseline)


conditions = [
    ("clean", lambda ds, s: ds),
    ("feature noise 0.8", lambda ds, s: dataclasses.replace(
        ds, features=apply_noise_level(ds.features, 0.8, s + 1000))),
    ("1% edge toggles", lambda ds, s: dataclasses.replace(
        ds, graph=apply_structure_mistakes(ds.graph, 0.01, s + 2000))),
]

print(f"mean test accuracy over {len(list(seeds))} seeds")
print(f"{'condition':<20} {'two-directional':>16} {'gcn baseline':>14}")
for name, corrupt in conditions:
    b, g = benchmark(corrupt)
    print(f"{name:<20} {b:>16.4f} {g:>14.4f}")
