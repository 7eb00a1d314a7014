#!/usr/bin/env python3
"""Multi-seed study of adaptation methods on the 2-mode disjoint toy.

One source node holds one Gaussian mode; the target node has 50 samples of a
disjoint mode. Prints final W1 and Fréchet distances to the combined 2-mode
reference for barycentric adaptation, ensemble, transferring-GAN, edge-only,
and ternary adaptation, plus the transfer baseline's old-mode drift.

The W1-to-combined column makes the hybrid behavior of 2-critic adaptation
visible: the generator morphs toward a measure between the modes (flat W1
geodesic family), while the ensemble's single mixed-real critic splits its
mass across both modes.
"""

import argparse
import time

from barycoal.coalesce import (
    TrainConfig,
    baseline_edge_only,
    baseline_ensemble,
    baseline_transfer,
    sample_generator,
    train_pretrained,
    train_stage2,
)
from barycoal.experiment import TOY_TRAIN, DatasetSpec, sample_generator_like, synth_dataset
from barycoal.frechet import fit_gaussian, frechet_distance
from barycoal.measures import L2, w1_cost
from barycoal.ternary import train_stage2_ternary


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iters", type=int, default=400, help="adaptation budget per method")
    ap.add_argument("--local-samples", type=int, default=50)
    args = ap.parse_args()

    spec = DatasetSpec(num_nodes=1, modes_per_node=1, target_modes=1,
                       samples_per_node=4000, target_samples=args.local_samples,
                       overlap="non_overlapping", sigma=0.1, dim=2)
    data = synth_dataset(spec, seed=123)
    combined = data.reference(data.all_mode_ids, 1000, 909)
    old_ref = data.reference(data.node_mode_ids[0], 1000, 910)
    combined_fit = fit_gaussian(combined)

    pre_gen, pre_critic = train_pretrained(
        data.node_measures[0], TrainConfig(seed=77, generator_iters=1600, **TOY_TRAIN)
    )
    initial_old = w1_cost(sample_generator(pre_gen, 1000, 5), old_ref, L2)
    print(f"pretrained node model: W1 to its own mode = {initial_old:.4f}")
    print(f"{'seed':>4} {'method':<10} {'w1_combined':>11} {'frechet':>9} {'w1_old':>8} {'secs':>6}")

    for seed in range(args.seeds):
        cfg = TrainConfig(seed=seed, generator_iters=args.iters, **TOY_TRAIN)
        meta_critics = (pre_critic.clone(), pre_critic.clone())
        methods = {
            "bary": lambda: train_stage2(pre_gen, meta_critics, data.target_measure, cfg),
            "ensemble": lambda: baseline_ensemble([pre_gen], data.target_measure, cfg),
            "transfer": lambda: baseline_transfer(pre_gen, data.target_measure, cfg),
            "edge-only": lambda: baseline_edge_only(data.target_measure, cfg),
            "ternary": lambda: train_stage2_ternary(pre_gen, meta_critics, data.target_measure, cfg),
        }
        for name, fn in methods.items():
            t0 = time.time()
            model = fn()
            samples = sample_generator_like(model, 1000, 333)
            w1 = w1_cost(samples, combined, L2)
            fre = frechet_distance(fit_gaussian(samples), combined_fit)
            w1_old = w1_cost(samples, old_ref, L2)
            print(f"{seed:>4} {name:<10} {w1:>11.4f} {fre:>9.4f} {w1_old:>8.4f} {time.time() - t0:>6.1f}")


if __name__ == "__main__":
    main()
