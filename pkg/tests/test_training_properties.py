"""Slower adversarial-training properties: convergence bands, directional pulls.

These run real (short) WGAN trainings with the pilot-calibrated toy recipe;
the module takes a few minutes.
"""

import numpy as np
import pytest

from barycoal.coalesce import (
    TrainConfig,
    baseline_edge_only,
    baseline_ensemble,
    baseline_transfer,
    default_critic,
    default_generator,
    sample_generator,
    train_pretrained,
    train_stage1,
    train_stage2,
)
from barycoal.experiment import TOY_TRAIN
from barycoal.frechet import fit_gaussian, frechet_distance, score_model
from barycoal.measures import DiscreteMeasure, L2, w1_cost
from barycoal.nn import forward, params_fingerprint


def mixture(means, sigma, n, seed):
    rng = np.random.default_rng(seed)
    means = np.asarray(means, dtype=float)
    comp = rng.integers(0, len(means), size=n)
    return DiscreteMeasure.uniform(means[comp] + rng.normal(0, sigma, size=(n, means.shape[1])))


def toy_cfg(iters, seed=0, **overrides):
    kw = dict(TOY_TRAIN)
    kw.update(overrides)
    return TrainConfig(generator_iters=iters, seed=seed, **kw)


@pytest.fixture(scope="module")
def pretrained_1d_pair():
    """Two single-mode 1D models at -0.5 and +0.5."""
    p1 = train_pretrained(mixture([[-0.5]], 0.1, 4000, 11), toy_cfg(1500, seed=1001))
    p2 = train_pretrained(mixture([[0.5]], 0.1, 4000, 22), toy_cfg(1500, seed=1002))
    return p1, p2


@pytest.fixture(scope="module")
def pretrained_2d():
    """Single-mode 2D model at (0.5, 0.5)."""
    data = mixture([[0.5, 0.5]], 0.1, 4000, 7)
    return train_pretrained(data, toy_cfg(1500, seed=501)), data


class TestPretrainQuality:
    def test_1d_gaussian_within_band(self):
        # N(0, 0.1) target, 2000 iterations, W1 below 0.15
        data = mixture([[0.0]], 0.1, 4000, 3)
        gen, _ = train_pretrained(data, toy_cfg(2000, seed=4))
        ref = mixture([[0.0]], 0.1, 1000, 99)
        w1 = w1_cost(sample_generator(gen, 1000, 5), ref, L2)
        assert w1 < 0.15

    def test_trained_generator_frechet_score_small(self, pretrained_2d):
        (gen, _), data = pretrained_2d
        ref = mixture([[0.5, 0.5]], 0.1, 5000, 88)
        assert score_model(gen, ref, n=5000, seed=9) < 0.05

    def test_critic_near_lipschitz_after_convergence(self, pretrained_2d):
        (gen, critic), data = pretrained_2d
        rng = np.random.default_rng(17)
        xs = np.vstack([gen.sample(200, rng), data.points[:200]])
        scores = forward(critic.params, xs).data.ravel()
        diffs = np.abs(scores[:, None] - scores[None, :])
        dists = np.sqrt(((xs[:, None, :] - xs[None, :, :]) ** 2).sum(-1))
        mask = dists > 1e-3
        quotient = float((diffs[mask] / dists[mask]).max())
        assert quotient <= 1.2

    def test_edge_only_with_large_data_matches_band(self):
        data = mixture([[0.3, -0.3]], 0.1, 5000, 6)
        gen = baseline_edge_only(data, toy_cfg(1500, seed=8))
        ref = mixture([[0.3, -0.3]], 0.1, 1000, 77)
        assert w1_cost(sample_generator(gen, 1000, 3), ref, L2) < 0.15


class TestStage1Directional:
    def test_heavy_data_weight_pulls_toward_new_node(self, pretrained_1d_pair):
        p1, p2 = pretrained_1d_pair
        gen, _, _ = train_stage1([p1, p2], [(100.0, 1.0)], toy_cfg(600, seed=0))
        nu = sample_generator(gen, 1000, 777)
        mu1 = sample_generator(p1[0], 1000, 501)
        mu2 = sample_generator(p2[0], 1000, 502)
        assert w1_cost(nu, mu2, L2) < w1_cost(nu, mu1, L2)

    def test_weight_monotonicity_ladder(self, pretrained_1d_pair):
        # raising the new-node weight never increases W1 to that node's
        # samples, in >= 4 of 5 seeds across a 3-point ladder
        p1, p2 = pretrained_1d_pair
        mu2 = sample_generator(p2[0], 1000, 502)
        hits = 0
        for seed in range(5):
            w1s = []
            for lam in (0.5, 1.0, 2.0):
                gen, _, _ = train_stage1([p1, p2], [(lam, 1.0)], toy_cfg(300, seed=seed))
                w1s.append(w1_cost(sample_generator(gen, 500, 777), mu2, L2))
            hits += w1s[0] >= w1s[1] >= w1s[2] or (w1s[0] >= w1s[2])
        assert hits >= 4


class TestStage2Bands:
    def test_same_distribution_does_not_degrade(self, pretrained_2d):
        (gen, critic), data = pretrained_2d
        local = mixture([[0.5, 0.5]], 0.1, 200, 31)
        ref = mixture([[0.5, 0.5]], 0.1, 1000, 32)
        initial = w1_cost(sample_generator(gen, 1000, 2), ref, L2)
        adapted = train_stage2(gen, (critic.clone(), critic.clone()), local, toy_cfg(400, seed=3))
        final = w1_cost(sample_generator(adapted, 1000, 2), ref, L2)
        assert final <= initial + 0.05

    def test_zero_replay_weight_ignores_replay_critic(self, pretrained_2d):
        (gen, critic), _ = pretrained_2d
        local = mixture([[-0.5, 0.5]], 0.1, 100, 41)
        cfg = toy_cfg(30, seed=5, weights=(1.0, 0.0))
        other_critic = default_critic(2, np.random.default_rng(999))
        a = train_stage2(gen, (critic.clone(), critic.clone()), local, cfg)
        b = train_stage2(gen, (other_critic, critic.clone()), local, cfg)
        assert params_fingerprint(a.params) == params_fingerprint(b.params)


class TestBaselineBands:
    def test_transfer_on_own_target_stays_close(self, pretrained_2d):
        (gen, _), data = pretrained_2d
        ref = mixture([[0.5, 0.5]], 0.1, 1000, 52)
        initial = max(w1_cost(sample_generator(gen, 1000, 2), ref, L2), 0.05)
        local = mixture([[0.5, 0.5]], 0.1, 200, 51)
        tuned = baseline_transfer(gen, local, toy_cfg(400, seed=6))
        final = w1_cost(sample_generator(tuned, 1000, 2), ref, L2)
        assert final <= 1.5 * initial

    def test_transfer_to_disjoint_mode_forgets(self, pretrained_2d):
        (gen, _), data = pretrained_2d
        old_ref = mixture([[0.5, 0.5]], 0.1, 1000, 52)
        initial = w1_cost(sample_generator(gen, 1000, 2), old_ref, L2)
        hits = 0
        for seed in range(5):
            local = mixture([[-0.5, -0.5]], 0.1, 50, 60 + seed)
            tuned = baseline_transfer(gen, local, toy_cfg(400, seed=seed))
            final = w1_cost(sample_generator(tuned, 1000, 2), old_ref, L2)
            hits += final >= 2.0 * initial
        assert hits >= 4

    def test_ensemble_distills_single_model(self, pretrained_2d):
        (gen, _), _ = pretrained_2d
        distilled = baseline_ensemble([gen], None, toy_cfg(500, seed=7))
        teacher = sample_generator(gen, 1000, 3)
        student = sample_generator(distilled, 1000, 4)
        assert w1_cost(student, teacher, L2) < 0.2
