"""Adversarial coalescence: loss contracts, replay fidelity, determinism."""

import numpy as np
import pytest

from barycoal.autodiff import Tensor
from barycoal.coalesce import (
    CriticModel,
    GeneratorModel,
    NoisePrior,
    TrainConfig,
    baseline_edge_only,
    baseline_ensemble,
    baseline_transfer,
    critic_loss,
    default_critic,
    default_generator,
    generator_loss_two_critics,
    sample_generator,
    train_pretrained,
    train_stage1,
    train_stage2,
)
from barycoal.measures import DiscreteMeasure
from barycoal.nn import MLPParams, forward, param, params_fingerprint

FAST = dict(batch_size=32, generator_iters=5, critic_iters_per_gen=2,
            gp_coefficient=0.1, beta1=0.0, beta2=0.9, learning_rate=2e-4)


def toy_measure(mean, n=200, sigma=0.1, seed=0):
    rng = np.random.default_rng(seed)
    pts = np.asarray(mean, dtype=float) + rng.normal(0, sigma, size=(n, len(mean)))
    return DiscreteMeasure.uniform(pts)


def linear_critic(weights_column):
    a = np.asarray(weights_column, dtype=float)[:, None]
    return CriticModel(MLPParams([param(a)], [param(np.zeros(1))], ["identity"]))


class TestNoisePrior:
    def test_shapes(self):
        rng = np.random.default_rng(0)
        assert NoisePrior("gaussian", 4).sample(7, rng).shape == (7, 4)
        assert NoisePrior("uniform", 2).sample(3, rng).shape == (3, 2)

    def test_uniform_bounded(self):
        z = NoisePrior("uniform", 3).sample(100, np.random.default_rng(1))
        assert np.all(np.abs(z) <= 1.0)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            NoisePrior("cauchy", 2)


class TestSampleGenerator:
    def test_uniform_weights_and_count(self):
        gen = default_generator(2, np.random.default_rng(0))
        m = sample_generator(gen, 50, 7)
        assert len(m) == 50
        assert np.allclose(m.weights, 1 / 50)

    def test_single_point(self):
        gen = default_generator(2, np.random.default_rng(0))
        m = sample_generator(gen, 1, 7)
        assert len(m) == 1 and m.weights[0] == 1.0

    def test_seed_determinism(self):
        gen = default_generator(1, np.random.default_rng(0))
        a = sample_generator(gen, 100, 42)
        b = sample_generator(gen, 100, 42)
        assert np.array_equal(a.points, b.points)

    def test_identity_like_generator_mean(self):
        # wide linear generator on a gaussian prior: mean near 0 by CLT
        prior = NoisePrior("gaussian", 2)
        params = MLPParams([param(np.eye(2))], [param(np.zeros(2))], ["identity"])
        gen = GeneratorModel(params, prior, 2)
        m = sample_generator(gen, 1000, 3)
        assert np.max(np.abs(m.points.mean(axis=0))) < 0.1


class TestLosses:
    def test_zero_critic_is_penalty_only(self):
        critic = CriticModel(MLPParams([param(np.zeros((2, 1)))], [param(np.zeros(1))], ["identity"]))
        rng = np.random.default_rng(0)
        real = rng.normal(size=(8, 2))
        fake = rng.normal(size=(8, 2))
        loss = critic_loss(critic, real, fake, weight=1.0, gp=0.0, rng=rng)
        assert float(loss.data) == 0.0

    def test_identical_batches_zero_wasserstein_term(self):
        critic = linear_critic([1.0, -2.0])
        rng = np.random.default_rng(1)
        batch = rng.normal(size=(16, 2))
        loss = critic_loss(critic, batch, batch, weight=3.0, gp=0.0, rng=rng)
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)

    def test_weight_scales_linearly(self):
        critic = linear_critic([0.5, 0.5])
        rng = np.random.default_rng(2)
        real = rng.normal(size=(16, 2))
        fake = rng.normal(size=(16, 2)) + 1.0
        one = float(critic_loss(critic, real, fake, 1.0, 0.0, rng).data)
        two = float(critic_loss(critic, real, fake, 2.0, 0.0, rng).data)
        assert two == pytest.approx(2.0 * one, abs=1e-12)

    def test_two_critic_loss_closed_form(self):
        ca, cb = linear_critic([1.0, 0.0]), linear_critic([0.0, 2.0])
        out = Tensor(np.array([[1.0, 1.0], [3.0, -1.0]]))
        loss = generator_loss_two_critics(out, ca, cb, 1.0, 1.0)
        # -(mean(x1) + 2 mean(x2)) = -(2 + 0) = -2
        assert float(loss.data) == pytest.approx(-2.0, abs=1e-12)

    def test_zero_weight_matches_single_critic_exactly(self):
        rng = np.random.default_rng(3)
        gen = default_generator(2, rng)
        critic = default_critic(2, rng)
        other = default_critic(2, rng)
        out = forward(gen.params, Tensor(gen.noise_prior.sample(16, rng)))
        full = generator_loss_two_critics(out, critic, other, 1.5, 0.0)
        single = -(1.5 * forward(critic.params, out).mean())
        assert float(full.data) == float(single.data)

    def test_both_critics_zero(self):
        zero = CriticModel(MLPParams([param(np.zeros((2, 1)))], [param(np.zeros(1))], ["identity"]))
        out = Tensor(np.ones((4, 2)))
        assert float(generator_loss_two_critics(out, zero, zero, 1.0, 1.0).data) == 0.0


class TestTrainPretrained:
    def test_zero_iterations_returns_initialized_models(self):
        data = toy_measure([0.0, 0.0])
        cfg = TrainConfig(generator_iters=0, seed=5, **{k: v for k, v in FAST.items() if k != "generator_iters"})
        gen, critic = train_pretrained(data, cfg)
        fresh_rng = np.random.default_rng(5)
        ref_gen = default_generator(2, fresh_rng)
        assert params_fingerprint(gen.params) == params_fingerprint(ref_gen.params)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_pretrained(None, TrainConfig(**FAST))

    def test_seed_reproducibility(self):
        data = toy_measure([0.2, -0.2])
        a, _ = train_pretrained(data, TrainConfig(seed=9, **FAST))
        b, _ = train_pretrained(data, TrainConfig(seed=9, **FAST))
        assert params_fingerprint(a.params) == params_fingerprint(b.params)
        c, _ = train_pretrained(data, TrainConfig(seed=10, **FAST))
        assert params_fingerprint(a.params) != params_fingerprint(c.params)


class TestStage1:
    def make_pairs(self, k=2):
        pairs = []
        for i in range(k):
            rng = np.random.default_rng(100 + i)
            pairs.append((default_generator(2, rng), default_critic(2, rng)))
        return pairs

    def test_requires_two_models(self):
        with pytest.raises(ValueError):
            train_stage1(self.make_pairs(1), [(1.0, 1.0)], TrainConfig(**FAST))

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        pairs = [
            (default_generator(2, rng), default_critic(2, rng)),
            (default_generator(1, rng), default_critic(1, rng)),
        ]
        with pytest.raises(ValueError):
            train_stage1(pairs, [(1.0, 1.0)], TrainConfig(**FAST))

    def test_zero_iterations_returns_first_generator(self):
        pairs = self.make_pairs(2)
        cfg = TrainConfig(generator_iters=0, **{k: v for k, v in FAST.items() if k != "generator_iters"})
        gen, replay_critic, data_critic = train_stage1(pairs, [(1.0, 1.0)], cfg)
        assert params_fingerprint(gen.params) == params_fingerprint(pairs[0][0].params)
        assert params_fingerprint(data_critic.params) == params_fingerprint(pairs[1][1].params)

    def test_frozen_inputs_never_updated(self):
        pairs = self.make_pairs(3)
        before = [(params_fingerprint(g.params), params_fingerprint(c.params)) for g, c in pairs]
        train_stage1(pairs, [(1.0, 1.0)], TrainConfig(**FAST))
        after = [(params_fingerprint(g.params), params_fingerprint(c.params)) for g, c in pairs]
        assert before == after

    def test_weight_pair_broadcast_and_validation(self):
        pairs = self.make_pairs(3)
        train_stage1(pairs, [(1.0, 1.0)], TrainConfig(**FAST))
        with pytest.raises(ValueError):
            train_stage1(pairs, [(1.0, 1.0)] * 3, TrainConfig(**FAST))


class TestStage2:
    def setup_meta(self):
        rng = np.random.default_rng(0)
        gen = default_generator(2, rng)
        return gen, (default_critic(2, rng), default_critic(2, rng))

    def test_zero_iterations_returns_meta(self):
        meta, critics = self.setup_meta()
        cfg = TrainConfig(generator_iters=0, **{k: v for k, v in FAST.items() if k != "generator_iters"})
        out = train_stage2(meta, critics, toy_measure([0.1, 0.1]), cfg)
        assert params_fingerprint(out.params) == params_fingerprint(meta.params)

    def test_meta_stays_frozen(self):
        meta, critics = self.setup_meta()
        before = params_fingerprint(meta.params)
        train_stage2(meta, critics, toy_measure([0.1, 0.1]), TrainConfig(**FAST))
        assert params_fingerprint(meta.params) == before

    def test_empty_local_data_rejected(self):
        meta, critics = self.setup_meta()
        with pytest.raises(ValueError):
            train_stage2(meta, critics, None, TrainConfig(**FAST))


class TestBaselines:
    def test_transfer_zero_iterations_returns_init(self):
        rng = np.random.default_rng(0)
        pre = default_generator(2, rng)
        cfg = TrainConfig(generator_iters=0, **{k: v for k, v in FAST.items() if k != "generator_iters"})
        out = baseline_transfer(pre, toy_measure([0.0, 0.0]), cfg)
        assert params_fingerprint(out.params) == params_fingerprint(pre.params)

    def test_ensemble_mixing_counts(self, monkeypatch):
        # with one local source and two generators, each 64-row real batch
        # must draw ceil(64/3)=22 local rows and 21 from each generator
        import barycoal.coalesce as co

        draws = []
        real_sampler = co._sample_rows

        def counting_sampler(measure, n, rng):
            draws.append(("local", n))
            return real_sampler(measure, n, rng)

        monkeypatch.setattr(co, "_sample_rows", counting_sampler)
        rng = np.random.default_rng(0)
        gens = [default_generator(2, rng) for _ in range(2)]
        for i, g in enumerate(gens):
            orig = g.sample

            def wrapped(n, r, i=i, orig=orig):
                draws.append((f"g{i}", n))
                return orig(n, r)

            monkeypatch.setattr(g, "sample", wrapped)
        cfg = TrainConfig(batch_size=64, generator_iters=1, critic_iters_per_gen=1,
                          gp_coefficient=0.0, beta1=0.0, beta2=0.9, learning_rate=2e-4)
        baseline_ensemble(gens, toy_measure([0.0, 0.0]), cfg)
        assert [n for tag, n in draws if tag == "local"] == [22]
        assert [n for tag, n in draws if tag == "g0"] == [21]
        assert [n for tag, n in draws if tag == "g1"] == [21]

    def test_ensemble_distillation_without_local_data(self):
        rng = np.random.default_rng(1)
        pre = default_generator(2, rng)
        out = baseline_ensemble([pre], None, TrainConfig(**FAST))
        assert out.data_dim == 2

    def test_ensemble_requires_generators(self):
        with pytest.raises(ValueError):
            baseline_ensemble([], toy_measure([0.0, 0.0]), TrainConfig(**FAST))

    def test_edge_only_seed_reproducible(self):
        data = toy_measure([0.3, 0.0])
        a = baseline_edge_only(data, TrainConfig(seed=4, **FAST))
        b = baseline_edge_only(data, TrainConfig(seed=4, **FAST))
        assert params_fingerprint(a.params) == params_fingerprint(b.params)


class TestTrainConfigValidation:
    def test_paper_defaults(self):
        cfg = TrainConfig()
        assert (cfg.beta1, cfg.beta2, cfg.learning_rate) == (0.5, 0.999, 1e-4)
        assert cfg.batch_size == 64
        assert cfg.critic_iters_per_gen == 5
        assert cfg.gp_coefficient == 10.0
        assert cfg.weights == (1.0, 1.0)

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(weights=(1.0, -1.0))
        with pytest.raises(ValueError):
            TrainConfig(gp_coefficient=-1.0)
