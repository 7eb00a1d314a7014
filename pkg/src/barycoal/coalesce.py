"""Recursive 2-critic WGAN coalescence of pre-trained generators.

Stage I merges pre-trained generators pairwise in the order given, each step
training a fresh barycenter generator against one critic fed by the new
node's generator and one fed by the frozen running barycenter (generative
replay).  Stage II adapts the Stage-I generator to local data the same way.
The single-critic baselines used for comparison live here too.

All randomness flows from one seeded generator per run; frozen models are
never updated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Tensor, grad
from .measures import DiscreteMeasure
from .nn import (
    AdamState,
    MLPParams,
    adam_step,
    clone_params,
    forward,
    gradient_penalty,
    init_mlp,
    parameters,
)

__all__ = [
    "NoisePrior",
    "GeneratorModel",
    "CriticModel",
    "TrainConfig",
    "default_generator",
    "default_critic",
    "sample_generator",
    "critic_loss",
    "generator_loss_two_critics",
    "train_pretrained",
    "train_stage1",
    "train_stage2",
    "baseline_edge_only",
    "baseline_transfer",
    "baseline_ensemble",
]

NOISE_DIM = 8
GEN_HIDDEN = (32, 32)
CRITIC_HIDDEN = (32, 32)


@dataclass(frozen=True)
class NoisePrior:
    """Latent distribution feeding a generator."""

    kind: str = "gaussian"
    dim: int = NOISE_DIM

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise prior {self.kind!r}")
        if self.dim < 1:
            raise ValueError("noise dimension must be >= 1")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.dim))
        return rng.uniform(-1.0, 1.0, size=(n, self.dim))


@dataclass
class GeneratorModel:
    params: MLPParams
    noise_prior: NoisePrior
    data_dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = self.noise_prior.sample(n, rng)
        return forward(self.params, z).data

    def clone(self) -> "GeneratorModel":
        return GeneratorModel(clone_params(self.params), self.noise_prior, self.data_dim)


@dataclass
class CriticModel:
    params: MLPParams

    def __post_init__(self):
        if self.params.weights[-1].shape[1] != 1:
            raise ValueError("critic must have scalar output")

    def clone(self) -> "CriticModel":
        return CriticModel(clone_params(self.params))


@dataclass(frozen=True)
class TrainConfig:
    """Adversarial training knobs; defaults follow the usual WGAN-GP recipe."""

    batch_size: int = 64
    generator_iters: int = 1000
    critic_iters_per_gen: int = 5
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    gp_coefficient: float = 10.0
    # (lambda for the critic judging new data, lambda for the replay critic)
    weights: tuple = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.critic_iters_per_gen < 1:
            raise ValueError("batch size and critic iterations must be positive")
        if self.generator_iters < 0:
            raise ValueError("generator iterations must be nonnegative")
        if any(w < 0 for w in self.weights) or len(self.weights) != 2:
            raise ValueError("weights must be a nonnegative (data, replay) pair")
        if self.gp_coefficient < 0:
            raise ValueError("gradient-penalty coefficient must be nonnegative")


def default_generator(data_dim: int, rng: np.random.Generator, prior: NoisePrior | None = None) -> GeneratorModel:
    """Fresh generator MLP with tanh output; toy targets live inside (-1, 1)^d."""
    prior = prior or NoisePrior()
    params = init_mlp(
        [prior.dim, *GEN_HIDDEN, data_dim],
        ["leaky_relu"] * len(GEN_HIDDEN) + ["tanh"],
        rng,
    )
    # damp the output layer so initial samples start in tanh's linear region;
    # a wide init parks mass at the rails where the tanh gradient vanishes
    params.weights[-1].data *= 0.25
    return GeneratorModel(params, prior, data_dim)


def default_critic(data_dim: int, rng: np.random.Generator) -> CriticModel:
    params = init_mlp(
        [data_dim, *CRITIC_HIDDEN, 1],
        ["leaky_relu"] * len(CRITIC_HIDDEN) + ["identity"],
        rng,
    )
    return CriticModel(params)


def sample_generator(g: GeneratorModel, n: int, seed) -> DiscreteMeasure:
    """Uniform-weight measure of n generated points; seed may be an int or Generator."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return DiscreteMeasure.uniform(g.sample(n, rng))


def _sample_rows(measure: DiscreteMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(len(measure), size=n, p=measure.weights)
    return measure.points[idx]


def critic_loss(
    critic: CriticModel,
    real: np.ndarray,
    fake: np.ndarray,
    weight: float,
    gp: float,
    rng: np.random.Generator,
) -> Tensor:
    """Minimization form of one weighted WGAN critic bracket plus penalty."""
    real_score = forward(critic.params, real).mean()
    fake_score = forward(critic.params, fake).mean()
    loss = -weight * (real_score - fake_score)
    if gp > 0:
        loss = loss + gradient_penalty(critic.params, real, fake, gp, rng)
    return loss


def generator_loss_two_critics(
    gen_out: Tensor,
    critic_a: CriticModel | None,
    critic_b: CriticModel | None,
    lam_a: float,
    lam_b: float,
) -> Tensor:
    """-(lam_a E[critic_a(out)] + lam_b E[critic_b(out)]); zero-weight terms drop out."""
    total = Tensor(0.0)
    if lam_a != 0.0:
        total = total + lam_a * forward(critic_a.params, gen_out).mean()
    if lam_b != 0.0:
        total = total + lam_b * forward(critic_b.params, gen_out).mean()
    return -total


def _critic_step(critic, state, real, fake, weight, gp, rng) -> None:
    loss = critic_loss(critic, real, fake, weight, gp, rng)
    grads = grad(loss, parameters(critic.params))
    adam_step(parameters(critic.params), grads, state)


def _adam_for(model_params: MLPParams, config: TrainConfig) -> AdamState:
    return AdamState.for_params(
        parameters(model_params),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
    )


def _train_two_critic(
    gen: GeneratorModel,
    data_critic: CriticModel,
    replay_critic: CriticModel | None,
    draw_data: callable,
    draw_replay: callable | None,
    config: TrainConfig,
    rng: np.random.Generator,
    monitor=None,
) -> None:
    """Shared loop: critic_iters critic updates per generator update, in place.

    ``draw_data``/``draw_replay`` produce the "real" batches for the two
    critics; the fake batch for both is the current generator's output on a
    shared latent batch, per update.
    """
    lam_data, lam_replay = config.weights
    if lam_replay == 0.0:
        # degenerate weight: the recursion reduces to single-critic training
        # and the replay critic must not influence the run (not even via rng)
        replay_critic = None
    m = config.batch_size
    gen_state = _adam_for(gen.params, config)
    data_state = _adam_for(data_critic.params, config)
    replay_state = _adam_for(replay_critic.params, config) if replay_critic else None

    for it in range(config.generator_iters):
        for _ in range(config.critic_iters_per_gen):
            z = gen.noise_prior.sample(m, rng)
            fake = forward(gen.params, z).data
            _critic_step(data_critic, data_state, draw_data(m, rng), fake, lam_data, config.gp_coefficient, rng)
            if replay_critic is not None:
                _critic_step(replay_critic, replay_state, draw_replay(m, rng), fake, lam_replay, config.gp_coefficient, rng)
        z = gen.noise_prior.sample(m, rng)
        out = forward(gen.params, Tensor(z))
        loss = generator_loss_two_critics(
            out, data_critic, replay_critic, lam_data, lam_replay if replay_critic else 0.0
        )
        grads = grad(loss, parameters(gen.params))
        adam_step(parameters(gen.params), grads, gen_state)
        if monitor is not None:
            monitor(it + 1, gen)


def train_pretrained(dataset: DiscreteMeasure, config: TrainConfig, monitor=None):
    """Standard single-critic WGAN-GP on one node's dataset."""
    if dataset is None or len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    gen = default_generator(dataset.dim, rng)
    critic = default_critic(dataset.dim, rng)
    cfg = replace(config, weights=(1.0, 0.0))
    _train_two_critic(
        gen, critic, None, lambda n, r: _sample_rows(dataset, n, r), None, cfg, rng, monitor
    )
    return gen, critic


def train_stage1(
    pretrained: list,
    weights: list,
    config: TrainConfig,
    replay_critic_init: str = "data_critic",
    monitor=None,
):
    """Recursive offline coalescence of K >= 2 pre-trained (generator, critic) pairs.

    Recursion k trains a generator initialized from the running barycenter
    against a critic initialized from node k's critic (real batches: node k
    generator samples) and a replay critic (real batches: frozen previous
    barycenter samples).  ``weights`` holds one (data, replay) lambda pair per
    recursion; a single pair is broadcast.

    The replay critic for recursion k+1 is initialized from the critic that
    last judged the barycenter generator: the data critic of recursion k
    (``replay_critic_init="data_critic"``), or the previous replay critic with
    ``"replay_critic"``.
    """
    k_total = len(pretrained)
    if k_total < 2:
        raise ValueError("stage 1 needs at least two pre-trained models")
    dims = {g.data_dim for g, _ in pretrained}
    if len(dims) != 1:
        raise ValueError(f"data dimension mismatch across models: {sorted(dims)}")
    if replay_critic_init not in ("data_critic", "replay_critic"):
        raise ValueError(f"unknown replay_critic_init {replay_critic_init!r}")
    pairs = list(weights) if isinstance(weights[0], (tuple, list)) else [tuple(weights)]
    if len(pairs) == 1:
        pairs = pairs * (k_total - 1)
    if len(pairs) != k_total - 1:
        raise ValueError(f"need {k_total - 1} weight pairs, got {len(pairs)}")

    rng = np.random.default_rng(config.seed)
    bary_gen = pretrained[0][0].clone()
    replay_critic = pretrained[0][1].clone()
    data_critic = None

    for k in range(1, k_total):
        node_gen, node_critic = pretrained[k]
        frozen_prev = bary_gen
        bary_gen = frozen_prev.clone()
        data_critic = node_critic.clone()
        cfg = replace(config, weights=tuple(pairs[k - 1]))
        _train_two_critic(
            bary_gen,
            data_critic,
            replay_critic,
            lambda n, r, g=node_gen: g.sample(n, r),
            lambda n, r, g=frozen_prev: g.sample(n, r),
            cfg,
            rng,
            monitor,
        )
        if k < k_total - 1:
            replay_critic = (
                data_critic.clone() if replay_critic_init == "data_critic" else replay_critic
            )
    return bary_gen, replay_critic, data_critic


def train_stage2(
    meta: GeneratorModel,
    meta_critics: tuple,
    local_data: DiscreteMeasure,
    config: TrainConfig,
    monitor=None,
) -> GeneratorModel:
    """Fast adaptation at the target node from the Stage-I meta model.

    ``meta_critics`` is the (replay_critic, data_critic) pair returned by
    train_stage1; the data critic sees local samples as real, the replay
    critic sees frozen meta samples (generative replay).
    """
    if local_data is None or len(local_data) == 0:
        raise ValueError("empty local dataset")
    if local_data.dim != meta.data_dim:
        raise ValueError("local data dimension does not match the meta generator")
    rng = np.random.default_rng(config.seed)
    gen = meta.clone()
    replay_critic = meta_critics[0].clone()
    data_critic = meta_critics[1].clone()
    _train_two_critic(
        gen,
        data_critic,
        replay_critic,
        lambda n, r: _sample_rows(local_data, n, r),
        lambda n, r: meta.sample(n, r),
        config,
        rng,
        monitor,
    )
    return gen


def baseline_edge_only(local_data: DiscreteMeasure, config: TrainConfig, monitor=None) -> GeneratorModel:
    """WGAN-GP from scratch on the local samples only."""
    gen, _ = train_pretrained(local_data, config, monitor)
    return gen


def baseline_transfer(
    pretrained_gen: GeneratorModel,
    local_data: DiscreteMeasure,
    config: TrainConfig,
    monitor=None,
) -> GeneratorModel:
    """Fine-tune a pre-trained generator on local data with a fresh single critic."""
    if local_data is None or len(local_data) == 0:
        raise ValueError("empty local dataset")
    rng = np.random.default_rng(config.seed)
    gen = pretrained_gen.clone()
    critic = default_critic(gen.data_dim, rng)
    cfg = replace(config, weights=(1.0, 0.0))
    _train_two_critic(
        gen, critic, None, lambda n, r: _sample_rows(local_data, n, r), None, cfg, rng, monitor
    )
    return gen


def baseline_ensemble(
    pretrained_gens: list,
    local_data: DiscreteMeasure | None,
    config: TrainConfig,
    monitor=None,
) -> GeneratorModel:
    """Single-critic training on batches mixed evenly across local data and replay.

    Each real batch takes ceil/floor(m / n_sources) rows per source.  With no
    local data this distills the pre-trained generators.  The generator is
    initialized from the first pre-trained model.
    """
    if not pretrained_gens:
        raise ValueError("at least one pre-trained generator required")
    sources = []
    if local_data is not None and len(local_data) > 0:
        sources.append(lambda n, r: _sample_rows(local_data, n, r))
    for g in pretrained_gens:
        sources.append(lambda n, r, g=g: g.sample(n, r))

    def draw_mixed(n, r):
        base, rem = divmod(n, len(sources))
        counts = [base + (1 if i < rem else 0) for i in range(len(sources))]
        return np.vstack([src(c, r) for src, c in zip(sources, counts) if c > 0])

    rng = np.random.default_rng(config.seed)
    gen = pretrained_gens[0].clone()
    critic = default_critic(gen.data_dim, rng)
    cfg = replace(config, weights=(1.0, 0.0))
    _train_two_critic(gen, critic, None, draw_mixed, None, cfg, rng, monitor)
    return gen
