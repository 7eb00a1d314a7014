"""Ternary quantization-aware fast adaptation.

Weights quantize to {-S, 0, +S} per layer with a symmetric trainable
threshold; S is the mean absolute value of the surviving weights.  Training
interleaves three phases per iteration: ternarize, threshold updates (plain
gradient steps through a sigmoid-smoothed surrogate of the quantizer), and
full-precision weight updates (Adam through the straight-through estimator).
Biases stay full precision throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, grad
from .coalesce import GeneratorModel, NoisePrior, TrainConfig
from .measures import DiscreteMeasure
from .nn import AdamState, MLPParams, adam_step, param

__all__ = [
    "TernaryLayerState",
    "TernaryMLP",
    "TernaryGenerator",
    "ternarize_layer",
    "ternary_forward",
    "threshold_step",
    "weight_step",
    "train_stage2_ternary",
]

# Fraction of max|w| used for the initial threshold and the sigmoid width
# of the smoothed surrogate.
INIT_DELTA_FRAC = 0.05
SMOOTH_WIDTH_FRAC = 0.05


class DegenerateLayerWarning(UserWarning):
    """Raised when a threshold wipes out every weight in a layer."""


@dataclass
class TernaryLayerState:
    """Full-precision weights plus symmetric threshold; scale and quantized cached."""

    weight: Tensor
    threshold: float
    scale: float = 0.0
    quantized: np.ndarray | None = None

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.quantized is None:
            ternarize_layer(self)


def ternarize_layer(state: TernaryLayerState) -> np.ndarray:
    """Recompute the {-S, 0, +S} weights from (w, threshold) and refresh the cache.

    S is the mean |w| over weights beyond the threshold; an empty survivor
    set degenerates to S = 0 with a warning.
    """
    w = state.weight.data
    survivors = np.abs(w) > state.threshold
    if survivors.any():
        scale = float(np.abs(w[survivors]).mean())
    else:
        scale = 0.0
        warnings.warn(
            f"threshold {state.threshold:.3g} exceeds max|w|; layer quantizes to zero",
            DegenerateLayerWarning,
            stacklevel=2,
        )
    q = np.zeros_like(w)
    q[w > state.threshold] = scale
    q[w < -state.threshold] = -scale
    state.scale = scale
    state.quantized = q
    return q


@dataclass
class TernaryMLP:
    """MLP whose weight matrices are quantization states; biases full precision."""

    states: list
    biases: list
    activations: list

    @staticmethod
    def from_mlp(model: MLPParams, delta_frac: float = INIT_DELTA_FRAC) -> "TernaryMLP":
        states = []
        for w in model.weights:
            data = w.data.copy()
            states.append(
                TernaryLayerState(param(data), float(delta_frac * np.abs(data).max()))
            )
        return TernaryMLP(
            states, [param(b.data.copy()) for b in model.biases], list(model.activations)
        )

    def refresh(self) -> None:
        for state in self.states:
            ternarize_layer(state)

    def quantized_mlp(self) -> MLPParams:
        """Deployable snapshot: quantized weights as a plain MLP."""
        return MLPParams(
            [param(s.quantized.copy()) for s in self.states],
            [param(b.data.copy()) for b in self.biases],
            list(self.activations),
        )


def _activate(x: Tensor, act: str) -> Tensor:
    if act == "relu":
        return x.relu()
    if act == "leaky_relu":
        return x.leaky_relu(0.2)
    if act == "tanh":
        return x.tanh()
    return x


def _ste_weight(state: TernaryLayerState) -> Tensor:
    """Hard quantized values forwarded; gradient passed straight through to w.

    The pass-through mask is |w| <= max|w|, which every weight satisfies, so
    the estimator is the identity on this parameterization.
    """
    w = state.weight
    mask = (np.abs(w.data) <= np.abs(w.data).max()).astype(np.float64)
    out = Tensor(state.quantized, (w,))
    out.vjp = lambda g: (g * Tensor(mask),)
    return out


def _smooth_weight(state: TernaryLayerState, delta: Tensor) -> Tensor:
    """Sigmoid-smoothed surrogate of the quantizer, differentiable in delta."""
    magnitude = np.abs(state.weight.data)
    sign = np.sign(state.weight.data)
    tau = max(SMOOTH_WIDTH_FRAC * float(magnitude.max()), 1e-12)
    member = ((Tensor(magnitude) - delta) * (1.0 / tau)).sigmoid()
    scale = (Tensor(magnitude) * member).sum() / (member.sum() + 1e-12)
    return scale * (Tensor(sign) * member)


def ternary_forward(net: TernaryMLP, x, mode: str = "hard", deltas: list | None = None) -> Tensor:
    """Forward pass with quantized weights.

    ``hard`` uses the cached ternary weights with straight-through gradients
    to the full-precision weights; ``smooth`` rebuilds the weights from the
    given per-layer delta tensors so the loss is differentiable in the
    thresholds.
    """
    h = x if isinstance(x, Tensor) else Tensor(x)
    if h.data.ndim != 2 or h.data.shape[1] != net.states[0].weight.shape[0]:
        raise ValueError(f"input shape {h.data.shape} incompatible with first layer")
    for k, (state, b, act) in enumerate(zip(net.states, net.biases, net.activations)):
        if mode == "hard":
            w = _ste_weight(state)
        elif mode == "smooth":
            w = _smooth_weight(state, deltas[k])
        else:
            raise ValueError(f"unknown mode {mode!r}")
        h = _activate(h @ w + b, act)
    return h


def plain_forward(net: TernaryMLP, x: np.ndarray) -> np.ndarray:
    """Graph-free inference on the quantized weights."""
    h = np.asarray(x, dtype=float)
    for state, b, act in zip(net.states, net.biases, net.activations):
        h = h @ state.quantized + b.data
        if act == "relu":
            h = np.maximum(h, 0.0)
        elif act == "leaky_relu":
            h = np.where(h > 0, h, 0.2 * h)
        elif act == "tanh":
            h = np.tanh(h)
    return h


@dataclass
class TernaryGenerator:
    net: TernaryMLP
    noise_prior: NoisePrior
    data_dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return plain_forward(self.net, self.noise_prior.sample(n, rng))


def threshold_step(net: TernaryMLP, loss_builder, lr: float, sign: float = 1.0) -> list:
    """Plain gradient step on every layer threshold through the smooth surrogate.

    ``loss_builder(deltas)`` must return the scalar training loss with the
    net's weights rebuilt from the given delta tensors; ``sign=+1`` descends,
    ``sign=-1`` ascends.  Thresholds clamp to [0, max|w|] per layer.
    """
    deltas = [param(np.asarray(s.threshold)) for s in net.states]
    loss = loss_builder(deltas)
    grads = grad(loss, deltas)
    updated = []
    for state, d, g in zip(net.states, deltas, grads):
        new = state.threshold - sign * lr * float(g.data)
        state.threshold = float(np.clip(new, 0.0, np.abs(state.weight.data).max()))
        updated.append(state.threshold)
    return updated


def weight_step(net: TernaryMLP, loss_builder, adam: AdamState) -> None:
    """Adam step on full-precision weights and biases through the hard quantizer."""
    params = [s.weight for s in net.states] + list(net.biases)
    loss = loss_builder()
    grads = grad(loss, params)
    adam_step(params, grads, adam)


def _adam_for_net(net: TernaryMLP, config: TrainConfig) -> AdamState:
    params = [s.weight for s in net.states] + list(net.biases)
    return AdamState.for_params(
        params, lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2
    )


def _wgan_bracket(net: TernaryMLP, real, fake, mode, deltas=None) -> Tensor:
    """E[net(real)] - E[net(fake)] with the requested quantizer mode."""
    return (
        ternary_forward(net, real, mode, deltas).mean()
        - ternary_forward(net, fake, mode, deltas).mean()
    )


def train_stage2_ternary(
    meta: GeneratorModel,
    meta_critics: tuple,
    local_data: DiscreteMeasure,
    config: TrainConfig,
    monitor=None,
) -> TernaryGenerator:
    """Quantization-aware fast adaptation at the target node.

    Per iteration: ternarize generator and both critics, take threshold steps
    (critics ascend their bracket, generator descends its score), re-ternarize,
    then full-precision weight updates (critic_iters critic steps with
    gradient penalty, one generator step), and a final re-ternarize so the
    quantized caches always match (w, delta) at iteration boundaries.
    """
    if local_data is None or len(local_data) == 0:
        raise ValueError("empty local dataset")
    if local_data.dim != meta.data_dim:
        raise ValueError("local data dimension does not match the meta generator")
    rng = np.random.default_rng(config.seed)
    lam_data, lam_replay = config.weights
    m = config.batch_size

    gen = TernaryGenerator(TernaryMLP.from_mlp(meta.params), meta.noise_prior, meta.data_dim)
    replay_net = TernaryMLP.from_mlp(meta_critics[0].params)
    data_net = TernaryMLP.from_mlp(meta_critics[1].params)

    gen_adam = _adam_for_net(gen.net, config)
    data_adam = _adam_for_net(data_net, config)
    replay_adam = _adam_for_net(replay_net, config)

    def draw_local(n, r):
        idx = r.choice(len(local_data), size=n, p=local_data.weights)
        return local_data.points[idx]

    for it in range(config.generator_iters):
        gen.net.refresh()
        data_net.refresh()
        replay_net.refresh()

        z = gen.noise_prior.sample(m, rng)
        fake = plain_forward(gen.net, z)
        x_local = draw_local(m, rng)
        x_replay = meta.sample(m, rng)

        # critics ascend their weighted brackets in the thresholds
        threshold_step(
            data_net,
            lambda d: lam_data * _wgan_bracket(data_net, x_local, fake, "smooth", d),
            config.learning_rate,
            sign=-1.0,
        )
        threshold_step(
            replay_net,
            lambda d: lam_replay * _wgan_bracket(replay_net, x_replay, fake, "smooth", d),
            config.learning_rate,
            sign=-1.0,
        )
        # generator descends the two-critic score through its own thresholds
        def gen_threshold_loss(deltas):
            out = ternary_forward(gen.net, z, "smooth", deltas)
            return -(
                lam_data * ternary_forward(data_net, out, "hard").mean()
                + lam_replay * ternary_forward(replay_net, out, "hard").mean()
            )

        threshold_step(gen.net, gen_threshold_loss, config.learning_rate, sign=1.0)
        gen.net.refresh()
        data_net.refresh()
        replay_net.refresh()

        for _ in range(config.critic_iters_per_gen):
            z = gen.noise_prior.sample(m, rng)
            fake = plain_forward(gen.net, z)
            x_local = draw_local(m, rng)
            x_replay = meta.sample(m, rng)
            weight_step(
                data_net,
                lambda: -lam_data * _wgan_bracket(data_net, x_local, fake, "hard")
                + _ternary_penalty(data_net, x_local, fake, config.gp_coefficient, rng),
                data_adam,
            )
            weight_step(
                replay_net,
                lambda: -lam_replay * _wgan_bracket(replay_net, x_replay, fake, "hard")
                + _ternary_penalty(replay_net, x_replay, fake, config.gp_coefficient, rng),
                replay_adam,
            )
            data_net.refresh()
            replay_net.refresh()

        z = gen.noise_prior.sample(m, rng)

        def gen_weight_loss():
            out = ternary_forward(gen.net, z, "hard")
            return -(
                lam_data * ternary_forward(data_net, out, "hard").mean()
                + lam_replay * ternary_forward(replay_net, out, "hard").mean()
            )

        weight_step(gen.net, gen_weight_loss, gen_adam)
        gen.net.refresh()
        if monitor is not None:
            monitor(it + 1, gen)
    return gen


def _ternary_penalty(net: TernaryMLP, real, fake, coefficient, rng) -> Tensor:
    """Gradient penalty through the hard quantizer; reaches w via straight-through."""
    if coefficient == 0:
        return Tensor(0.0)
    u = rng.uniform(size=(real.shape[0], 1))
    x_hat = Tensor(u * real + (1.0 - u) * fake, requires_grad=True)
    score = ternary_forward(net, x_hat, "hard").sum()
    (gx,) = grad(score, [x_hat], create_graph=True)
    norms = ((gx * gx).sum(axis=1) + 1e-12).sqrt()
    return coefficient * ((norms - 1.0) ** 2).mean()
