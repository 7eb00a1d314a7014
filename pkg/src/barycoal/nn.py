"""MLPs, Adam, the WGAN-GP penalty term, and text checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, grad, param

__all__ = [
    "MLPParams",
    "AdamState",
    "init_mlp",
    "forward",
    "parameters",
    "clone_params",
    "params_fingerprint",
    "adam_step",
    "gradient_penalty",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "identity")
LEAKY_SLOPE = 0.2
CHECKPOINT_MAGIC = "barycoal-checkpoint 1"


@dataclass
class MLPParams:
    """Per-layer (weight, bias) tensors with one activation name per layer."""

    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must align")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for k in range(1, len(self.weights)):
            if self.weights[k - 1].shape[1] != self.weights[k].shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")

    @property
    def sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def init_mlp(sizes: list, activations: list, rng: np.random.Generator) -> MLPParams:
    """He-style uniform fan-in initialization; biases start at zero."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(param(rng.uniform(-bound, bound, size=(fan_in, fan_out))))
        biases.append(param(np.zeros(fan_out)))
    return MLPParams(weights, biases, list(activations))


def _activate(x: Tensor, act: str) -> Tensor:
    if act == "relu":
        return x.relu()
    if act == "leaky_relu":
        return x.leaky_relu(LEAKY_SLOPE)
    if act == "tanh":
        return x.tanh()
    return x


def forward(model: MLPParams, x: Tensor | np.ndarray) -> Tensor:
    """Batched affine + activation chain; records the graph for backward."""
    h = x if isinstance(x, Tensor) else Tensor(x)
    if h.data.ndim != 2 or h.data.shape[1] != model.weights[0].shape[0]:
        raise ValueError(
            f"input shape {h.data.shape} incompatible with first layer "
            f"({model.weights[0].shape[0]} features expected)"
        )
    for w, b, act in zip(model.weights, model.biases, model.activations):
        h = _activate(h @ w + b, act)
    return h


def parameters(model: MLPParams) -> list:
    out = []
    for w, b in zip(model.weights, model.biases):
        out.extend((w, b))
    return out


def clone_params(model: MLPParams) -> MLPParams:
    return MLPParams(
        [param(w.data.copy()) for w in model.weights],
        [param(b.data.copy()) for b in model.biases],
        list(model.activations),
    )


def params_fingerprint(model: MLPParams) -> bytes:
    """Byte-exact digest of all parameter values (frozen-model assertions)."""
    import hashlib

    h = hashlib.sha256()
    for t in parameters(model):
        h.update(t.data.tobytes())
    return h.digest()


@dataclass
class AdamState:
    """Adam accumulators; shapes mirror the parameter list order."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @staticmethod
    def for_params(params: list, lr=1e-4, beta1=0.5, beta2=0.999, eps=1e-8) -> "AdamState":
        return AdamState(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(params: list, grads: list, state: AdamState) -> None:
    """One bias-corrected Adam descent step, updating parameters in place."""
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("parameter/gradient/state length mismatch")
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        gd = g.data if isinstance(g, Tensor) else np.asarray(g, dtype=float)
        if gd.shape != p.data.shape:
            raise ValueError(f"gradient shape {gd.shape} != parameter shape {p.data.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * gd
        v *= state.beta2
        v += (1.0 - state.beta2) * gd * gd
        p.data = p.data - state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)


def gradient_penalty(
    critic: MLPParams,
    real_batch: np.ndarray,
    fake_batch: np.ndarray,
    coefficient: float,
    rng: np.random.Generator,
) -> Tensor:
    """Soft Lipschitz penalty: coefficient * E[(||grad critic(x_hat)||_2 - 1)^2].

    x_hat mixes real and fake rows at per-row uniform weights.  The input
    gradient is built with create_graph=True so the penalty can be
    differentiated w.r.t. critic parameters (double backward).
    """
    real = real_batch.data if isinstance(real_batch, Tensor) else np.asarray(real_batch, dtype=float)
    fake = fake_batch.data if isinstance(fake_batch, Tensor) else np.asarray(fake_batch, dtype=float)
    if real.shape != fake.shape:
        raise ValueError(f"batch shape mismatch: {real.shape} vs {fake.shape}")
    if coefficient < 0:
        raise ValueError("penalty coefficient must be nonnegative")
    if coefficient == 0:
        return Tensor(0.0)
    u = rng.uniform(size=(real.shape[0], 1))
    x_hat = Tensor(u * real + (1.0 - u) * fake, requires_grad=True)
    score = forward(critic, x_hat).sum()
    (gx,) = grad(score, [x_hat], create_graph=True)
    # tiny floor keeps sqrt differentiable if the gradient ever vanishes
    norms = ((gx * gx).sum(axis=1) + 1e-12).sqrt()
    return coefficient * ((norms - 1.0) ** 2).mean()


# -- checkpoints -------------------------------------------------------------
# Line format: magic, one-line JSON header, then per-array "name size" lines
# followed by the flat values.  repr() round-trips float64 bit-exactly.


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    flat = arr.ravel()
    fh.write(f"{name} {' '.join(str(int(s)) for s in arr.shape)}\n")
    fh.write(" ".join(repr(float(x)) for x in flat) + "\n")


def _read_array(lines, idx: int) -> tuple[str, np.ndarray, int]:
    head = lines[idx].split()
    name, shape = head[0], tuple(int(s) for s in head[1:])
    values = np.array([float(tok) for tok in lines[idx + 1].split()], dtype=np.float64)
    return name, values.reshape(shape), idx + 2


def save_checkpoint(path, model: MLPParams, header: dict, extra_arrays: dict | None = None) -> None:
    """Text checkpoint: JSON header then flat decimal arrays (bit-exact)."""
    header = dict(header)
    header["sizes"] = model.sizes
    header["activations"] = list(model.activations)
    with open(path, "w") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for k, (w, b) in enumerate(zip(model.weights, model.biases)):
            _write_array(fh, f"W{k}", w.data)
            _write_array(fh, f"b{k}", b.data)
        for name, arr in (extra_arrays or {}).items():
            _write_array(fh, name, np.asarray(arr, dtype=np.float64))


def load_checkpoint(path) -> tuple[MLPParams, dict, dict]:
    """Inverse of save_checkpoint: (model, header, extra arrays)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a barycoal checkpoint")
    header = json.loads(lines[1])
    arrays, idx = {}, 2
    while idx < len(lines):
        name, arr, idx = _read_array(lines, idx)
        arrays[name] = arr
    n_layers = len(header["activations"])
    weights = [param(arrays.pop(f"W{k}")) for k in range(n_layers)]
    biases = [param(arrays.pop(f"b{k}")) for k in range(n_layers)]
    model = MLPParams(weights, biases, list(header["activations"]))
    return model, header, arrays
