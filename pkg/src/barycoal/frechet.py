"""Fréchet-distance evaluation between Gaussian fits of (feature) embeddings.

Identity features are the default for the 2D toys; a tiny trained classifier
provides learned features for the modified-score experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, grad
from .coalesce import GeneratorModel, sample_generator
from .measures import DiscreteMeasure
from .nn import AdamState, MLPParams, adam_step, forward, init_mlp, parameters

__all__ = [
    "GaussianFit",
    "FeatureExtractor",
    "ClassifierConfig",
    "fit_gaussian",
    "frechet_distance",
    "train_feature_extractor",
    "score_model",
]

RIDGE = 1e-6


@dataclass
class GaussianFit:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValueError("covariance must be symmetric")
        self.covariance = 0.5 * (cov + cov.T)


@dataclass
class FeatureExtractor:
    """Identity features, or the penultimate layer of a tiny trained classifier."""

    kind: str = "identity"
    params: MLPParams | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "tiny_classifier"):
            raise ValueError(f"unknown feature extractor {self.kind!r}")
        if self.kind == "tiny_classifier" and self.params is None:
            raise ValueError("tiny_classifier requires trained parameters")

    def features(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        if self.kind == "identity":
            return x
        penultimate = MLPParams(
            self.params.weights[:-1], self.params.biases[:-1], self.params.activations[:-1]
        )
        return forward(penultimate, x).data

    def logits(self, points: np.ndarray) -> np.ndarray:
        if self.kind != "tiny_classifier":
            raise ValueError("logits only defined for the classifier extractor")
        return forward(self.params, np.asarray(points, dtype=float)).data


def fit_gaussian(samples: DiscreteMeasure, extractor: FeatureExtractor | None = None) -> GaussianFit:
    """Weighted mean/covariance of extracted features, ridge-stabilized."""
    if samples is None or len(samples) == 0:
        raise ValueError("empty sample set")
    extractor = extractor or FeatureExtractor()
    feats = extractor.features(samples.points)
    w = samples.weights
    mean = w @ feats
    centered = feats - mean
    cov = (centered * w[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T) + RIDGE * np.eye(feats.shape[1])
    return GaussianFit(mean, cov)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(matrix)
    if vals.min() < -1e-8:
        raise ValueError(f"matrix not PSD (min eigenvalue {vals.min():.3g}); upstream bug")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(a: GaussianFit, b: GaussianFit) -> float:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)."""
    if a.mean.size != b.mean.size:
        raise ValueError("dimension mismatch")
    diff = a.mean - b.mean
    root_a = _psd_sqrt(a.covariance)
    inner = root_a @ b.covariance @ root_a
    inner = 0.5 * (inner + inner.T)
    vals = np.linalg.eigvalsh(inner)
    cross = 2.0 * np.sqrt(np.clip(vals, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - cross)
    return max(value, 0.0)


@dataclass(frozen=True)
class ClassifierConfig:
    hidden: int = 16
    iters: int = 400
    learning_rate: float = 0.05
    seed: int = 0


def train_feature_extractor(
    points: np.ndarray,
    labels: np.ndarray,
    config: ClassifierConfig = ClassifierConfig(),
) -> FeatureExtractor:
    """Small softmax classifier on labeled toy data; penultimate layer = features."""
    x = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=int).ravel()
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    remap = {c: i for i, c in enumerate(classes)}
    y = np.array([remap[c] for c in y])
    onehot = np.zeros((len(y), classes.size))
    onehot[np.arange(len(y)), y] = 1.0

    rng = np.random.default_rng(config.seed)
    model = init_mlp([x.shape[1], config.hidden, classes.size], ["tanh", "identity"], rng)
    params = parameters(model)
    adam = AdamState.for_params(params, lr=config.learning_rate, beta1=0.9, beta2=0.999)
    onehot_t = Tensor(onehot)
    for _ in range(config.iters):
        logits = forward(model, x)
        shift = Tensor(logits.data.max(axis=1, keepdims=True))
        z = logits - shift
        lse = z.exp().sum(axis=1, keepdims=True).log()
        true_logit = (z * onehot_t).sum(axis=1, keepdims=True)
        loss = (lse - true_logit).mean()
        adam_step(params, grad(loss, params), adam)
    return FeatureExtractor("tiny_classifier", model)


def classifier_accuracy(extractor: FeatureExtractor, points: np.ndarray, labels: np.ndarray) -> float:
    pred = extractor.logits(points).argmax(axis=1)
    y = np.asarray(labels, dtype=int).ravel()
    remap = {c: i for i, c in enumerate(np.unique(y))}
    return float(np.mean(pred == np.array([remap[c] for c in y])))


def score_model(
    g: GeneratorModel,
    reference: DiscreteMeasure,
    extractor: FeatureExtractor | None = None,
    n: int = 5000,
    seed: int = 0,
) -> float:
    """Fréchet distance between n generator samples and the full reference measure."""
    if n < 100:
        raise ValueError("need at least 100 samples for a stable fit")
    fake = sample_generator(g, n, seed)
    return frechet_distance(fit_gaussian(fake, extractor), fit_gaussian(reference, extractor))
