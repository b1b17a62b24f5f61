"""Winner-takes-all self-organizing map for two-class clustering.

Training presents samples in stored order; only the best-matching weight row
moves, by w <- w + alpha * (x - w). The learning rate halves every epoch, and
training stops early once an epoch no longer moves any weight meaningfully.
Clusters are turned into a classifier by majority vote over labeled training
samples, with the fixed order (cluster 0 = Normal, cluster 1 = Sick) as the
fallback for empty or tied clusters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector

NORMAL = "Normal"
SICK = "Sick"
CLASS_LABELS = (NORMAL, SICK)

GENERATOR_NAME = "pcg64"  # numpy default_rng bit generator
EARLY_STOP_DELTA = 1e-12


@dataclass(frozen=True)
class SomConfig:
    """Hyperparameters: cluster count, input dimension, schedule, seed."""

    dims: int
    clusters: int = 2
    epochs: int = 700
    alpha0: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError("need at least 2 clusters")
        if self.dims < 1:
            raise ValueError("need at least 1 dimension")
        if self.epochs < 1:
            raise ValueError("need at least 1 epoch")
        if not 0.0 < self.alpha0 <= 1.0:
            raise ValueError("initial learning rate must be in (0, 1]")


@dataclass(frozen=True)
class SomModel:
    """Weight matrix (clusters x dims) plus the cluster-to-label map."""

    weights: np.ndarray
    label_map: Mapping[int, str] | None
    config: SomConfig
    trained_epochs: int = 0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).copy()
        if weights.shape != (self.config.clusters, self.config.dims):
            raise ValueError(
                f"weights shape {weights.shape} does not match config "
                f"({self.config.clusters}, {self.config.dims})"
            )
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if self.label_map is not None:
            object.__setattr__(self, "label_map", dict(self.label_map))


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch learning rates and errors recorded while training."""

    alphas: tuple[float, ...]
    sse_per_epoch: tuple[float, ...]
    final_avg: float


def alpha_schedule(alpha0: float, epochs: int) -> tuple[float, ...]:
    """Learning rate per epoch: alpha halves after every epoch."""
    rates = []
    alpha = float(alpha0)
    for _ in range(epochs):
        rates.append(alpha)
        alpha *= 0.5
    return tuple(rates)


def init_weights(config: SomConfig) -> SomModel:
    """Draw every weight uniformly from [0, 1) with a seeded generator."""
    rng = np.random.default_rng(config.seed)
    weights = rng.random((config.clusters, config.dims))
    return SomModel(weights=weights, label_map=None, config=config)


def _check_dims(model: SomModel, x: FeatureVector) -> np.ndarray:
    if len(x) != model.config.dims:
        raise ValueError("dimension mismatch")
    return x.values


def _squared_distances(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    delta = weights - values
    return np.einsum("ij,ij->i", delta, delta)


def distance(model: SomModel, x: FeatureVector, cluster: int) -> float:
    """Squared Euclidean distance from the sample to one weight row.

    Computed through the same vectorized path as find_winner, so the two
    always agree bit for bit.
    """
    values = _check_dims(model, x)
    if not 0 <= cluster < model.config.clusters:
        raise ValueError("cluster index out of range")
    return float(_squared_distances(model.weights, values)[cluster])


def find_winner(model: SomModel, x: FeatureVector) -> int:
    """Index of the nearest weight row; ties go to the lowest index."""
    values = _check_dims(model, x)
    return int(np.argmin(_squared_distances(model.weights, values)))


def _move_toward(row: np.ndarray, values: np.ndarray, alpha: float) -> np.ndarray:
    # x + (1 - alpha) * (w - x) == w + alpha * (x - w), but lands exactly on x
    # at alpha == 1 and leaves w bit-identical when w == x.
    return values + (1.0 - alpha) * (row - values)


def update_winner(model: SomModel, x: FeatureVector, winner: int, alpha: float) -> SomModel:
    """Move the winning row toward the sample; all other rows stay bitwise intact."""
    values = _check_dims(model, x)
    if not 0 <= winner < model.config.clusters:
        raise ValueError("cluster index out of range")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("learning rate must be in (0, 1]")
    weights = model.weights.copy()
    weights[winner] = _move_toward(weights[winner], values, alpha)
    return replace(model, weights=weights)


def train(samples: Sequence[FeatureVector], config: SomConfig) -> tuple[SomModel, TrainingTrace]:
    """Run the competitive training loop and return the model with its trace.

    Each epoch presents every sample once, in stored order, updating only the
    winner. The rate for epoch t is alpha0 * 0.5^t. Training ends after the
    configured epochs, or earlier when no weight moved by more than 1e-12
    within an epoch.
    """
    if len(samples) == 0:
        raise ValueError("no samples")
    if len(samples) < config.clusters:
        raise ValueError(f"need at least {config.clusters} samples")
    if any(len(s) != config.dims for s in samples):
        raise ValueError("dimension mismatch")
    data = np.stack([s.values for s in samples])

    weights = init_weights(config).weights.copy()
    alphas: list[float] = []
    sse_per_epoch: list[float] = []
    alpha = config.alpha0
    epochs_run = 0
    for _ in range(config.epochs):
        alphas.append(alpha)
        max_step = 0.0
        for values in data:
            winner = int(np.argmin(_squared_distances(weights, values)))
            moved = _move_toward(weights[winner], values, alpha)
            step = float(np.max(np.abs(moved - weights[winner])))
            if step > max_step:
                max_step = step
            weights[winner] = moved
        sse_per_epoch.append(float(_winner_squared_distances(weights, data).sum()))
        epochs_run += 1
        if max_step <= EARLY_STOP_DELTA:
            break
        alpha *= 0.5

    model = SomModel(weights=weights, label_map=None, config=config, trained_epochs=epochs_run)
    final_avg = float(np.sqrt(_winner_squared_distances(weights, data)).mean())
    return model, TrainingTrace(tuple(alphas), tuple(sse_per_epoch), final_avg)


def _winner_squared_distances(weights: np.ndarray, data: np.ndarray) -> np.ndarray:
    deltas = data[:, None, :] - weights[None, :, :]
    return np.einsum("mjk,mjk->mj", deltas, deltas).min(axis=1)


def _fallback_label(cluster: int) -> str:
    return NORMAL if cluster == 0 else SICK


def assign_labels(
    model: SomModel,
    samples: Sequence[FeatureVector],
    labels: Sequence[str],
) -> SomModel:
    """Label each cluster by majority vote of the training samples it wins.

    A cluster that wins nothing, or whose vote ties, takes the fixed-order
    fallback: cluster 0 is Normal, every other cluster is Sick.
    """
    if len(samples) != len(labels):
        raise ValueError("samples/labels length mismatch")
    votes: dict[int, Counter] = {c: Counter() for c in range(model.config.clusters)}
    for sample, label in zip(samples, labels):
        votes[find_winner(model, sample)][label] += 1
    label_map: dict[int, str] = {}
    for cluster in range(model.config.clusters):
        counts = votes[cluster]
        if counts:
            top = max(counts.values())
            leaders = [label for label, n in counts.items() if n == top]
            if len(leaders) == 1:
                label_map[cluster] = leaders[0]
                continue
        label_map[cluster] = _fallback_label(cluster)
    return replace(model, label_map=label_map)


def classify(model: SomModel, x: FeatureVector) -> str:
    """Label of the winning cluster."""
    if model.label_map is None or len(model.label_map) != model.config.clusters:
        raise ValueError("untrained model")
    return model.label_map[find_winner(model, x)]


def sse(model: SomModel, samples: Sequence[FeatureVector]) -> float:
    """Sum of squared distances from each sample to its winning row."""
    if len(samples) == 0:
        raise ValueError("no samples")
    data = np.stack([_check_dims(model, s) for s in samples])
    return float(_winner_squared_distances(model.weights, data).sum())


def avg_quantization_error(model: SomModel, samples: Sequence[FeatureVector]) -> float:
    """Mean Euclidean distance from each sample to its winning row."""
    if len(samples) == 0:
        raise ValueError("no samples")
    data = np.stack([_check_dims(model, s) for s in samples])
    return float(np.sqrt(_winner_squared_distances(model.weights, data)).mean())
