"""Contrastive loss and its layer-weighted combination, with analytic
gradients and a toy embedding fitter used for verification.

The pair loss on representations r1, r2 with squared Euclidean distance
D = ||r1 - r2||^2 is 0.5*D for same-class pairs and 0.5*max(0, delta - D)
for different-class pairs.  The layer-aware loss is a convex combination of
per-layer mean pair losses, weighted so that earlier layers count more.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

DEFAULT_DELTA = 1.0

__all__ = [
    "DEFAULT_DELTA",
    "LayerWeights",
    "Pair",
    "contrastive_pair",
    "contrastive_pair_grad",
    "layer_aware_loss",
    "layer_aware_loss_grad",
    "default_alpha",
    "all_pairs",
    "fit_embeddings",
    "gradient_check",
]


@dataclass(frozen=True)
class LayerWeights:
    """Convex per-layer coefficients: alpha_i >= 0, sum = 1 (within 1e-12)."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(v) for v in self.alpha)
        if len(a) < 1:
            raise ValidationError("need at least one layer weight")
        if any(v < 0 for v in a):
            raise ValidationError("layer weights must be >= 0")
        if abs(sum(a) - 1.0) > 1e-12:
            raise ValidationError(f"layer weights must sum to 1, got {sum(a)}")
        object.__setattr__(self, "alpha", a)

    def __len__(self) -> int:
        return len(self.alpha)


@dataclass
class Pair:
    """One training pair at one layer."""

    rep_a: np.ndarray
    rep_b: np.ndarray
    same_class: bool

    def __post_init__(self):
        self.rep_a = np.asarray(self.rep_a, dtype=float)
        self.rep_b = np.asarray(self.rep_b, dtype=float)
        if self.rep_a.shape != self.rep_b.shape:
            raise ValidationError("pair representations must share dimension")


def default_alpha(n_layers: int) -> LayerWeights:
    """Weights proportional to (L - i + 1): strictly decreasing for L >= 2."""
    if n_layers < 1:
        raise ValidationError("n_layers must be >= 1")
    raw = np.arange(n_layers, 0, -1, dtype=float)
    return LayerWeights(tuple(raw / raw.sum()))


def contrastive_pair(r1, r2, same_class: bool, delta: float = DEFAULT_DELTA) -> float:
    """Pair loss: 0.5*D if same class, else 0.5*max(0, delta - D)."""
    if delta <= 0:
        raise ValidationError("delta must be > 0")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape:
        raise ValidationError("representations must share dimension")
    d = float(np.sum(np.square(r1 - r2)))
    if same_class:
        return 0.5 * d
    return 0.5 * max(0.0, delta - d)


def contrastive_pair_grad(
    r1, r2, same_class: bool, delta: float = DEFAULT_DELTA
) -> tuple[np.ndarray, np.ndarray]:
    """d(loss)/d(r1), d(loss)/d(r2).

    The margin branch is flat once delta - D <= 0; the subgradient at the
    kink D == delta is taken as 0 (the inactive side).
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    diff = r1 - r2
    if same_class:
        return diff, -diff
    d = float(np.sum(np.square(diff)))
    if delta - d > 0:
        return -diff, diff
    return np.zeros_like(diff), np.zeros_like(diff)


def _check_layers(batches, weights: LayerWeights):
    if len(batches) != len(weights):
        raise ValidationError(
            f"{len(weights)} layer weights for {len(batches)} layers"
        )


def layer_aware_loss(
    batches: list[list[Pair]], weights: LayerWeights, delta: float = DEFAULT_DELTA
) -> float:
    """Sum over layers of alpha_i * mean pair loss at layer i."""
    _check_layers(batches, weights)
    total = 0.0
    for alpha, pairs in zip(weights.alpha, batches):
        if not pairs:
            continue
        layer = sum(
            contrastive_pair(p.rep_a, p.rep_b, p.same_class, delta) for p in pairs
        )
        total += alpha * layer / len(pairs)
    return total


def layer_aware_loss_grad(
    batches: list[list[Pair]], weights: LayerWeights, delta: float = DEFAULT_DELTA
) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Per-pair (d/d rep_a, d/d rep_b) gradients, scaled by alpha_i / n_pairs."""
    _check_layers(batches, weights)
    out = []
    for alpha, pairs in zip(weights.alpha, batches):
        scale = alpha / len(pairs) if pairs else 0.0
        grads = []
        for p in pairs:
            ga, gb = contrastive_pair_grad(p.rep_a, p.rep_b, p.same_class, delta)
            grads.append((scale * ga, scale * gb))
        out.append(grads)
    return out


def all_pairs(reps, labels) -> list[Pair]:
    """All within-batch pairs of a layer's representations."""
    reps = [np.asarray(r, dtype=float) for r in reps]
    labels = list(labels)
    if len(reps) != len(labels):
        raise ValidationError("one label per representation required")
    pairs = []
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            pairs.append(Pair(reps[i], reps[j], labels[i] == labels[j]))
    return pairs


def gradient_check(
    n_batches: int = 100,
    seed: int = 0,
    delta: float = DEFAULT_DELTA,
    h: float = 1e-5,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Random batches; every representation coordinate of every pair is probed.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_batches):
        n_layers = int(rng.integers(1, 4))
        dim = int(rng.integers(1, 5))
        weights = default_alpha(n_layers)
        batches = []
        for _ in range(n_layers):
            pairs = [
                Pair(rng.normal(size=dim), rng.normal(size=dim), bool(rng.integers(2)))
                for _ in range(int(rng.integers(1, 5)))
            ]
            batches.append(pairs)
        analytic = layer_aware_loss_grad(batches, weights, delta)
        for li, pairs in enumerate(batches):
            for pi, pair in enumerate(pairs):
                for which, rep in ((0, pair.rep_a), (1, pair.rep_b)):
                    for k in range(rep.size):
                        orig = rep[k]
                        rep[k] = orig + h
                        up = layer_aware_loss(batches, weights, delta)
                        rep[k] = orig - h
                        down = layer_aware_loss(batches, weights, delta)
                        rep[k] = orig
                        numeric = (up - down) / (2 * h)
                        a = float(analytic[li][pi][which][k])
                        err = abs(a - numeric) / max(1.0, abs(numeric))
                        worst = max(worst, err)
    return worst


@dataclass
class EmbeddingFit:
    """Free embeddings after gradient descent, one array per layer."""

    layers: list[np.ndarray]
    labels: np.ndarray
    losses: list[float] = field(default_factory=list)

    def squared_distances(self, layer: int) -> tuple[np.ndarray, np.ndarray]:
        """(same-class, different-class) squared distances at one layer."""
        pts = self.layers[layer]
        same, diff = [], []
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = float(np.sum(np.square(pts[i] - pts[j])))
                (same if self.labels[i] == self.labels[j] else diff).append(d)
        return np.array(same), np.array(diff)


def fit_embeddings(
    n_classes: int = 3,
    points_per_class: int = 5,
    n_layers: int = 2,
    dim: int = 2,
    steps: int = 200,
    lr: float = 0.5,
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
) -> EmbeddingFit:
    """Descend the layer-aware loss on free per-layer embeddings.

    A toy stand-in for representation training: with enough steps the
    same-class pairs collapse and different-class pairs clear the margin at
    every layer.
    """
    if n_classes < 2 or points_per_class < 1:
        raise ValidationError("need >= 2 classes and >= 1 point per class")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_classes), points_per_class)
    weights = default_alpha(n_layers)
    layers = [rng.normal(scale=0.5, size=(labels.size, dim)) for _ in range(n_layers)]
    losses = []
    for _ in range(steps):
        batches = [all_pairs(list(pts), labels) for pts in layers]
        losses.append(layer_aware_loss(batches, weights, delta))
        grads = layer_aware_loss_grad(batches, weights, delta)
        for li, pts in enumerate(layers):
            accum = np.zeros_like(pts)
            pair_idx = 0
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    ga, gb = grads[li][pair_idx]
                    accum[i] += ga
                    accum[j] += gb
                    pair_idx += 1
            pts -= lr * accum
    return EmbeddingFit(layers=layers, labels=labels, losses=losses)
