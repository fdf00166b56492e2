"""Hashed-feature multinomial logistic models and their SGD trainer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class LinearModel:
    class_labels: list[str]
    weights: np.ndarray  # (classes, dim), float32
    bias: np.ndarray     # (classes,), float32
    trained_epochs: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.weights.shape[0] != len(self.class_labels) or self.bias.shape != (len(self.class_labels),):
            raise ValueError("weight rows must match class count")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite weights")

    @classmethod
    def zeros(cls, class_labels: Sequence[str], dim: int, seed: int = 0) -> "LinearModel":
        k = len(class_labels)
        return cls(list(class_labels), np.zeros((k, dim), np.float32), np.zeros(k, np.float32), 0, seed)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, fv: np.ndarray) -> np.ndarray:
        return self.weights[:, fv].sum(axis=1, dtype=np.float64) + self.bias.astype(np.float64)

    def best(self, fv: np.ndarray) -> int:
        # np.argmax returns the first maximum, i.e. the lowest class index on ties.
        return int(np.argmax(self.scores(fv)))

    def candidate_scores(self, fvs: Sequence[np.ndarray], row: int = 0) -> np.ndarray:
        w = self.weights[row]
        return np.array([w[fv].sum(dtype=np.float64) for fv in fvs])


def xent_loss_and_grad(weights: np.ndarray, bias: np.ndarray, fv: np.ndarray, gold: int,
                       l2: float = 0.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy of one example plus ``l2/2 * ||W||^2``, with dense gradients.

    Reference implementation used by the trainer tests and gradient checks.
    """
    z = weights[:, fv].sum(axis=1) + bias
    p = softmax(z)
    loss = -np.log(p[gold]) + 0.5 * l2 * float((weights ** 2).sum())
    delta = p.copy()
    delta[gold] -= 1.0
    grad_w = l2 * weights.astype(np.float64)
    grad_w[:, fv] += delta[:, None]
    return float(loss), grad_w, delta


def candidate_loss_and_grad(w: np.ndarray, fvs: Sequence[np.ndarray], gold: int, l2: float = 0.0
                            ) -> tuple[float, np.ndarray]:
    """Cross-entropy of a softmax over candidates scored by one weight row."""
    z = np.array([w[fv].sum() for fv in fvs])
    p = softmax(z)
    loss = -np.log(p[gold]) + 0.5 * l2 * float((w ** 2).sum())
    grad = l2 * w.astype(np.float64)
    for c, fv in enumerate(fvs):
        grad[fv] += p[c] - (c == gold)
    return float(loss), grad


@dataclass
class SGDTrainer:
    """Plain SGD with ``lr_t = lr0 / (1 + decay * t)`` and L2 shrinkage.

    Weights are stored as ``scale * raw`` so the L2 shrink of every weight is
    one scalar multiply instead of a pass over the whole matrix.
    """

    n_classes: int
    dim: int
    lr0: float = 0.1
    decay: float = 1e-4
    l2: float = 1e-6
    raw: np.ndarray = field(init=False)
    bias: np.ndarray = field(init=False)
    scale: float = field(init=False, default=1.0)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        self.raw = np.zeros((self.n_classes, self.dim), np.float64)
        self.bias = np.zeros(self.n_classes, np.float64)

    def _next_lr(self) -> float:
        lr = self.lr0 / (1.0 + self.decay * self.t)
        self.t += 1
        self.scale *= 1.0 - lr * self.l2
        if self.scale < 1e-9:
            self.raw *= self.scale
            self.scale = 1.0
        return lr

    def step(self, fv: np.ndarray, gold: int) -> None:
        z = self.scale * self.raw[:, fv].sum(axis=1) + self.bias
        delta = softmax(z)
        delta[gold] -= 1.0
        lr = self._next_lr()
        self.raw[:, fv] -= (lr / self.scale) * delta[:, None]
        self.bias -= lr * delta

    def step_candidates(self, fvs: Sequence[np.ndarray], gold: int, row: int = 0) -> None:
        lengths = np.array([len(fv) for fv in fvs])
        flat = np.concatenate(fvs)
        starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        w = self.raw[row]
        z = self.scale * np.add.reduceat(w[flat], starts) if len(flat) else np.zeros(len(fvs))
        delta = softmax(z)
        delta[gold] -= 1.0
        lr = self._next_lr()
        np.add.at(w, flat, np.repeat(-(lr / self.scale) * delta, lengths))

    def weights(self) -> np.ndarray:
        return self.raw * self.scale

    def to_model(self, class_labels: Sequence[str], epochs: int, seed: int, with_bias: bool = True
                 ) -> LinearModel:
        bias = self.bias if with_bias else np.zeros(self.n_classes)
        return LinearModel(list(class_labels), self.weights().astype(np.float32),
                           bias.astype(np.float32), epochs, seed)
