"""Fully connected ReLU network with a softmax cross-entropy objective.

Parameters live in one flat vector, laid out layer by layer as W (in x out)
followed by the bias (out,), so the optimizers see a plain R^n problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadSimplex, ShapeMismatch
from .oracle import ObjectiveOracle

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or min(self.widths) <= 0:
            raise ValueError("need at least input and output widths, all positive")

    @property
    def n_params(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.widths[:-1], self.widths[1:]))


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int = 10

    def __post_init__(self):
        if len(self.inputs) == 0 or len(self.inputs) != len(self.labels):
            raise ShapeMismatch("dataset needs N > 0 inputs with one label each")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(probs, label: int) -> float:
    """-log p[label] for a probability vector; entries are floored at 1e-12."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise BadSimplex("probabilities must be nonnegative and sum to 1")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


class Mlp:
    """Forward/backward passes for ReLU hidden layers and a linear output layer."""

    def __init__(self, spec: MlpSpec):
        self.spec = spec
        self.shapes = list(zip(spec.widths[:-1], spec.widths[1:]))
        self.n_params = spec.n_params

    def unpack(self, w: np.ndarray):
        if w.shape != (self.n_params,):
            raise ShapeMismatch(f"expected {self.n_params} parameters, got {w.shape}")
        layers, at = [], 0
        for i, o in self.shapes:
            W = w[at:at + i * o].reshape(i, o)
            at += i * o
            layers.append((W, w[at:at + o]))
            at += o
        return layers

    def init_params(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        parts = []
        for i, o in self.shapes:
            parts.append(rng.standard_normal(i * o) * np.sqrt(2.0 / i))
            parts.append(np.zeros(o))
        return np.concatenate(parts)

    def forward(self, w, X):
        acts = [X]
        layers = self.unpack(np.asarray(w, dtype=float))
        h = X
        for li, (W, b) in enumerate(layers):
            h = h @ W + b
            if li < len(layers) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, w, acts, dout) -> np.ndarray:
        """Gradient of sum(dout * output) w.r.t. the flat parameters."""
        layers = self.unpack(np.asarray(w, dtype=float))
        grads = []
        delta = dout
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            grads.append((acts[li].T @ delta, delta.sum(axis=0)))
            if li:
                delta = (delta @ W.T) * (acts[li] > 0)
        return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in reversed(grads)])


class MlpOracle(ObjectiveOracle):
    """Mean cross-entropy of an Mlp over a labelled dataset."""

    def __init__(self, spec: MlpSpec, data: Dataset):
        if spec.widths[0] != data.inputs.shape[1]:
            raise ShapeMismatch(f"input width {spec.widths[0]} != feature dim {data.inputs.shape[1]}")
        if spec.widths[-1] != data.n_classes:
            raise ShapeMismatch("output width must equal the number of classes")
        self.spec = spec
        self.net = Mlp(spec)
        self.data = data
        self.dim = spec.n_params
        self.n_samples = len(data)

    def eval_batch(self, w, idx):
        if idx is None:
            X, y = self.data.inputs, self.data.labels
        else:
            idx = np.asarray(idx, dtype=int)
            X, y = self.data.inputs[idx], self.data.labels[idx]
        logits, acts = self.net.forward(w, X)
        logp = log_softmax(logits)
        rows = np.arange(len(y))
        loss = float(-logp[rows, y].mean())
        dlogits = np.exp(logp)
        dlogits[rows, y] -= 1.0
        dlogits /= len(y)
        return loss, self.net.backward(w, acts, dlogits)

    def init_params(self, seed: int = 0) -> np.ndarray:
        return self.net.init_params(seed)

    def predict(self, w, X=None) -> np.ndarray:
        logits, _ = self.net.forward(w, self.data.inputs if X is None else X)
        return logits.argmax(axis=1)

    def accuracy(self, w, data: Dataset | None = None) -> float:
        data = self.data if data is None else data
        return float(np.mean(self.predict(w, data.inputs) == data.labels))

    def dataset_loss(self, w, data: Dataset) -> float:
        logits, _ = self.net.forward(w, data.inputs)
        logp = log_softmax(logits)
        return float(-logp[np.arange(len(data)), data.labels].mean())


def mlp_oracle(spec: MlpSpec, data: Dataset) -> MlpOracle:
    return MlpOracle(spec, data)
