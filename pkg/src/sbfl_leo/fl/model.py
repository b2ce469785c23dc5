"""Softmax predictors over a flat parameter vector.

Two layouts share one ParamVector representation (a 1-D float64 array):

- logistic: W (d x K) row-major, then b (K)
- mlp:      W1 (d x H), b1 (H), W2 (H x K), b2 (K), tanh hidden layer
"""
from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError
from .data import LabeledDataset

ParamVector = np.ndarray


@dataclass(frozen=True)
class ModelLayout:
    feature_dim: int
    class_count: int
    hidden: int = 0

    def __post_init__(self):
        if self.feature_dim < 1 or self.class_count < 2 or self.hidden < 0:
            raise ConfigurationError(f"invalid model layout {self}")

    @property
    def kind(self) -> str:
        return "mlp" if self.hidden else "logistic"

    @property
    def dim(self) -> int:
        d, k, h = self.feature_dim, self.class_count, self.hidden
        if not h:
            return d * k + k
        return d * h + h + h * k + k

    def _shapes(self) -> list[tuple[int, ...]]:
        d, k, h = self.feature_dim, self.class_count, self.hidden
        if not h:
            return [(d, k), (k,)]
        return [(d, h), (h,), (h, k), (k,)]

    def unpack(self, w: ParamVector) -> list[np.ndarray]:
        """Views into `w`, one per weight/bias block."""
        w = np.asarray(w)
        if w.ndim != 1 or w.shape[0] != self.dim:
            raise ConfigurationError(f"parameter vector has dim {w.shape}, layout needs {self.dim}")
        out, at = [], 0
        for shape in self._shapes():
            n = int(np.prod(shape))
            out.append(w[at:at + n].reshape(shape))
            at += n
        return out

    def initial(self, rng: np.random.Generator, scale: float = 0.01) -> ParamVector:
        return rng.normal(0.0, scale, size=self.dim)

    def zeros(self) -> ParamVector:
        return np.zeros(self.dim)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _forward(layout: ModelLayout, w: ParamVector, x: np.ndarray):
    if x.shape[-1] != layout.feature_dim:
        raise ConfigurationError(f"features have dim {x.shape[-1]}, layout expects {layout.feature_dim}")
    blocks = layout.unpack(w)
    if not layout.hidden:
        W, b = blocks
        return x @ W + b, None
    W1, b1, W2, b2 = blocks
    h = np.tanh(x @ W1 + b1)
    return h @ W2 + b2, h


def logits(layout: ModelLayout, w: ParamVector, x: np.ndarray) -> np.ndarray:
    return _forward(layout, w, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]


def predict(layout: ModelLayout, w: ParamVector, features) -> np.ndarray:
    """Class probabilities f(w, ξ) for one feature vector (or a batch of rows)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    p = np.exp(_log_softmax(logits(layout, w, x)))
    return p[0] if single else p


def cross_entropy(layout: ModelLayout, w: ParamVector, x: np.ndarray, y: np.ndarray) -> float:
    logp = _log_softmax(logits(layout, w, x))
    return float(-logp[np.arange(len(y)), y].mean())


def loss_and_grad(layout: ModelLayout, w: ParamVector, x: np.ndarray, y: np.ndarray) -> tuple[float, ParamVector]:
    """Mean cross-entropy over the batch and its analytic gradient, flattened like `w`."""
    z, h = _forward(layout, w, x)
    logp = _log_softmax(z)
    n = len(y)
    rows = np.arange(n)
    loss = float(-logp[rows, y].mean())
    g = np.exp(logp)
    g[rows, y] -= 1.0
    g /= n
    if not layout.hidden:
        return loss, np.concatenate([(x.T @ g).ravel(), g.sum(axis=0)])
    _, _, W2, _ = layout.unpack(w)
    dz1 = (g @ W2.T) * (1.0 - h * h)
    return loss, np.concatenate([
        (x.T @ dz1).ravel(), dz1.sum(axis=0), (h.T @ g).ravel(), g.sum(axis=0),
    ])


def local_loss(layout: ModelLayout, w: ParamVector, data: LabeledDataset, e_cmp: float, penalty: float) -> float:
    """Energy-penalised local objective: mean cross-entropy + λ·E_cmp.

    E_cmp does not depend on w, so the penalty shifts the reported value only.
    """
    data.require_nonempty()
    value = cross_entropy(layout, w, data.features, data.labels) + penalty * e_cmp
    if not np.isfinite(value):
        raise DomainError("local loss is not finite")
    return value


def evaluate(layout: ModelLayout, w: ParamVector, data: LabeledDataset) -> tuple[float, float]:
    """(accuracy, mean cross-entropy). argmax ties go to the lowest class index."""
    data.require_nonempty()
    logp = _log_softmax(logits(layout, w, data.features))
    acc = float((logp.argmax(axis=1) == data.labels).mean())
    loss = float(-logp[np.arange(data.size), data.labels].mean())
    return acc, loss
