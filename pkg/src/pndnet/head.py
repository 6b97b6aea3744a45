"""Classification head: GAP over nodes, norm + dropout, projection, softmax.

The projection from C features to N class logits is the minimal completion
between the pooled feature vector and the softmax; the head regularizes with
layer normalization (batch-size independent) and inverted dropout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ArgumentError, DimensionError
from .tensor import Rng, Tensor, _record, _accumulate


@dataclass
class ClassHead:
    """Learnable head state: norm scale/shift, projection weight and bias."""

    scale: Tensor          # [C]
    shift: Tensor          # [C]
    weight: Tensor         # [C, N]
    bias: Tensor           # [N]
    dropout_rate: float = 0.3
    norm: str = "layer"    # "layer" or "none"

    @property
    def n_classes(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [("norm/scale", self.scale), ("norm/shift", self.shift),
                ("proj/weight", self.weight), ("proj/bias", self.bias)]


def init_head(c: int, n_classes: int, rng: Rng, dropout_rate: float = 0.3,
              norm: str = "layer", dtype=np.float32) -> ClassHead:
    if n_classes < 2:
        raise ArgumentError(f"need at least 2 classes, got {n_classes}")
    if norm not in ("layer", "none"):
        raise ArgumentError(f"head norm must be 'layer' or 'none', got {norm!r}")
    limit = 1.0 / np.sqrt(c)
    return ClassHead(
        scale=Tensor(np.ones(c, dtype=dtype), requires_grad=True),
        shift=Tensor(np.zeros(c, dtype=dtype), requires_grad=True),
        weight=Tensor(rng.uniform(-limit, limit, (c, n_classes)).astype(dtype), requires_grad=True),
        bias=Tensor(rng.uniform(-limit, limit, n_classes).astype(dtype), requires_grad=True),
        dropout_rate=dropout_rate,
        norm=norm,
    )


def gap_nodes(node_features: Tensor) -> Tensor:
    """Column mean over the P node rows -> [C]."""
    if node_features.data.ndim != 2:
        raise DimensionError(f"gap_nodes expects [P, C], got {node_features.data.shape}")
    return T.mean(node_features, axis=0)


def head_logits(head: ClassHead, features: Tensor, mode: str, rng: Rng | None = None) -> Tensor:
    """Pre-softmax class scores as a [1, N] row."""
    row = T.reshape(features, (1, features.shape[-1]))
    if head.norm == "layer":
        row = T.layer_norm(row, axis=-1)
        row = T.add(T.mul(row, head.scale), head.shift)
    row = T.dropout(row, head.dropout_rate, mode, rng)
    return T.add(T.matmul(row, head.weight), T.reshape(head.bias, (1, head.n_classes)))


def classify(head: ClassHead, features: Tensor, mode: str = "eval",
             rng: Rng | None = None) -> Tensor:
    """Class probabilities [N] for a pooled feature vector [C]."""
    logits = head_logits(head, features, mode, rng)
    return T.reshape(T.softmax(logits, axis=1), (head.n_classes,))


@dataclass
class LossValue:
    """Batch cross-entropy: scalar mean plus the per-sample terms."""

    loss: Tensor
    per_sample: np.ndarray = field(repr=False)

    def item(self) -> float:
        return self.loss.item()


LOG_CLAMP = 1e-12


def cross_entropy(pred: Tensor, target) -> LossValue:
    """Mean categorical cross-entropy of probability rows against one-hots.

    ``pred`` rows must sum to 1 within 1e-5; ``target`` must be exactly
    one-hot. The true-class probability is clamped at 1e-12 before the log.
    """
    t = np.asarray(target, dtype=pred.data.dtype)
    if pred.data.ndim != 2 or t.shape != pred.data.shape:
        raise DimensionError(f"cross_entropy expects matching [B, N], got {pred.data.shape} and {t.shape}")
    if np.any(np.abs(pred.data.sum(axis=1) - 1.0) > 1e-5):
        raise ArgumentError("prediction rows must sum to 1 within 1e-5")
    if not (np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=1) == 1)):
        raise ArgumentError("target rows must be one-hot")
    b = pred.data.shape[0]
    p_true = (pred.data * t).sum(axis=1)
    clamped = np.maximum(p_true, LOG_CLAMP)
    per_sample = -np.log(clamped)
    data = np.asarray(per_sample.mean(), dtype=pred.data.dtype)
    active = (p_true > LOG_CLAMP).astype(pred.data.dtype)

    def backward(g):
        _accumulate(pred, float(g) * (-t * (active / clamped)[:, None]) / b)

    loss = _record(data, (pred,), backward, "cross_entropy")
    return LossValue(loss=loss, per_sample=per_sample)
