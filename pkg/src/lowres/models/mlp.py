"""One-hidden-layer perceptron: sigmoid hidden units, softmax output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ShapeError, log_softmax_rows, sigmoid, softmax_rows
from .base import (
    Metric,
    MetricKind,
    Params,
    check_nonempty,
    evaluate,
    gradient,
    training_loss,
    uniform_init,
)


@dataclass
class MlpParams(Params):
    W1: np.ndarray  # inputs x hidden
    b1: np.ndarray
    W2: np.ndarray  # hidden x classes
    b2: np.ndarray

    weight_names = ("W1", "W2")
    bias_names = ("b1", "b2")

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[1]

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_classes: int, gen: np.random.Generator) -> "MlpParams":
        return cls(
            uniform_init((n_in, n_hidden), gen),
            np.zeros(n_hidden),
            uniform_init((n_hidden, n_classes), gen),
            np.zeros(n_classes),
        )


def _hidden_and_logits(params: MlpParams, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.W1.shape[0]:
        raise ShapeError(f"batch shape {x.shape} does not match {params.W1.shape[0]} inputs")
    h = sigmoid(x @ params.W1 + params.b1)
    return x, h, h @ params.W2 + params.b2


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Class probabilities, one row per example."""
    return softmax_rows(_hidden_and_logits(params, x)[2])


def mlp_loss(params: MlpParams, x, labels) -> float:
    _, _, logits = _hidden_and_logits(params, x)
    labels = np.asarray(labels)
    return float(-log_softmax_rows(logits)[np.arange(len(labels)), labels].mean())


def mlp_grad(params: MlpParams, x, labels) -> MlpParams:
    """Backprop of mean cross-entropy over the batch."""
    x, h, logits = _hidden_and_logits(params, x)
    labels = np.asarray(labels)
    if labels.shape != (len(x),):
        raise ShapeError("one label per example required")
    n = len(x)
    delta = softmax_rows(logits)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    dh = (delta @ params.W2.T) * h * (1.0 - h)
    return MlpParams(x.T @ dh, dh.sum(axis=0), h.T @ delta, delta.sum(axis=0))


def predict(params: MlpParams, x) -> np.ndarray:
    return np.argmax(_hidden_and_logits(params, x)[2], axis=1)


def misclassification(params: MlpParams, dataset) -> float:
    check_nonempty(dataset)
    wrong = int(np.count_nonzero(predict(params, dataset.inputs) != dataset.labels))
    return 100.0 * wrong / len(dataset)


@gradient.register
def _(params: MlpParams, x, labels=None, rng=None):
    return mlp_grad(params, x, labels)


@evaluate.register
def _(params: MlpParams, dataset) -> Metric:
    return Metric(MetricKind.MISCLASSIFICATION_PERCENT, misclassification(params, dataset))


@training_loss.register
def _(params: MlpParams, dataset) -> float:
    return mlp_loss(params, dataset.inputs, dataset.labels)
