"""NADE: autoregressive binary density model with tied hidden pre-activations.

For ordering o, the hidden state before predicting x[o_d] is
``h_d = sigmoid(b_hid + sum_{e<d} W[:, o_e] x[o_e])`` and
``P(x[o_d] = 1 | x_<d) = sigmoid(b_vis[o_d] + V[o_d] . h_d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import ShapeError, log_sigmoid, sigmoid
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
class NadeParams(Params):
    W: np.ndarray  # hidden x visible
    V: np.ndarray  # visible x hidden
    b_hid: np.ndarray
    b_vis: np.ndarray
    ordering: np.ndarray = field(default=None)

    weight_names = ("W", "V")
    bias_names = ("b_hid", "b_vis")

    def __post_init__(self):
        D = self.W.shape[1]
        if self.ordering is None:
            self.ordering = np.arange(D)
        self.ordering = np.asarray(self.ordering, dtype=np.int64)
        if sorted(self.ordering.tolist()) != list(range(D)):
            raise ValueError("ordering must be a permutation of the visible indices")

    @property
    def n_visible(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W.shape[0]

    @classmethod
    def init(cls, n_visible: int, n_hidden: int, gen: np.random.Generator, ordering=None) -> "NadeParams":
        return cls(
            uniform_init((n_hidden, n_visible), gen),
            uniform_init((n_visible, n_hidden), gen),
            np.zeros(n_hidden),
            np.zeros(n_visible),
            ordering,
        )


def _check(params: NadeParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.n_visible:
        raise ShapeError(f"input length {x.shape[-1]} != {params.n_visible}")
    return x


def nade_logprob(params: NadeParams, x):
    """log P(x) in nats; ``x`` is one binary vector or a batch of rows."""
    x = _check(params, x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    a = np.tile(params.b_hid, (len(X), 1))
    total = np.zeros(len(X))
    for d in params.ordering:
        h = sigmoid(a)
        z = params.b_vis[d] + h @ params.V[d]
        xd = X[:, d]
        total += xd * log_sigmoid(z) + (1.0 - xd) * log_sigmoid(-z)
        a += np.outer(xd, params.W[:, d])
    return float(total[0]) if single else total


def nade_grad(params: NadeParams, x) -> NadeParams:
    """Gradient of mean -log P(x) over the batch.

    The backward pass rebuilds each pre-activation by subtracting the
    visible contributions in reverse instead of storing all D hidden states.
    """
    X = np.atleast_2d(_check(params, x))
    n = len(X)
    W, V = params.W, params.V
    a = params.b_hid + X[:, params.ordering] @ W[:, params.ordering].T
    gW, gV = np.zeros_like(W), np.zeros_like(V)
    gb_vis = np.zeros_like(params.b_vis)
    acc = np.zeros_like(a)  # sum of d(loss)/d(a_e) over later positions e
    for d in params.ordering[::-1]:
        xd = X[:, d]
        a -= np.outer(xd, W[:, d])
        h = sigmoid(a)
        dz = (sigmoid(params.b_vis[d] + h @ V[d]) - xd) / n
        gb_vis[d] = dz.sum()
        gV[d] = dz @ h
        # x[o_d] feeds every later pre-activation, whose grads are in acc
        gW[:, d] = xd @ acc
        acc += np.outer(dz, V[d]) * h * (1.0 - h)
    gb_hid = acc.sum(axis=0)
    return NadeParams(gW, gV, gb_hid, gb_vis, params.ordering)


def mean_nll(params: NadeParams, x) -> float:
    return float(-np.mean(nade_logprob(params, np.atleast_2d(x))))


@gradient.register
def _(params: NadeParams, x, labels=None, rng=None):
    return nade_grad(params, x)


@evaluate.register
def _(params: NadeParams, dataset) -> Metric:
    check_nonempty(dataset)
    return Metric(MetricKind.NLL_NATS, mean_nll(params, dataset.inputs))


@training_loss.register
def _(params: NadeParams, dataset) -> float:
    return mean_nll(params, dataset.inputs)
