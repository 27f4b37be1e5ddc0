"""Binary restricted Boltzmann machine trained by persistent contrastive divergence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngStream, ShapeError, log_sigmoid, sigmoid, softplus
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
class RbmParams(Params):
    W: np.ndarray  # visible x hidden
    b_vis: np.ndarray
    b_hid: np.ndarray
    chains: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    weight_names = ("W",)
    bias_names = ("b_vis", "b_hid")

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, n_visible: int, n_hidden: int, gen: np.random.Generator) -> "RbmParams":
        return cls(uniform_init((n_visible, n_hidden), gen), np.zeros(n_visible), np.zeros(n_hidden))


def init_chains(params: RbmParams, data: np.ndarray, n_chains: int, gen: np.random.Generator) -> None:
    """Start persistent chains at randomly chosen training examples."""
    idx = gen.integers(len(data), size=n_chains)
    params.chains = (np.asarray(data)[idx] >= 0.5).astype(np.float64)


def hidden_probs(params: RbmParams, v) -> np.ndarray:
    return sigmoid(v @ params.W + params.b_hid)


def visible_probs(params: RbmParams, h) -> np.ndarray:
    return sigmoid(h @ params.W.T + params.b_vis)


def _bernoulli(p: np.ndarray, rng: RngStream) -> np.ndarray:
    return (rng.uniforms(p.size).reshape(p.shape) < p).astype(np.float64)


def gibbs_sweep(params: RbmParams, v: np.ndarray, rng: RngStream) -> np.ndarray:
    """One full v -> h -> v sweep on a batch of visible states."""
    h = _bernoulli(hidden_probs(params, v), rng)
    return _bernoulli(visible_probs(params, h), rng)


def rbm_free_energy(params: RbmParams, v) -> np.ndarray | float:
    """F(v) = -b_vis.v - sum_j softplus(b_hid_j + (v W)_j), so P(v) ~ exp(-F(v))."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all((v == 0) | (v == 1)):
        raise ValueError("free energy needs binary visible vectors")
    if v.shape[-1] != params.n_visible:
        raise ShapeError(f"visible length {v.shape[-1]} != {params.n_visible}")
    f = -(v @ params.b_vis) - softplus(v @ params.W + params.b_hid).sum(axis=-1)
    return float(f) if np.ndim(f) == 0 else f


def rbm_pcd_step(params: RbmParams, data_batch, gibbs_steps: int = 15, rng: RngStream | None = None) -> RbmParams:
    """PCD gradient of the negative log-likelihood for one batch.

    The positive phase uses hidden probabilities given the data; the
    negative phase advances ``params.chains`` by ``gibbs_steps`` sweeps and
    uses the chain states with their hidden probabilities. The advanced
    chains are written back to ``params.chains``.
    """
    v = np.asarray(data_batch, dtype=np.float64)
    if params.chains.size == 0:
        raise ValueError("persistent chains not initialized; call init_chains first")
    chains = params.chains
    if gibbs_steps > 0 and rng is None:
        raise ValueError("sampling needs an RngStream")
    for _ in range(gibbs_steps):
        chains = gibbs_sweep(params, chains, rng)
    params.chains = chains
    h_pos = hidden_probs(params, v)
    h_neg = hidden_probs(params, chains)
    n, m = len(v), len(chains)
    return RbmParams(
        -(v.T @ h_pos / n - chains.T @ h_neg / m),
        -(v.mean(axis=0) - chains.mean(axis=0)),
        -(h_pos.mean(axis=0) - h_neg.mean(axis=0)),
        chains,
    )


def rbm_sample(params: RbmParams, v0, passes: int, record_every: int, rng: RngStream) -> list[np.ndarray]:
    """Run Gibbs chains from ``v0`` and record visible activation probabilities.

    ``v0`` is one visible vector or a batch (one chain per row). Every
    ``record_every`` sweeps the (not binarized) p(v | h) is recorded, giving
    ``passes // record_every`` snapshots.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    v = np.asarray(v0, dtype=np.float64)
    out = []
    for t in range(1, passes + 1):
        h = _bernoulli(hidden_probs(params, v), rng)
        pv = visible_probs(params, h)
        if t % record_every == 0:
            out.append(pv.copy())
        v = _bernoulli(pv, rng)
    return out


def reconstruction_cross_entropy(params: RbmParams, x) -> float:
    """Mean-field v -> p(h|v) -> p(v|h) reconstruction cross-entropy, nats per example.

    A monitoring proxy; the likelihood itself is intractable at useful sizes.
    """
    x = np.asarray(x, dtype=np.float64)
    z = hidden_probs(params, x) @ params.W.T + params.b_vis
    ll = x * log_sigmoid(z) + (1.0 - x) * log_sigmoid(-z)
    return float(-ll.sum(axis=1).mean())


@gradient.register
def _(params: RbmParams, x, labels=None, rng=None, gibbs_steps: int = 15):
    return rbm_pcd_step(params, x, gibbs_steps, rng)


@evaluate.register
def _(params: RbmParams, dataset) -> Metric:
    check_nonempty(dataset)
    return Metric(MetricKind.RECONSTRUCTION_XENT, reconstruction_cross_entropy(params, dataset.inputs))


@training_loss.register
def _(params: RbmParams, dataset) -> float:
    return reconstruction_cross_entropy(params, dataset.inputs)
