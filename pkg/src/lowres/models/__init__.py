from .base import Metric, MetricKind, Params, evaluate, gradient, training_loss
from .mlp import MlpParams, mlp_forward, mlp_grad, mlp_loss, predict
from .nade import NadeParams, nade_grad, nade_logprob
from .rbm import (
    RbmParams,
    init_chains,
    rbm_free_energy,
    rbm_pcd_step,
    rbm_sample,
    reconstruction_cross_entropy,
)

__all__ = [
    "Metric",
    "MetricKind",
    "MlpParams",
    "NadeParams",
    "Params",
    "RbmParams",
    "evaluate",
    "gradient",
    "init_chains",
    "mlp_forward",
    "mlp_grad",
    "mlp_loss",
    "nade_grad",
    "nade_logprob",
    "predict",
    "rbm_free_energy",
    "rbm_pcd_step",
    "rbm_sample",
    "reconstruction_cross_entropy",
    "training_loss",
]
