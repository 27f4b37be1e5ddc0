from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, fields
from functools import singledispatch
from typing import ClassVar

import numpy as np


class MetricKind(enum.Enum):
    MISCLASSIFICATION_PERCENT = "misclassification_percent"
    NLL_NATS = "nll_nats"
    RECONSTRUCTION_XENT = "reconstruction_xent"


@dataclass(frozen=True)
class Metric:
    kind: MetricKind
    value: float

    def __float__(self):
        return self.value


class Params:
    """Mixin for parameter dataclasses.

    Subclasses list their weight matrices in ``weight_names`` (the matrices
    that get quantized) and their biases in ``bias_names``. Gradients use the
    same dataclass, with every non-parameter field left as is.
    """

    weight_names: ClassVar[tuple[str, ...]] = ()
    bias_names: ClassVar[tuple[str, ...]] = ()

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.weight_names + self.bias_names

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.param_names}

    def copy(self):
        return copy.deepcopy(self)

    def zeros_like(self):
        out = copy.copy(self)
        for n in self.param_names:
            setattr(out, n, np.zeros_like(getattr(self, n)))
        return out

    def fingerprint(self) -> bytes:
        return b"".join(np.ascontiguousarray(getattr(self, f.name)).tobytes()
                        for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray))


def init_weight_scale(fan_in: int, fan_out: int) -> float:
    """Half-width of the uniform init range, capped at the weight range."""
    return min(1.0, 4.0 * np.sqrt(6.0 / (fan_in + fan_out)))


def uniform_init(shape, gen: np.random.Generator) -> np.ndarray:
    r = init_weight_scale(shape[0], shape[1])
    return gen.uniform(-r, r, size=shape)


@singledispatch
def gradient(params, x, labels=None, rng=None):
    """Gradient of the model's training loss on a batch, as a params object."""
    raise TypeError(f"no gradient for {type(params).__name__}")


@singledispatch
def evaluate(params, dataset) -> Metric:
    """The model's reported metric on ``dataset``."""
    raise TypeError(f"no metric for {type(params).__name__}")


@singledispatch
def training_loss(params, dataset) -> float:
    """Scalar objective used for divergence checks and learning curves."""
    raise TypeError(f"no loss for {type(params).__name__}")


def check_nonempty(dataset):
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
