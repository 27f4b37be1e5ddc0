"""Quantized gradient-descent training, sweeps, and offline k-means compression."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import Dataset
from .models import MlpParams, NadeParams, RbmParams, evaluate, gradient, training_loss
from .models.rbm import init_chains
from .numerics import RngStream, stable_hash
from .quantize import (
    Codebook,
    PolicyKind,
    QuantPolicy,
    codebook_memory_bits,
    kmeans_compress,
    quantized_update,
)

log = logging.getLogger(__name__)

METHODS = ("baseline", "nearest", "rr", "coarse_p", "kmeans")
FLOAT_BITS = 32


class ConfigurationError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    policy: QuantPolicy = field(default_factory=QuantPolicy.baseline)
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 20
    seed: int = 0
    eval_every: int = 1
    quantize_biases: bool = False
    lr_decay: bool = False
    gibbs_steps: int = 15

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigurationError("epochs, batch_size and eval_every must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")


@dataclass
class CurvePoint:
    epoch: int
    train: float
    validation: float | None


@dataclass
class LearningCurve:
    points: list[CurvePoint] = field(default_factory=list)

    def add(self, epoch: int, train: float, validation: float | None):
        if self.points and epoch <= self.points[-1].epoch:
            raise ValueError("curve epochs must increase")
        self.points.append(CurvePoint(epoch, train, validation))

    @property
    def epochs(self) -> list[int]:
        return [p.epoch for p in self.points]

    @property
    def train(self) -> list[float]:
        return [p.train for p in self.points]

    @property
    def validation(self) -> list[float | None]:
        return [p.validation for p in self.points]


# --- model construction ------------------------------------------------------


def init_model(model: str, n_in: int, hidden: int, n_out: int, policy: QuantPolicy, seed: int,
               ordering_seed: int | None = None):
    """Fresh parameters with weight matrices snapped onto the policy's grid.

    NADE uses the natural input order unless ``ordering_seed`` is given.
    """
    gen = RngStream(seed, stable_hash("init", model)).generator()
    if model == "mlp":
        params = MlpParams.init(n_in, hidden, n_out, gen)
    elif model == "rbm":
        params = RbmParams.init(n_in, hidden, gen)
    elif model == "nade":
        ordering = None
        if ordering_seed is not None:
            ordering = RngStream(ordering_seed, stable_hash("ordering")).generator().permutation(n_in)
        params = NadeParams.init(n_in, hidden, gen, ordering)
    else:
        raise ConfigurationError(f"unknown model {model!r}")
    for name in params.weight_names:
        setattr(params, name, policy.snap(getattr(params, name)))
    return params


def check_on_grid(params, policy: QuantPolicy, include_biases: bool = False) -> None:
    if not policy.quantized:
        return
    names = params.param_names if include_biases else params.weight_names
    for name in names:
        w = getattr(params, name)
        if not np.all(policy.grid.contains(w)):
            raise AssertionError(f"{name} has entries off the {policy.grid.bits}-bit grid")


# --- training loop -----------------------------------------------------------


def _update(params, grads, names, policy, eta, seed, epoch, batch):
    for name in names:
        w = getattr(params, name)
        g = getattr(grads, name)
        u = None
        if policy.stochastic:
            # one draw per weight, indexed by flat position
            u = RngStream(seed, stable_hash(name, epoch, batch)).uniforms(w.size).reshape(w.shape)
        setattr(params, name, quantized_update(w, g, eta, policy, u))


def _sgd(params, grads, names, eta):
    for name in names:
        setattr(params, name, getattr(params, name) - eta * getattr(grads, name))


def _metric(params, ds: Dataset | None):
    return None if ds is None else evaluate(params, ds).value


def train(params, dataset: Dataset, config: TrainConfig, validation: Dataset | None = None):
    """Mini-batch gradient descent with every weight update routed through the policy.

    Weight matrices follow ``quantized_update`` (round, then clip to
    [-1, 1]); biases take plain steps unless ``quantize_biases``. Returns the
    trained parameters (a copy) and a learning curve of the model metric on
    the training and validation sets.
    """
    params = params.copy()
    policy = config.policy
    check_on_grid(params, policy)
    if isinstance(params, RbmParams) and params.chains.size == 0:
        init_chains(params, dataset.inputs, config.batch_size,
                    RngStream(config.seed, stable_hash("chains")).generator())
    bias_policy = policy if config.quantize_biases else None
    if bias_policy is not None:
        for name in params.bias_names:
            setattr(params, name, policy.snap(getattr(params, name)))

    curve = LearningCurve()
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        eta = config.learning_rate / epoch if config.lr_decay else config.learning_rate
        order = RngStream(config.seed, stable_hash("shuffle", epoch)).generator().permutation(n)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            labels = None if dataset.labels is None else dataset.labels[idx]
            kwargs = {}
            if isinstance(params, RbmParams):
                kwargs["gibbs_steps"] = config.gibbs_steps
            sampler = RngStream(config.seed, stable_hash("gibbs", epoch, b))
            grads = gradient(params, dataset.inputs[idx], labels, sampler, **kwargs)
            if not all(np.all(np.isfinite(a)) for a in grads.arrays().values()):
                raise TrainingDivergedError(f"non-finite gradient at epoch {epoch}, batch {b} ({policy.describe()})")
            _update(params, grads, params.weight_names, policy, eta, config.seed, epoch, b)
            if bias_policy is not None:
                _update(params, grads, params.bias_names, policy, eta, config.seed, epoch, b)
            else:
                _sgd(params, grads, params.bias_names, eta)
        loss = training_loss(params, dataset)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite training loss at epoch {epoch} ({policy.describe()})")
        check_on_grid(params, policy, include_biases=config.quantize_biases)
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            curve.add(epoch, _metric(params, dataset), _metric(params, validation))
    return params, curve


# --- offline k-means ----------------------------------------------------------


@dataclass
class CompressionReport:
    bits: int
    center_bits: int
    codebooks: dict[str, Codebook]

    @property
    def overhead_bits(self) -> int:
        return sum(codebook_memory_bits(cb) for cb in self.codebooks.values())


def compress_trained(params, bits: int, center_bits: int = 32, seed: int = 0):
    """Replace every weight matrix by its k-means codebook decoding, k = 2**bits - 1."""
    out = params.copy()
    k = 2**bits - 1
    books = {}
    for name in params.weight_names:
        w = getattr(params, name)
        distinct = len(np.unique(w))
        cb, idx = kmeans_compress(w, min(k, distinct), center_bits, seed=seed)
        setattr(out, name, cb.decode(idx).reshape(w.shape))
        books[name] = cb
    return out, CompressionReport(bits, center_bits, books)


# --- memory budget -------------------------------------------------------------


def weights_per_hidden_unit(model: str, n_in: int, n_out: int = 0, count_all: bool = False) -> int:
    """Weights added by one hidden unit under the chosen accounting rule.

    By default only the input-to-hidden matrix counts.
    """
    if not count_all:
        return n_in
    if model == "mlp":
        return n_in + n_out
    if model == "nade":
        return 2 * n_in
    return n_in


@dataclass(frozen=True)
class MemoryBudget:
    total_bits: int
    bits_per_weight: int
    weights_per_unit: int

    @property
    def hidden_size(self) -> int:
        h = self.total_bits // (self.weights_per_unit * self.bits_per_weight)
        if h < 1:
            raise ConfigurationError(
                f"{self.total_bits} bits cannot hold one hidden unit of "
                f"{self.weights_per_unit} weights at {self.bits_per_weight} bits"
            )
        return h

    @property
    def used_bits(self) -> int:
        return self.hidden_size * self.weights_per_unit * self.bits_per_weight


# --- experiments ----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "mlp"
    methods: tuple[str, ...] = ("rr",)
    bits: tuple[int, ...] = (2, 4, 6, 8)
    sweep: str = "fixed_hidden"
    hidden_size: int | None = 50
    total_bits: int | None = None
    count_all_matrices: bool = False
    seeds: tuple[int, ...] = (0,)
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 20
    eval_every: int = 1
    quantize_biases: bool = False
    lr_decay: bool = False
    gibbs_steps: int = 15
    center_bits: int = 32
    prob_levels: str = "grid"  # "grid": 2**i - 1 levels, "pow2": 2**i levels
    nade_order_seed: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("mlp", "rbm", "nade"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigurationError(f"unknown or missing methods {bad}")
        if self.sweep not in ("fixed_hidden", "fixed_memory"):
            raise ConfigurationError(f"unknown sweep {self.sweep!r}")
        if self.sweep == "fixed_hidden" and not self.hidden_size:
            raise ConfigurationError("fixed_hidden sweep needs hidden_size")
        if self.sweep == "fixed_memory" and not self.total_bits:
            raise ConfigurationError("fixed_memory sweep needs total_bits")
        if not self.seeds:
            raise ConfigurationError("at least one seed required")
        if self.prob_levels not in ("grid", "pow2"):
            raise ConfigurationError("prob_levels must be 'grid' or 'pow2'")
        if any(b < 2 for b in self.bits):
            raise ConfigurationError("bits must be >= 2")

    def policy(self, method: str, bits: int) -> QuantPolicy:
        if method in ("baseline", "kmeans"):
            return QuantPolicy.baseline()
        if method == "nearest":
            return QuantPolicy.nearest(bits)
        if method == "rr":
            return QuantPolicy.randomized(bits)
        levels = 2**bits if self.prob_levels == "pow2" else 2**bits - 1
        return QuantPolicy.coarse_p(bits, levels)

    def train_config(self, method: str, bits: int, seed: int) -> TrainConfig:
        return TrainConfig(
            policy=self.policy(method, bits),
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
            eval_every=self.eval_every,
            quantize_biases=self.quantize_biases,
            lr_decay=self.lr_decay,
            gibbs_steps=self.gibbs_steps,
        )

    def cells(self) -> list[tuple[str, int, int]]:
        """(method, bits, seed) for every run; the float baseline runs once per seed."""
        out = []
        for method in self.methods:
            bit_list = (FLOAT_BITS,) if method == "baseline" else self.bits
            for bits in bit_list:
                for seed in self.seeds:
                    out.append((method, bits, seed))
        return out

    def hidden_for(self, method: str, bits: int, n_in: int, n_out: int) -> int:
        if self.sweep == "fixed_hidden":
            return self.hidden_size
        per_unit = weights_per_hidden_unit(self.model, n_in, n_out, self.count_all_matrices)
        return MemoryBudget(self.total_bits, bits, per_unit).hidden_size


@dataclass
class CellResult:
    row: dict
    curve: LearningCurve
    params: object = None
    report: CompressionReport | None = None


@dataclass
class Splits:
    train: Dataset
    validation: Dataset | None = None
    test: Dataset | None = None


def _n_out(model: str, splits: Splits) -> int:
    if model != "mlp":
        return 0
    labels = [d.labels for d in (splits.train, splits.validation, splits.test) if d is not None]
    return int(max(l.max() for l in labels)) + 1


def _weight_memory(params, bits: int, model: str, count_all: bool) -> int:
    names = params.weight_names if count_all else params.weight_names[:1]
    return sum(getattr(params, n).size for n in names) * bits


def run_cell(cfg: ExperimentConfig, method: str, bits: int, seed: int, splits: Splits,
             keep_params: bool = False) -> CellResult:
    """Train (and for k-means, compress) one sweep cell and evaluate it."""
    t0 = time.perf_counter()
    n_in = splits.train.n_features
    n_out = _n_out(cfg.model, splits)
    hidden = cfg.hidden_for(method, bits, n_in, n_out)
    train_bits = FLOAT_BITS if method == "kmeans" else bits
    tcfg = cfg.train_config(method, train_bits, seed)
    params = init_model(cfg.model, n_in, hidden, n_out, tcfg.policy, seed, cfg.nade_order_seed)
    params, curve = train(params, splits.train, tcfg, splits.validation)
    report = None
    memory = _weight_memory(params, bits, cfg.model, cfg.count_all_matrices)
    if method == "kmeans":
        params, report = compress_trained(params, bits, cfg.center_bits, seed)
        books = report.codebooks if cfg.count_all_matrices else dict(list(report.codebooks.items())[:1])
        memory += sum(codebook_memory_bits(cb) for cb in books.values())
    row = {
        "model": cfg.model,
        "method": method,
        "bits": bits,
        "hidden_size": hidden,
        "seed": seed,
        "train_metric": _metric(params, splits.train),
        "validation_metric": _metric(params, splits.validation),
        "test_metric": _metric(params, splits.test),
        "wall_time": time.perf_counter() - t0,
        "memory_bits": memory,
    }
    log.info("%s %s bits=%d seed=%d hidden=%d test=%s", cfg.model, method, bits, seed, hidden, row["test_metric"])
    return CellResult(row, curve, params if keep_params else None, report)


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(cfg: ExperimentConfig, splits: Splits, keep_params: bool = False) -> list[CellResult]:
    """Every cell of ``cfg``, in ``cfg.cells()`` order regardless of worker count."""
    cells = cfg.cells()
    jobs = [(cfg, m, b, s, splits, keep_params) for m, b, s in cells]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [run_cell(*job) for job in jobs]
    return results


def sweep_fixed_hidden(bits_list, method_list, base: ExperimentConfig, splits: Splits, hidden_size: int | None = None):
    cfg = replace(base, bits=tuple(bits_list), methods=tuple(method_list), sweep="fixed_hidden",
                  hidden_size=hidden_size or base.hidden_size)
    return [r.row for r in run_sweep(cfg, splits)]


def sweep_fixed_memory(total_bits: int, bits_list, method: str, base: ExperimentConfig, splits: Splits):
    cfg = replace(base, bits=tuple(bits_list), methods=(method,), sweep="fixed_memory", total_bits=total_bits)
    n_out = _n_out(cfg.model, splits)
    for bits in cfg.bits:
        cfg.hidden_for(method, bits, splits.train.n_features, n_out)  # raises early if too small
    return [r.row for r in run_sweep(cfg, splits)]


def median_by(rows, key=("method", "bits"), metric="test_metric") -> dict:
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in key), []).append(r[metric])
    return {k: float(np.median(v)) for k, v in groups.items()}


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
