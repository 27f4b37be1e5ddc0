"""Config-driven experiment runner.

    lowres run CONFIG        run a sweep, write results.csv, curves/, images
    lowres validate CONFIG   schema-check a config without running it
    lowres version

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
Relative dataset paths resolve under ``./data`` unless the
``LOWRES_DATA_DIR`` environment variable names another directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import re
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataError,
    Dataset,
    binarize,
    load_libsvm,
    load_mnist,
    split,
    subsample,
    teacher_classification,
    toy_separable,
)
from .images import tile, write_pgm, write_receptive_fields
from .models import RbmParams, rbm_sample
from .numerics import RngStream, stable_hash
from .quantize import InvalidValueError
from .training import (
    ConfigurationError,
    ExperimentConfig,
    Splits,
    TrainingDivergedError,
    run_sweep,
)

log = logging.getLogger("lowres")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_ENV = "LOWRES_DATA_DIR"
DEFAULT_DATA_DIR = "data"

RESULT_COLUMNS = (
    "config_hash",
    "model",
    "method",
    "bits",
    "hidden_size",
    "seed",
    "metric",
    "train_metric",
    "validation_metric",
    "test_metric",
    "wall_time",
    "memory_bits",
)
CURVE_COLUMNS = ("epoch", "train_metric", "validation_metric")
METRIC_NAMES = {"mlp": "misclassification_percent", "nade": "nll_nats", "rbm": "reconstruction_xent"}


class ConfigError(Exception):
    def __init__(self, message: str, section: str | None = None, key: str | None = None, line: int | None = None):
        where = ""
        if line is not None:
            where += f"line {line}: "
        if section:
            where += f"[{section}]" + (f" {key}: " if key else ": ")
        super().__init__(where + message)


class MissingDataError(Exception):
    pass


# --- config schema -----------------------------------------------------------


def _list(conv):
    def parse(s):
        return tuple(conv(x.strip()) for x in s.split(",") if x.strip())
    parse.__name__ = f"list of {conv.__name__}"
    return parse


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional_int(s):
    return None if s.strip().lower() in ("", "none") else int(s)


SCHEMA = {
    "experiment": {
        "model": str,
        "methods": _list(str),
        "bits": _list(int),
        "sweep": str,
        "hidden_size": _optional_int,
        "total_bits": _optional_int,
        "count_all_matrices": _bool,
        "seeds": _list(int),
        "workers": int,
    },
    "training": {
        "learning_rate": float,
        "epochs": int,
        "batch_size": int,
        "eval_every": int,
        "quantize_biases": _bool,
        "lr_decay": _bool,
        "gibbs_steps": int,
        "center_bits": int,
        "prob_levels": str,
        "nade_order_seed": _optional_int,
    },
    "data": {
        "source": str,
        "path": str,
        "test_path": str,
        "n_features": int,
        "binarize": _bool,
        "threshold": float,
        "train_size": _optional_int,
        "validation_size": _optional_int,
        "test_size": _optional_int,
        "split_seed": int,
        "n_examples": int,
        "n_classes": int,
        "teacher_hidden": int,
        "data_seed": int,
    },
    "rbm": {
        "passes": int,
        "record_every": int,
        "initial_conditions": int,
        "image_shape": _list(int),
    },
    "output": {
        "dir": str,
    },
}
REQUIRED = {"experiment": ("model", "methods", "seeds"), "data": ("source",), "output": ("dir",)}
SOURCES = ("mnist", "libsvm", "teacher", "toy")


@dataclass(frozen=True)
class DataConfig:
    source: str = "mnist"
    path: str = ""
    test_path: str = ""
    n_features: int = 0
    binarize: bool = True
    threshold: float = 0.5
    train_size: int | None = None
    validation_size: int | None = None
    test_size: int | None = None
    split_seed: int = 0
    n_examples: int = 5000
    n_classes: int = 10
    teacher_hidden: int = 12
    data_seed: int = 0


@dataclass(frozen=True)
class RbmOutputConfig:
    passes: int = 3000
    record_every: int = 1000
    initial_conditions: int = 4
    image_shape: tuple[int, ...] = (28, 28)


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    data: DataConfig
    rbm: RbmOutputConfig
    output_dir: Path
    config_hash: str
    source_path: Path | None = None
    raw: dict = field(default_factory=dict)


def _line_of(text: str, section: str, key: str | None) -> int | None:
    lines = text.splitlines()
    current = None
    for i, line in enumerate(lines, start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return None


def parse_config(text: str, source_path: Path | None = None) -> RunConfig:
    """Parse and schema-check an INI-style run config.

    Every problem is reported as :class:`ConfigError` naming the section,
    key and line before any work starts.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError("unknown section", section, line=_line_of(text, section, None))
        values[section] = {}
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", section, key, line)
            conv = SCHEMA[section][key]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"cannot parse {raw!r} as {conv.__name__} ({exc})", section, key, line) from None
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigError("required key missing", section, key, _line_of(text, section, None))

    exp_kwargs = {**values["experiment"], **values.get("training", {})}
    try:
        experiment = ExperimentConfig(**exp_kwargs)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), "experiment") from None
    data = DataConfig(**values["data"])
    if data.source not in SOURCES:
        raise ConfigError(f"source must be one of {SOURCES}", "data", "source", _line_of(text, "data", "source"))
    if data.source in ("mnist", "libsvm") and not data.path:
        raise ConfigError("path required for this source", "data", "path", _line_of(text, "data", None))
    if data.source == "libsvm" and data.n_features < 1:
        raise ConfigError("n_features required for libsvm", "data", "n_features", _line_of(text, "data", None))
    rbm = RbmOutputConfig(**values.get("rbm", {}))
    if len(rbm.image_shape) != 2:
        raise ConfigError("image_shape needs two integers", "rbm", "image_shape", _line_of(text, "rbm", "image_shape"))

    # where results go does not change what is computed
    hashed = {s: d for s, d in values.items() if s != "output"}
    canonical = json.dumps({s: {k: v for k, v in sorted(d.items())} for s, d in sorted(hashed.items())},
                           sort_keys=True, default=list)
    digest = hashlib.sha256(canonical.encode()).hexdigest()[:12]
    out = Path(values["output"]["dir"])
    return RunConfig(experiment, data, rbm, out, digest, source_path, values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, path)


# --- data --------------------------------------------------------------------


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    return Path(os.environ.get(DATA_ENV) or DEFAULT_DATA_DIR) / p


FETCH_HELP = {
    "mnist": (
        "MNIST files not found in {path}.\n"
        "Place train-images-idx3-ubyte.gz and train-labels-idx1-ubyte.gz (optionally\n"
        "t10k-* for a separate test set) from the MNIST distribution in that directory,\n"
        "or build the 5000-digit subset with:\n"
        "    pip install mlxtend && python scripts/prepare_mnist_subset.py {path}\n"
        "Nothing is downloaded automatically."
    ),
    "libsvm": (
        "libsvm file {path} not found.\n"
        "Download it (e.g. 'dna.scale' and 'dna.scale.t', 180 features) from the LIBSVM\n"
        "datasets page and point [data] path/test_path at the local copies.\n"
        "Nothing is downloaded automatically."
    ),
}


def _carve(pool: Dataset, cfg: DataConfig, with_test: bool) -> dict[str, Dataset]:
    """Stratified train/validation(/test) splits; an unset train size takes the rest."""
    sizes = {"validation": cfg.validation_size or 0}
    if with_test:
        sizes["test"] = cfg.test_size or 0
    rest = len(pool) - sum(sizes.values())
    sizes = {"train": rest if cfg.train_size is None else cfg.train_size, **sizes}
    try:
        return split(pool, sizes, cfg.split_seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def load_splits(cfg: DataConfig) -> Splits:
    if cfg.source == "mnist":
        path = _resolve(cfg.path)
        try:
            pool = load_mnist(path, "train")
        except FileNotFoundError:
            raise MissingDataError(FETCH_HELP["mnist"].format(path=path)) from None
        try:
            test_pool = load_mnist(path, "t10k")
        except FileNotFoundError:
            test_pool = None
    elif cfg.source == "libsvm":
        path = _resolve(cfg.path)
        if not path.exists():
            raise MissingDataError(FETCH_HELP["libsvm"].format(path=path))
        pool = load_libsvm(path, cfg.n_features)
        test_pool = None
        if cfg.test_path:
            tp = _resolve(cfg.test_path)
            if not tp.exists():
                raise MissingDataError(FETCH_HELP["libsvm"].format(path=tp))
            test_pool = load_libsvm(tp, cfg.n_features)
    elif cfg.source == "teacher":
        pool = teacher_classification(cfg.n_examples, cfg.n_features or 64, cfg.n_classes,
                                      cfg.teacher_hidden, cfg.data_seed)
        test_pool = None
    else:
        pool = toy_separable(cfg.n_examples, cfg.n_features or 2, cfg.data_seed)
        test_pool = None

    if cfg.binarize and cfg.source == "mnist":
        pool = binarize(pool, cfg.threshold)
        test_pool = None if test_pool is None else binarize(test_pool, cfg.threshold)
    parts = _carve(pool, cfg, with_test=test_pool is None)
    if test_pool is not None:
        n = cfg.test_size if cfg.test_size is not None else len(test_pool)
        try:
            parts["test"] = replace(subsample(test_pool, n, cfg.split_seed), split="test")
        except ValueError as exc:
            raise DataError(str(exc)) from None
    none_if_empty = {k: (v if len(v) else None) for k, v in parts.items()}
    if none_if_empty["train"] is None:
        raise DataError("training split is empty")
    return Splits(none_if_empty["train"], none_if_empty.get("validation"), none_if_empty.get("test"))


# --- outputs -----------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows, path: Path, config_hash: str, model: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            full = {**r, "config_hash": config_hash, "metric": METRIC_NAMES[model]}
            w.writerow([_fmt(full[c]) for c in RESULT_COLUMNS])


def write_curve(curve, path: Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for p in curve.points:
            w.writerow([p.epoch, _fmt(p.train), _fmt(p.validation)])


def cell_name(row) -> str:
    return f"{row['model']}_{row['method']}_b{row['bits']}_s{row['seed']}"


def rbm_sample_grid(params: RbmParams, start: np.ndarray, rc: RbmOutputConfig, rng: RngStream) -> np.ndarray:
    """Rows are recordings in time order, columns are initial conditions."""
    recs = rbm_sample(params, start, rc.passes, rc.record_every, rng)
    shape = tuple(rc.image_shape)
    tiles = [rec[c].reshape(shape) for rec in recs for c in range(len(start))]
    if not tiles:
        raise ValueError("no recordings: passes < record_every")
    return tile(tiles, len(recs), len(start))


def write_rbm_images(result, splits: Splits, rc: RbmOutputConfig, out_dir: Path) -> None:
    params = result.params
    name = cell_name(result.row)
    if int(np.prod(rc.image_shape)) != params.W.shape[0]:
        log.warning("image_shape %s does not match %d visible units; no images for %s",
                    tuple(rc.image_shape), params.W.shape[0], name)
        return
    source = splits.test or splits.validation or splits.train
    seed = result.row["seed"]
    gen = RngStream(seed, stable_hash("rbm-starts")).generator()
    idx = gen.choice(len(source), size=min(rc.initial_conditions, len(source)), replace=False)
    start = source.inputs[np.sort(idx)]
    grid = rbm_sample_grid(params, start, rc, RngStream(seed, stable_hash("rbm-sample", name)))
    write_pgm(grid, out_dir / "samples" / f"{name}.pgm")
    write_receptive_fields(params.W, tuple(rc.image_shape), out_dir / "filters" / f"{name}.pgm")


def metadata(cfg: RunConfig) -> dict:
    exp = asdict(cfg.experiment)
    return {
        "version": __version__,
        "config_hash": cfg.config_hash,
        "experiment": exp,
        "data": asdict(cfg.data),
        "rbm": asdict(cfg.rbm),
        "coarse_p_levels": "2**bits - 1" if cfg.experiment.prob_levels == "grid" else "2**bits",
        "metric": METRIC_NAMES[cfg.experiment.model],
        "result_columns": list(RESULT_COLUMNS),
        "weight_memory_counts": "all weight matrices" if cfg.experiment.count_all_matrices else "input-to-hidden matrix",
    }


def execute(cfg: RunConfig) -> list[dict]:
    """Run the configured sweep and write every artifact; returns the result rows."""
    splits = load_splits(cfg.data)
    exp = cfg.experiment
    is_rbm = exp.model == "rbm"
    results = run_sweep(exp, splits, keep_params=is_rbm)
    out = cfg.output_dir
    (out / "curves").mkdir(parents=True, exist_ok=True)
    rows = [r.row for r in results]
    write_results(rows, out / "results.csv", cfg.config_hash, exp.model)
    for r in results:
        write_curve(r.curve, out / "curves" / f"{cell_name(r.row)}.csv")
        if is_rbm:
            write_rbm_images(r, splits, cfg.rbm, out)
    (out / "metadata.json").write_text(json.dumps(metadata(cfg), indent=2, sort_keys=True, default=list) + "\n")
    return rows


# --- entry point -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lowres", description="Low-resolution weight training experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", type=Path)
    r.add_argument("--output", type=Path, help="override [output] dir")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config", type=Path)
    sub.add_parser("version", help="print the package version")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "version":
        print(f"lowres {__version__}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok {args.config} ({len(cfg.experiment.cells())} cells, hash {cfg.config_hash})")
        return EXIT_OK
    if args.output is not None:
        cfg = replace(cfg, output_dir=args.output)
    try:
        rows = execute(cfg)
    except (MissingDataError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDivergedError, InvalidValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {len(rows)} rows to {cfg.output_dir / 'results.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
