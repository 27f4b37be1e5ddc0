"""Dataset ingestion: IDX (MNIST) and libsvm parsers, binarization, splits."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .numerics import RngStream

# IDX type codes -> (numpy big-endian dtype, element size)
IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_CODE_FOR_DTYPE = {dt.newbyteorder("="): code for code, dt in IDX_TYPES.items()}


class DataError(Exception):
    """Base class for dataset parsing and loading failures."""


class IdxMagicError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class IdxTypeError(DataError):
    pass


class LibsvmError(DataError):
    """A libsvm parse failure; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LibsvmTokenError(LibsvmError):
    pass


class LibsvmIndexOrderError(LibsvmError):
    pass


class LibsvmIndexRangeError(LibsvmError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    split: str = ""
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D examples x features matrix")
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise ValueError(
                f"{len(self.inputs)} inputs but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1

    def take(self, index, split: str | None = None) -> "Dataset":
        index = np.asarray(index)
        return replace(
            self,
            inputs=self.inputs[index],
            labels=None if self.labels is None else self.labels[index],
            split=self.split if split is None else split,
        )


# --- IDX ---------------------------------------------------------------------


def parse_idx(buf: bytes) -> np.ndarray:
    """Parse an IDX container into an array of the declared shape.

    Layout: two zero bytes, a type code byte, a dimension count byte, one
    big-endian uint32 per dimension, then the row-major payload.
    """
    if len(buf) < 4:
        raise IdxTruncatedError(f"header needs 4 bytes, got {len(buf)}")
    if buf[0] != 0 or buf[1] != 0:
        raise IdxMagicError(f"bad magic bytes {buf[0]:#04x} {buf[1]:#04x}")
    code, ndim = buf[2], buf[3]
    if code not in IDX_TYPES:
        raise IdxTypeError(f"unsupported IDX type code {code:#04x}")
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise IdxTruncatedError(
            f"dimension header needs {header} bytes, got {len(buf)}"
        )
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    dtype = IDX_TYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    actual = len(buf) - header
    if actual < expected:
        raise IdxTruncatedError(
            f"payload truncated: expected {expected} bytes, got {actual}"
        )
    if actual > expected:
        raise IdxTruncatedError(
            f"payload has trailing data: expected {expected} bytes, got {actual}"
        )
    data = np.frombuffer(buf, dtype=dtype, offset=header, count=expected // dtype.itemsize)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    dt = array.dtype.newbyteorder("=")
    if dt not in _CODE_FOR_DTYPE:
        raise IdxTypeError(f"no IDX type code for dtype {array.dtype}")
    code = _CODE_FOR_DTYPE[dt]
    head = bytes([0, 0, code, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return head + array.astype(IDX_TYPES[code]).tobytes()


def read_idx_file(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def _find(directory: Path, stem: str) -> Path | None:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    return None


def load_mnist(directory, kind: str = "train") -> Dataset:
    """Load an MNIST split from ``directory`` with pixels scaled to [0, 1].

    ``kind`` is ``"train"`` or ``"t10k"``; files may be gzipped.
    """
    directory = Path(directory)
    images = _find(directory, f"{kind}-images-idx3-ubyte")
    labels = _find(directory, f"{kind}-labels-idx1-ubyte")
    if images is None or labels is None:
        raise FileNotFoundError(
            f"MNIST {kind} files not found in {directory}; expected "
            f"{kind}-images-idx3-ubyte[.gz] and {kind}-labels-idx1-ubyte[.gz]"
        )
    x = read_idx_file(images)
    y = read_idx_file(labels)
    x = x.reshape(len(x), -1).astype(np.float64) / 255.0
    return Dataset(x, y.astype(np.int64), name="mnist", split=kind)


def binarize(dataset: Dataset, threshold: float = 0.5) -> Dataset:
    return replace(dataset, inputs=(dataset.inputs >= threshold).astype(np.float64))


# --- libsvm ------------------------------------------------------------------


def parse_libsvm(text: str, n_features: int, name: str = "") -> Dataset:
    """Parse libsvm ``label idx:val ...`` lines into a dense dataset.

    Indices are 1-based and must strictly increase within a line. Labels are
    remapped to contiguous 0-based classes in sorted order of the raw label;
    the mapping is kept in ``label_map``.
    """
    rows, raw_labels = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmTokenError(f"bad label {tokens[0]!r}", lineno) from None
        row = np.zeros(n_features)
        last = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise LibsvmTokenError(f"malformed token {tok!r}", lineno) from None
            if idx <= last:
                raise LibsvmIndexOrderError(
                    f"index {idx} does not increase past {last}", lineno
                )
            if idx > n_features:
                raise LibsvmIndexRangeError(
                    f"index {idx} exceeds n_features={n_features}", lineno
                )
            row[idx - 1] = val
            last = idx
        rows.append(row)
        raw_labels.append(label)
    classes = sorted(set(raw_labels))
    mapping = {c: i for i, c in enumerate(classes)}
    labels = np.array([mapping[c] for c in raw_labels], dtype=np.int64)
    inputs = np.array(rows).reshape(len(rows), n_features)
    return Dataset(inputs, labels, name=name, label_map={_tidy(c): i for c, i in mapping.items()})


def _tidy(x: float):
    return int(x) if float(x).is_integer() else x


def load_libsvm(path, n_features: int) -> Dataset:
    path = Path(path)
    return parse_libsvm(path.read_text(), n_features, name=path.stem)


# --- splits ------------------------------------------------------------------


def subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic (stratified when labeled) subset of ``n`` examples."""
    _check_n(dataset, n)
    return dataset.take(_stratified_order(dataset, seed)[:n])


def _check_n(dataset: Dataset, n: int) -> None:
    if not 0 <= n <= len(dataset):
        raise ValueError(f"cannot take {n} examples from {len(dataset)}")


def _stratified_order(dataset: Dataset, seed: int) -> np.ndarray:
    """Permutation whose every prefix is class-proportional within one example.

    Each example gets a key (rank-within-class + jitter) / class count, so
    classes interleave in proportion to their size.
    """
    rng = RngStream(seed, stream_id=0x5AB5).generator()
    n = len(dataset)
    if dataset.labels is None:
        return rng.permutation(n)
    keys = np.empty(n)
    jitter = rng.random(n)
    for c in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == c)
        members = members[rng.permutation(len(members))]
        # (j + 0.5) / size keeps each class's cumulative count within 1 of
        # its share; jitter below 1/(2*size) only breaks cross-class ties
        keys[members] = (np.arange(len(members)) + 0.5 + 0.5 * (jitter[members] - 0.5)) / len(members)
    return np.argsort(keys, kind="stable")


def split(dataset: Dataset, sizes: dict[str, int], seed: int) -> dict[str, Dataset]:
    """Carve disjoint stratified splits (in the given order) from one pool."""
    total = sum(sizes.values())
    _check_n(dataset, total)
    order = _stratified_order(dataset, seed)
    out, start = {}, 0
    # successive chunks of a stratified order are themselves ~stratified
    for name, size in sizes.items():
        out[name] = dataset.take(order[start:start + size], split=name)
        start += size
    return out


# --- synthetic ---------------------------------------------------------------


def toy_separable(n: int = 200, n_features: int = 2, seed: int = 0, margin: float = 0.1) -> Dataset:
    """Two linearly separable classes in [0, 1]^d split by a random hyperplane."""
    rng = RngStream(seed, stream_id=0x70F).generator()
    normal = rng.normal(size=n_features)
    normal /= np.linalg.norm(normal)
    xs = []
    while sum(len(x) for x in xs) < n:
        x = rng.random((4 * n, n_features))
        score = (x - 0.5) @ normal
        xs.append(x[np.abs(score) > margin / 2])
    x = np.concatenate(xs)[:n]
    y = ((x - 0.5) @ normal > 0).astype(np.int64)
    return Dataset(x, y, name="toy_separable")


def teacher_classification(
    n: int,
    n_features: int = 64,
    n_classes: int = 10,
    teacher_hidden: int = 12,
    seed: int = 0,
) -> Dataset:
    """Binary inputs labeled by a random continuous-weight teacher network.

    Labels are argmax of a random one-hidden-layer tanh network, so a student
    needs both enough hidden units and enough weight resolution to fit it.
    """
    rng = RngStream(seed, stream_id=0x7EAC).generator()
    w1 = rng.normal(size=(n_features, teacher_hidden)) / np.sqrt(n_features / 4)
    b1 = rng.normal(size=teacher_hidden) * 0.5
    w2 = rng.normal(size=(teacher_hidden, n_classes))
    x = (rng.random((n, n_features)) < 0.5).astype(np.float64)
    h = np.tanh((x - 0.5) @ w1 + b1)
    y = np.argmax(h @ w2, axis=1).astype(np.int64)
    return Dataset(x, y, name="teacher")
