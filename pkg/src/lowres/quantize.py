"""Resolution-reduction primitives for fixed-point weights in [-1, 1].

An ``i``-bit grid holds the ``2**i - 1`` points ``n / m`` with
``m = 2**(i-1) - 1`` and ``|n| <= m``, so the spacing is ``1 / m`` and the
extremes are exactly -1 and +1. Grid values are always produced as
``n / m`` (never ``n * spacing``) so that membership tests are exact.

All rounding functions accept scalars or numpy arrays; scalar in, float out.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

MAX_BITS = 52


class InvalidResolutionError(ValueError):
    pass


class InvalidValueError(ValueError):
    """Non-finite or out-of-domain numeric input."""


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidValueError("non-finite value in rounding input")


@dataclass(frozen=True)
class Grid:
    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 2 <= self.bits <= MAX_BITS:
            raise InvalidResolutionError(
                f"bits must be an integer in [2, {MAX_BITS}], got {self.bits!r}"
            )

    lo = -1.0
    hi = 1.0

    @property
    def levels(self) -> int:
        """Number of positive grid points; the grid is ``{n/levels}``."""
        return 2 ** (self.bits - 1) - 1

    @property
    def spacing(self) -> float:
        return 1.0 / self.levels

    @property
    def n_points(self) -> int:
        return 2 * self.levels + 1

    def points(self) -> np.ndarray:
        if self.bits > 24:
            raise ValueError(f"refusing to enumerate {self.n_points} points")
        n = np.arange(-self.levels, self.levels + 1)
        return n / self.levels

    def index(self, x) -> np.ndarray:
        """Integer grid index ``n`` of the nearest grid point to each value."""
        return np.rint(np.asarray(x, dtype=np.float64) * self.levels).astype(np.int64)

    def contains(self, x) -> np.ndarray | bool:
        """Exact membership: ``x`` equals some ``n/levels`` with ``|n| <= levels``."""
        x = np.asarray(x, dtype=np.float64)
        n = np.rint(x * self.levels)
        ok = (np.abs(n) <= self.levels) & (n / self.levels == x)
        return bool(ok) if ok.ndim == 0 else ok


def make_grid(bits: int) -> Grid:
    return Grid(bits)


def _scaled_magnitude(a: np.ndarray, grid: Grid) -> np.ndarray:
    """``|a| / spacing`` with float noise around integers removed.

    ``(n/m) * m`` can land one ulp off ``n``; without snapping, an on-grid
    value could be rounded away from itself.
    """
    scaled = np.abs(a) * grid.levels
    nearest = np.rint(scaled)
    tol = 4 * np.finfo(np.float64).eps * scaled
    return np.where(np.abs(scaled - nearest) <= tol, nearest, scaled)


def round_nearest(a, grid: Grid):
    """Nearest grid point after clipping to [-1, 1]; ties go away from zero."""
    a = np.asarray(a, dtype=np.float64)
    _check_finite(a)
    a = np.clip(a, grid.lo, grid.hi)
    n = np.floor(_scaled_magnitude(a, grid) + 0.5)
    return _out(np.sign(a) * n / grid.levels)


def _rr_from_p(a, scaled, p, u, grid):
    n = np.where(p > u, np.ceil(scaled), np.floor(scaled))
    return _out(np.sign(a) * n / grid.levels)


def rr(a, grid: Grid, u):
    """Randomized rounding of ``a`` onto ``grid`` given uniform draw(s) ``u``.

    Rounds to the neighbor of larger magnitude with probability equal to the
    fractional part of ``|a| / spacing``; unbiased over ``u``. No clipping is
    applied, so values beyond +-1 can land on points outside the grid range.
    """
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_finite(a, u)
    scaled = _scaled_magnitude(a, grid)
    p = scaled - np.floor(scaled)
    return _rr_from_p(a, scaled, p, u, grid)


def quantize_probability(p, levels: int):
    """Round ``p`` to the nearest of ``{j / (levels - 1)}``; ties round up."""
    p = np.asarray(p, dtype=np.float64)
    _check_finite(p)
    if levels < 2:
        raise InvalidResolutionError(f"levels must be >= 2, got {levels}")
    if np.any((p < 0) | (p > 1)):
        raise InvalidValueError("probability outside [0, 1]")
    steps = levels - 1
    return _out(np.floor(p * steps + 0.5) / steps)


def rr_coarse(a, grid: Grid, levels: int, u):
    """Randomized rounding with the rounding probability held at ``levels`` levels."""
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_finite(a, u)
    scaled = _scaled_magnitude(a, grid)
    p = quantize_probability(scaled - np.floor(scaled), levels)
    return _rr_from_p(a, scaled, p, u, grid)


class PolicyKind(enum.Enum):
    FLOAT = "baseline"
    NEAREST = "nearest"
    RR = "rr"
    COARSE_P = "coarse_p"


@dataclass(frozen=True)
class QuantPolicy:
    kind: PolicyKind
    grid: Grid | None = None
    prob_levels: int | None = None

    def __post_init__(self):
        if self.kind is PolicyKind.FLOAT:
            if self.grid is not None:
                raise ValueError("float baseline takes no grid")
            return
        if self.grid is None:
            raise ValueError(f"{self.kind.value} policy needs a grid")
        if self.kind is PolicyKind.COARSE_P:
            if self.prob_levels is None:
                object.__setattr__(self, "prob_levels", self.grid.n_points)
            if self.prob_levels < 2:
                raise InvalidResolutionError("prob_levels must be >= 2")

    @classmethod
    def baseline(cls) -> "QuantPolicy":
        return cls(PolicyKind.FLOAT)

    @classmethod
    def nearest(cls, bits: int) -> "QuantPolicy":
        return cls(PolicyKind.NEAREST, Grid(bits))

    @classmethod
    def randomized(cls, bits: int) -> "QuantPolicy":
        return cls(PolicyKind.RR, Grid(bits))

    @classmethod
    def coarse_p(cls, bits: int, prob_levels: int | None = None) -> "QuantPolicy":
        return cls(PolicyKind.COARSE_P, Grid(bits), prob_levels)

    @property
    def quantized(self) -> bool:
        return self.kind is not PolicyKind.FLOAT

    @property
    def stochastic(self) -> bool:
        return self.kind in (PolicyKind.RR, PolicyKind.COARSE_P)

    def snap(self, w):
        """Place initial weights on the grid (nearest rounding); clip for float."""
        if self.grid is None:
            return _out(np.clip(np.asarray(w, dtype=np.float64), -1.0, 1.0))
        return round_nearest(w, self.grid)

    def describe(self) -> str:
        if self.kind is PolicyKind.FLOAT:
            return "baseline"
        s = f"{self.kind.value}:{self.grid.bits}"
        if self.kind is PolicyKind.COARSE_P:
            s += f":p{self.prob_levels}"
        return s


def quantized_update(theta, dtheta, eta: float, policy: QuantPolicy, u=None):
    """One gradient step ``theta - eta * dtheta``, rounded per policy, then clipped.

    ``u`` is required (same shape as ``theta``) for the stochastic policies.
    """
    theta = np.asarray(theta, dtype=np.float64)
    dtheta = np.asarray(dtheta, dtype=np.float64)
    _check_finite(dtheta)
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    c = theta - eta * dtheta
    kind = policy.kind
    if kind is PolicyKind.FLOAT:
        _check_finite(c)
        out = c
    elif kind is PolicyKind.NEAREST:
        # rounding before clipping: beyond +-1 nearest rounding saturates anyway
        _check_finite(c)
        n = np.floor(_scaled_magnitude(c, policy.grid) + 0.5)
        out = np.sign(c) * n / policy.grid.levels
    elif u is None:
        raise ValueError(f"{kind.value} update needs uniform draws")
    elif kind is PolicyKind.RR:
        out = rr(c, policy.grid, u)
    else:
        out = rr_coarse(c, policy.grid, policy.prob_levels, u)
    return _out(np.clip(out, -1.0, 1.0))


# --- offline k-means compression ---------------------------------------------


@dataclass(frozen=True)
class Codebook:
    centers: np.ndarray
    center_bits: int

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 1 or len(c) == 0:
            raise ValueError("codebook needs a non-empty 1-D center list")
        if np.any(np.diff(c) <= 0):
            raise ValueError("codebook centers must be strictly increasing")
        if self.center_bits < 1:
            raise InvalidResolutionError("center_bits must be >= 1")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return len(self.centers)

    def decode(self, assignments) -> np.ndarray:
        return self.centers[np.asarray(assignments)]


def codebook_memory_bits(codebook: Codebook) -> int:
    return codebook.k * codebook.center_bits


def round_to_precision(x, bits: int):
    """Nearest of ``2**bits`` uniformly spaced levels spanning [-1, 1]."""
    steps = 2**bits - 1
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    return _out(np.rint((x + 1.0) * steps / 2.0) * 2.0 / steps - 1.0)


def assign_1d(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center for each value; ``centers`` sorted ascending."""
    bounds = (centers[1:] + centers[:-1]) / 2.0
    return np.searchsorted(bounds, values, side="left")


def cluster_cost(values: np.ndarray, centers: np.ndarray, assignments: np.ndarray) -> float:
    return float(np.sum((values - centers[assignments]) ** 2))


def _plusplus_init(xs: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    centers = [xs[gen.integers(len(xs))]]
    d2 = (xs - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        j = min(int(np.searchsorted(np.cumsum(d2), gen.random() * total, side="right")), len(xs) - 1)
        centers.append(xs[j])
        d2 = np.minimum(d2, (xs - xs[j]) ** 2)
    return np.unique(centers)


def _lloyd_sorted(xs, centers, max_iter, history):
    assign = assign_1d(xs, centers)
    history.append(cluster_cost(xs, centers, assign))
    for it in range(1, max_iter + 1):
        counts = np.bincount(assign, minlength=len(centers))
        sums = np.bincount(assign, weights=xs, minlength=len(centers))
        keep = counts > 0
        centers = np.unique(sums[keep] / counts[keep])
        new = assign_1d(xs, centers)
        history.append(cluster_cost(xs, centers, new))
        done = np.array_equal(new, assign) and len(centers) == new[-1] + 1
        assign = new
        if done:
            return centers, assign, it
    return centers, assign, max_iter


class _Prefix:
    """O(1) sum-of-squares cost of any contiguous run of sorted values."""

    def __init__(self, xs):
        self.s1 = np.concatenate([[0.0], np.cumsum(xs)])
        self.s2 = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def sse(self, i, j):
        m = np.maximum(np.asarray(j) - i, 1)
        t = self.s1[j] - self.s1[i]
        return np.maximum(0.0, self.s2[j] - self.s2[i] - t * t / m)

    def mean(self, i, j):
        return (self.s1[j] - self.s1[i]) / (j - i)


def _relocate(xs, centers, assign, max_iter, history):
    """Merge-and-split descent on top of Lloyd.

    Lloyd cannot move a center across a neighbor, so two centers can end up
    sharing one mode while another center straddles two. Each round merges
    the adjacent pair that costs least to merge, splits the cluster that
    gains most from its best two-way cut, re-runs Lloyd, and keeps the result
    only if the total cost dropped.
    """
    pre = _Prefix(xs)
    cost = history[-1]
    while len(centers) >= 3:
        k = len(centers)
        ids = np.arange(k)
        starts = np.searchsorted(assign, ids, side="left")
        ends = np.searchsorted(assign, ids, side="right")
        sse = pre.sse(starts, ends)
        merge_cost = pre.sse(starts[:-1], ends[1:]) - sse[:-1] - sse[1:]
        gains = np.zeros(k)
        cuts = np.zeros(k, dtype=np.int64)
        for j in np.flatnonzero(ends - starts >= 2):
            t = np.arange(starts[j] + 1, ends[j])
            split = pre.sse(starts[j], t) + pre.sse(t, ends[j])
            best = int(np.argmin(split))
            gains[j], cuts[j] = sse[j] - split[best], t[best]
        # for each merge i, the best split j not in {i, i+1}: one of the top three
        top = np.argsort(-gains)[:3]
        best_delta, move = 0.0, None
        for i in range(k - 1):
            j = next(int(j) for j in top if j != i and j != i + 1)
            delta = gains[j] - merge_cost[i]
            if delta > best_delta:
                best_delta, move = delta, (i, j)
        if move is None:
            break
        i, j = move
        seeds = np.delete(centers, [i, i + 1, j])
        t = cuts[j]
        seeds = np.concatenate([
            seeds,
            [pre.mean(starts[i], ends[i + 1]), pre.mean(starts[j], t), pre.mean(t, ends[j])],
        ])
        trial_hist = []
        c2, a2, _ = _lloyd_sorted(xs, np.unique(seeds), max_iter, trial_hist)
        if trial_hist[-1] >= cost:
            break
        centers, assign, cost = c2, a2, trial_hist[-1]
        history.extend(trial_hist)
    return centers, assign


@dataclass
class LloydResult:
    centers: np.ndarray
    assignments: np.ndarray
    cost: float
    history: list[float]
    iterations: int


def lloyd_1d(
    values, k: int, rng: RngStream, max_iter: int = 300, relocate: bool = True
) -> LloydResult:
    """One k-means++ seeded Lloyd run (plus merge/split descent) on 1-D data.

    Empty clusters are dropped, so fewer than ``k`` centers may come back.
    ``history`` holds the within-cluster sum of squares after every
    assignment step and is non-increasing. Assignments refer to the sorted
    values.
    """
    xs = np.sort(np.asarray(values, dtype=np.float64).ravel())
    history: list[float] = []
    centers, assign, iters = _lloyd_sorted(xs, _plusplus_init(xs, k, rng.generator()), max_iter, history)
    if relocate:
        centers, assign = _relocate(xs, centers, assign, max_iter, history)
    return LloydResult(centers, assign, history[-1], history, iters)


def kmeans_1d(values, k: int, seed: int = 0, n_init: int | None = None, max_iter: int = 300):
    """Best of ``n_init`` seeded runs of :func:`lloyd_1d`, in the input's order.

    ``n_init`` defaults to 100 restarts, or 10 above 10k values where each
    run is already expensive. Returns ``(centers, assignments, cost)`` with
    centers ascending.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot cluster an empty weight list")
    distinct = len(np.unique(values))
    if k > distinct:
        warnings.warn(f"k={k} exceeds {distinct} distinct values; shrinking k", stacklevel=2)
        k = distinct
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == distinct:
        # one center per distinct value is the zero-cost optimum
        centers = np.unique(values)
        return centers, np.searchsorted(centers, values), 0.0
    if n_init is None:
        n_init = 100 if values.size <= 10_000 else 10
    best = None
    for run in range(n_init):
        res = lloyd_1d(values, k, RngStream(seed, stream_id=0xC1 + run), max_iter)
        if best is None or res.cost < best.cost:
            best = res
    centers = best.centers
    assignments = assign_1d(values, centers)
    return centers, assignments, cluster_cost(values, centers, assignments)


def kmeans_compress(
    weights, k: int, center_bits: int = 32, seed: int = 0, n_init: int | None = None
) -> tuple[Codebook, np.ndarray]:
    """Cluster weight values into at most ``k`` centers stored at ``center_bits``.

    Returns the codebook and, per weight (flattened order), its center index.
    ``codebook.decode(assignments)`` is the compressed weight vector.
    """
    if center_bits < 1:
        raise InvalidResolutionError("center_bits must be >= 1")
    values = np.asarray(weights, dtype=np.float64).ravel()
    _check_finite(values)
    centers, assignments, _ = kmeans_1d(values, k, seed=seed, n_init=n_init)
    rounded = round_to_precision(centers, center_bits)
    rounded = np.atleast_1d(rounded)
    merged, remap = np.unique(rounded, return_inverse=True)
    return Codebook(merged, center_bits), remap[assignments]
