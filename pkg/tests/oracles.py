"""Independent reference computations used only by the test suite.

Nothing here imports the code under test's internals; each oracle takes a
different route (brute force, enumeration, dynamic programming, finite
differences) to the same quantity.
"""

from fractions import Fraction
import itertools
import math

import numpy as np


def enumerate_grid(bits):
    """All n*eps in [-1, 1] with eps = 1/(2**(bits-1) - 1), in exact rationals."""
    eps = Fraction(1, 2 ** (bits - 1) - 1)
    pts = []
    n = 0
    while n * eps <= 1:
        pts.append(n * eps)
        if n:
            pts.append(-n * eps)
        n += 1
    return sorted(pts)


def rr_reference(a, eps, u):
    """Direct transcription of the randomized rounding pseudocode, in rationals."""
    a, eps = Fraction(a), Fraction(eps)
    s = (a > 0) - (a < 0)
    q = abs(a) / eps
    p = q - math.floor(q)
    if p > Fraction(u):
        return s * eps * math.ceil(q)
    return s * eps * math.floor(q)


def kmeans_dp(values, k):
    """Exact optimal 1-D k-means cost by dynamic programming over sorted values.

    Uses prefix sums for O(1) segment costs; O(k n^2) overall.
    """
    xs = np.sort(np.asarray(values, dtype=np.float64))
    n = len(xs)
    s1 = np.concatenate([[0.0], np.cumsum(xs)])
    s2 = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def seg(i, j):  # cost of xs[i:j]
        m = j - i
        tot = s1[j] - s1[i]
        return max(0.0, (s2[j] - s2[i]) - tot * tot / m)

    inf = float("inf")
    prev = [inf] * (n + 1)
    prev[0] = 0.0
    best = inf
    for _ in range(k):
        cur = [inf] * (n + 1)
        for j in range(1, n + 1):
            cur[j] = min(prev[i] + seg(i, j) for i in range(j))
        prev = cur
        best = min(best, cur[n])
    return best


def naive_matmul(a, b):
    rows, inner = len(a), len(a[0])
    cols = len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for t in range(inner):
                acc += a[i][t] * b[t][j]
            out[i][j] = acc
    return out


def central_difference(f, params, h=1e-5):
    """Finite-difference gradient of scalar ``f()`` w.r.t. each array in ``params``.

    ``params`` maps names to arrays that ``f`` reads; entries are perturbed
    in place and restored.
    """
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + h
            up = f()
            arr[idx] = old - h
            down = f()
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def max_relative_error(a, b, floor=1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))


def nade_logprob_loop(W, V, b_hid, b_vis, ordering, x):
    """Scalar-loop NADE log-likelihood: a second, unvectorized implementation."""
    D = len(x)
    H = len(b_hid)
    a = [float(c) for c in b_hid]
    total = 0.0
    for d in ordering:
        h = [1.0 / (1.0 + math.exp(-a[j])) for j in range(H)]
        z = float(b_vis[d]) + sum(V[d][j] * h[j] for j in range(H))
        p1 = 1.0 / (1.0 + math.exp(-z))
        total += math.log(p1) if x[d] else math.log(1.0 - p1)
        for j in range(H):
            a[j] += W[j][d] * x[d]
    return total


def all_binary(d):
    return np.array(list(itertools.product([0.0, 1.0], repeat=d)))


def rbm_exact_visible_distribution(W, b_vis, b_hid):
    """P(v) over all binary v by summing exp(-E(v,h)) over every (v, h)."""
    V = all_binary(W.shape[0])
    Hs = all_binary(W.shape[1])
    # energy E(v,h) = -b_vis.v - b_hid.h - v^T W h
    neg_e = (V @ b_vis)[:, None] + (Hs @ b_hid)[None, :] + V @ W @ Hs.T
    m = neg_e.max()
    un = np.exp(neg_e - m).sum(axis=1)
    return V, un / un.sum()
