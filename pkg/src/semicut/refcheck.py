"""Brute-force and dense reference computations for tests.

Everything here is deliberately naive: plain enumeration, dense numpy
linear algebra and Monte Carlo loops, sharing no kernels with the solver.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MAX_CUT_N = 20
MAX_DENSE_N = 128
MAX_TREE_N = 7


def _edges(g):
    return [(int(u), int(v)) for u, v in np.asarray(g.edges).reshape(-1, 2)]


def exact_min_balanced_cut(g, a: float):
    """Minimum cut over bipartitions with both sides >= a*n; returns (side, value).

    ``side`` is an int8 array of 0/1 labels with vertex 0 on side 0.
    """
    n = g.n
    if n > MAX_CUT_N:
        raise ValueError(f"exact_min_balanced_cut is capped at n={MAX_CUT_N}")
    if n < 2:
        raise ValueError("need at least two vertices")
    lo = math.ceil(a * n - 1e-12)
    edges = _edges(g)
    best = None
    # vertex 0 is pinned to side 0 to skip mirrored labelings
    for mask in range(0, 1 << (n - 1)):
        side = [0] + [(mask >> i) & 1 for i in range(n - 1)]
        ones = sum(side)
        if min(ones, n - ones) < max(lo, 1):
            continue
        val = sum(1 for u, v in edges if side[u] != side[v])
        if best is None or val < best[1]:
            best = (side, val)
    if best is None:
        raise ValueError(f"no bipartition has both sides >= {a}*n")
    return np.asarray(best[0], np.int8), best[1]


def exhaustive_st_min_cut(n: int, edges, sources, sinks, d: float) -> float:
    """Min cut of the graph with a super source/sink attached at capacity d.

    Unit edge capacities in both directions; enumerates every subset of the
    ordinary vertices placed on the source side.
    """
    if n > MAX_CUT_N:
        raise ValueError(f"exhaustive_st_min_cut is capped at n={MAX_CUT_N}")
    src = set(int(s) for s in sources)
    snk = set(int(t) for t in sinks)
    best = math.inf
    for mask in range(1 << n):
        val = 0.0
        for u, v in edges:
            if ((mask >> u) & 1) != ((mask >> v) & 1):
                val += 1
        for s in src:
            if not (mask >> s) & 1:
                val += d
        for t in snk:
            if (mask >> t) & 1:
                val += d
        best = min(best, val)
    return best


def dense_expm(M) -> np.ndarray:
    """exp(M) for a small symmetric matrix via eigendecomposition."""
    M = np.asarray(M, float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix required")
    if M.shape[0] > MAX_DENSE_N:
        raise ValueError(f"dense_expm is capped at n={MAX_DENSE_N}")
    if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("dense_expm needs a symmetric matrix")
    lam, U = np.linalg.eigh((M + M.T) / 2)
    out = (U * np.exp(lam)) @ U.T
    return (out + out.T) / 2


def densify(terms, n: int) -> np.ndarray:
    """Dense sum of Laplacian-style terms, built entry by entry."""
    A = np.zeros((n, n))

    def lap(i, j, w):
        A[i, i] += w
        A[j, j] += w
        A[i, j] -= w
        A[j, i] -= w

    for t in terms:
        if t.kind == "edge":
            lap(t.i, t.j, t.weight)
        elif t.kind == "triple":
            lap(t.i, t.j, t.weight)
            lap(t.j, t.k, t.weight)
            lap(t.i, t.k, -t.weight)
        elif t.kind == "complete":
            for i, j in itertools.combinations(np.asarray(t.vertices).tolist(), 2):
                lap(i, j, t.weight)
        elif t.kind == "diagonal":
            A[np.diag_indices(n)] += t.weight * np.asarray(t.vector, float)
        elif t.kind == "identity":
            A[np.diag_indices(n)] += t.weight * t.scale
        else:
            raise ValueError(f"unknown term kind {t.kind!r}")
    return A


def dense_psd_check(terms, n: int | None = None) -> float:
    """Smallest eigenvalue of the densified term sum."""
    terms = list(terms)
    if n is None:
        n = 1 + max(_term_max_index(t) for t in terms)
    if n > MAX_DENSE_N:
        raise ValueError(f"dense_psd_check is capped at n={MAX_DENSE_N}")
    return float(np.linalg.eigvalsh(densify(terms, n))[0])


def _term_max_index(t) -> int:
    if t.kind in ("edge", "triple"):
        return max(t.i, t.j, t.k if t.kind == "triple" else t.j)
    if t.kind == "complete":
        return int(np.max(t.vertices))
    if t.kind == "diagonal":
        return len(t.vector) - 1
    return 0


def power_iteration_norm(matvec, n: int, iters: int = 500, seed: int = 0, tol: float = 1e-12) -> float:
    """Spectral norm of a symmetric operator by power iteration on M^2."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = matvec(matvec(x))
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        if abs(nrm - lam) <= tol * max(1.0, nrm):
            lam = nrm
            break
        lam = nrm
    return math.sqrt(lam)


def dense_mmw_iterates(Ys, epsilon: float) -> list[np.ndarray]:
    """Exact MMW densities X_t = exp(eps * sum_{s<t} Y_s) / tr(...), t = 1..T."""
    Ys = [np.asarray(Y, float) for Y in Ys]
    n = Ys[0].shape[0]
    acc = np.zeros((n, n))
    out = []
    for Y in Ys:
        E = dense_expm(epsilon * acc)
        out.append(E / np.trace(E))
        acc = acc + Y
    return out


# ------------------------------------------------------------------ trees


def _tree_shapes(items):
    """All rooted binary trees over the tuple ``items`` as nested pairs."""
    if len(items) == 1:
        yield items[0]
        return
    first, rest = items[0], items[1:]
    # the block containing ``first`` goes left; it is unordered otherwise
    for r in range(0, len(rest)):
        for combo in itertools.combinations(rest, r):
            left = (first,) + combo
            right = tuple(x for x in rest if x not in combo)
            for lt in _tree_shapes(left):
                for rt in _tree_shapes(right):
                    yield (lt, rt)


def _nested_cost(tree, edges) -> int:
    def leaves(t):
        return {t} if not isinstance(t, tuple) else leaves(t[0]) | leaves(t[1])

    total = 0
    stack = [tree]
    while stack:
        t = stack.pop()
        if not isinstance(t, tuple):
            continue
        L, R = leaves(t[0]), leaves(t[1])
        size = len(L) + len(R)
        total += size * sum(1 for u, v in edges if (u in L and v in R) or (u in R and v in L))
        stack.extend(t)
    return total


def enumerate_trees_min_cost(g):
    """Minimum Dasgupta cost over all binary trees on V(g); returns (nested tree, cost)."""
    n = g.n
    if n > MAX_TREE_N:
        raise ValueError(f"enumerate_trees_min_cost is capped at n={MAX_TREE_N}")
    if n < 1:
        raise ValueError("empty vertex set")
    edges = _edges(g)
    best = None
    for t in _tree_shapes(tuple(range(n))):
        c = _nested_cost(t, edges)
        if best is None or c < best[1]:
            best = (t, c)
    return best


def double_sum_cost(weights: np.ndarray, lca_size) -> float:
    """sum_{u<v} lca_size(u, v) * weights[u, v] for a dense weight matrix."""
    W = np.asarray(weights, float)
    n = W.shape[0]
    total = 0.0
    for u in range(n):
        for v in range(u + 1, n):
            if W[u, v]:
                total += lca_size(u, v) * W[u, v]
    return total


# ------------------------------------------------------------- Monte Carlo


def binomial_se(p_hat: float, trials: int) -> float:
    return math.sqrt(max(p_hat * (1 - p_hat), 0.0) / trials)


def mc_frequency(event, trials: int, seed: int = 0) -> tuple[float, float]:
    """Empirical frequency of ``event(rng)`` and its binomial standard error."""
    rng = np.random.default_rng(seed)
    hits = sum(bool(event(rng)) for _ in range(trials))
    p = hits / trials
    return p, binomial_se(p, trials)
