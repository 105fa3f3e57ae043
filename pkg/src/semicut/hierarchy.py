"""Cluster trees, Dasgupta cost, HSM generating trees and recursive clustering.

Node ids: leaves are 0..n-1 and coincide with vertex labels; internal nodes
are n..2n-2.  A tree over a single vertex is just the leaf 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .balanced_cut import SolverConfig, estimate_alpha
from .graph_core import Graph
from .rng import child_seed, substream


class TreeError(ValueError):
    pass


@dataclass
class ClusterTree:
    """Rooted binary tree; ``children[v]`` is (-1, -1) for leaves.

    ``weight`` holds W(N) for internal nodes (NaN when unweighted) and is NaN
    on leaves.
    """

    n: int
    children: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise TreeError("a tree needs at least one leaf")
        ch = np.asarray(self.children, np.int64).reshape(-1, 2)
        if ch.shape[0] != 2 * n - 1:
            raise TreeError(f"expected {2 * n - 1} nodes for {n} leaves, got {ch.shape[0]}")
        if (ch[:n] != -1).any():
            raise TreeError("nodes 0..n-1 must be leaves")
        inner = ch[n:]
        if inner.size and ((inner < 0) | (inner >= 2 * n - 1)).any():
            raise TreeError("internal node with missing or out-of-range child")
        parent = np.full(2 * n - 1, -1, np.int64)
        for v in range(n, 2 * n - 1):
            for c in ch[v]:
                if parent[c] != -1:
                    raise TreeError(f"node {c} has two parents")
                parent[c] = v
        roots = np.flatnonzero(parent == -1)
        if roots.size != 1:
            raise TreeError(f"tree must have exactly one root, found {roots.size}")
        self.n = n
        self.children = ch
        self.parent = parent
        self.root = int(roots[0])
        w = np.full(2 * n - 1, np.nan) if self.weight is None else np.asarray(self.weight, float).copy()
        if w.shape != (2 * n - 1,):
            raise TreeError("weight array must have one entry per node")
        w[:n] = np.nan
        self.weight = w
        order = self._topdown()
        if order.size != 2 * n - 1:
            raise TreeError("tree contains a cycle")
        self._order = order

    def _topdown(self) -> np.ndarray:
        out = [self.root]
        k = 0
        while k < len(out):
            v = out[k]
            k += 1
            if v >= self.n:
                out.extend(int(c) for c in self.children[v])
            if len(out) > 2 * self.n - 1:
                break
        return np.asarray(out, np.int64)

    @property
    def n_nodes(self) -> int:
        return 2 * self.n - 1

    @property
    def weighted(self) -> bool:
        return self.n == 1 or bool(np.isfinite(self.weight[self.n:]).all())

    def is_leaf(self, v: int) -> bool:
        return v < self.n

    def children_of(self, v: int) -> tuple[int, int]:
        if v < self.n:
            raise TreeError(f"node {v} is a leaf")
        return int(self.children[v, 0]), int(self.children[v, 1])

    def internal_nodes(self) -> np.ndarray:
        return np.arange(self.n, 2 * self.n - 1)

    def leaf_counts(self) -> np.ndarray:
        cnt = np.zeros(self.n_nodes, np.int64)
        cnt[: self.n] = 1
        for v in self._order[::-1]:
            if v >= self.n:
                cnt[v] = cnt[self.children[v, 0]] + cnt[self.children[v, 1]]
        return cnt

    def depths(self) -> np.ndarray:
        dep = np.zeros(self.n_nodes, np.int64)
        for v in self._order[1:]:
            dep[v] = dep[self.parent[v]] + 1
        return dep

    def leaf_sets(self) -> dict[int, np.ndarray]:
        """Leaves under every node (sorted arrays)."""
        out: dict[int, np.ndarray] = {v: np.array([v], np.int64) for v in range(self.n)}
        for v in self._order[::-1]:
            if v >= self.n:
                a, b = self.children[v]
                out[int(v)] = np.sort(np.concatenate([out[int(a)], out[int(b)]]))
        return out

    def check_weights(self) -> None:
        """Weights in [0, 1], non-increasing from the leaves toward the root."""
        if self.n == 1:
            return
        w = self.weight[self.n:]
        if not np.isfinite(w).all():
            raise TreeError("generating tree needs a weight on every internal node")
        if (w < 0).any() or (w > 1).any():
            raise TreeError("internal weights must lie in [0, 1]")
        for v in range(self.n, self.n_nodes):
            p = self.parent[v]
            if p >= 0 and self.weight[p] > self.weight[v]:
                raise TreeError(f"weight of node {p} exceeds that of its child {v}")

    @classmethod
    def from_nested(cls, nested, weights=None) -> "ClusterTree":
        """Build from nested pairs of vertex ids, e.g. ((0, 1), 2).

        ``weights`` optionally maps each pair (as written) to W; pairs are
        looked up by identity of their position in a pre-order walk, so it is
        given as a list in pre-order.
        """
        leaves: list[int] = []

        def collect(x):
            if isinstance(x, (tuple, list)):
                if len(x) != 2:
                    raise TreeError("every internal node needs exactly two children")
                collect(x[0])
                collect(x[1])
            else:
                leaves.append(int(x))

        collect(nested)
        n = len(leaves)
        if sorted(leaves) != list(range(n)):
            raise TreeError("leaves must be the vertices 0..n-1, each once")
        b = _Builder(n)
        wl = None if weights is None else list(weights)
        counter = [0]

        def build(x):
            if not isinstance(x, (tuple, list)):
                return int(x)
            k = counter[0]
            counter[0] += 1
            left, right = build(x[0]), build(x[1])
            return b.join(left, right, np.nan if wl is None else wl[k])

        build(nested)
        return b.finish()


class _Builder:
    """Accumulates internal nodes bottom-up."""

    def __init__(self, n: int):
        self.n = n
        self.children = np.full((max(2 * n - 1, 1), 2), -1, np.int64)
        self.weight = np.full(max(2 * n - 1, 1), np.nan)
        self.next = n

    def join(self, left: int, right: int, w: float = np.nan) -> int:
        v = self.next
        self.children[v] = (left, right)
        self.weight[v] = w
        self.next += 1
        return v

    def finish(self) -> ClusterTree:
        if self.next != 2 * self.n - 1:
            raise TreeError("builder did not join all leaves")
        return ClusterTree(self.n, self.children, self.weight)


def _balanced_join(b: _Builder, items, weight_at=None, depth: int = 0) -> int:
    """Balanced binary tree over ``items`` (left half gets the extra element)."""
    items = list(items)
    if len(items) == 1:
        return int(items[0])
    h = (len(items) + 1) // 2
    left = _balanced_join(b, items[:h], weight_at, depth + 1)
    right = _balanced_join(b, items[h:], weight_at, depth + 1)
    return b.join(left, right, np.nan if weight_at is None else weight_at(depth))


def balanced_tree(n: int) -> ClusterTree:
    """Left-heavy balanced binary tree with leaves in id order."""
    b = _Builder(n)
    _balanced_join(b, range(n))
    return b.finish()


def hsm_tree(n: int, level_weights, leaf_weight: float, seed: int | None = None) -> ClusterTree:
    """Balanced generating tree with W = level_weights[depth] near the root.

    Internal nodes deeper than the listed levels get ``leaf_weight``.  With a
    ``seed`` the leaf labels are a uniformly random permutation of 0..n-1.
    """
    lw = [float(x) for x in level_weights]

    def weight_at(depth):
        return lw[depth] if depth < len(lw) else float(leaf_weight)

    order = np.arange(n)
    if seed is not None:
        order = substream(seed, "hsm-labels").permutation(n)
    b = _Builder(n)
    _balanced_join(b, order, weight_at)
    t = b.finish()
    t.check_weights()
    return t


# ------------------------------------------------------------------ costs


def _lift_table(t: ClusterTree):
    dep = t.depths()
    levels = max(1, int(dep.max()).bit_length())
    up = np.empty((levels, t.n_nodes), np.int64)
    par = t.parent.copy()
    par[t.root] = t.root
    up[0] = par
    for k in range(1, levels):
        up[k] = up[k - 1][up[k - 1]]
    return dep, up


def lca(t: ClusterTree, u, v) -> np.ndarray:
    """Vectorised lowest common ancestor by binary lifting."""
    u = np.atleast_1d(np.asarray(u, np.int64)).copy()
    v = np.atleast_1d(np.asarray(v, np.int64)).copy()
    dep, up = _lift_table(t)
    swap = dep[u] < dep[v]
    u[swap], v[swap] = v[swap], u[swap].copy()
    diff = dep[u] - dep[v]
    for k in range(up.shape[0]):
        sel = (diff >> k) & 1 == 1
        u[sel] = up[k][u[sel]]
    for k in range(up.shape[0] - 1, -1, -1):
        a, b = up[k][u], up[k][v]
        sel = a != b
        u[sel], v[sel] = a[sel], b[sel]
    return np.where(u == v, u, t.parent[u])


def lca_leafcount(t: ClusterTree, u: int, v: int) -> int:
    """Leaves under LCA(u, v); 1 when u == v."""
    if not (0 <= u < t.n and 0 <= v < t.n):
        raise TreeError("lca_leafcount takes two leaves")
    return int(t.leaf_counts()[lca(t, u, v)[0]])


def dasgupta_cost(t: ClusterTree, g: Graph, weights=None) -> float:
    """Sum over edges of leaves(LCA(x, y)) * w(x, y)."""
    if t.n != g.n:
        raise TreeError(f"tree has {t.n} leaves, graph has {g.n} vertices")
    if g.m == 0:
        return 0.0
    w = np.ones(g.m) if weights is None else np.asarray(weights, float)
    if w.shape != (g.m,):
        raise ValueError("one weight per edge required")
    cnt = t.leaf_counts()
    anc = lca(t, g.edges[:, 0], g.edges[:, 1])
    return float(cnt[anc].astype(float) @ w)


def expected_cost(t: ClusterTree) -> float:
    """cost(T; G-bar) for the expected graph of a weighted generating tree.

    Each internal node N joins |L||R| pairs of weight W(N) whose LCA has
    |L|+|R| leaves.
    """
    t.check_weights()
    cnt = t.leaf_counts()
    total = 0.0
    for v in t.internal_nodes():
        a, b = t.children[v]
        total += float(cnt[a] * cnt[b] * cnt[v]) * t.weight[v]
    return total


def expected_graph(t: ClusterTree) -> tuple[Graph, np.ndarray]:
    """Complete graph with edge weights W(LCA); for small n only."""
    iu = np.triu_indices(t.n, 1)
    g = Graph(t.n, np.stack(iu, axis=1))
    w = t.weight[lca(t, g.edges[:, 0], g.edges[:, 1])]
    return g, w


# ------------------------------------------------------------ clustering


@dataclass
class ClusterReport:
    tree: ClusterTree
    cost: float
    levels: list = field(default_factory=list)


def default_size_floor(n: int) -> int:
    return max(8, math.ceil(n ** (2 / 3)))


def recursive_cluster(g: Graph, size_floor: int | None = None, config: SolverConfig | None = None,
                      seed: int = 0, b: float = 1 / 3, D: float | None = None) -> ClusterReport:
    """Top-down clustering by repeated b-balanced cuts.

    Each cut is solved at scale kappa = 1/sqrt(D), D = ceil(ln n) by default.
    Sets of at most ``size_floor`` vertices get a balanced tree in id order.
    A node whose cut comes back one-sided or raises is split arbitrarily (its
    vertices halved in id order) and the event is recorded in the ledger.
    """
    n = g.n
    floor = default_size_floor(n) if size_floor is None else int(size_floor)
    if floor < 2:
        raise ValueError("size_floor must be at least 2")
    cfg = SolverConfig() if config is None else config
    D = max(1, math.ceil(math.log(max(n, 2)))) if D is None else float(D)
    if not D > 0:
        raise ValueError("D must be positive")
    kappa = 1 / math.sqrt(D)
    bld = _Builder(n)
    levels: list[dict] = []

    def split(verts: np.ndarray, depth: int, path: tuple) -> int:
        if verts.size <= floor:
            return _balanced_join(bld, verts)
        sub, _ = g.induced_subgraph(verts)
        entry = {"depth": depth, "size": int(verts.size), "m": int(sub.m)}
        left = right = None
        try:
            alpha, res = estimate_alpha(sub, b, seed=child_seed(seed, "cluster", *path), config=cfg,
                                        kappa=kappa)
            side = res.partition.side
            left, right = verts[side == 0], verts[side == 1]
            entry.update(alpha=float(alpha), cut=int(res.value), balance=float(res.balance),
                         exit=res.provenance["exit"])
            if left.size == 0 or right.size == 0:
                raise ValueError("one-sided cut")
            entry["degraded"] = False
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            h = (verts.size + 1) // 2
            left, right = verts[:h], verts[h:]
            entry.update(degraded=True, reason=str(exc))
        levels.append(entry)
        lt = split(left, depth + 1, path + (0,))
        rt = split(right, depth + 1, path + (1,))
        return bld.join(lt, rt)

    split(np.arange(n, dtype=np.int64), 0, ())
    tree = bld.finish()
    levels.sort(key=lambda e: (e["depth"], -e["size"]))
    return ClusterReport(tree, dasgupta_cost(tree, g), levels)


# --------------------------------------------------------------------- I/O


def write_tree(t: ClusterTree, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{t.n_nodes}\n")
        for v in range(t.n_nodes):
            w = t.weight[v]
            tail = f" {float(w)!r}" if np.isfinite(w) else ""
            fh.write(f"{v} {int(t.parent[v])}{tail}\n")


def read_tree(path) -> ClusterTree:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 1:
        raise TreeError(f"{path}: first line must be the node count")
    nn = int(lines[0][0])
    if nn < 1 or nn % 2 == 0:
        raise TreeError(f"{path}: a binary tree has an odd node count, got {nn}")
    if len(lines) - 1 != nn:
        raise TreeError(f"{path}: expected {nn} node lines, found {len(lines) - 1}")
    n = (nn + 1) // 2
    parent = np.full(nn, -2, np.int64)
    weight = np.full(nn, np.nan)
    for row in lines[1:]:
        if len(row) not in (2, 3):
            raise TreeError(f"{path}: bad node line {' '.join(row)!r}")
        v, p = int(row[0]), int(row[1])
        if not 0 <= v < nn or parent[v] != -2:
            raise TreeError(f"{path}: node id {v} out of range or repeated")
        parent[v] = p
        if len(row) == 3:
            weight[v] = float(row[2])
    children = np.full((nn, 2), -1, np.int64)
    fill = np.zeros(nn, np.int64)
    for v in range(nn):
        p = parent[v]
        if p == -1:
            continue
        if not n <= p < nn or fill[p] >= 2:
            raise TreeError(f"{path}: node {v} has invalid parent {p}")
        children[p, fill[p]] = v
        fill[p] += 1
    if (fill[n:] != 2).any():
        raise TreeError(f"{path}: every internal node needs two children")
    return ClusterTree(n, children, weight)
