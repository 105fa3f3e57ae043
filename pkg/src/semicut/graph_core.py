"""Sparse graphs, Laplacian-family operators, cuts and d-regular max-flow."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from . import _flowkern

# Fractional capacities are multiplied by this factor and rounded down so the
# blocking-flow core runs on integers.
CAPACITY_SCALE = 1 << 16


class Graph:
    """Unweighted undirected simple graph.

    Edges are stored as an (m, 2) int64 array in canonical ``(min, max)`` order,
    sorted lexicographically, so iteration order never depends on how the graph
    was built.
    """

    def __init__(self, n: int, edges=None, *, simplify: bool = False):
        n = int(n)
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        if edges is None:
            e = np.zeros((0, 2), np.int64)
        else:
            e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError(f"edge endpoint out of range [0, {n})")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        loops = lo == hi
        if loops.any():
            if not simplify:
                bad = int(lo[loops][0])
                raise ValueError(f"self-loop at vertex {bad}")
            lo, hi = lo[~loops], hi[~loops]
        keys = lo * n + hi
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1:
            dup = keys[1:] == keys[:-1]
            if dup.any():
                if not simplify:
                    k = int(keys[1:][dup][0])
                    raise ValueError(f"parallel edge {{{k // n}, {k % n}}}")
                keep = np.concatenate(([True], ~dup))
                order = order[keep]
                keys = keys[keep]
        self.n = n
        self.edges = np.stack([lo[order], hi[order]], axis=1) if keys.size else np.zeros((0, 2), np.int64)
        self.edges.setflags(write=False)
        self._keys = keys
        self._keys.setflags(write=False)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None

    @cached_property
    def _csr(self):
        """(indptr, neighbors, edge ids) of the symmetric adjacency."""
        n, e = self.n, self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst[order], eid[order]

    @property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        indptr, nbr, _ = self._csr
        return indptr, nbr

    def neighbors(self, i: int) -> np.ndarray:
        indptr, nbr, _ = self._csr
        return nbr[indptr[i]:indptr[i + 1]]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def edge_ids(self, u, v) -> np.ndarray:
        """Index of each edge {u, v} in ``edges``, or -1 where absent."""
        u = np.atleast_1d(np.asarray(u, np.int64))
        v = np.atleast_1d(np.asarray(v, np.int64))
        keys = np.minimum(u, v) * self.n + np.maximum(u, v)
        if self.m == 0:
            return np.full(keys.shape, -1, np.int64)
        pos = np.minimum(np.searchsorted(self._keys, keys), self.m - 1)
        return np.where(self._keys[pos] == keys, pos, -1)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.edge_ids(u, v)[0] >= 0)

    def edge_subgraph(self, keep) -> "Graph":
        """Same vertex set, edges restricted to a boolean mask or id list."""
        keep = np.asarray(keep)
        sel = self.edges[keep] if keep.dtype == bool else self.edges[keep.astype(np.int64)]
        return Graph(self.n, sel)

    def induced_subgraph(self, vertices) -> tuple["Graph", np.ndarray]:
        """Subgraph on ``vertices`` relabelled 0..k-1, plus the label map."""
        verts = np.unique(np.asarray(vertices, np.int64))
        local = np.full(self.n, -1, np.int64)
        local[verts] = np.arange(verts.size)
        e = self.edges
        both = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)
        return Graph(verts.size, local[e[both]]), verts

    def laplacian(self) -> sp.csr_matrix:
        e = self.edges
        w = np.ones(self.m)
        a = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                                    np.concatenate([e[:, 1], e[:, 0]]))),
                          shape=(self.n, self.n)).tocsr()
        return (sp.diags(np.asarray(a.sum(axis=1)).ravel()) - a).tocsr()


@dataclass
class Partition:
    """Per-vertex side labels.

    Bipartitions use labels {0, 1}; tripartitions use 0 = P1, 1 = P2, 2 = V'.
    """

    side: np.ndarray
    parts: int = 2

    def __post_init__(self):
        self.side = np.asarray(self.side, dtype=np.int8).copy()
        if self.side.ndim != 1:
            raise ValueError("partition labels must be a flat array")
        if self.side.size and (self.side.min() < 0 or self.side.max() >= self.parts):
            raise ValueError(f"labels must lie in [0, {self.parts})")

    @classmethod
    def from_sets(cls, n: int, *sets) -> "Partition":
        """Partition from explicit vertex sets.

        A single set gives the bipartition (set, rest).  Two or more sets must
        cover every vertex exactly once and are labelled in order.
        """
        if not sets:
            raise ValueError("need at least one set")
        side = np.full(n, -1 if len(sets) > 1 else 1, np.int64)
        for k, s in enumerate(sets):
            s = np.asarray(s, np.int64).ravel()
            if len(sets) > 1 and (side[s] >= 0).any():
                raise ValueError("sets overlap")
            side[s] = k
        if (side < 0).any():
            raise ValueError("sets do not cover all vertices")
        return cls(side, max(2, len(sets)))

    @property
    def n(self) -> int:
        return int(self.side.size)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.side, minlength=self.parts)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.side == label)

    def balance(self) -> float:
        """Smallest side as a fraction of n."""
        return float(self.counts.min() / self.n) if self.n else 0.0

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and self.parts == other.parts and np.array_equal(self.side, other.side)

    __hash__ = None


def cut_value(g: Graph, p: Partition) -> int:
    """Number of edges whose endpoints carry different labels."""
    if p.n != g.n:
        raise ValueError(f"partition covers {p.n} vertices, graph has {g.n}")
    e = g.edges
    return int(np.count_nonzero(p.side[e[:, 0]] != p.side[e[:, 1]]))


def cut_edges(g: Graph, p: Partition) -> np.ndarray:
    """Ids of the crossing edges."""
    e = g.edges
    return np.flatnonzero(p.side[e[:, 0]] != p.side[e[:, 1]])


# ---------------------------------------------------------------- Laplacian terms

EDGE = "edge"
COMPLETE = "complete"
TRIPLE = "triple"
DIAGONAL = "diagonal"
IDENTITY = "identity"


@dataclass(frozen=True)
class LapTerm:
    """One weighted Laplacian-family term.

    ``edge`` is L_ij, ``complete`` is K_S (stored as the vertex set only),
    ``triple`` is T = L_ij + L_jk - L_ik, ``diagonal`` is diag(vector) and
    ``identity`` is scale * Id.
    """

    kind: str
    weight: float = 1.0
    i: int = -1
    j: int = -1
    k: int = -1
    vertices: np.ndarray | None = field(default=None, compare=False)
    vector: np.ndarray | None = field(default=None, compare=False)
    scale: float = 1.0

    @staticmethod
    def edge(i: int, j: int, weight: float = 1.0) -> "LapTerm":
        if i == j:
            raise ValueError("edge term needs distinct endpoints")
        return LapTerm(EDGE, float(weight), int(i), int(j))

    @staticmethod
    def complete(vertices, weight: float = 1.0) -> "LapTerm":
        s = np.unique(np.asarray(vertices, np.int64))
        return LapTerm(COMPLETE, float(weight), vertices=s)

    @staticmethod
    def triple(i: int, j: int, k: int, weight: float = 1.0) -> "LapTerm":
        if len({int(i), int(j), int(k)}) != 3:
            raise ValueError("path triple needs three distinct vertices")
        return LapTerm(TRIPLE, float(weight), int(i), int(j), int(k))

    @staticmethod
    def diagonal(vector, weight: float = 1.0) -> "LapTerm":
        return LapTerm(DIAGONAL, float(weight), vector=np.asarray(vector, float))

    @staticmethod
    def identity(scale: float = 1.0, weight: float = 1.0) -> "LapTerm":
        return LapTerm(IDENTITY, float(weight), scale=float(scale))


def lapterm_matvec(t: LapTerm, x: np.ndarray) -> np.ndarray:
    """Apply one term to a vector (or to each column of an n x k block)."""
    x = np.asarray(x, float)
    y = np.zeros_like(x)
    w = t.weight
    if t.kind == EDGE:
        diff = x[t.i] - x[t.j]
        y[t.i] += w * diff
        y[t.j] -= w * diff
    elif t.kind == TRIPLE:
        for a, b, s in ((t.i, t.j, 1.0), (t.j, t.k, 1.0), (t.i, t.k, -1.0)):
            diff = x[a] - x[b]
            y[a] += s * w * diff
            y[b] -= s * w * diff
    elif t.kind == COMPLETE:
        s = t.vertices
        xs = x[s]
        y[s] = w * (s.size * xs - xs.sum(axis=0))
    elif t.kind == DIAGONAL:
        if t.vector.shape[0] != x.shape[0]:
            raise ValueError("diagonal length mismatch")
        y = w * (t.vector.reshape((-1,) + (1,) * (x.ndim - 1)) * x)
    elif t.kind == IDENTITY:
        y = w * t.scale * x
    else:
        raise ValueError(f"unknown term kind {t.kind!r}")
    return y


def quadform(t: LapTerm, W) -> float:
    """<t, W^T W> for an embedding W, applying t to each coordinate row."""
    pts = W.points
    if t.kind == EDGE:
        diff = pts[t.i] - pts[t.j]
        return float(t.weight * diff @ diff)
    return float(np.sum(pts * lapterm_matvec(t, pts)))


class LapOperator:
    """Weighted sum of Laplacian-family terms in batched form.

    Edge, triple and diagonal terms are folded into one sparse matrix;
    complete-graph terms stay implicit as (vertex set, weight) pairs and the
    identity part is a scalar.  Matvec cost is O(nnz + sum |S| + n) per column.
    """

    def __init__(self, n: int, sparse=None, complete=(), ident: float = 0.0):
        self.n = int(n)
        self.sparse = None if sparse is None else sp.csr_matrix(sparse)
        self.complete = [(np.asarray(s, np.int64), float(w)) for s, w in complete]
        self.ident = float(ident)

    @classmethod
    def build(cls, n, pairs=None, pair_w=None, triples=None, triple_w=None,
              diag=None, complete=(), ident=0.0) -> "LapOperator":
        rows, cols, vals = [], [], []

        def add_lap(i, j, w):
            rows.extend([i, j, i, j])
            cols.extend([i, j, j, i])
            vals.extend([w, w, -w, -w])

        if pairs is not None and len(pairs):
            pr = np.asarray(pairs, np.int64).reshape(-1, 2)
            w = np.broadcast_to(np.asarray(1.0 if pair_w is None else pair_w, float), (pr.shape[0],))
            add_lap(pr[:, 0], pr[:, 1], w)
        if triples is not None and len(triples):
            tr = np.asarray(triples, np.int64).reshape(-1, 3)
            w = np.broadcast_to(np.asarray(1.0 if triple_w is None else triple_w, float), (tr.shape[0],))
            add_lap(tr[:, 0], tr[:, 1], w)
            add_lap(tr[:, 1], tr[:, 2], w)
            add_lap(tr[:, 0], tr[:, 2], -w)
        if diag is not None:
            d = np.asarray(diag, float)
            nz = np.flatnonzero(d)
            rows.append(nz)
            cols.append(nz)
            vals.append(d[nz])
        sparse = None
        if rows:
            r = np.concatenate([np.atleast_1d(np.asarray(x)) for x in rows]).astype(np.int64)
            c = np.concatenate([np.atleast_1d(np.asarray(x)) for x in cols]).astype(np.int64)
            v = np.concatenate([np.atleast_1d(np.asarray(x, float)) for x in vals])
            sparse = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
            sparse.sum_duplicates()
            sparse.eliminate_zeros()
        return cls(n, sparse, complete, ident)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[LapTerm]) -> "LapOperator":
        pairs, pw, triples, tw, comp = [], [], [], [], []
        diag = np.zeros(n)
        ident = 0.0
        for t in terms:
            if t.kind == EDGE:
                pairs.append((t.i, t.j))
                pw.append(t.weight)
            elif t.kind == TRIPLE:
                triples.append((t.i, t.j, t.k))
                tw.append(t.weight)
            elif t.kind == COMPLETE:
                comp.append((t.vertices, t.weight))
            elif t.kind == DIAGONAL:
                diag += t.weight * t.vector
            elif t.kind == IDENTITY:
                ident += t.weight * t.scale
        return cls.build(n, pairs or None, pw or None, triples or None, tw or None,
                         diag if diag.any() else None, comp, ident)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        y = self.ident * x if self.ident else np.zeros_like(x)
        if self.sparse is not None:
            y = y + self.sparse @ x
        for s, w in self.complete:
            xs = x[s]
            y[s] += w * (s.size * xs - xs.sum(axis=0))
        return y

    __matmul__ = matvec

    def __add__(self, other: "LapOperator") -> "LapOperator":
        if other.n != self.n:
            raise ValueError("operator size mismatch")
        if self.sparse is None:
            s = other.sparse
        elif other.sparse is None:
            s = self.sparse
        else:
            s = self.sparse + other.sparse
        return LapOperator(self.n, s, self.complete + other.complete, self.ident + other.ident)

    def scaled(self, c: float) -> "LapOperator":
        return LapOperator(self.n, None if self.sparse is None else self.sparse * c,
                           [(s, w * c) for s, w in self.complete], self.ident * c)

    def shifted(self, c: float) -> "LapOperator":
        return LapOperator(self.n, self.sparse, self.complete, self.ident + c)

    @property
    def nnz(self) -> int:
        return (0 if self.sparse is None else int(self.sparse.nnz)) + sum(s.size for s, _ in self.complete)

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm (Gershgorin plus triangle inequality)."""
        b = abs(self.ident)
        if self.sparse is not None and self.sparse.nnz:
            b += float(np.abs(self.sparse).sum(axis=1).max())
        b += sum(abs(w) * s.size for s, w in self.complete)
        return b

    def gershgorin_interval(self) -> tuple[float, float]:
        """Interval [lo, hi] containing every eigenvalue."""
        diag = np.full(self.n, float(self.ident))
        radius = np.zeros(self.n)
        if self.sparse is not None and self.sparse.nnz:
            dg = self.sparse.diagonal()
            diag += dg
            radius += np.asarray(np.abs(self.sparse).sum(axis=1)).ravel() - np.abs(dg)
        for s, w in self.complete:
            diag[s] += w * (s.size - 1)
            radius[s] += abs(w) * (s.size - 1)
        return float((diag - radius).min()), float((diag + radius).max())

    def quad(self, points: np.ndarray) -> float:
        """<M, W^T W> where ``points`` is the n x d matrix of vectors."""
        return float(np.sum(points * self.matvec(points)))

    def to_dense(self) -> np.ndarray:
        out = self.ident * np.eye(self.n)
        if self.sparse is not None:
            out += self.sparse.toarray()
        for s, w in self.complete:
            ix = np.ix_(s, s)
            out[ix] -= w
            out[s, s] += w * s.size
        return out


# ---------------------------------------------------------------- max flow


@dataclass
class FlowResult:
    """A maximum d-regular flow with its source-side minimum cut.

    ``edge_flows[e]`` is the net flow along edge e in the direction
    ``edges[e, 0] -> edges[e, 1]``.  ``injection[i]`` is the flow entering i from
    the source (positive) or leaving i to the sink (negative).
    """

    value: float
    edge_flows: np.ndarray
    injection: np.ndarray
    mincut: Partition
    sink_cut: Partition
    d: float
    scale: int
    graph: Graph = field(repr=False)
    sources: np.ndarray = field(repr=False)
    sinks: np.ndarray = field(repr=False)
    _edge_int: np.ndarray = field(repr=False)
    _inj_int: np.ndarray = field(repr=False)
    _value_int: int = field(repr=False)

    def cut_capacity(self, p: Partition) -> float:
        """Capacity of the s-t cut whose source side is ``p.side == 0``."""
        src_side = p.side == 0
        term = np.count_nonzero(~src_side[self.sources]) + np.count_nonzero(src_side[self.sinks])
        dcap = max(1, int(np.floor(self.d * self.scale)))
        return (term * dcap + cut_value(self.graph, p) * self.scale) / self.scale


def _as_vertex_array(vs, n: int) -> np.ndarray:
    a = np.unique(np.asarray(list(vs) if not isinstance(vs, np.ndarray) else vs, np.int64))
    if a.size and (a.min() < 0 or a.max() >= n):
        raise ValueError("terminal vertex out of range")
    return a


def _csr_arcs(n_nodes: int, tail: np.ndarray, head: np.ndarray):
    order = np.argsort(tail, kind="stable")
    start = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(np.bincount(tail, minlength=n_nodes), out=start[1:])
    return order, start


def max_flow_dregular(g: Graph, sources, sinks, d: float) -> FlowResult:
    """Max flow with unit edge capacities and capacity-d terminal attachments."""
    n = g.n
    src = _as_vertex_array(sources, n)
    snk = _as_vertex_array(sinks, n)
    if src.size == 0 or snk.size == 0:
        raise ValueError("sources and sinks must be non-empty")
    if np.intersect1d(src, snk).size:
        raise ValueError("sources and sinks overlap")
    if not d > 0:
        raise ValueError("terminal capacity d must be positive")
    scale = CAPACITY_SCALE
    dcap = max(1, int(np.floor(d * scale)))
    if dcap < 1:
        raise ValueError("terminal capacity below integer resolution")
    s, t = n, n + 1
    m = g.m
    e = g.edges
    k_s, k_t = src.size, snk.size
    # arcs in pairs (2q, 2q+1) reverse to each other before sorting
    tail = np.empty(2 * (m + k_s + k_t), np.int64)
    head = np.empty_like(tail)
    cap = np.empty_like(tail)
    tail[0:2 * m:2], head[0:2 * m:2] = e[:, 0], e[:, 1]
    tail[1:2 * m:2], head[1:2 * m:2] = e[:, 1], e[:, 0]
    cap[:2 * m] = scale
    o = 2 * m
    tail[o:o + 2 * k_s:2], head[o:o + 2 * k_s:2] = s, src
    tail[o + 1:o + 2 * k_s:2], head[o + 1:o + 2 * k_s:2] = src, s
    cap[o:o + 2 * k_s:2], cap[o + 1:o + 2 * k_s:2] = dcap, 0
    o += 2 * k_s
    tail[o:o + 2 * k_t:2], head[o:o + 2 * k_t:2] = snk, t
    tail[o + 1:o + 2 * k_t:2], head[o + 1:o + 2 * k_t:2] = t, snk
    cap[o:o + 2 * k_t:2], cap[o + 1:o + 2 * k_t:2] = dcap, 0
    n_nodes = n + 2
    order, start = _csr_arcs(n_nodes, tail, head)
    where = np.empty_like(order)
    where[order] = np.arange(order.size)
    rev_orig = np.arange(tail.size) ^ 1
    rev = where[rev_orig[order]]
    tail_s, head_s, cap_s = tail[order], head[order], cap[order].copy()
    value = int(_flowkern.dinic(start, head_s, tail_s, cap_s, rev, s, t))
    res = cap_s[where]  # residuals in original arc order
    edge_int = (res[1:2 * m:2] - res[0:2 * m:2]) // 2
    o = 2 * m
    inj = np.zeros(n, np.int64)
    inj[src] = dcap - res[o:o + 2 * k_s:2]
    o += 2 * k_s
    inj[snk] = -(dcap - res[o:o + 2 * k_t:2])
    reach = _flowkern.residual_reach(start, head_s, cap_s, rev, s, True)
    coreach = _flowkern.residual_reach(start, head_s, cap_s, rev, t, False)
    src_side = Partition(np.where(reach[:n], 0, 1).astype(np.int8))
    snk_side = Partition(np.where(coreach[:n], 1, 0).astype(np.int8))
    return FlowResult(
        value=value / scale,
        edge_flows=edge_int / scale,
        injection=inj / scale,
        mincut=src_side,
        sink_cut=snk_side,
        d=float(d),
        scale=scale,
        graph=g,
        sources=src,
        sinks=snk,
        _edge_int=edge_int,
        _inj_int=inj,
        _value_int=value,
    )


def _decompose_raw(f: FlowResult):
    g, n = f.graph, f.graph.n
    s, t = n, n + 1
    e = g.edges
    ef = f._edge_int
    pos = ef > 0
    neg = ef < 0
    tails = [e[pos, 0], e[neg, 1]]
    heads = [e[pos, 1], e[neg, 0]]
    amts = [ef[pos], -ef[neg]]
    inj = f._inj_int
    si = np.flatnonzero(inj > 0)
    ti = np.flatnonzero(inj < 0)
    tails += [np.full(si.size, s), ti]
    heads += [si, np.full(ti.size, t)]
    amts += [inj[si], -inj[ti]]
    tail = np.concatenate(tails).astype(np.int64)
    head = np.concatenate(heads).astype(np.int64)
    amount = np.concatenate(amts).astype(np.int64)
    order, start = _csr_arcs(n + 2, tail, head)
    nodes, ptr, pamt = _flowkern.decompose(start, head[order], amount[order].copy(), s, t)
    return nodes, ptr, pamt


def flow_path_decompose(f: FlowResult) -> list[tuple[np.ndarray, float]]:
    """Paths from source-attached to sink-attached vertices with their amounts."""
    nodes, ptr, pamt = _decompose_raw(f)
    return [(nodes[ptr[q]:ptr[q + 1]], pamt[q] / f.scale) for q in range(pamt.size)]


def flow_demands(f: FlowResult) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate path endpoints into demand pairs.

    Returns (pairs, amounts): ``pairs[q] = (i, j)`` with i attached to the
    source, j to the sink, and the total flow routed from i to j.
    """
    nodes, ptr, pamt = _decompose_raw(f)
    if pamt.size == 0:
        return np.zeros((0, 2), np.int64), np.zeros(0)
    first = nodes[ptr[:-1]]
    last = nodes[ptr[1:] - 1]
    n = f.graph.n
    keys, inv = np.unique(first * n + last, return_inverse=True)
    amt = np.bincount(inv, weights=pamt.astype(float)) / f.scale
    return np.stack([keys // n, keys % n], axis=1), amt


# ---------------------------------------------------------------- text formats


def _data_lines(path):
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def read_edge_list(path) -> Graph:
    """Read "n m" then m lines "u v"; '#' starts a comment."""
    with open(path) as fh:
        header = None
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                header = line.split()
                break
        if header is None:
            raise ValueError(f"{path}: empty edge-list file")
        if len(header) != 2:
            raise ValueError(f"{path}: header must be 'n m'")
        n, m = int(header[0]), int(header[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty body
            try:
                edges = np.loadtxt(fh, dtype=np.int64, comments="#", ndmin=2)
            except ValueError as exc:
                raise ValueError(f"{path}: edge lines must be two integers ({exc})") from None
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.shape[1] != 2:
        raise ValueError(f"{path}: edge lines must have two fields")
    if edges.shape[0] != m:
        raise ValueError(f"{path}: header declares {m} edges, found {edges.shape[0]}")
    return Graph(n, edges)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        if g.m:
            np.savetxt(fh, g.edges, fmt="%d")


def read_partition(path, n: int | None = None) -> Partition:
    labels = np.array([int(x) for x in _data_lines(path)], dtype=np.int64)
    if n is not None and labels.size != n:
        raise ValueError(f"{path}: {labels.size} labels for {n} vertices")
    parts = max(2, int(labels.max()) + 1) if labels.size else 2
    return Partition(labels, parts)


def write_partition(p: Partition, path) -> None:
    Path(path).write_text("".join(f"{int(x)}\n" for x in p.side))
