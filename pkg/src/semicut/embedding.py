"""Sketched vector embeddings of candidate SDP solutions.

An :class:`Embedding` holds v_1..v_n as the columns of a d x n matrix; the
candidate solution X = W^T W is never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graph_core import Graph
from .rng import substream

_EDGE_CHUNK = 1 << 15


def default_dim(n: int) -> int:
    """Sketch dimension ceil(40 ln n)."""
    return max(1, math.ceil(40 * math.log(max(n, 2))))


@dataclass
class Embedding:
    """Columns of ``vectors`` are the vertex vectors; ``trace_scale`` is r."""

    vectors: np.ndarray
    trace_scale: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.vectors, float)
        if v.ndim != 2:
            raise ValueError("embedding must be a d x n matrix")
        if not np.isfinite(v).all():
            raise ValueError("embedding has non-finite entries")
        self.vectors = v

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @cached_property
    def points(self) -> np.ndarray:
        """n x d row-major copy (one row per vertex)."""
        return np.ascontiguousarray(self.vectors.T)

    @cached_property
    def sqnorms(self) -> np.ndarray:
        p = self.points
        return np.einsum("ij,ij->i", p, p)

    @classmethod
    def from_points(cls, points, trace_scale: float = 1.0) -> "Embedding":
        return cls(np.asarray(points, float).T, trace_scale)

    def restrict(self, vertices) -> "Embedding":
        return Embedding(self.vectors[:, np.asarray(vertices, np.int64)], self.trace_scale)

    def gram(self) -> np.ndarray:
        """Dense X = W^T W (tests only)."""
        return self.vectors.T @ self.vectors


def planted_embedding(side, d: int = 1) -> Embedding:
    """The +-u witness: v_i = u on side 0 and -u on side 1, u = e_1."""
    side = np.asarray(side)
    v = np.zeros((d, side.size))
    v[0] = np.where(side == 0, 1.0, -1.0)
    return Embedding(v, float(side.size))


def sqdist(W: Embedding, i: int, j: int) -> float:
    diff = W.points[i] - W.points[j]
    return float(diff @ diff)


def pair_sqdists(W: Embedding, i, j) -> np.ndarray:
    """Vectorised ||v_i - v_j||^2 over index arrays, chunked to bound memory."""
    i = np.asarray(i, np.int64)
    j = np.asarray(j, np.int64)
    out = np.empty(i.shape[0])
    pts = W.points
    for lo in range(0, i.shape[0], _EDGE_CHUNK):
        hi = lo + _EDGE_CHUNK
        diff = pts[i[lo:hi]] - pts[j[lo:hi]]
        out[lo:hi] = np.einsum("ij,ij->i", diff, diff)
    return out


def edge_sqdists(g: Graph, W: Embedding) -> np.ndarray:
    if W.n != g.n:
        raise ValueError(f"embedding has {W.n} vectors, graph has {g.n} vertices")
    return pair_sqdists(W, g.edges[:, 0], g.edges[:, 1])


def objective(g: Graph, W: Embedding) -> float:
    """Sum over edges of ||v_i - v_j||^2."""
    return float(edge_sqdists(g, W).sum())


def spread(W: Embedding, S=None) -> float:
    """Ordered-pair sum of squared distances over S (all vertices by default)."""
    pts = W.points if S is None else W.points[np.asarray(S, np.int64)]
    k = pts.shape[0]
    if k == 0:
        raise ValueError("spread of an empty set")
    total = pts.sum(axis=0)
    return float(2 * k * np.einsum("ij,ij->", pts, pts) - 2 * total @ total)


def flat_set(W: Embedding, threshold: float = 2.0) -> np.ndarray:
    """Vertices whose squared norm exceeds ``threshold``."""
    return np.flatnonzero(W.sqnorms > threshold)


def triangle_violation(W: Embedding, i: int, j: int, k: int) -> float:
    """||v_i-v_j||^2 + ||v_j-v_k||^2 - ||v_i-v_k||^2; negative when violated."""
    if len({i, j, k}) != 3:
        raise ValueError("triangle check needs three distinct vertices")
    return sqdist(W, i, j) + sqdist(W, j, k) - sqdist(W, i, k)


class GaussianSketch:
    """d x k Gaussian matrix with N(0, 1/d) entries, built lazily by column block.

    Column block b is drawn from its own substream, so the first k columns do
    not depend on how many columns are requested later.
    """

    BLOCK = 1024

    def __init__(self, d: int, seed: int):
        if d < 1:
            raise ValueError("sketch dimension must be positive")
        self.d = int(d)
        self.seed = int(seed)
        self._blocks: dict[int, np.ndarray] = {}

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            g = substream(self.seed, "sketch-block", b)
            blk = g.standard_normal((self.d, self.BLOCK)) / math.sqrt(self.d)
            self._blocks[b] = blk
        return blk

    def matrix(self, k: int) -> np.ndarray:
        nb = -(-k // self.BLOCK)
        if nb == 0:
            return np.zeros((self.d, 0))
        return np.concatenate([self._block(b) for b in range(nb)], axis=1)[:, :k]


def sketch_apply(S: GaussianSketch, columns: np.ndarray) -> np.ndarray:
    """Phi @ columns for a d' x n input."""
    x = np.asarray(columns, float)
    if x.ndim == 1:
        x = x[:, None]
        return (S.matrix(x.shape[0]) @ x)[:, 0]
    return S.matrix(x.shape[0]) @ x


def read_embedding(path) -> Embedding:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: header must be 'd n trace_scale'")
        d, n, r = int(header[0]), int(header[1]), float(header[2])
        data = np.loadtxt(fh, ndmin=2) if n else np.zeros((0, d))
    if data.shape != (n, d):
        raise ValueError(f"{path}: expected {n} rows of {d} floats")
    return Embedding(data.T.copy(), r)


def write_embedding(W: Embedding, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{W.d} {W.n} {W.trace_scale!r}\n")
        np.savetxt(fh, W.points, fmt="%.17g")
