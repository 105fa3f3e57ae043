"""Semi-random balanced-cut instances and hierarchical stochastic model graphs.

The semi-random generator follows the monotone-adversary model: split the
vertices into A and B, draw each A-B pair independently with probability eta,
then let a scripted adversary add edges inside a side or delete cut edges.
Each phase draws from its own substream, so editing the adversary script
never changes the random cut.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph_core import Graph, Partition, cut_value, read_edge_list, write_edge_list
from .rng import substream

SIDES = {"A": 0, "B": 1}


class MonotonicityError(ValueError):
    """An adversary action would add a cut edge or delete an in-side edge."""


@dataclass
class AddWithin:
    side: str
    density: float | None = None
    edges: list | None = None
    kind: str = field(default="add_within", init=False)


@dataclass
class RemoveCut:
    fraction: float | None = None
    edges: list | None = None
    kind: str = field(default="remove_cut", init=False)


@dataclass
class AddClique:
    side: str
    vertices: list | None = None
    kind: str = field(default="add_clique", init=False)


@dataclass
class AddExpander:
    side: str
    degree: int = 3
    kind: str = field(default="add_expander", init=False)


_ACTIONS = {"add_within": AddWithin, "remove_cut": RemoveCut, "add_clique": AddClique,
            "add_expander": AddExpander}


@dataclass
class AdversaryScript:
    actions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = []
        for act in self.actions:
            d = {k: v for k, v in asdict(act).items() if v is not None}
            out.append(d)
        return {"actions": out}

    @classmethod
    def from_dict(cls, data: dict) -> "AdversaryScript":
        acts = []
        for raw in data.get("actions", []):
            raw = dict(raw)
            kind = raw.pop("kind", None)
            if kind not in _ACTIONS:
                raise ValueError(f"unknown adversary action {kind!r}")
            acts.append(_ACTIONS[kind](**raw))
        return cls(acts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AdversaryScript":
        return cls.from_dict(json.loads(text))


@dataclass
class SemiRandomSpec:
    """Parameters of one semi-random instance.

    ``split`` gives (|A|, |B|); by default |A| = ceil(a n).  With ``shuffle``
    the sides are a random subset of the labels, otherwise A = {0..|A|-1}.
    """

    n: int
    a: float
    eta: float
    split: tuple | None = None
    adversary: AdversaryScript = field(default_factory=AdversaryScript)
    seed: int = 0
    shuffle: bool = True

    def sizes(self) -> tuple[int, int]:
        if self.split is not None:
            return int(self.split[0]), int(self.split[1])
        na = math.ceil(self.a * self.n)
        return na, self.n - na

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("need at least two vertices")
        if not 0 < self.a < 0.5 + 1e-12:
            raise ValueError(f"balance a={self.a} must lie in (0, 1/2]")
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta={self.eta} must lie in [0, 1]")
        na, nb = self.sizes()
        if na + nb != self.n:
            raise ValueError(f"split {na}+{nb} does not sum to n={self.n}")
        lo = math.ceil(self.a * self.n - 1e-9)
        if min(na, nb) < lo:
            raise ValueError(f"split sides must each hold at least ceil(a n) = {lo} vertices")

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a, "eta": self.eta, "split": list(self.sizes()),
                "adversary": self.adversary.to_dict(), "seed": self.seed, "shuffle": self.shuffle}

    @classmethod
    def from_dict(cls, d: dict) -> "SemiRandomSpec":
        return cls(int(d["n"]), float(d["a"]), float(d["eta"]),
                   tuple(d["split"]) if d.get("split") is not None else None,
                   AdversaryScript.from_dict(d.get("adversary", {})), int(d.get("seed", 0)),
                   bool(d.get("shuffle", True)))


@dataclass
class Instance:
    graph: Graph
    planted: Partition
    planted_cut_value: int
    alpha_bound: int
    spec: SemiRandomSpec | None = None
    seed: int = 0

    def sidecar(self) -> dict:
        return {"n": self.graph.n, "m": self.graph.m, "seed": self.seed,
                "alpha_bound": self.alpha_bound, "planted_cut_value": self.planted_cut_value,
                "planted": self.planted.side.astype(int).tolist(),
                "spec": None if self.spec is None else self.spec.to_dict()}


def _sample_indices(rng, N: int, prob: float) -> np.ndarray:
    """Each of range(N) independently with probability prob, sorted."""
    if N == 0 or prob <= 0:
        return np.zeros(0, np.int64)
    if prob >= 1:
        return np.arange(N, dtype=np.int64)
    if N <= 20_000_000:
        return np.flatnonzero(rng.random(N) < prob)
    k = int(rng.binomial(N, prob))
    return np.sort(rng.choice(N, size=k, replace=False)).astype(np.int64)


def _pair_from_index(idx: np.ndarray, s: int):
    """Map 0..C(s,2)-1 to pairs (i < j) in row-major upper-triangular order."""
    idx = np.asarray(idx, np.int64)
    # row i starts at i*s - i*(i+1)/2
    i = np.floor((2 * s - 1 - np.sqrt((2 * s - 1) ** 2 - 8 * idx.astype(float))) / 2).astype(np.int64)
    i = np.clip(i, 0, max(s - 2, 0))
    start = i * s - i * (i + 1) // 2
    over = idx < start
    while over.any():
        i[over] -= 1
        start = i * s - i * (i + 1) // 2
        over = idx < start
    nxt = (i + 1) * s - (i + 1) * (i + 2) // 2
    under = idx >= nxt
    while under.any():
        i[under] += 1
        nxt = (i + 1) * s - (i + 1) * (i + 2) // 2
        under = idx >= nxt
    start = i * s - i * (i + 1) // 2
    j = idx - start + i + 1
    return i, j


def _keys(u, v, n):
    u = np.asarray(u, np.int64)
    v = np.asarray(v, np.int64)
    return np.minimum(u, v) * n + np.maximum(u, v)


def _side_members(side_arr, name):
    if name not in SIDES:
        raise ValueError(f"side must be 'A' or 'B', got {name!r}")
    return np.flatnonzero(side_arr == SIDES[name])


def _apply_action(act, k: int, side_arr, keys, n, seed, cut_mask_fn):
    rng = substream(seed, "adversary", k, act.kind)
    if isinstance(act, AddWithin):
        members = _side_members(side_arr, act.side)
        if act.edges is not None:
            e = np.asarray(act.edges, np.int64).reshape(-1, 2)
            if e.size and ((side_arr[e[:, 0]] != SIDES[act.side]) | (side_arr[e[:, 1]] != SIDES[act.side])).any():
                raise MonotonicityError(f"action {k} (add_within): edge leaves side {act.side}")
            if (e[:, 0] == e[:, 1]).any():
                raise ValueError(f"action {k} (add_within): self-loop")
            new = _keys(e[:, 0], e[:, 1], n)
        else:
            if act.density is None or not 0 <= act.density <= 1:
                raise ValueError(f"action {k} (add_within): density must lie in [0, 1]")
            s = members.size
            idx = _sample_indices(rng, s * (s - 1) // 2, act.density)
            i, j = _pair_from_index(idx, s)
            new = _keys(members[i], members[j], n)
        return np.union1d(keys, new)
    if isinstance(act, AddClique):
        members = _side_members(side_arr, act.side)
        if act.vertices is not None:
            vs = np.unique(np.asarray(act.vertices, np.int64))
            if (side_arr[vs] != SIDES[act.side]).any():
                raise MonotonicityError(f"action {k} (add_clique): vertex outside side {act.side}")
            members = vs
        iu = np.triu_indices(members.size, 1)
        return np.union1d(keys, _keys(members[iu[0]], members[iu[1]], n))
    if isinstance(act, AddExpander):
        members = _side_members(side_arr, act.side)
        if act.degree < 0:
            raise ValueError(f"action {k} (add_expander): degree must be non-negative")
        stubs = np.repeat(members, int(act.degree))
        stubs = stubs[rng.permutation(stubs.size)]
        if stubs.size % 2:
            stubs = stubs[:-1]
        u, v = stubs[0::2], stubs[1::2]
        ok = u != v
        return np.union1d(keys, _keys(u[ok], v[ok], n))
    if isinstance(act, RemoveCut):
        cross = cut_mask_fn(keys)
        if act.edges is not None:
            e = np.asarray(act.edges, np.int64).reshape(-1, 2)
            rm = _keys(e[:, 0], e[:, 1], n)
            if (side_arr[e[:, 0]] == side_arr[e[:, 1]]).any():
                raise MonotonicityError(f"action {k} (remove_cut): edge inside one side")
            missing = np.setdiff1d(rm, keys)
            if missing.size:
                raise ValueError(f"action {k} (remove_cut): edge {{{missing[0] // n}, {missing[0] % n}}} absent")
            return np.setdiff1d(keys, rm)
        if act.fraction is None or not 0 <= act.fraction <= 1:
            raise ValueError(f"action {k} (remove_cut): fraction must lie in [0, 1]")
        cand = keys[cross]
        drop = rng.random(cand.size) < act.fraction
        return np.setdiff1d(keys, cand[drop])
    raise ValueError(f"unknown adversary action {act!r}")


def generate_semirandom(spec: SemiRandomSpec) -> Instance:
    """Planted split, random cut edges, then the scripted monotone adversary."""
    spec.validate()
    n = spec.n
    na, nb = spec.sizes()
    labels = substream(spec.seed, "split").permutation(n) if spec.shuffle else np.arange(n)
    side = np.ones(n, np.int8)
    side[labels[:na]] = 0
    A, B = np.flatnonzero(side == 0), np.flatnonzero(side == 1)
    idx = _sample_indices(substream(spec.seed, "cut"), na * nb, spec.eta)
    keys = np.unique(_keys(A[idx // nb], B[idx % nb], n))
    alpha_bound = int(keys.size)

    def cross(k):
        return side[k // n] != side[k % n]

    for k, act in enumerate(spec.adversary.actions):
        keys = _apply_action(act, k, side, keys, n, spec.seed, cross)
    g = Graph(n, np.stack([keys // n, keys % n], axis=1))
    planted = Partition(side)
    return Instance(g, planted, cut_value(g, planted), alpha_bound, spec, spec.seed)


def generate_hsm(tree, seed: int) -> Graph:
    """Each pair {u, v} present independently with probability W(LCA(u, v))."""
    tree.check_weights()
    n = tree.n
    leaves = tree.leaf_sets()
    parts = []
    for node in tree.internal_nodes():
        w = float(tree.weight[node])
        if w <= 0:
            continue
        lc, rc = tree.children_of(node)
        L, R = leaves[lc], leaves[rc]
        idx = _sample_indices(substream(seed, "hsm", int(node)), L.size * R.size, w)
        parts.append(_keys(L[idx // R.size], R[idx % R.size], n))
    keys = np.sort(np.concatenate(parts)) if parts else np.zeros(0, np.int64)
    return Graph(n, np.stack([keys // n, keys % n], axis=1))


def apply_edge_removal_adversary(g: Graph, removals) -> Graph:
    """g minus the listed edges; every listed edge must exist."""
    e = np.asarray(removals, np.int64).reshape(-1, 2)
    if e.shape[0] == 0:
        return Graph(g.n, g.edges)
    ids = g.edge_ids(e[:, 0], e[:, 1])
    if (ids < 0).any():
        bad = e[np.flatnonzero(ids < 0)[0]]
        raise ValueError(f"cannot remove absent edge {{{bad[0]}, {bad[1]}}}")
    keep = np.ones(g.m, bool)
    keep[ids] = False
    return g.edge_subgraph(keep)


def save_instance(inst: Instance, prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    edges = prefix.with_suffix(".edges")
    side = prefix.with_suffix(".json")
    write_edge_list(inst.graph, edges)
    side.write_text(json.dumps(inst.sidecar(), sort_keys=True, indent=1) + "\n")
    return edges, side


def load_instance(prefix) -> Instance:
    prefix = Path(prefix)
    g = read_edge_list(prefix.with_suffix(".edges"))
    meta = json.loads(prefix.with_suffix(".json").read_text())
    planted = Partition(np.asarray(meta["planted"], np.int8))
    spec = SemiRandomSpec.from_dict(meta["spec"]) if meta.get("spec") else None
    return Instance(g, planted, int(meta["planted_cut_value"]), int(meta["alpha_bound"]), spec,
                    int(meta.get("seed", 0)))
