"""Separation oracles for the embedded balanced-cut SDP.

Three oracles are stacked in the order the driver calls them:

* :func:`flatness_balance_oracle` checks vector norms and the spread of the
  non-flat vertices;
* :func:`flow_or_cut` projects onto a random direction, routes a d-regular
  flow between the two ends and returns either a small cut or flow feedback;
* :func:`heavy_oracle` audits long edges, runs the heavy-vertex carving of
  :func:`heavy_removal` and falls back to flow or triangle feedback.

Scale convention: ``params.alpha`` counts cut edges.  The SDP value of an
integral cut with c edges is 4c, so separation margins are expressed against
``params.sdp_alpha = 4 * alpha``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .embedding import Embedding, edge_sqdists, flat_set, pair_sqdists, spread
from .graph_core import FlowResult, Graph, Partition, cut_value, flow_demands, max_flow_dregular
from .mmw_engine import FeedbackMatrix, OracleVerdict
from .rng import child_seed, substream


class OracleBreach(RuntimeError):
    """No valid feedback could be built although the oracle could not say Yes."""


@dataclass
class OracleParams:
    """Oracle constants.  ``None`` fields take n-dependent defaults."""

    a: float
    alpha: float
    delta: float = 1 / 200
    kappa: float = 1.0
    ell: float = 1.0
    gamma: float = 0.1
    C_pair: float = 200.0
    C_star: float = 16.0
    R: int | None = None
    sigma: float | None = None
    d_cap: float | None = None
    c_d: float = 2.0
    cut_threshold: float = 4.0
    C_removal: float = 8.0
    C_hat: float = 8.0
    triangle_factor: float = 10.0
    flatness_divisor: float | None = None
    balance_factor: float = 2.0
    set_frac: float = 0.5
    cut_balance: float = 0.25
    rho: float = 2.0
    n_ref: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.a < 0.5 + 1e-12:
            raise ValueError("balance a must lie in (0, 1/2]")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.delta <= 1 / 200 + 1e-15:
            raise ValueError("delta must lie in (0, 1/200]")
        if not 0 < self.ell <= 1:
            raise ValueError("ell must lie in (0, 1]")
        if self.R is not None and self.R < 1:
            raise ValueError("repetition count R must be at least 1")
        if self.rho < 2:
            raise ValueError("rho must be at least 2")

    @property
    def sdp_alpha(self) -> float:
        return 4.0 * self.alpha

    def reps(self, n: int) -> int:
        return self.R if self.R is not None else max(1, math.ceil(math.log(max(n, 2)) ** 2))

    def gap(self) -> float:
        return self.a / 10 if self.sigma is None else self.sigma

    def flow_capacity(self, n: int) -> float:
        if self.d_cap is not None:
            return self.d_cap
        return max(self.c_d * self.alpha * math.log(max(n, 2)) / max(n, 1), 1.0 / 1024)

    def flat_limit(self, n: int) -> float:
        div = self.flatness_divisor
        if div is None:
            div = max(1.0, math.log(max(n, 2)) ** 2)
        return n / div

    def accept_bound(self, n: int) -> float:
        """Largest cut accepted as final: cut_threshold * alpha * (1 + delta kappa sqrt(ln n))."""
        return self.cut_threshold * self.alpha * (1 + self.delta * self.kappa * math.sqrt(math.log(max(n, 2))))

    def separation_mass(self) -> float:
        """Demand-weighted squared distance needed for flow feedback to separate."""
        return (1 + 2 * self.gamma) * self.sdp_alpha

    def to_dict(self) -> dict:
        return asdict(self)


class OracleTrace:
    """Collects one record per oracle invocation; optionally streams JSON lines."""

    def __init__(self, stream=None):
        self.records: list[dict] = []
        self.stream = stream

    def add(self, **rec) -> None:
        self.records.append(rec)
        if self.stream is not None:
            self.stream.write(json.dumps(rec, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _trace(trace, **rec):
    if trace is not None:
        trace.add(**rec)


# ------------------------------------------------------------ flatness / balance


def flatness_feedback(n: int, flat: np.ndarray, params: OracleParams) -> FeedbackMatrix:
    """M = c (|F|/n Id - diag(1_F)) on the flat set F.

    Feasible solutions have unit diagonal, so <M, X'> = 0; a candidate whose
    flat vectors have squared norm above 2 gets <M, X> < -c|F|.
    """
    k = flat.size
    c = 2 * (1 + params.gamma) * params.sdp_alpha / k
    diag = np.zeros(n)
    diag[flat] = -c
    width = c * max(1 - k / n, k / n)
    return FeedbackMatrix(n, diag=diag, ident=c * k / n, dual_value=0.0, width_bound=width,
                          source="flatness", info={"flat": int(k), "c": c})


def balance_feedback(n: int, S: np.ndarray, spread_S: float, params: OracleParams):
    """M = z K_S - (z B_S / n) Id, or None when the spread cannot be separated.

    B_S = 2 a n^2 - 4 |V \\ S| n lower-bounds <K_S, X'> for feasible X'.
    """
    outside = n - S.size
    B = 2 * params.a * n * n - 4 * outside * n
    slack = B - spread_S / 2
    if slack <= 0:
        return None
    z = 2 * (1 + params.gamma) * params.sdp_alpha / slack
    width = z * max(B / n, S.size - B / n)
    return FeedbackMatrix(n, complete=[(S, z)], ident=-z * B / n, dual_value=0.0, width_bound=width,
                          source="balance", info={"z": z, "B": B, "spread": spread_S})


def flatness_balance_oracle(W: Embedding, params: OracleParams, trace=None) -> OracleVerdict:
    """Yes iff few vectors are long and the remaining ones are spread out."""
    n = W.n
    flat = flat_set(W, 2.0)
    if flat.size >= max(params.flat_limit(n), 1):
        fb = flatness_feedback(n, flat, params)
        if fb.inner(W) < 0:
            _trace(trace, oracle="flatness_balance", verdict="no", kind="flatness", flat=int(flat.size),
                   limit=params.flat_limit(n), terms=fb.term_count)
            return OracleVerdict.no(fb)
        # the diagonal feedback vanishes when the candidate's trace is off r
        # (e.g. every vector flat); fall back to the balance term over all vertices
        alt = balance_feedback(n, np.arange(n), spread(W), params)
        if alt is not None and alt.inner(W) < 0:
            alt.info["flat"] = int(flat.size)
            _trace(trace, oracle="flatness_balance", verdict="no", kind="flatness-balance",
                   flat=int(flat.size), terms=alt.term_count)
            return OracleVerdict.no(alt)
        _trace(trace, oracle="flatness_balance", verdict="no", kind="flatness", flat=int(flat.size),
               limit=params.flat_limit(n), terms=fb.term_count, separating=False)
        return OracleVerdict.no(fb)
    S = np.setdiff1d(np.arange(n), flat)
    spr = spread(W, S)
    threshold = params.balance_factor * params.a * n * n
    if spr < threshold:
        fb = balance_feedback(n, S, spr, params)
        if fb is not None:
            _trace(trace, oracle="flatness_balance", verdict="no", kind="balance", spread=spr,
                   threshold=threshold, terms=fb.term_count)
            return OracleVerdict.no(fb)
        _trace(trace, oracle="flatness_balance", verdict="yes", caveat="balance not separable",
               spread=spr, threshold=threshold)
        return OracleVerdict.yes({"flat": flat, "core": S, "caveat": "balance not separable"})
    _trace(trace, oracle="flatness_balance", verdict="yes", flat=int(flat.size), spread=spr,
           threshold=threshold)
    return OracleVerdict.yes({"flat": flat, "core": S, "caveat": None})


# ------------------------------------------------------------ flow or cut


def projection_split(x: np.ndarray, sigma: float, k_min: int):
    """Choose P (low end) and P' (high end) of the sorted projections.

    Every value in P' exceeds every value in P by at least ``sigma`` and both
    sets hold at least ``k_min`` points.  Among valid splits we take the one
    whose sigma-window between the sets contains the fewest points, breaking
    ties by the widest gap.  Returns index arrays into ``x`` or None.
    """
    m = x.size
    if m < 2 or k_min > m:
        return None
    order = np.argsort(x, kind="stable")
    xs = x[order]
    k = np.arange(1, m + 1)
    # P must contain complete runs of tied values
    ends = np.flatnonzero(np.append(xs[1:] > xs[:-1], True))
    k = k[ends]
    j = np.searchsorted(xs, xs[k - 1] + sigma, side="left")
    ok = (k >= k_min) & (m - j >= k_min)
    if not ok.any():
        return None
    k, j = k[ok], j[ok]
    window = j - k
    gap = xs[np.minimum(j, m - 1)] - xs[k - 1]
    best = np.lexsort((-gap, window))[0]
    return order[:k[best]], order[j[best]:]


def flow_feedback(n: int, pairs: np.ndarray, amounts: np.ndarray, params: OracleParams,
                  source: str) -> FeedbackMatrix:
    """M = x Id - D with x = (1+gamma) * sdp_alpha / n and D the demand Laplacian."""
    x = (1 + params.gamma) * params.sdp_alpha / n
    fb = FeedbackMatrix(n, pairs=pairs, pair_w=-amounts, ident=x, dual_value=x * n, source=source)
    return fb


@dataclass
class FlowOutcome:
    """Yes-payload of :func:`flow_or_cut`.

    ``kind`` is "cut" (small balanced cut found), "certificate" (flows were
    large but too short to separate) or "degenerate" (no valid projection
    split in any repetition).
    """

    kind: str
    partition: Partition | None
    cut: int
    flow: float
    balance: float
    repetition: int
    info: dict = field(default_factory=dict)


def _flow_partitions(g: Graph, f: FlowResult):
    out = []
    for p in (f.mincut, f.sink_cut):
        out.append((p, cut_value(g, p), p.balance()))
    return out


def flow_or_cut(g: Graph, W: Embedding, params: OracleParams, trace=None, core=None,
                best=None, weak_ok: bool = False) -> OracleVerdict:
    """Route flow between the two ends of a random projection.

    ``core`` restricts the projection to non-flat vertices (defaults to all
    vertices with squared norm at most 2).  ``best`` is an optional dict
    updated in place with the best balanced cut seen, for graceful
    degradation in the driver.  With ``weak_ok`` a flow whose demand mass
    falls short of the separation mass but still exceeds x*n is returned as
    feedback (strictly negative on the candidate) instead of a certificate.
    """
    n = g.n
    if W.n != n:
        raise ValueError("embedding and graph sizes differ")
    if core is None:
        core = np.flatnonzero(W.sqnorms <= 2.0)
    core = np.asarray(core, np.int64)
    sigma = params.gap()
    k_min = max(1, math.ceil(params.set_frac * params.a * n))
    d_cap = params.flow_capacity(n)
    accept = params.accept_bound(n)
    min_side = params.cut_balance * params.a
    need = params.separation_mass()
    pts = W.points[core]
    reps = params.reps(n)
    cert = None
    weak = None
    degenerate = 0
    for rep in range(reps):
        rng = substream(params.seed, "flow-or-cut", rep)
        u = rng.standard_normal(W.d)
        split = projection_split(pts @ u, sigma, k_min)
        if split is None:
            degenerate += 1
            continue
        P, Pp = core[split[0]], core[split[1]]
        f = max_flow_dregular(g, P, Pp, d_cap)
        cands = _flow_partitions(g, f)
        balanced = [c for c in cands if c[2] >= min_side]
        if balanced:
            # within the acceptance bound a fully a-balanced cut beats a cheaper lopsided one
            full = [c for c in balanced if c[2] >= params.a - 1e-12 and c[1] <= accept]
            part, cval, bal = min(full or balanced, key=lambda c: (c[1], -c[2]))
            if best is not None and (best.get("cut") is None or cval < best["cut"]):
                best.update(cut=cval, partition=part, balance=bal)
            if cval <= accept:
                _trace(trace, oracle="flow_or_cut", verdict="yes", kind="cut", repetition=rep,
                       flow=f.value, cut=cval, accept=accept, balance=bal, P=int(P.size),
                       Pp=int(Pp.size), d_cap=d_cap)
                return OracleVerdict.yes(FlowOutcome("cut", part, cval, f.value, bal, rep,
                                                     {"P": int(P.size), "Pp": int(Pp.size)}))
        pairs, amt = flow_demands(f)
        mass = float(amt @ pair_sqdists(W, pairs[:, 0], pairs[:, 1])) if amt.size else 0.0
        if mass >= need:
            fb = flow_feedback(n, pairs, amt, params, "flow")
            fb.info.update(flow=f.value, mass=mass, repetition=rep)
            _trace(trace, oracle="flow_or_cut", verdict="no", repetition=rep, flow=f.value, mass=mass,
                   need=need, terms=fb.term_count, P=int(P.size), Pp=int(Pp.size), d_cap=d_cap)
            return OracleVerdict.no(fb)
        if weak is None or mass > weak[2]:
            weak = (pairs, amt, mass, f.value, rep)
        part, cval, bal = max(cands, key=lambda c: (c[2], -c[1]))
        if cert is None or (bal >= min_side, -cval) > (cert.balance >= min_side, -cert.cut):
            cert = FlowOutcome("certificate", part, cval, f.value, bal, rep, {"mass": mass})
    x_n = (1 + params.gamma) * params.sdp_alpha
    if weak_ok and weak is not None and weak[2] > x_n:
        fb = flow_feedback(n, weak[0], weak[1], params, "flow-weak")
        fb.info.update(flow=weak[3], mass=weak[2], repetition=weak[4])
        _trace(trace, oracle="flow_or_cut", verdict="no", kind="weak", repetition=weak[4], flow=weak[3],
               mass=weak[2], need=need, floor=x_n, terms=fb.term_count)
        return OracleVerdict.no(fb)
    if cert is not None:
        _trace(trace, oracle="flow_or_cut", verdict="yes", kind="certificate", repetition=cert.repetition,
               flow=cert.flow, cut=cert.cut, balance=cert.balance, degenerate=degenerate)
        return OracleVerdict.yes(cert)
    _trace(trace, oracle="flow_or_cut", verdict="yes", kind="degenerate", repetitions=reps)
    return OracleVerdict.yes(FlowOutcome("degenerate", None, 0, 0.0, 0.0, -1, {"degenerate": degenerate}))


# ------------------------------------------------------------ heavy vertices


@dataclass
class HeavyMap:
    """Approximate heavy centers and the vertex-to-center map (-1 for none)."""

    V_star: np.ndarray
    f: np.ndarray
    center_counts: np.ndarray


def _sq_cross(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared distances between rows of A and rows of B (clipped at 0)."""
    out = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
    return np.maximum(out, 0.0)


def count_within(W: Embedding, centers, radius2: float, chunk: int = 512) -> np.ndarray:
    """For each center, the number of vertices within squared distance radius2."""
    pts = W.points
    centers = np.asarray(centers, np.int64)
    out = np.empty(centers.size, np.int64)
    for lo in range(0, centers.size, chunk):
        c = centers[lo:lo + chunk]
        out[lo:lo + chunk] = (_sq_cross(pts[c], pts) <= radius2).sum(1)
    return out


def _nearest(pts: np.ndarray, cpts: np.ndarray, chunk: int = 4096):
    """Index of and squared distance to the nearest row of cpts, for each row of pts."""
    idx = np.empty(pts.shape[0], np.int64)
    dist = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], chunk):
        d2 = _sq_cross(pts[lo:lo + chunk], cpts)
        idx[lo:lo + chunk] = d2.argmin(1)
        dist[lo:lo + chunk] = d2[np.arange(d2.shape[0]), idx[lo:lo + chunk]]
    return idx, dist


def detect_heavy(W: Embedding, delta: float, rho: float = 2.0, n_ref: int | None = None,
                 seed: int = 0, sample_size: int | None = None) -> HeavyMap:
    """Sampled detection of vertices with many close neighbours.

    Samples ceil(100 delta^-2 ln n) vertices (all of them when that exceeds
    n), keeps those with at least 10 delta^2 n_ref vertices within squared
    distance rho*delta, and maps each vertex to its nearest kept center if
    that center lies within rho*delta.
    """
    if rho < 2:
        raise ValueError("rho must be at least 2")
    n = W.n
    n_ref = n if n_ref is None else n_ref
    if n == 0:
        return HeavyMap(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))
    s = math.ceil(100 * delta**-2 * math.log(max(n, 2))) if sample_size is None else sample_size
    if s >= n:
        sample = np.arange(n)
    else:
        sample = np.sort(substream(seed, "detect-heavy").choice(n, s, replace=False))
    counts = count_within(W, sample, rho * delta)
    keep = counts >= 10 * delta**2 * n_ref
    centers = sample[keep]
    f = np.full(n, -1, np.int64)
    if centers.size:
        idx, dist = _nearest(W.points, W.points[centers])
        hit = dist <= rho * delta
        f[hit] = centers[idx[hit]]
    return HeavyMap(centers, f, counts[keep])


def audit_heavy_map(W: Embedding, hm: HeavyMap, delta: float, rho: float = 2.0,
                    n_ref: int | None = None) -> dict:
    """Exact check of the two detection guarantees."""
    n_ref = W.n if n_ref is None else n_ref
    need = 10 * delta**2 * n_ref
    ok_centers = bool((count_within(W, hm.V_star, rho * delta) >= need).all()) if hm.V_star.size else True
    star = np.flatnonzero(hm.f < 0)
    ok_star = bool((count_within(W, star, delta) < need).all()) if star.size else True
    return {"centers_heavy": ok_centers, "unmapped_light": ok_star}


@dataclass
class RemovalOutcome:
    """Result of one heavy-vertex removal run."""

    E_star: np.ndarray
    tripartition: Partition
    carved_sets: list
    r_draws: list
    triples: np.ndarray
    triple_violation: np.ndarray
    cut_short: int
    rounds: int
    branch: str
    balance_rule: str
    info: dict = field(default_factory=dict)

    @property
    def P1(self) -> np.ndarray:
        return self.tripartition.members(0)

    @property
    def P2(self) -> np.ndarray:
        return self.tripartition.members(1)

    @property
    def V_rest(self) -> np.ndarray:
        return self.tripartition.members(2)


def _greedy_separated(W: Embedding, cand: np.ndarray, min_sq: float) -> np.ndarray:
    """Greedy maximal subset of ``cand`` (in order) at pairwise squared distance >= min_sq."""
    pts = W.points
    cand = np.asarray(cand, np.int64)
    blocked = np.zeros(cand.size, bool)
    kept: list[int] = []
    pos = 0
    while pos < cand.size:
        c = int(cand[pos])
        kept.append(c)
        blocked |= _sq_cross(pts[[c]], pts[cand])[0] < min_sq
        nxt = np.flatnonzero(~blocked[pos + 1:])
        if nxt.size == 0:
            break
        pos += 1 + int(nxt[0])
    return np.array(kept, np.int64)


def carve_balls(W: Embedding, groups, available: np.ndarray, radius2: float):
    """Assign available vertices to the first group having a center within radius2.

    ``groups`` is a list of center arrays.  Returns one member array per group;
    the arrays are disjoint.
    """
    pts = W.points
    avail = np.asarray(available, np.int64)
    free = np.ones(avail.size, bool)
    out = []
    for centers in groups:
        centers = np.atleast_1d(np.asarray(centers, np.int64))
        if not free.any():
            out.append(np.zeros(0, np.int64))
            continue
        cand = np.flatnonzero(free)
        _, dist = _nearest(pts[avail[cand]], pts[centers])
        take = cand[dist <= radius2]
        free[take] = False
        out.append(avail[take])
    return out


def _harvest(W, short_edges, label, groups, members, factor):
    """Triples (far, near, center) for short edges split by the carving."""
    if not members:
        return np.zeros((0, 3), np.int64), np.zeros(0)
    e = short_edges
    la, lb = label[e[:, 0]], label[e[:, 1]]
    split = (la != lb) & ((la >= 0) | (lb >= 0))
    if not split.any():
        return np.zeros((0, 3), np.int64), np.zeros(0)
    pts = W.points
    rows = []
    for u, v, lu, lv in zip(e[split, 0], e[split, 1], la[split], lb[split]):
        for near, far, k in ((u, v, lu), (v, u, lv)):
            if k < 0:
                continue
            centers = np.atleast_1d(groups[k])
            c = int(centers[np.argmin(((pts[centers] - pts[near]) ** 2).sum(1))])
            if c in (near, far):
                continue
            rows.append((far, near, c))
    if not rows:
        return np.zeros((0, 3), np.int64), np.zeros(0)
    tr = np.array(rows, np.int64)
    dfar = pair_sqdists(W, tr[:, 0], tr[:, 2])
    dnear = pair_sqdists(W, tr[:, 1], tr[:, 2])
    dedge = pair_sqdists(W, tr[:, 0], tr[:, 1])
    viol = dedge + dnear - dfar
    keep = dfar - dnear >= factor * dedge
    return tr[keep], viol[keep]


def heavy_removal(g: Graph, W: Embedding, params: OracleParams, trace=None, radii=None,
                  attempt: int = 0) -> RemovalOutcome:
    """Strip long edges, carve balls around heavy centers and split them into P1, P2.

    ``radii`` optionally supplies the uniform[1, 2] radius draws (used by
    Monte Carlo tests); otherwise they come from the seeded stream.
    """
    n = g.n
    delta = params.delta
    n_ref = n if params.n_ref is None else params.n_ref
    sd = edge_sqdists(g, W)
    long_mask = sd >= delta
    E_star = np.flatnonzero(long_mask)
    short = g.edges[~long_mask]
    short_sd = sd[~long_mask]
    rng = substream(params.seed, "heavy-removal", attempt)
    draw = iter(radii) if radii is not None else None

    def next_radius():
        return float(next(draw)) if draw is not None else float(rng.uniform(1.0, 2.0))

    remaining = np.ones(n, bool)
    carved: list[tuple[Any, np.ndarray]] = []
    r_draws: list[float] = []
    trip, viol = [], []
    max_rounds = max(1, math.ceil(params.C_pair * params.ell / (params.a * delta)))
    need_u = params.a / (params.C_pair * delta)
    branch = "none"
    rounds = 0
    while rounds < max_rounds:
        rem = np.flatnonzero(remaining)
        if rem.size == 0:
            break
        hm = detect_heavy(W.restrict(rem), delta, params.rho, n_ref,
                          child_seed(params.seed, "detect", attempt, rounds))
        if hm.V_star.size == 0:
            break
        vstar = rem[hm.V_star]
        fmap = np.full(n, -1, np.int64)
        fmap[rem] = np.where(hm.f >= 0, rem[np.maximum(hm.f, 0)], -1)
        U = _greedy_separated(W, vstar, 10 * params.C_pair * delta)
        r = next_radius()
        r_draws.append(r)
        if U.size >= need_u:
            groups = [np.array([c]) for c in U.tolist()]
            branch = "carve"
        else:
            # contact graph on the centers, joined through short surviving edges
            parent = {int(c): int(c) for c in vstar.tolist()}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            inside = remaining[short[:, 0]] & remaining[short[:, 1]] & (short_sd <= 200 * delta)
            fu, fv = fmap[short[inside, 0]], fmap[short[inside, 1]]
            both = (fu >= 0) & (fv >= 0)
            for x, y in zip(fu[both].tolist(), fv[both].tolist()):
                rx, ry = find(x), find(y)
                if rx != ry:
                    parent[max(rx, ry)] = min(rx, ry)
            comps: dict[int, list[int]] = {}
            for c in vstar.tolist():
                comps.setdefault(find(c), []).append(c)
            groups = [np.array(v) for _, v in sorted(comps.items())]
            branch = "contact"
        members = carve_balls(W, groups, rem, 2 * r * delta)
        label = np.full(n, -1, np.int64)
        for k, mem in enumerate(members):
            label[mem] = k
        tr, vi = _harvest(W, short, label, groups, members, params.triangle_factor)
        trip.append(tr)
        viol.append(vi)
        for grp, mem in zip(groups, members):
            if mem.size:
                carved.append((grp.tolist() if grp.size > 1 else int(grp[0]), mem))
                remaining[mem] = False
        rounds += 1
        if branch == "contact":
            break
    # largest-first into the lighter side
    side = np.full(n, 2, np.int8)
    loads = [0, 0]
    for pos in sorted(range(len(carved)), key=lambda q: (-carved[q][1].size, q)):
        k = 0 if loads[0] <= loads[1] else 1
        side[carved[pos][1]] = k
        loads[k] += carved[pos][1].size
    tri = Partition(side, 3)
    ls, lt = side[short[:, 0]], side[short[:, 1]]
    cut_short = int(np.count_nonzero(ls != lt))
    biggest = max((m.size for _, m in carved), default=0)
    if abs(loads[0] - loads[1]) <= params.a * n / 2:
        rule = "near-even"
    elif np.count_nonzero(side == 2) >= params.a * n / 10:
        rule = "large-rest"
    else:
        rule = "max-set"
    triples = np.concatenate(trip) if trip else np.zeros((0, 3), np.int64)
    tv = np.concatenate(viol) if viol else np.zeros(0)
    out = RemovalOutcome(E_star, tri, carved, r_draws, triples, tv, cut_short, rounds, branch, rule,
                         {"largest_set": int(biggest), "loads": loads})
    _trace(trace, oracle="heavy_removal", attempt=attempt, E_star=int(E_star.size), rounds=rounds,
           branch=branch, carved=[int(m.size) for _, m in carved], cut_short=cut_short,
           balance_rule=rule, triples=int(triples.shape[0]))
    return out


def random_balanced_bipartition(n: int, a: float, rng) -> np.ndarray:
    """Uniform labelling conditioned on both sides having at least ceil(a n) vertices."""
    lo = math.ceil(a * n)
    k = int(rng.integers(lo, n - lo + 1)) if n - lo >= lo else n // 2
    side = np.ones(n, np.int8)
    side[rng.permutation(n)[:k]] = 0
    return side


def _demand_mass(W, f):
    pairs, amt = flow_demands(f)
    mass = float(amt @ pair_sqdists(W, pairs[:, 0], pairs[:, 1])) if amt.size else 0.0
    return pairs, amt, mass


def removal_bound(params: OracleParams) -> float:
    """C_removal * (alpha / delta) * (1 + ell / delta)."""
    d = params.delta
    return params.C_removal * (params.alpha / d) * (1 + params.ell / d)


def heavy_oracle(g: Graph, W: Embedding, params: OracleParams, trace=None) -> OracleVerdict:
    """Audit long edges, then carve; fall back to flow or triangle feedback."""
    n = g.n
    delta = params.delta
    reps = params.reps(n)
    sd = edge_sqdists(g, W)
    n_long = int(np.count_nonzero(sd >= delta))
    need = params.separation_mass()
    # (a) long-edge audit
    if g.m and n_long > params.C_hat * params.alpha / delta:
        d_audit = 2 * params.C_hat * params.alpha / (params.a * n)
        for rep in range(reps):
            rng = substream(params.seed, "long-edge-audit", rep)
            side = random_balanced_bipartition(n, params.a, rng)
            f = max_flow_dregular(g, np.flatnonzero(side == 0), np.flatnonzero(side == 1), d_audit)
            if f.value <= params.C_hat * params.alpha:
                continue
            pairs, amt, mass = _demand_mass(W, f)
            if mass >= need:
                fb = flow_feedback(n, pairs, amt, params, "long-edge-audit")
                fb.info.update(flow=f.value, mass=mass, long_edges=n_long)
                _trace(trace, oracle="heavy", verdict="no", stage="audit", repetition=rep, E_star=n_long,
                       flow=f.value, mass=mass, terms=fb.term_count)
                return OracleVerdict.no(fb)
    # (b) removal attempts
    bound = removal_bound(params)
    outcomes = []
    for attempt in range(reps):
        out = heavy_removal(g, W, params, trace, attempt=attempt)
        outcomes.append(out)
        if out.cut_short <= bound:
            _trace(trace, oracle="heavy", verdict="yes", stage="removal", attempt=attempt,
                   E_star=int(out.E_star.size), cut_short=out.cut_short, bound=bound,
                   carved=[int(m.size) for _, m in out.carved_sets], balance_rule=out.balance_rule)
            return OracleVerdict.yes(out)
    # (c) persistent violation
    out = min(outcomes, key=lambda o: o.cut_short)
    d_c = 100 * params.C_star * (params.alpha / (n * delta)) * (1 + params.ell / delta)
    side = out.tripartition.side
    best = None
    for src_mask in (side <= 1, side == 0, side == 1):
        src, snk = np.flatnonzero(src_mask), np.flatnonzero(~src_mask)
        if src.size == 0 or snk.size == 0:
            continue
        f = max_flow_dregular(g, src, snk, d_c)
        pairs, amt, mass = _demand_mass(W, f)
        if best is None or mass > best[2]:
            best = (pairs, amt, mass, f.value)
    if best is not None and best[2] >= need:
        fb = flow_feedback(n, best[0], best[1], params, "heavy-flow")
        fb.info.update(flow=best[3], mass=best[2])
        _trace(trace, oracle="heavy", verdict="no", stage="flow", flow=best[3], mass=best[2],
               terms=fb.term_count)
        return OracleVerdict.no(fb)
    fb = triangle_feedback(W, outcomes, params)
    if fb is None:
        raise OracleBreach("heavy-vertex oracle: neither flow nor triangle feedback separates "
                           f"(best demand mass {0 if best is None else best[2]:.4g}, need {need:.4g})")
    _trace(trace, oracle="heavy", verdict="no", stage="triangle", triples=int(fb.triples.shape[0]),
           terms=fb.term_count)
    return OracleVerdict.no(fb)


def triangle_feedback(W: Embedding, outcomes, params: OracleParams):
    """M = x Id + sum_p f_p T_p on harvested violated triples, or None if it does not separate."""
    n = W.n
    tr = [o.triples for o in outcomes if o.triples.size]
    if not tr:
        return None
    triples = np.unique(np.concatenate(tr), axis=0)
    i, j, k = triples[:, 0], triples[:, 1], triples[:, 2]
    viol = pair_sqdists(W, i, j) + pair_sqdists(W, j, k) - pair_sqdists(W, i, k)
    neg = viol < 0
    triples, viol = triples[neg], viol[neg]
    if triples.shape[0] == 0:
        return None
    x = (1 + params.gamma) * params.sdp_alpha / n
    fp = params.C_star * params.sdp_alpha / n
    inner = x * float(W.sqnorms.sum()) + fp * viol.sum()
    if inner >= -params.gamma * params.sdp_alpha:
        return None
    return FeedbackMatrix(n, triples=triples, triple_w=np.full(triples.shape[0], fp), ident=x,
                          dual_value=x * n, source="triangle", info={"inner": inner})


# ------------------------------------------------------------ stacked oracle


@dataclass
class StackOutcome:
    """Yes-payload of the stacked oracle."""

    flow: FlowOutcome
    removal: RemovalOutcome | None
    basic: dict


class OracleStack:
    """Callable (W, t) -> verdict running the three oracles in order.

    Keeps the best balanced cut seen by the flow oracle across calls.
    """

    def __init__(self, g: Graph, params: OracleParams, trace=None, use_heavy: bool = True,
                 weak_flow: bool = False):
        self.g = g
        self.weak_flow = weak_flow
        self.params = params
        self.trace = trace
        self.use_heavy = use_heavy
        self.best: dict = {}
        self.calls = 0

    def __call__(self, W: Embedding, t: int = 0) -> OracleVerdict:
        self.calls += 1
        p = self.params
        local = OracleParams(**{**p.to_dict(), "seed": child_seed(p.seed, "stack", t)})
        v = flatness_balance_oracle(W, local, self.trace)
        if not v.is_yes:
            return v
        basic = v.payload
        v = flow_or_cut(self.g, W, local, self.trace, core=basic["core"], best=self.best,
                        weak_ok=self.weak_flow)
        if not v.is_yes:
            return v
        flow = v.payload
        if flow.kind == "cut" or not self.use_heavy:
            return OracleVerdict.yes(StackOutcome(flow, None, basic))
        v = heavy_oracle(self.g, W, local, self.trace)
        if not v.is_yes:
            return v
        return OracleVerdict.yes(StackOutcome(flow, v.payload, basic))
