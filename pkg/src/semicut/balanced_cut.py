"""Outer balanced-cut driver.

Each round runs the approximate MMW solver with the stacked oracle on the
surviving graph.  A small balanced cut from the flow oracle ends the run;
otherwise the long edges and the carved sets P1, P2 are removed and the scale
delta shrinks by 100.  Removed sets are finally handed, largest first, to the
lighter side.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .embedding import Embedding
from .graph_core import Graph, Partition, cut_value
from .mmw_engine import MmwConfig, OracleFailure, mmw_solve
from .oracles import OracleBreach, OracleParams, OracleStack
from .rng import child_seed, substream

DELTA0 = 1 / 200


@dataclass
class SolverConfig:
    """Driver and oracle settings; every field is echoed into result files.

    ``strict_mmw`` enforces the step-size / horizon / degree coupling of the
    regret analysis.  It is off by default because the coupled values need
    ~10^5 iterations at n = 1000; the practical defaults below are used instead.
    """

    epsilon: float = 2.0
    mmw_T: int = 120
    taylor_p: int | None = None
    sketch_dim: int | None = 48
    gamma: float = 0.1
    zeta_factor: float = 1.0
    strict_mmw: bool = False
    adaptive_p: bool = True
    R: int | None = 4
    c_d: float = 2.0
    sigma: float | None = None
    cut_threshold: float = 4.0
    C_removal: float = 8.0
    C_hat: float = 8.0
    C_star: float = 16.0
    C_pair: float = 200.0
    triangle_factor: float = 10.0
    flatness_divisor: float | None = None
    balance_factor: float = 2.0
    set_frac: float = 0.5
    cut_balance: float = 0.25
    use_heavy: bool = True
    weak_flow: bool = True
    max_rounds: int = 5

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DriverState:
    i: int
    alive: np.ndarray
    removed_edges: np.ndarray
    removed_sets: list
    delta: float
    budget: int = 0


@dataclass
class CutResult:
    partition: Partition
    value: int
    balance: float
    exhausted: bool
    alpha: float
    a: float
    provenance: dict
    config: dict
    seed: int

    @property
    def sides(self) -> list[int]:
        return self.partition.counts.astype(int).tolist()

    def to_json(self) -> dict:
        return {"value": int(self.value), "balance": float(self.balance), "sides": self.sides,
                "exhausted": bool(self.exhausted), "alpha": float(self.alpha), "a": float(self.a),
                "provenance": self.provenance, "config": self.config, "seed": int(self.seed)}


def round_count(delta_final: float) -> int:
    """ceil(log_100(delta0 / delta_final)), clamped to [1, 5]."""
    raw = math.ceil(math.log(DELTA0 / delta_final, 100) - 1e-12) if delta_final < DELTA0 else 1
    return int(min(5, max(1, raw)))


def _oracle_params(a, alpha, kappa, delta, ell, n_ref, seed, cfg: SolverConfig) -> OracleParams:
    return OracleParams(a=a, alpha=alpha, delta=delta, kappa=kappa, ell=ell, gamma=cfg.gamma,
                        C_pair=cfg.C_pair, C_star=cfg.C_star, R=cfg.R, sigma=cfg.sigma, c_d=cfg.c_d,
                        cut_threshold=cfg.cut_threshold, C_removal=cfg.C_removal, C_hat=cfg.C_hat,
                        triangle_factor=cfg.triangle_factor, flatness_divisor=cfg.flatness_divisor,
                        balance_factor=cfg.balance_factor, set_frac=cfg.set_frac,
                        cut_balance=cfg.cut_balance, n_ref=n_ref, seed=seed)


def _mmw_config(n: int, params: OracleParams, cfg: SolverConfig, seed: int) -> MmwConfig:
    x = (1 + params.gamma) * params.sdp_alpha / n
    zeta = cfg.zeta_factor * (x + 2 * params.flow_capacity(n))
    ln = math.log(max(n, 2))
    if cfg.strict_mmw:
        base = MmwConfig.from_theory(n, params.sdp_alpha, params.gamma, zeta, seed, d=cfg.sketch_dim)
        base.adaptive_p = cfg.adaptive_p
        return base
    eps = cfg.epsilon
    if cfg.taylor_p is not None:
        p = cfg.taylor_p
    else:
        # with adaptive degrees the centred exponent sets the accuracy
        p = 12 if cfg.adaptive_p else math.ceil(10 * ln / eps)
    d = cfg.sketch_dim if cfg.sketch_dim is not None else math.ceil(40 * ln)
    return MmwConfig(eps, cfg.mmw_T, p, float(n), d, params.gamma, zeta, seed, override=True,
                     adaptive_p=cfg.adaptive_p)


def _fallback_partition(W: Embedding | None, n: int, seed: int) -> Partition:
    """Median split of a random projection (or of the labels when no iterate exists)."""
    if W is None:
        x = np.arange(n, dtype=float)
    else:
        x = W.points @ substream(seed, "fallback").standard_normal(W.d)
    order = np.argsort(x, kind="stable")
    side = np.ones(n, np.int8)
    side[order[: n // 2]] = 0
    return Partition(side)


def solve_balanced_cut(g: Graph, a: float, alpha: float, kappa: float = 1.0,
                       delta_final: float | None = None, seed: int = 0,
                       config: SolverConfig | None = None, trace=None, log=None) -> CutResult:
    """Find an Omega(a)-balanced cut of value O(alpha) on semi-random instances."""
    cfg = SolverConfig() if config is None else config
    n = g.n
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 < a < 0.5 + 1e-12:
        raise ValueError("balance a must lie in (0, 1/2]")
    if delta_final is None:
        delta_final = 1 / math.log(max(n, 3))
    if delta_final <= 0:
        raise ValueError("delta_final must be positive")
    rounds_total = min(round_count(delta_final), cfg.max_rounds)
    state = DriverState(0, np.ones(n, bool), np.zeros(g.m, bool), [], DELTA0)
    rounds = []
    exit_reason = "rounds"
    exhausted = False
    local_part = None
    local_verts = None
    local_removed_last = None
    best_seen = None
    last_W = None
    for i in range(rounds_total):
        state.i = i
        verts = np.flatnonzero(state.alive)
        if verts.size < 2:
            exit_reason = "empty"
            break
        keep = ~state.removed_edges & state.alive[g.edges[:, 0]] & state.alive[g.edges[:, 1]]
        local = np.full(n, -1, np.int64)
        local[verts] = np.arange(verts.size)
        eids = np.flatnonzero(keep)
        Gi = Graph(verts.size, local[g.edges[eids]])
        rseed = child_seed(seed, "round", i)
        params = _oracle_params(a, alpha, kappa, state.delta, verts.size / n, n, rseed, cfg)
        mcfg = _mmw_config(verts.size, params, cfg, child_seed(seed, "mmw", i))
        if cfg.strict_mmw:
            mcfg.validate(verts.size, params.sdp_alpha)
        stack = OracleStack(Gi, params, trace, use_heavy=cfg.use_heavy, weak_flow=cfg.weak_flow)
        rec = {"round": i, "delta": state.delta, "n": int(verts.size), "m": int(Gi.m),
               "mmw": {"epsilon": mcfg.epsilon, "T": mcfg.T, "p": mcfg.p, "d": mcfg.d, "zeta": mcfg.zeta}}
        try:
            res = mmw_solve(stack, mcfg, verts.size, log)
        except OracleFailure as exc:
            if not isinstance(exc.cause, OracleBreach):
                raise
            rec.update(status="breach", iterations=exc.t, error=str(exc.cause))
            rounds.append(rec)
            exhausted = True
            exit_reason = "oracle-breach"
            if stack.best.get("partition") is not None:
                best_seen = (verts, stack.best["partition"])
            break
        rec.update(iterations=res.iterations, status=res.status,
                   rescaled=int(sum(r.rescaled for r in res.records)),
                   feedback=_feedback_counts(res.records))
        last_W = res.iterate
        if stack.best.get("partition") is not None:
            best_seen = (verts, stack.best["partition"])
        if res.exhausted:
            rounds.append(rec)
            exhausted = True
            exit_reason = "mmw-exhausted"
            break
        out = res.payload
        rec["flow"] = {"kind": out.flow.kind, "cut": int(out.flow.cut), "flow": float(out.flow.flow),
                       "balance": float(out.flow.balance)}
        if out.flow.kind == "cut":
            local_part, local_verts, local_removed_last = out.flow.partition, verts, None
            rounds.append(rec)
            exit_reason = "flow-cut"
            break
        rem = out.removal
        gl_edges = eids[rem.E_star]
        state.removed_edges[gl_edges] = True
        P1, P2 = verts[rem.P1], verts[rem.P2]
        state.removed_sets.extend([s for s in (P1, P2) if s.size])
        state.alive[P1] = False
        state.alive[P2] = False
        state.budget += rem.cut_short
        rec["removal"] = {"E_star": int(rem.E_star.size), "P1": int(P1.size), "P2": int(P2.size),
                          "cut_short": int(rem.cut_short), "branch": rem.branch,
                          "balance_rule": rem.balance_rule}
        rounds.append(rec)
        if out.flow.partition is not None:
            local_part, local_verts = out.flow.partition, verts
            local_removed_last = np.concatenate([rem.P1, rem.P2])
        state.delta /= 100
    if exhausted and best_seen is not None:
        local_verts, local_part = best_seen
        local_removed_last = None
    side = np.full(n, -1, np.int64)
    if local_part is not None:
        lab = local_part.side.astype(np.int64)
        if local_removed_last is not None:
            lab = lab.copy()
            lab[local_removed_last] = -1
        side[local_verts] = lab
    groups = list(state.removed_sets)
    leftover = np.flatnonzero(side < 0)
    assigned = np.concatenate(groups) if groups else np.zeros(0, np.int64)
    stray = np.setdiff1d(leftover, assigned)
    if local_part is None:
        fb = _fallback_partition(last_W if last_W is not None and last_W.n == n else None, n, seed)
        side[stray] = fb.side[stray]
        stray = np.zeros(0, np.int64)
        if not groups:
            exit_reason = exit_reason if exhausted else "fallback"
    if stray.size:
        groups.append(stray)
    loads = np.array([np.count_nonzero(side == 0), np.count_nonzero(side == 1)])
    for grp in sorted(groups, key=lambda s: -s.size):
        free = grp[side[grp] < 0]
        if free.size == 0:
            continue
        k = 0 if loads[0] <= loads[1] else 1
        side[free] = k
        loads[k] += free.size
    part = Partition(side.astype(np.int8))
    value = cut_value(g, part)
    if best_seen is not None and best_seen[0].size == n and exit_reason != "flow-cut":
        cand = Partition(best_seen[1].side.copy())
        cval = cut_value(g, cand)
        if cval < value and cand.balance() >= a / 10:
            part, value, local_part, local_verts = cand, cval, cand, np.arange(n)
            local_removed_last = None
            state.removed_edges[:] = False
            state.budget = 0
            exit_reason = exit_reason + "+best-cut"
    bound = _oracle_params(a, alpha, kappa, DELTA0, 1.0, n, 0, cfg).accept_bound(n)
    moved = _rebalance(g, part.side, a, bound)
    if moved is not None:
        part = Partition(moved)
        value = cut_value(g, part)
        exit_reason = exit_reason + "+rebalanced"
    side = part.side.astype(np.int64)
    removed_total = int(np.count_nonzero(state.removed_edges))
    final_cut = 0
    if local_part is not None:
        alive_end = np.zeros(n, bool)
        alive_end[local_verts] = True
        if local_removed_last is not None:
            alive_end[local_verts[local_removed_last]] = False
        e = g.edges
        live = alive_end[e[:, 0]] & alive_end[e[:, 1]] & ~state.removed_edges
        final_cut = int(np.count_nonzero(live & (side[e[:, 0]] != side[e[:, 1]])))
    provenance = {"rounds": rounds, "exit": exit_reason,
                  "ledger": {"removed_long_edges": removed_total, "tripartition_cuts": int(state.budget),
                             "final_flow_cut": final_cut},
                  "accept_bound": bound}
    return CutResult(part, value, part.balance(), exhausted, float(alpha), float(a), provenance,
                     {"kappa": kappa, "delta_final": delta_final, **cfg.to_dict()}, seed)


def _rebalance(g: Graph, side: np.ndarray, a: float, bound: float) -> np.ndarray | None:
    """Greedily move cheapest vertices to the small side until it holds ceil(a n).

    Returns the new labels, or None when the partition is already a-balanced
    or the moves would push the cut above ``bound``.
    """
    n = g.n
    side = side.astype(np.int8).copy()
    target = math.ceil(a * n - 1e-9)
    small = int(np.count_nonzero(side == 1) < np.count_nonzero(side == 0))
    need = target - int(np.count_nonzero(side == small))
    if need <= 0:
        return None
    indptr, nbr = g.adjacency
    e = g.edges
    value = int(np.count_nonzero(side[e[:, 0]] != side[e[:, 1]]))
    # gain[v] = change in cut when v switches sides
    same = np.zeros(n, np.int64)
    np.add.at(same, e[:, 0], side[e[:, 0]] == side[e[:, 1]])
    np.add.at(same, e[:, 1], side[e[:, 0]] == side[e[:, 1]])
    deg = g.degrees
    for _ in range(need):
        cand = np.flatnonzero(side != small)
        gain = same[cand] - (deg[cand] - same[cand])
        v = int(cand[np.argmin(gain)])
        value += int(gain.min())
        side[v] = small
        nb = nbr[indptr[v]:indptr[v + 1]]
        now_same = side[nb] == small
        same[nb] += np.where(now_same, 1, -1)
        same[v] = int(np.count_nonzero(now_same))
    return side if value <= bound else None


def _feedback_counts(records) -> dict:
    out: dict[str, int] = {}
    for r in records:
        if r.verdict == "no":
            out[r.source] = out.get(r.source, 0) + 1
    return dict(sorted(out.items()))


def estimate_alpha(g: Graph, a: float, seed: int = 0, config: SolverConfig | None = None,
                   kappa: float = 1.0) -> tuple[float, CutResult | None]:
    """Geometric search over alpha = m, m/2, m/4, ... keeping the smallest that works."""
    cfg = SolverConfig() if config is None else config
    if g.m == 0:
        res = solve_balanced_cut(g, a, 1.0, kappa, seed=seed, config=cfg) if g.n >= 2 else None
        return 0.0, res
    best_alpha, best = float(g.m), None
    alpha = float(g.m)
    step = 0
    while alpha >= 1:
        res = solve_balanced_cut(g, a, alpha, kappa, seed=child_seed(seed, "alpha", step), config=cfg)
        bound = res.provenance["accept_bound"]
        if res.exhausted or res.value > bound or res.balance < a / 10:
            break
        best_alpha, best = alpha, res
        if res.value == 0:
            # a zero cut meets every bound further down the grid
            while alpha / 2 >= 1:
                alpha /= 2
            best_alpha = alpha
            break
        alpha /= 2
        step += 1
    if best is None:
        best = solve_balanced_cut(g, a, float(g.m), kappa, seed=seed, config=cfg)
    return best_alpha, best
