"""Approximate matrix multiplicative weights.

The iterate at step t is the sketched square root of
exp((eps/2) * sum_{t' < t} Y_t'), with each Y = (M + zeta Id) / (2 zeta) built
from an oracle's feedback matrix M.  The exponential is replaced by its
degree-p Taylor polynomial and applied to a fresh Gaussian sketch with
repeated matvecs; X itself is never formed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .embedding import Embedding, GaussianSketch, default_dim
from .graph_core import LapOperator, LapTerm
from .rng import child_seed


class NumericalFailure(RuntimeError):
    """Iterate normalisation broke down (zero or non-finite trace)."""


class OracleFailure(RuntimeError):
    """An oracle raised during the loop; carries the iteration index."""

    def __init__(self, t: int, cause: BaseException):
        super().__init__(f"oracle failed at iteration {t}: {cause}")
        self.t = t
        self.cause = cause


@dataclass
class FeedbackMatrix:
    """Symmetric feedback M as a sum of Laplacian-family terms.

    Terms are kept in batched arrays: weighted vertex pairs (edge
    Laplacians), weighted path triples, an optional diagonal, complete-graph
    terms K_S with weights, and an identity coefficient.
    """

    n: int
    pairs: np.ndarray | None = None
    pair_w: np.ndarray | None = None
    triples: np.ndarray | None = None
    triple_w: np.ndarray | None = None
    diag: np.ndarray | None = None
    complete: list = field(default_factory=list)
    ident: float = 0.0
    dual_value: float = 0.0
    width_bound: float | None = None
    source: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.width_bound is None:
            self.width_bound = self.op.norm_bound()

    @property
    def op(self) -> LapOperator:
        cached = self.__dict__.get("_op")
        if cached is None:
            cached = LapOperator.build(self.n, self.pairs, self.pair_w, self.triples, self.triple_w,
                                       self.diag, self.complete, self.ident)
            self.__dict__["_op"] = cached
        return cached

    @classmethod
    def from_terms(cls, n: int, terms: Sequence[LapTerm], **kw) -> "FeedbackMatrix":
        pairs, pw, triples, tw, comp = [], [], [], [], []
        diag = np.zeros(n)
        ident = 0.0
        for t in terms:
            if t.kind == "edge":
                pairs.append((t.i, t.j))
                pw.append(t.weight)
            elif t.kind == "triple":
                triples.append((t.i, t.j, t.k))
                tw.append(t.weight)
            elif t.kind == "complete":
                comp.append((t.vertices, t.weight))
            elif t.kind == "diagonal":
                diag += t.weight * t.vector
            elif t.kind == "identity":
                ident += t.weight * t.scale
        return cls(n,
                   np.array(pairs, np.int64).reshape(-1, 2) if pairs else None,
                   np.array(pw) if pw else None,
                   np.array(triples, np.int64).reshape(-1, 3) if triples else None,
                   np.array(tw) if tw else None,
                   diag if diag.any() else None, comp, ident, **kw)

    def terms(self) -> list[LapTerm]:
        out: list[LapTerm] = []
        if self.pairs is not None:
            w = np.broadcast_to(1.0 if self.pair_w is None else self.pair_w, (len(self.pairs),))
            out += [LapTerm.edge(i, j, wt) for (i, j), wt in zip(self.pairs.tolist(), w.tolist())]
        if self.triples is not None:
            w = np.broadcast_to(1.0 if self.triple_w is None else self.triple_w, (len(self.triples),))
            out += [LapTerm.triple(i, j, k, wt) for (i, j, k), wt in zip(self.triples.tolist(), w.tolist())]
        if self.diag is not None:
            out.append(LapTerm.diagonal(self.diag))
        out += [LapTerm.complete(s, w) for s, w in self.complete]
        if self.ident:
            out.append(LapTerm.identity(self.ident))
        return out

    @property
    def term_count(self) -> int:
        c = 0 if self.pairs is None else len(self.pairs)
        c += 0 if self.triples is None else len(self.triples)
        c += int(self.diag is not None) + len(self.complete) + int(self.ident != 0)
        return c

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.op.matvec(x)

    def inner(self, W: Embedding) -> float:
        """<M, W^T W>."""
        return self.op.quad(W.points)

    def to_dense(self) -> np.ndarray:
        return self.op.to_dense()


@dataclass
class OracleVerdict:
    """Either Yes(payload) or No(feedback)."""

    tag: str
    payload: Any = None
    feedback: FeedbackMatrix | None = None

    @classmethod
    def yes(cls, payload=None) -> "OracleVerdict":
        return cls("yes", payload=payload)

    @classmethod
    def no(cls, feedback: FeedbackMatrix) -> "OracleVerdict":
        return cls("no", feedback=feedback)

    @property
    def is_yes(self) -> bool:
        return self.tag == "yes"


@dataclass
class MmwConfig:
    """Solver parameters.

    ``override`` disables the parameter coupling checks of the regret
    analysis; ``adaptive_p`` raises the Taylor degree when the accumulated
    exponent grows beyond what ``p`` resolves.
    """

    epsilon: float
    T: int
    p: int
    r: float
    d: int
    gamma: float
    zeta: float
    seed: int = 0
    override: bool = False
    adaptive_p: bool = True

    @classmethod
    def from_theory(cls, n: int, alpha: float, gamma: float, zeta: float, seed: int = 0,
                    r: float | None = None, d: int | None = None) -> "MmwConfig":
        """Smallest parameters meeting eps <= gamma alpha/(2 zeta r), T >= 2 ln n/eps^2, p >= 10 ln n/eps."""
        r = float(n if r is None else r)
        eps = min(1.0, gamma * alpha / (2 * zeta * r))
        ln = math.log(max(n, 2))
        return cls(eps, math.ceil(2 * ln / eps**2), math.ceil(10 * ln / eps), r,
                   default_dim(n) if d is None else d, gamma, zeta, seed)

    def violations(self, n: int, alpha: float) -> list[str]:
        ln = math.log(max(n, 2))
        out = []
        if self.epsilon > self.gamma * alpha / (2 * self.zeta * self.r) * (1 + 1e-12):
            out.append("epsilon > gamma*alpha/(2*zeta*r)")
        if self.T < 2 * ln / self.epsilon**2:
            out.append("T < 2 ln n / epsilon^2")
        if self.p < 10 * ln / self.epsilon:
            out.append("p < 10 ln n / epsilon")
        return out

    def validate(self, n: int, alpha: float) -> None:
        if self.zeta <= 0 or self.epsilon <= 0 or self.T < 1 or self.p < 1 or self.d < 1:
            raise ValueError("MMW parameters must be positive")
        bad = self.violations(n, alpha)
        if bad and not self.override:
            raise ValueError("MMW parameters violate the regret coupling: " + "; ".join(bad)
                             + " (set override=True to run anyway)")


def normalize_feedback(fb: FeedbackMatrix, zeta: float | None = None) -> LapOperator:
    """Y = (M + zeta Id) / (2 zeta).

    With an explicit ``zeta`` smaller than the feedback's declared width, M is
    first scaled down to width ``zeta`` so that 0 <= Y <= Id still holds.
    """
    z = fb.width_bound if zeta is None else float(zeta)
    if not z > 0:
        raise ValueError("width bound zeta must be positive")
    op = fb.op
    if fb.width_bound > z:
        op = op.scaled(z / fb.width_bound)
    return op.scaled(1.0 / (2 * z)).shifted(0.5)


def _merge(Yops) -> LapOperator | None:
    if Yops is None or isinstance(Yops, LapOperator):
        return Yops
    acc = None
    for y in Yops:
        acc = y if acc is None else acc + y
    return acc


def taylor_exp_apply(Yops, epsilon: float, p: int, v: np.ndarray) -> np.ndarray:
    """P_{<=p}((eps/2) sum Y) v by Horner's rule (p matvecs of the summed operator)."""
    if p < 1:
        raise ValueError("Taylor degree must be at least 1")
    A = _merge(Yops)
    v = np.asarray(v, float)
    if A is None:
        return v.copy()
    h = epsilon / 2
    out = v.copy()
    for i in range(p, 0, -1):
        out = v + (h / i) * A.matvec(out)
    return out


def taylor_degree(cfg: MmwConfig, t: int) -> int:
    """Worst-case degree at iteration t (t-1 feedback terms accumulated)."""
    if not cfg.adaptive_p:
        return cfg.p
    s = cfg.epsilon * (t - 1) / 2
    return max(cfg.p, math.ceil(math.e * s) + 10)


def centered_exponent(A: LapOperator, cfg: MmwConfig) -> tuple[LapOperator, int]:
    """Shift A by the midpoint of its spectral interval and pick the degree.

    exp(h(A - cI)) = exp(-hc) exp(hA), so the shift cancels in the iterate's
    normalisation while the Taylor argument's norm is halved or better.
    """
    lo, hi = A.gershgorin_interval()
    c = (lo + hi) / 2
    rho = cfg.epsilon / 2 * (hi - lo) / 2
    if not cfg.adaptive_p:
        return A.shifted(-c), cfg.p
    return A.shifted(-c), max(cfg.p, math.ceil(math.e * rho) + 10)


def next_iterate(Yops, cfg: MmwConfig, sketch_seed: int, n: int, p: int | None = None) -> Embedding:
    """Sketched iterate W = sqrt(r) Phi P / ||Phi P||_F with a fresh Phi.

    With ``p`` omitted the exponent is centred and the degree chosen from its
    spectral interval; an explicit ``p`` evaluates the plain polynomial.
    """
    phi = GaussianSketch(cfg.d, sketch_seed).matrix(n)
    A = _merge(Yops)
    if A is None:
        Wt = phi.T.copy()
    elif p is None:
        B, deg = centered_exponent(A, cfg)
        Wt = taylor_exp_apply(B, cfg.epsilon, deg, phi.T)
    else:
        Wt = taylor_exp_apply(A, cfg.epsilon, p, phi.T)
    fro2 = float(np.einsum("ij,ij->", Wt, Wt))
    if not np.isfinite(fro2) or fro2 <= 0:
        raise NumericalFailure(f"iterate normalisation failed (||Phi P||_F^2 = {fro2})")
    W = Wt.T * math.sqrt(cfg.r / fro2)
    return Embedding(np.ascontiguousarray(W), cfg.r)


@dataclass
class IterationRecord:
    t: int
    verdict: str
    dual_value: float = 0.0
    feedback_term_count: int = 0
    width_bound: float = 0.0
    rescaled: bool = False
    inner: float = 0.0
    source: str = ""
    taylor_degree: int = 0


@dataclass
class MmwResult:
    status: str  # "yes" or "exhausted"
    payload: Any
    iterate: Embedding | None
    iterations: int
    records: list[IterationRecord]

    @property
    def exhausted(self) -> bool:
        return self.status != "yes"

    def diagnostics(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def mmw_solve(oracle: Callable[[Embedding, int], OracleVerdict], cfg: MmwConfig, n: int,
              log=None) -> MmwResult:
    """Run the approximate MMW loop until the oracle says Yes or T iterations pass.

    ``oracle(W, t)`` receives the sketched iterate.  ``log`` is an optional text
    stream receiving one JSON line per iteration.
    """
    acc: LapOperator | None = None
    records: list[IterationRecord] = []
    W = None
    for t in range(1, cfg.T + 1):
        t0 = time.perf_counter()
        deg = cfg.p if acc is None else centered_exponent(acc, cfg)[1]
        W = next_iterate(acc, cfg, child_seed(cfg.seed, "iterate", t), n)
        try:
            verdict = oracle(W, t)
        except Exception as exc:
            raise OracleFailure(t, exc) from exc
        rec = IterationRecord(t, verdict.tag, taylor_degree=deg)
        if verdict.is_yes:
            records.append(rec)
            _log_line(log, rec, t0)
            return MmwResult("yes", verdict.payload, W, t, records)
        fb = verdict.feedback
        rec.dual_value = float(fb.dual_value)
        rec.feedback_term_count = fb.term_count
        rec.width_bound = float(fb.width_bound)
        rec.rescaled = bool(fb.width_bound > cfg.zeta)
        rec.inner = fb.inner(W)
        rec.source = fb.source
        records.append(rec)
        Y = normalize_feedback(fb, cfg.zeta)
        acc = Y if acc is None else acc + Y
        _log_line(log, rec, t0)
    return MmwResult("exhausted", None, W, cfg.T, records)


def _log_line(log, rec: IterationRecord, t0: float) -> None:
    if log is None:
        return
    line = {"t": rec.t, "verdict": rec.verdict, "dual_value": rec.dual_value,
            "wallclock_ms": round(1000 * (time.perf_counter() - t0), 3),
            "feedback_term_count": rec.feedback_term_count}
    log.write(json.dumps(line) + "\n")


def _dense(y) -> np.ndarray:
    if isinstance(y, np.ndarray):
        return y
    return y.to_dense()


def regret_terms(Ys, Xs, epsilon: float) -> tuple[float, float]:
    """(lambda_max(sum Y), (1+eps) sum <Y_t, X_t> + ln n / eps)."""
    Yd = [_dense(y) for y in Ys]
    n = Yd[0].shape[0]
    total = np.sum(Yd, axis=0)
    lhs = float(np.linalg.eigvalsh((total + total.T) / 2)[-1])
    inner = sum(float(np.sum(y * x)) for y, x in zip(Yd, Xs))
    return lhs, (1 + epsilon) * inner + math.log(n) / epsilon


def eigenvalue_regret_check(Ys, Xs, epsilon: float, tol: float = 1e-9) -> bool:
    """Check lambda_max(sum Y) < (1+eps) sum <Y_t, X_t> + ln n / eps."""
    if len(Ys) != len(Xs) or not Ys:
        raise ValueError("need matching non-empty lists of feedbacks and iterates")
    lhs, rhs = regret_terms(Ys, Xs, epsilon)
    return lhs < rhs + tol
