import io
import json
import math

import numpy as np
import pytest

from semicut.embedding import Embedding, GaussianSketch
from semicut.graph_core import LapOperator, LapTerm
from semicut.mmw_engine import (FeedbackMatrix, MmwConfig, OracleFailure, OracleVerdict, centered_exponent,
                                eigenvalue_regret_check, mmw_solve, next_iterate, normalize_feedback,
                                taylor_exp_apply)
from semicut.refcheck import dense_expm, dense_mmw_iterates, power_iteration_norm
from semicut.rng import child_seed


def random_feedback(rng, n, n_pairs=20, n_triples=5):
    pairs = np.array([rng.choice(n, 2, replace=False) for _ in range(n_pairs)])
    triples = np.array([rng.choice(n, 3, replace=False) for _ in range(n_triples)])
    return FeedbackMatrix(n, pairs, rng.normal(size=n_pairs), triples, rng.normal(size=n_triples),
                          ident=float(rng.normal()))


def res_seed(cfg, t):
    return child_seed(cfg.seed, "iterate", t)


def _cfg(n, **kw):
    base = dict(epsilon=0.3, T=20, p=40, r=float(n), d=400, gamma=0.1, zeta=1.0, seed=0, override=True)
    base.update(kw)
    return MmwConfig(**base)


# ----------------------------------------------------------- FeedbackMatrix


def test_width_bound_dominates_norm(rng):
    for _ in range(10):
        fb = random_feedback(rng, 30)
        M = fb.to_dense()
        assert np.allclose(M, M.T)
        assert np.linalg.norm(M, 2) <= fb.width_bound + 1e-9
        est = power_iteration_norm(fb.matvec, 30, seed=1)
        assert est <= fb.width_bound + 1e-6


def test_terms_round_trip(rng):
    fb = random_feedback(rng, 12)
    fb2 = FeedbackMatrix.from_terms(12, fb.terms())
    assert np.allclose(fb.to_dense(), fb2.to_dense())
    assert fb2.term_count == fb.term_count


def test_inner_matches_dense(rng):
    fb = random_feedback(rng, 15)
    W = Embedding(rng.normal(size=(4, 15)))
    assert fb.inner(W) == pytest.approx(float(np.sum(fb.to_dense() * W.gram())))


# ---------------------------------------------------------- normalisation


def test_normalize_zero_and_identity():
    zero = FeedbackMatrix(5, ident=0.0, width_bound=2.0)
    assert np.allclose(normalize_feedback(zero).to_dense(), np.eye(5) / 2)
    full = FeedbackMatrix(5, ident=2.0, width_bound=2.0)
    assert np.allclose(normalize_feedback(full).to_dense(), np.eye(5))
    with pytest.raises(ValueError):
        normalize_feedback(FeedbackMatrix(5, ident=0.0, width_bound=0.0))


def test_normalized_spectrum_in_unit_interval(rng):
    for _ in range(20):
        fb = random_feedback(rng, int(rng.integers(4, 65)))
        lam = np.linalg.eigvalsh(normalize_feedback(fb).to_dense())
        assert lam[0] >= -1e-12 and lam[-1] <= 1 + 1e-12
        # rescaled into a smaller width keeps the same guarantee
        lam = np.linalg.eigvalsh(normalize_feedback(fb, fb.width_bound / 3).to_dense())
        assert lam[0] >= -1e-12 and lam[-1] <= 1 + 1e-12


# ------------------------------------------------------------------ Taylor


def test_taylor_empty_is_identity(rng):
    v = rng.normal(size=6)
    assert np.array_equal(taylor_exp_apply([], 0.5, 5, v), v)
    with pytest.raises(ValueError):
        taylor_exp_apply([], 0.5, 0, v)


def test_taylor_diagonal():
    Y = LapOperator.from_terms(2, [LapTerm.diagonal(np.array([math.log(2), 0.0]))])
    v = np.array([1.0, 1.0])
    assert np.allclose(taylor_exp_apply([Y], 2.0, 30, v), [2.0, 1.0], atol=1e-9)


def test_taylor_matches_dense_expm(rng):
    n, eps = 32, 0.3
    p = math.ceil(10 * math.log(n) / eps)
    Ys = [normalize_feedback(random_feedback(rng, n)) for _ in range(8)]
    S = sum(y.to_dense() for y in Ys)
    P = taylor_exp_apply(Ys, eps, p, np.eye(n))
    assert np.linalg.norm(P - dense_expm(eps / 2 * S), 2) <= 1e-6


def test_taylor_truncation_bound(rng):
    n = 20
    Y = normalize_feedback(random_feedback(rng, n))
    A = Y.to_dense()
    for p in (2, 4, 8):
        s = np.linalg.norm(A, 2) / 2  # epsilon = 1, argument A/2
        err = np.linalg.norm(taylor_exp_apply([Y], 1.0, p, np.eye(n)) - dense_expm(A / 2), 2)
        assert err <= s ** (p + 1) / math.factorial(p + 1) * math.exp(s) + 1e-12


def test_centered_exponent_same_direction(rng):
    n = 24
    Ys = [normalize_feedback(random_feedback(rng, n)) for _ in range(30)]
    A = Ys[0]
    for y in Ys[1:]:
        A = A + y
    cfg = _cfg(n, epsilon=1.0, p=12)
    B, deg = centered_exponent(A, cfg)
    E = dense_expm(A.to_dense() / 2)
    F = taylor_exp_apply(B, 1.0, deg, np.eye(n))
    # equal up to the scalar exp(-c/2), which the iterate normalisation removes
    assert np.allclose(F / np.linalg.norm(F), E / np.linalg.norm(E), atol=1e-9)


# ---------------------------------------------------------------- iterates


def test_first_iterate_is_scaled_sketch():
    n = 16
    cfg = _cfg(n, d=30)
    W = next_iterate(None, cfg, sketch_seed=3, n=n)
    assert W.vectors.shape == (30, n)
    assert float(np.sum(W.vectors ** 2)) == pytest.approx(n)
    phi = GaussianSketch(30, 3).matrix(n)
    assert np.allclose(W.vectors / np.linalg.norm(W.vectors), phi / np.linalg.norm(phi))


def test_iterate_matches_dense_solution(rng):
    n = 40
    cfg = _cfg(n, d=4000, epsilon=0.5)
    Ys = [normalize_feedback(random_feedback(rng, n)) for _ in range(5)]
    W = next_iterate(Ys, cfg, sketch_seed=11, n=n)
    X = dense_mmw_iterates([y.to_dense() for y in Ys] + [np.zeros((n, n))], 0.5)[-1] * n
    G = W.gram()
    pairs = [rng.choice(n, 2, replace=False) for _ in range(20)]
    for i, j in pairs:
        dX = X[i, i] + X[j, j] - 2 * X[i, j]
        dG = G[i, i] + G[j, j] - 2 * G[i, j]
        assert abs(dG - dX) <= 0.15 * dX + 1e-9


def test_iterate_deterministic(rng):
    n = 20
    Ys = [normalize_feedback(random_feedback(rng, n)) for _ in range(3)]
    a = next_iterate(Ys, _cfg(n), 5, n)
    b = next_iterate(Ys, _cfg(n), 5, n)
    assert np.array_equal(a.vectors, b.vectors)


# ------------------------------------------------------------------- loop


def test_always_yes_returns_first_iterate():
    n = 10
    res = mmw_solve(lambda W, t: OracleVerdict.yes("done"), _cfg(n), n)
    assert res.status == "yes" and res.iterations == 1 and res.payload == "done"
    assert np.array_equal(res.iterate.vectors, next_iterate(None, _cfg(n), res_seed(_cfg(n), 1), n).vectors)


def test_identity_feedback_exhausts_and_stays_isotropic():
    n = 12
    cfg = _cfg(n, T=8, zeta=1.0, d=30)
    fb = FeedbackMatrix(n, ident=-1.0, width_bound=1.0)
    out = io.StringIO()
    res = mmw_solve(lambda W, t: OracleVerdict.no(fb), cfg, n, log=out)
    assert res.exhausted and res.iterations == 8
    # exp of multiples of Id normalises away: the iterate is the scaled sketch
    W = res.iterate
    phi = next_iterate(None, cfg, res_seed(cfg, 8), n)
    assert np.allclose(W.vectors, phi.vectors)
    lines = [json.loads(s) for s in out.getvalue().splitlines()]
    assert [ln["t"] for ln in lines] == list(range(1, 9))
    assert set(lines[0]) == {"t", "verdict", "dual_value", "wallclock_ms", "feedback_term_count"}


def test_oracle_failure_carries_iteration():
    def boom(W, t):
        if t == 3:
            raise RuntimeError("bad")
        return OracleVerdict.no(FeedbackMatrix(4, ident=-1.0))

    with pytest.raises(OracleFailure) as info:
        mmw_solve(boom, _cfg(4, T=5), 4)
    assert info.value.t == 3


def test_config_coupling():
    cfg = MmwConfig.from_theory(100, alpha=50, gamma=0.1, zeta=2.0)
    assert cfg.violations(100, 50) == []
    cfg.validate(100, 50)
    bad = MmwConfig(1.0, 5, 3, 100.0, 10, 0.1, 2.0)
    assert len(bad.violations(100, 50)) == 3
    with pytest.raises(ValueError):
        bad.validate(100, 50)
    bad.override = True
    bad.validate(100, 50)


# --------------------------------------------------------------- regret


def test_regret_trivial_cases():
    n = 8
    assert eigenvalue_regret_check([np.eye(n) / 2], [np.eye(n) / n], 0.3)
    T = 10
    Ys = [np.eye(n)] * T
    Xs = dense_mmw_iterates(Ys, 0.3)
    assert eigenvalue_regret_check(Ys, Xs, 0.3)


def test_regret_random_contractions(rng):
    n, T = 32, 50
    for eps in (0.1, 0.3):
        Ys = []
        for _ in range(T):
            Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
            Ys.append((Q * rng.random(n)) @ Q.T)
        assert eigenvalue_regret_check(Ys, dense_mmw_iterates(Ys, eps), eps)


def test_regret_rejects_mismatch():
    with pytest.raises(ValueError):
        eigenvalue_regret_check([np.eye(2)], [], 0.1)
