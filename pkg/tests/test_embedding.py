import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicut.embedding import (Embedding, GaussianSketch, default_dim, edge_sqdists, flat_set, objective,
                               planted_embedding, read_embedding, sketch_apply, spread, sqdist,
                               triangle_violation, write_embedding)
from semicut.graph_core import LapTerm, quadform

from conftest import random_graph


def _rand_embedding(rng, d, n):
    return Embedding(rng.normal(size=(d, n)))


def test_sqdist_basic(rng):
    W = Embedding.from_points(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert sqdist(W, 0, 0) == 0
    assert sqdist(W, 0, 1) == pytest.approx(4.0)
    R = _rand_embedding(rng, 5, 7)
    for i, j in [(0, 3), (2, 6), (5, 1)]:
        assert sqdist(R, i, j) == pytest.approx(quadform(LapTerm.edge(i, j), R), abs=1e-9)


def test_objective(rng):
    g = random_graph(20, 0.3, rng)
    assert objective(g, Embedding(np.ones((3, 20)))) == 0
    side = rng.integers(0, 2, 20)
    cut = int(np.sum(side[g.edges[:, 0]] != side[g.edges[:, 1]]))
    assert objective(g, planted_embedding(side)) == pytest.approx(4 * cut)
    W = _rand_embedding(rng, 4, 20)
    assert objective(g, W) == pytest.approx(sum(quadform(LapTerm.edge(i, j), W) for i, j in g.edges))
    with pytest.raises(ValueError):
        edge_sqdists(g, _rand_embedding(rng, 4, 21))


def test_spread_examples():
    assert spread(Embedding(np.ones((2, 6)))) == 0
    W = Embedding.from_points(np.array([[1.0], [-1.0]]))
    assert spread(W) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        spread(W, [])


@given(st.integers(1, 50), st.integers(1, 6), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_spread_matches_double_loop(k, d, seed):
    rng = np.random.default_rng(seed)
    W = _rand_embedding(rng, d, 60)
    S = rng.choice(60, k, replace=False)
    naive = sum(sqdist(W, i, j) for i in S for j in S)
    assert spread(W, S) == pytest.approx(naive, rel=1e-6, abs=1e-9)


def test_planted_witness_properties(rng):
    side = np.array([0] * 12 + [1] * 8)
    W = planted_embedding(side)
    assert spread(W) == pytest.approx(8 * 12 * 8)
    assert flat_set(W).size == 0
    for _ in range(50):
        i, j, k = rng.choice(20, 3, replace=False)
        assert triangle_violation(W, i, j, k) >= 0


def test_flat_set():
    assert flat_set(Embedding(np.eye(3))).size == 0
    v = np.eye(3)
    v[:, 1] *= np.sqrt(5)
    assert flat_set(Embedding(v)).tolist() == [1]


def test_triangle_violation(rng):
    line = Embedding.from_points(np.array([[0.0], [1.0], [2.0]]))
    assert triangle_violation(line, 0, 1, 2) == pytest.approx(-2.0)
    W = _rand_embedding(rng, 3, 5)
    assert triangle_violation(W, 0, 2, 4) == pytest.approx(quadform(LapTerm.triple(0, 2, 4), W))
    with pytest.raises(ValueError):
        triangle_violation(W, 1, 2, 1)
    dup = Embedding.from_points(np.array([[0.0], [0.0], [3.0]]))
    assert triangle_violation(dup, 0, 1, 2) >= 0


def test_embedding_rejects_bad_input():
    with pytest.raises(ValueError):
        Embedding(np.array([1.0, np.nan])[None, :] * np.ones((2, 1)))
    with pytest.raises(ValueError):
        Embedding(np.ones(3))


def test_sketch_zero_and_linearity(rng):
    S = GaussianSketch(30, seed=4)
    assert np.allclose(sketch_apply(S, np.zeros((50, 3))), 0)
    x, y = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    assert np.allclose(sketch_apply(S, x + y), sketch_apply(S, x) + sketch_apply(S, y), atol=1e-9)
    # the first columns do not depend on how many are requested
    assert np.array_equal(S.matrix(3000)[:, :10], GaussianSketch(30, 4).matrix(10))
    assert np.array_equal(sketch_apply(S, x), sketch_apply(GaussianSketch(30, 4), x))


def test_sketch_norm_concentration():
    u = np.zeros(64)
    u[3] = 1.0
    ok = 0
    for seed in range(1000):
        r = np.linalg.norm(sketch_apply(GaussianSketch(800, seed), u))
        ok += 0.75 < r < 1.25
    assert ok / 1000 >= 0.99


def test_sketch_unbiased():
    rng = np.random.default_rng(0)
    u = rng.normal(size=40)
    vals = [np.sum(sketch_apply(GaussianSketch(20, s), u) ** 2) for s in range(2000)]
    # ||Phi u||^2 is ||u||^2 chi^2_d / d, relative sd sqrt(2/d)
    se = np.sqrt(2 / 20) * (u @ u) / np.sqrt(2000)
    assert abs(np.mean(vals) - u @ u) <= 4 * se


def test_sketch_preserves_pairwise_distances():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(100, 300))
    iu = np.triu_indices(100, 1)
    orig = np.sum((pts[iu[0]] - pts[iu[1]]) ** 2, axis=1)

    def distortion(d, seed):
        P = sketch_apply(GaussianSketch(d, seed), pts.T).T
        return np.abs(np.sum((P[iu[0]] - P[iu[1]]) ** 2, axis=1) / orig - 1)

    # per pair at d = 200: chi-square tail gives about 0.3% outside +-30%
    pair_fail = np.mean([np.mean(distortion(200, s) > 0.3) for s in range(20)])
    assert pair_fail <= 0.01
    # all 4950 pairs at once needs d near 600 for a 1% failure rate
    set_fail = np.mean([np.any(distortion(600, s) > 0.3) for s in range(100)])
    assert set_fail <= 0.01 + 3 * np.sqrt(0.01 * 0.99 / 100)


def test_default_dim():
    assert default_dim(1000) == int(np.ceil(40 * np.log(1000)))


def test_embedding_file_round_trip(tmp_path, rng):
    W = Embedding(rng.normal(size=(3, 5)), 5.0)
    write_embedding(W, tmp_path / "w.txt")
    back = read_embedding(tmp_path / "w.txt")
    assert np.array_equal(back.vectors, W.vectors) and back.trace_scale == 5.0
