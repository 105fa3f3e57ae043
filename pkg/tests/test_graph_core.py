import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicut.embedding import Embedding
from semicut.graph_core import (Graph, LapOperator, LapTerm, Partition, cut_edges, cut_value,
                                flow_demands, flow_path_decompose, lapterm_matvec, max_flow_dregular,
                                quadform, read_edge_list, read_partition, write_edge_list,
                                write_partition)
from semicut.refcheck import densify

from conftest import complete_graph, k22, random_graph


# ------------------------------------------------------------------ Graph


def test_graph_canonical_order():
    g = Graph(4, [(3, 1), (0, 2), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 3]]
    assert g.m == 3


def test_graph_rejects_loops_duplicates_range():
    with pytest.raises(ValueError):
        Graph(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 3)])


def test_graph_simplify_drops_loops_and_duplicates():
    g = Graph(3, [(0, 1), (1, 0), (2, 2), (1, 2)], simplify=True)
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_adjacency_symmetric(rng):
    g = random_graph(30, 0.2, rng)
    for i in range(g.n):
        for j in g.neighbors(i):
            assert i in g.neighbors(j)
    assert g.degrees.sum() == 2 * g.m


def test_edge_ids_and_subgraphs():
    g = complete_graph(5)
    ids = g.edge_ids([0, 4, 2], [1, 3, 2])
    assert ids[0] >= 0 and ids[1] >= 0 and ids[2] == -1
    sub, verts = g.induced_subgraph([1, 3, 4])
    assert sub.n == 3 and sub.m == 3 and verts.tolist() == [1, 3, 4]
    keep = np.zeros(g.m, bool)
    keep[:2] = True
    assert g.edge_subgraph(keep).m == 2


def test_laplacian_matches_dense():
    g = k22()
    L = g.laplacian().toarray()
    assert np.allclose(L.sum(axis=1), 0)
    assert np.allclose(np.diag(L), 2)


# -------------------------------------------------------------- cut_value


def test_cut_value_triangle():
    g = complete_graph(3)
    assert cut_value(g, Partition.from_sets(3, [0])) == 2


def test_cut_value_all_same_side(rng):
    g = random_graph(12, 0.5, rng)
    assert cut_value(g, Partition(np.zeros(12, np.int8))) == 0


def test_cut_value_k22_planted(k22_graph, k22_planted):
    assert cut_value(k22_graph, k22_planted) == 4
    assert cut_edges(k22_graph, k22_planted).shape[0] == 4


def test_cut_value_size_mismatch():
    with pytest.raises(ValueError):
        cut_value(complete_graph(3), Partition(np.zeros(4, np.int8)))


def test_partition_from_sets_and_balance():
    p = Partition.from_sets(5, [0, 1])
    assert p.counts.tolist() == [2, 3]
    assert p.balance() == pytest.approx(0.4)
    with pytest.raises(ValueError):
        Partition.from_sets(4, [0, 1], [1, 2, 3])


# ---------------------------------------------------------------- LapTerm


def test_matvec_edge():
    assert np.allclose(lapterm_matvec(LapTerm.edge(0, 1), np.array([1.0, 0, 0])), [1, -1, 0])


def test_matvec_complete_kills_constants():
    t = LapTerm.complete([0, 1, 2])
    assert np.allclose(lapterm_matvec(t, np.full(3, 7.0)), 0)


def test_matvec_triple():
    t = LapTerm.triple(0, 1, 2)
    assert np.allclose(lapterm_matvec(t, np.array([1.0, 0, 0])), [0, -1, 1])


def test_triple_needs_distinct():
    with pytest.raises(ValueError):
        LapTerm.triple(0, 1, 0)


@given(st.integers(3, 9), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_laplacian_terms_annihilate_constants(n, seed):
    rng = np.random.default_rng(seed)
    i, j, k = rng.choice(n, 3, replace=False)
    c = float(rng.normal())
    for t in (LapTerm.edge(i, j, 2.5), LapTerm.triple(i, j, k, -1.5),
              LapTerm.complete(rng.choice(n, 3, replace=False), 0.7)):
        assert np.allclose(lapterm_matvec(t, np.full(n, c)), 0)


@given(st.integers(3, 9), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_matvec_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    i, j, k = (int(x) for x in rng.choice(n, 3, replace=False))
    terms = [LapTerm.edge(i, j, 1.3), LapTerm.triple(i, j, k, 0.4),
             LapTerm.complete(rng.choice(n, 4 if n > 3 else 3, replace=False), 0.9),
             LapTerm.diagonal(rng.normal(size=n)), LapTerm.identity(2.0)]
    x = rng.normal(size=n)
    for t in terms:
        assert np.allclose(lapterm_matvec(t, x), densify([t], n) @ x)
    op = LapOperator.from_terms(n, terms)
    assert np.allclose(op.matvec(x), densify(terms, n) @ x)
    assert np.allclose(op.to_dense(), densify(terms, n))


def test_quadform_examples():
    W = Embedding.from_points(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))
    assert quadform(LapTerm.edge(0, 1), W) == pytest.approx(0.0)
    line = Embedding.from_points(np.array([[0.0], [1.0], [2.0]]))
    assert quadform(LapTerm.triple(0, 1, 2), line) == pytest.approx(-2.0)
    side = np.array([0, 0, 0, 1, 1])
    pts = np.where(side == 0, 1.0, -1.0)[:, None]
    assert quadform(LapTerm.complete(range(5)), Embedding.from_points(pts)) == pytest.approx(3 * 2 * 4)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_quadform_edge_nonnegative(seed):
    rng = np.random.default_rng(seed)
    W = Embedding(rng.normal(size=(4, 6)))
    assert quadform(LapTerm.edge(1, 4), W) >= 0


def test_operator_gershgorin_contains_spectrum(rng):
    n = 12
    terms = [LapTerm.edge(0, 5, -2.0), LapTerm.triple(1, 2, 3, 0.5), LapTerm.complete([4, 6, 7], 1.5),
             LapTerm.identity(0.3)]
    op = LapOperator.from_terms(n, terms)
    lam = np.linalg.eigvalsh(op.to_dense())
    lo, hi = op.gershgorin_interval()
    assert lo <= lam[0] + 1e-12 and lam[-1] <= hi + 1e-12
    assert np.abs(lam).max() <= op.norm_bound() + 1e-12


# --------------------------------------------------------------- max flow


def test_flow_single_edge():
    f = max_flow_dregular(Graph(2, [(0, 1)]), [0], [1], 5)
    assert f.value == pytest.approx(1.0)
    paths = flow_path_decompose(f)
    assert len(paths) == 1 and paths[0][1] == pytest.approx(1.0)


def test_flow_k22():
    f = max_flow_dregular(k22(), [0, 1], [2, 3], 10)
    assert f.value == pytest.approx(4.0)


def test_flow_path_terminal_capacity():
    f = max_flow_dregular(Graph(3, [(0, 1), (1, 2)]), [0], [2], 0.5)
    assert f.value == pytest.approx(0.5)


def test_flow_two_disjoint_paths():
    g = Graph(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
    f = max_flow_dregular(g, [0, 3], [2, 5], 1)
    paths = flow_path_decompose(f)
    assert len(paths) == 2
    assert sum(a for _, a in paths) == pytest.approx(2.0)


def test_flow_diamond():
    g = Graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    f = max_flow_dregular(g, [0], [3], 10)
    paths = flow_path_decompose(f)
    assert f.value == pytest.approx(2.0)
    assert sorted(a for _, a in paths) == pytest.approx([1.0, 1.0])


def test_flow_errors():
    g = k22()
    with pytest.raises(ValueError):
        max_flow_dregular(g, [], [2], 1)
    with pytest.raises(ValueError):
        max_flow_dregular(g, [0, 2], [2], 1)
    with pytest.raises(ValueError):
        max_flow_dregular(g, [0], [2], 0)


@given(st.integers(4, 14), st.floats(0.1, 0.8), st.floats(0.25, 4.0), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_flow_invariants(n, p, d, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(n, p, rng)
    perm = rng.permutation(n)
    k = int(rng.integers(1, n // 2 + 1))
    src, snk = perm[:k], perm[k:2 * k]
    f = max_flow_dregular(g, src, snk, d)
    assert (np.abs(f.edge_flows) <= 1 + 1e-9).all()
    assert (np.abs(f.injection) <= d + 1e-9).all()
    # conservation: net outflow at each vertex equals its injection
    net = np.zeros(n)
    np.add.at(net, g.edges[:, 0], f.edge_flows)
    np.add.at(net, g.edges[:, 1], -f.edge_flows)
    assert np.allclose(net, f.injection, atol=1e-9)
    assert f.value == pytest.approx(f.cut_capacity(f.mincut), abs=1e-9)
    paths = flow_path_decompose(f)
    assert sum(a for _, a in paths) == pytest.approx(f.value, abs=1e-9)
    assert len(paths) <= g.m + n
    srcset, snkset = set(src.tolist()), set(snk.tolist())
    for path, _ in paths:
        assert path[0] in srcset and path[-1] in snkset
    pairs, amt = flow_demands(f)
    assert amt.sum() == pytest.approx(f.value, abs=1e-9)


# -------------------------------------------------------------------- I/O


def test_edge_list_round_trip(tmp_path, rng):
    g = random_graph(15, 0.3, rng)
    path = tmp_path / "g.edges"
    write_edge_list(g, path)
    assert read_edge_list(path) == g


def test_edge_list_comments_and_errors(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# header\n3 2\n0 1\n# mid\n1 2\n")
    assert read_edge_list(p).m == 2
    p.write_text("3 2\n0 1\n")
    with pytest.raises(ValueError):
        read_edge_list(p)


def test_partition_round_trip(tmp_path):
    part = Partition(np.array([0, 1, 1, 0], np.int8))
    path = tmp_path / "p.txt"
    write_partition(part, path)
    assert read_partition(path) == part
    with pytest.raises(ValueError):
        read_partition(path, n=5)
