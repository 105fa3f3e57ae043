import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicut.graph_core import Graph, cut_value
from semicut.hierarchy import ClusterTree, balanced_tree
from semicut.instance_gen import (AddClique, AddExpander, AddWithin, AdversaryScript, MonotonicityError,
                                  RemoveCut, SemiRandomSpec, _pair_from_index, apply_edge_removal_adversary,
                                  generate_hsm, generate_semirandom, load_instance, save_instance)
from semicut.refcheck import binomial_se

from conftest import complete_graph


def test_eta_one_gives_complete_bipartite():
    inst = generate_semirandom(SemiRandomSpec(4, 0.5, 1.0, split=(2, 2), seed=3))
    assert inst.graph.m == 4
    assert inst.planted_cut_value == 4 == inst.alpha_bound


def test_eta_zero_with_cliques_gives_two_cliques():
    script = AdversaryScript([AddClique("A"), AddClique("B")])
    inst = generate_semirandom(SemiRandomSpec(10, 0.5, 0.0, adversary=script, seed=1))
    assert inst.planted_cut_value == 0
    assert inst.graph.m == 2 * 10


def test_remove_cut_half_concentrates():
    spec = SemiRandomSpec(1000, 0.5, 0.05, adversary=AdversaryScript([RemoveCut(0.5)]), seed=7)
    inst = generate_semirandom(spec)
    N = 500 * 500
    mean = 0.5 * N * 0.05
    sd = math.sqrt(N * 0.025 * 0.975)
    assert abs(inst.planted_cut_value - mean) <= 4 * sd
    assert inst.planted_cut_value <= inst.alpha_bound


def test_cut_count_mean_over_seeds():
    counts = [generate_semirandom(SemiRandomSpec(60, 0.5, 0.1, seed=s)).alpha_bound for s in range(120)]
    N = 30 * 30
    se = math.sqrt(N * 0.1 * 0.9 / len(counts))
    assert abs(np.mean(counts) - N * 0.1) <= 3 * se


@given(st.integers(0, 10**6), st.floats(0.0, 1.0), st.floats(0.0, 0.5))
@settings(max_examples=25, deadline=None)
def test_monotonicity(seed, frac, dens):
    base = SemiRandomSpec(40, 0.4, 0.2, seed=seed)
    step2 = generate_semirandom(base)
    script = AdversaryScript([AddWithin("A", density=dens), AddExpander("B", 3), RemoveCut(frac)])
    full = generate_semirandom(SemiRandomSpec(40, 0.4, 0.2, adversary=script, seed=seed))
    side = full.planted.side
    assert np.array_equal(side, step2.planted.side)
    before = {tuple(e) for e in step2.graph.edges.tolist()}
    after = {tuple(e) for e in full.graph.edges.tolist()}
    # within-side edges survive, no new cross edges
    assert all(e in after for e in before if side[e[0]] == side[e[1]])
    assert all(e in before for e in after if side[e[0]] != side[e[1]])
    assert full.planted_cut_value == cut_value(full.graph, full.planted) <= full.alpha_bound


def test_random_cut_unaffected_by_adversary_script():
    a = generate_semirandom(SemiRandomSpec(50, 0.5, 0.3, seed=9))
    b = generate_semirandom(SemiRandomSpec(50, 0.5, 0.3, seed=9,
                                           adversary=AdversaryScript([AddWithin("B", density=0.4)])))
    assert a.alpha_bound == b.alpha_bound
    assert a.planted_cut_value == b.planted_cut_value


def test_determinism():
    spec = SemiRandomSpec(80, 0.3, 0.1, adversary=AdversaryScript([AddWithin("A", density=0.2)]), seed=5)
    assert generate_semirandom(spec).graph == generate_semirandom(spec).graph


def test_monotonicity_violations_rejected():
    spec = SemiRandomSpec(4, 0.5, 1.0, split=(2, 2), shuffle=False,
                          adversary=AdversaryScript([AddWithin("A", edges=[[0, 2]])]))
    with pytest.raises(MonotonicityError):
        generate_semirandom(spec)
    spec.adversary = AdversaryScript([RemoveCut(edges=[[0, 1]])])
    with pytest.raises(MonotonicityError):
        generate_semirandom(spec)
    spec.adversary = AdversaryScript([AddClique("A", vertices=[0, 3])])
    with pytest.raises(MonotonicityError):
        generate_semirandom(spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        generate_semirandom(SemiRandomSpec(10, 0.4, 0.1, split=(3, 7)))
    with pytest.raises(ValueError):
        generate_semirandom(SemiRandomSpec(10, 0.4, 1.5))


def test_adversary_json_round_trip():
    script = AdversaryScript([AddWithin("A", density=0.1), RemoveCut(0.3), AddClique("B"), AddExpander("A", 4)])
    assert AdversaryScript.from_json(script.to_json()) == script
    with pytest.raises(ValueError):
        AdversaryScript.from_dict({"actions": [{"kind": "add_cut"}]})


def test_instance_save_load(tmp_path):
    spec = SemiRandomSpec(30, 0.4, 0.2, adversary=AdversaryScript([RemoveCut(0.2)]), seed=2)
    inst = generate_semirandom(spec)
    save_instance(inst, tmp_path / "inst")
    back = load_instance(tmp_path / "inst")
    assert back.graph == inst.graph and back.planted == inst.planted
    assert back.alpha_bound == inst.alpha_bound
    assert back.spec.to_dict() == inst.spec.to_dict()
    meta = json.loads((tmp_path / "inst.json").read_text())
    assert meta["planted_cut_value"] == inst.planted_cut_value


@pytest.mark.parametrize("s", [2, 3, 5, 17, 200])
def test_pair_index_bijection(s):
    i, j = _pair_from_index(np.arange(s * (s - 1) // 2), s)
    iu = np.triu_indices(s, 1)
    assert np.array_equal(i, iu[0]) and np.array_equal(j, iu[1])


# ----------------------------------------------------------------- HSM


def _weighted_balanced(n, w):
    t = balanced_tree(n)
    weight = np.zeros(t.n_nodes)
    weight[t.internal_nodes()] = w
    return ClusterTree(n, t.children, weight)


def test_hsm_all_ones_complete():
    assert generate_hsm(_weighted_balanced(8, 1.0), seed=0) == complete_graph(8)


def test_hsm_all_zero_empty():
    assert generate_hsm(_weighted_balanced(8, 0.0), seed=0).m == 0


def test_hsm_cross_pair_frequency():
    t = balanced_tree(4)
    w = np.zeros(t.n_nodes)
    w[t.root] = 0.2
    for c in t.children_of(t.root):
        w[c] = 0.9
    t = ClusterTree(4, t.children, w)
    left, right = (t.leaf_sets()[c] for c in t.children_of(t.root))
    hits = 0
    trials = 200
    for seed in range(trials):
        g = generate_hsm(t, seed)
        hits += int(np.sum(g.edge_ids(np.repeat(left, right.size), np.tile(right, left.size)) >= 0))
    k = trials * left.size * right.size
    assert abs(hits / k - 0.2) <= 4 * binomial_se(0.2, k)


def test_hsm_rejects_increasing_weights():
    t = balanced_tree(4)
    w = np.zeros(t.n_nodes)
    w[t.root] = 0.9
    for c in t.children_of(t.root):
        w[c] = 0.1
    with pytest.raises(ValueError):
        generate_hsm(ClusterTree(4, t.children, w), 0)


# ------------------------------------------------------------ removals


def test_removal_adversary():
    g = complete_graph(4)
    assert apply_edge_removal_adversary(g, g.edges).m == 0
    assert apply_edge_removal_adversary(g, []) == g
    assert apply_edge_removal_adversary(g, [(2, 3)]).m == 5
    with pytest.raises(ValueError):
        apply_edge_removal_adversary(Graph(4, [(0, 1)]), [(1, 2)])
