import numpy as np
import pytest

from compatgnn import (CompatibilityMatrix, DataError, edge_homophily,
                       node_homophily, observed_cm, permute_graph,
                       semantic_neighborhood)
from compatgnn.metrics import l1_normalize_rows

from util import make_graph, path4, random_graph, star
from compatgnn.rng import make_rng


def test_edge_homophily_path4():
    # edges 0-1 (same), 1-2 (cross), 2-3 (same)
    assert edge_homophily(path4()) == pytest.approx(2.0 / 3.0)


def test_node_homophily_path4():
    # per-node same-label neighbor fractions: 1, 1/2, 1/2, 1 -> mean 0.75
    assert node_homophily(path4()) == pytest.approx(0.75)


def test_node_homophily_star_all_cross():
    # center class 0, three leaves class 1: every node sees only the other class
    assert node_homophily(star()) == 0.0
    assert edge_homophily(star()) == 0.0


def test_node_homophily_skips_isolated():
    g = make_graph(3, [(0, 1)], [0, 0, 1], 2)
    # node 2 isolated; nodes 0 and 1 each fully homophilous
    assert node_homophily(g) == 1.0


def test_homophily_requires_labels():
    g = make_graph(2, [(0, 1)], [0, -1], 2)
    with pytest.raises(DataError, match="labeled"):
        edge_homophily(g)
    with pytest.raises(DataError, match="labeled"):
        node_homophily(g)


def test_edge_homophily_directed_counts_entries():
    g = make_graph(3, [(0, 1), (1, 2), (2, 1)], [0, 0, 1], 2, directed=True)
    # entries: 0->1 same, 1->2 cross, 2->1 cross
    assert edge_homophily(g) == pytest.approx(1.0 / 3.0)


def test_edge_homophily_empty_graph():
    g = make_graph(2, [], [0, 1], 2)
    with pytest.raises(DataError, match="no edges"):
        edge_homophily(g)


def test_homophily_permutation_invariant():
    rng = make_rng(7, "hperm")
    g = random_graph(rng, 25, n_classes=3)
    gp = permute_graph(g, rng.permutation(25))
    assert edge_homophily(gp) == pytest.approx(edge_homophily(g), abs=1e-12)
    assert node_homophily(gp) == pytest.approx(node_homophily(g), abs=1e-12)


def test_l1_normalize_rows_zero_and_fallback():
    x = np.array([[2.0, 2.0], [0.0, 0.0], [-1.0, 3.0]])
    out, zero = l1_normalize_rows(x)
    np.testing.assert_allclose(out[0], [0.5, 0.5])
    np.testing.assert_array_equal(out[1], [0.0, 0.0])
    np.testing.assert_allclose(out[2], [-0.25, 0.75])
    np.testing.assert_array_equal(zero, [False, True, False])
    out2, _ = l1_normalize_rows(x, fallback=np.array([0.5, 0.5]))
    np.testing.assert_allclose(out2[1], [0.5, 0.5])


def test_semantic_neighborhood_matches_brute_force():
    rng = make_rng(9, "semnb")
    g = random_graph(rng, 20, n_classes=3)
    soft = rng.random((20, 3))
    got = semantic_neighborhood(g, soft)
    for i in range(20):
        nb = g.neighbors(i)
        if nb.size == 0:
            np.testing.assert_array_equal(got[i], np.zeros(3))
            continue
        s = soft[nb].sum(axis=0)
        np.testing.assert_allclose(got[i], s / np.abs(s).sum(), atol=1e-12)


def test_semantic_neighborhood_shape_check():
    g = path4()
    with pytest.raises(DataError, match="rows"):
        semantic_neighborhood(g, np.zeros((3, 2)))


def test_observed_cm_homophilous_blocks():
    # two disconnected triangles, one per class: all mass on the diagonal
    g = make_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
                   [0, 0, 0, 1, 1, 1], 2)
    cm = observed_cm(g)
    np.testing.assert_allclose(cm.m, np.eye(2), atol=1e-12)
    assert not cm.uniform_rows.any()


def test_observed_cm_bipartite_antidiagonal():
    g = make_graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)], [0, 0, 1, 1], 2)
    cm = observed_cm(g)
    np.testing.assert_allclose(cm.m, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_observed_cm_rows_stochastic_random():
    for trial in range(5):
        g = random_graph(make_rng(trial, "cm"), 40, n_classes=4)
        cm = observed_cm(g)
        np.testing.assert_allclose(cm.m.sum(axis=1), np.ones(4), atol=1e-12)
        assert np.all(cm.m >= 0)


def test_observed_cm_permutation_invariant():
    rng = make_rng(13, "cmperm")
    g = random_graph(rng, 30, n_classes=3)
    gp = permute_graph(g, rng.permutation(30))
    np.testing.assert_allclose(observed_cm(gp).m, observed_cm(g).m, atol=1e-12)


def test_observed_cm_isolated_class_flagged_uniform():
    # class 1 exists only on an isolated node: its row has no evidence
    g = make_graph(4, [(0, 1), (1, 2)], [0, 0, 0, 1], 2)
    cm = observed_cm(g)
    np.testing.assert_array_equal(cm.uniform_rows, [False, True])
    np.testing.assert_allclose(cm.m[1], [0.5, 0.5])


def test_compatibility_matrix_validation():
    with pytest.raises(DataError, match="sums"):
        CompatibilityMatrix(np.array([[0.7, 0.7], [0.5, 0.5]]))
    with pytest.raises(DataError, match="negative"):
        CompatibilityMatrix(np.array([[1.5, -0.5], [0.5, 0.5]]))
    with pytest.raises(DataError, match="K >= 2"):
        CompatibilityMatrix(np.ones((1, 1)))


def test_observed_cm_hand_case():
    # path 0-1-2 with labels 0,1,0. Both class-0 nodes neighbor only the
    # class-1 center, and the center neighbors only class-0 nodes.
    g = make_graph(3, [(0, 1), (1, 2)], [0, 1, 0], 2)
    cm = observed_cm(g)
    np.testing.assert_allclose(cm.m, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_observed_cm_mixed_hand_case():
    # triangle 0-1-2 labels [0,0,1] plus pendant 3 (label 1) on node 2.
    # C^nb: n0 -> [1,1]/2, n1 -> [1,1]/2, n2 -> [2,1]/3, n3 -> [0,1].
    # class 0 raw: [1,1]; class 1 raw: [2/3, 1/3] + [0,1] = [2/3, 4/3].
    g = make_graph(4, [(0, 1), (1, 2), (0, 2), (2, 3)], [0, 0, 1, 1], 2)
    cm = observed_cm(g)
    np.testing.assert_allclose(cm.m, [[0.5, 0.5], [1.0 / 3.0, 2.0 / 3.0]],
                               atol=1e-12)
