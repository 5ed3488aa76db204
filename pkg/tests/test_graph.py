import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sybilfilter import datasets
from sybilfilter.errors import DegenerateDegreeError, MalformedInputError
from sybilfilter.graph import (LabelSet, ShiftKind, augment_graph, bethe_hessian_r, build_shift,
                               from_adjacency, from_edge_list, is_connected, largest_connected_component,
                               read_communities, read_edge_list, write_communities, write_edge_list)

from conftest import random_connected, random_labels

TRIANGLE = from_edge_list([(0, 1), (1, 2), (0, 2)], 3)
PATH3 = from_edge_list([(0, 1), (1, 2)], 3)


def test_path_graph_degrees():
    assert PATH3.degrees.tolist() == [1, 2, 1]
    assert PATH3.m == 2


def test_dedup_and_self_loop():
    g = from_edge_list([(0, 1), (1, 0), (2, 2)], 3)
    assert g.edges.tolist() == [[0, 1]]
    assert g.degrees.tolist() == [1, 1, 0]


def test_endpoint_out_of_range():
    with pytest.raises(MalformedInputError):
        from_edge_list([(0, 3)], 3)


def test_karate_counts():
    d = datasets.karate()
    assert (d.graph.n, d.graph.m) == (34, 78)
    ref = nx.karate_club_graph()
    assert sorted(map(tuple, d.graph.edges.tolist())) == sorted(tuple(sorted(e)) for e in ref.edges())


def test_lcc_connected_identity():
    g, idmap = largest_connected_component(TRIANGLE)
    assert g == TRIANGLE and idmap == {0: 0, 1: 1, 2: 2}


def test_lcc_picks_bigger_component():
    pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7)]
    g, idmap = largest_connected_component(from_edge_list(pairs, 8))
    assert g.n == 5 and sorted(idmap) == [0, 1, 2, 3, 4]
    assert is_connected(g)


def test_lcc_empty():
    g, idmap = largest_connected_component(from_edge_list([], 0))
    assert g.n == 0 and idmap == {}


def test_triangle_rw():
    s = build_shift(TRIANGLE, "rw").dense()
    expected = np.eye(3) - (np.ones((3, 3)) - np.eye(3)) / 2
    np.testing.assert_allclose(s, expected)


def test_triangle_bh_r1_is_laplacian():
    s = build_shift(TRIANGLE, "bh", r=1.0).dense()
    np.testing.assert_array_equal(s, nx.laplacian_matrix(nx.complete_graph(3)).toarray())


def test_path_max_degree_eigenvalues():
    s = build_shift(PATH3, "max").dense()
    np.testing.assert_allclose(s, np.eye(3) - PATH3.adjacency.toarray() / 2)
    lam = np.linalg.eigvalsh(s)
    np.testing.assert_allclose(lam, [1 - 1 / np.sqrt(2), 1, 1 + 1 / np.sqrt(2)], atol=1e-14)


def test_bethe_hessian_r_values():
    assert bethe_hessian_r(TRIANGLE) == pytest.approx(1.0)
    star = from_edge_list([(0, 1), (0, 2), (0, 3)], 4)
    assert bethe_hessian_r(star) == pytest.approx(1.0)
    d = np.array([deg for _, deg in nx.karate_club_graph().degree()], dtype=float)
    assert bethe_hessian_r(datasets.karate().graph) == pytest.approx(np.sqrt((d**2).sum() / d.sum() - 1))
    with pytest.raises(DegenerateDegreeError):
        bethe_hessian_r(from_edge_list([], 3))


def test_augment_empty_labels():
    g, ls, lb = augment_graph(TRIANGLE, LabelSet())
    assert g.n == 5 and g.m == 3 and (ls, lb) == (3, 4)
    assert g.degrees[3:].tolist() == [0, 0]


def test_augment_path():
    g, _, _ = augment_graph(from_edge_list([(0, 1)], 2), LabelSet([0], [1]))
    assert g.degrees.tolist() == [2, 2, 1, 1]


def test_augmented_degree_matches_definition(rng):
    from sybilfilter.generators import BlockModelParams, sample_sbm, sample_labels
    pg = sample_sbm(BlockModelParams.from_degree(300, 5, c_out=1.0), rng)
    labels = sample_labels(pg, [0], 0.1, seed=rng)
    aug, _, _ = augment_graph(pg.graph, labels)
    expected = pg.graph.degrees + labels.indicator(pg.graph.n)
    np.testing.assert_array_equal(aug.degrees[:pg.graph.n], expected)
    # the shift uses the same augmented degree
    g, _ = largest_connected_component(pg.graph)
    lab = sample_labels(np.zeros(g.n, int) + (np.arange(g.n) % 2), [0], 0.1, seed=1)
    s = build_shift(g, "aug", lab).dense()
    dh = g.degrees + lab.indicator(g.n)
    np.testing.assert_allclose(s, np.eye(g.n) - g.adjacency.toarray() / dh[:, None])


def test_isolated_node_rejected():
    g = from_edge_list([(0, 1)], 3)
    for kind in ("rw", "aug"):
        with pytest.raises(DegenerateDegreeError):
            build_shift(g, kind, LabelSet() if kind == "aug" else None)


def test_labels_disjoint():
    with pytest.raises(MalformedInputError):
        LabelSet([1, 2], [2])
    with pytest.raises(MalformedInputError):
        LabelSet([5], []).validate(3)


def test_labels_required_only_for_aug():
    with pytest.raises(ValueError):
        build_shift(TRIANGLE, "aug")
    with pytest.raises(ValueError):
        build_shift(TRIANGLE, "rw", LabelSet([0], [1]))


def test_edge_list_roundtrip(tmp_path, rng):
    g = from_edge_list([(0, 1), (2, 3)], 6)  # nodes 4, 5 isolated
    write_edge_list(g, tmp_path / "g.edges", header="test graph")
    g2, names = read_edge_list(tmp_path / "g.edges")
    assert g2 == g and names == [str(i) for i in range(6)]


def test_named_edge_list(tmp_path):
    (tmp_path / "g.edges").write_text("# comment\nalice bob\nbob carol  # trailing\n\n")
    g, names = read_edge_list(tmp_path / "g.edges")
    assert names == ["alice", "bob", "carol"] and g.degrees.tolist() == [1, 2, 1]
    (tmp_path / "bad.edges").write_text("alice\n")
    with pytest.raises(MalformedInputError):
        read_edge_list(tmp_path / "bad.edges")


def test_communities_roundtrip(tmp_path):
    write_communities([0, 1, 1], tmp_path / "c.txt", extra={"theta": np.array([0.5, 1.0, 1.5])})
    rows = read_communities(tmp_path / "c.txt")
    assert rows == {"0": ["0", "0.5"], "1": ["1", "1.0"], "2": ["1", "1.5"]}


def test_from_adjacency_symmetrizes():
    a = np.zeros((3, 3))
    a[0, 1] = 1
    a[2, 2] = 1
    g = from_adjacency(a)
    assert g.edges.tolist() == [[0, 1]]


# ---------------------------------------------------------------- properties

graphs = st.builds(
    lambda n, extra, seed: random_connected(n, extra, np.random.default_rng(seed)),
    st.integers(3, 60), st.integers(0, 120), st.integers(0, 2**31 - 1),
)


@settings(max_examples=40, deadline=None)
@given(graphs, st.integers(0, 2**31 - 1))
def test_shift_sparsity_matches_edges(g, seed):
    labels = random_labels(g.n, np.random.default_rng(seed))
    a = g.adjacency.toarray() > 0
    for kind in ShiftKind:
        s = build_shift(g, kind, labels if kind is ShiftKind.AUGMENTED else None).dense()
        off = s.copy()
        np.fill_diagonal(off, 0)
        assert not np.any((off != 0) & ~a)


@settings(max_examples=40, deadline=None)
@given(graphs)
def test_rw_columns_sum_to_zero(g):
    s = build_shift(g, "rw").dense()
    np.testing.assert_allclose(s.sum(axis=0), 0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(graphs)
def test_degree_sum_and_symmetry(g):
    assert g.degrees.sum() == 2 * g.m
    assert (g.adjacency != g.adjacency.T).nnz == 0
    for kind in ("max", "bh", "tau"):
        s = build_shift(g, kind)
        assert s.symmetric
        assert np.abs(s.dense() - s.dense().T).max() == 0
    assert not build_shift(g, "rw").symmetric


@settings(max_examples=40, deadline=None)
@given(graphs)
def test_bh_at_one_is_laplacian(g):
    lap = np.diag(g.degrees) - g.adjacency.toarray()
    np.testing.assert_array_equal(build_shift(g, "bh", r=1.0).dense(), lap)


@settings(max_examples=25, deadline=None)
@given(graphs)
def test_bh_regularized_laplacian_identity(g):
    shift = build_shift(g, "bh")
    r = shift.param
    lam, v = np.linalg.eigh(shift.dense())
    a = g.adjacency.toarray()
    d = g.degrees
    checked = 0
    for j in range(g.n):
        tau = r * r - lam[j] - 1
        # D_tau must be invertible; at tau = -d_min the relation is 0/0
        if (d + tau).min() <= 1e-6 or r == 0:
            continue
        lhs = v[:, j] - (a @ v[:, j]) / (d + tau)
        rhs = (r - 1) / r * v[:, j]
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(np.linalg.norm(rhs), 1.0)
        checked += 1
    assert checked > 0
