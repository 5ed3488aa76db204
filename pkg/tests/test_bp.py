import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sybilfilter.bp import (DirectedEdges, MessageSet, PairwiseMRF, aggregate_messages, bethe_hessian_nullspace_check,
                            dump_trajectory, jacobian_at, lbp_run, magnetization, marginals,
                            messages_from_magnetization, mu_to_nu, mu_update, non_backtracking, nu_to_mu,
                            nu_update, spectral_radius)
from sybilfilter.errors import ParameterError, UndefinedMetricError
from sybilfilter.generators import BlockModelParams, sample_sbm
from sybilfilter.graph import LabelSet, from_edge_list, largest_connected_component

from conftest import random_connected, random_tree

TRIANGLE = from_edge_list([(0, 1), (1, 2), (0, 2)], 3)


def exact_marginals(mrf):
    """b_i(+1) by summing the joint over all 2^n spin configurations."""
    n = mrf.graph.n
    assert n <= 16
    s = np.array(list(itertools.product([1, -1], repeat=n)))
    logw = np.where(s == 1, np.log(mrf.node_priors), np.log1p(-mrf.node_priors)).sum(axis=1)
    e = mrf.graph.edges
    agree = s[:, e[:, 0]] == s[:, e[:, 1]]
    logw += np.where(agree, np.log(mrf.edge_weights), np.log1p(-mrf.edge_weights)).sum(axis=1)
    w = np.exp(logw - logw.max())
    return (w[:, None] * (s == 1)).sum(axis=0) / w.sum()


def random_mrf(g, rng, w_lo=0.55, w_hi=0.95):
    q = rng.uniform(0.1, 0.9, g.n)
    w = rng.uniform(w_lo, w_hi, g.m)
    return PairwiseMRF(g, q, w)


def test_tree_exact_path():
    g = from_edge_list([(i, i + 1) for i in range(4)], 5)
    mrf = random_mrf(g, np.random.default_rng(0))
    res = lbp_run(mrf)
    assert res.converged
    assert np.max(np.abs(res.beliefs - exact_marginals(mrf))) < 1e-10


def test_trees_exact():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g = random_tree(int(rng.integers(2, 15)), rng)
        mrf = random_mrf(g, rng, 0.05, 0.95)
        res = lbp_run(mrf, max_iter=5000)
        assert res.converged
        assert np.max(np.abs(res.beliefs - exact_marginals(mrf))) < 1e-10


def test_no_coupling():
    rng = np.random.default_rng(1)
    g = random_connected(12, 10, rng)
    q = rng.uniform(0.1, 0.9, g.n)
    res = lbp_run(PairwiseMRF(g, q, np.full(g.m, 0.5)))
    np.testing.assert_allclose(res.beliefs, q, atol=1e-14)
    assert np.all(res.messages.mu == 0.5)


RING = [(i, (i + 1) % 10) for i in range(10)]


@pytest.mark.parametrize("edges,labels", [
    (RING, LabelSet([0], [5])),
    (RING + [(0, 5), (2, 7)], LabelSet([], [0, 2])),
])
def test_loopy_close_to_exact(edges, labels):
    g = from_edge_list(edges, 10)
    mrf = PairwiseMRF.from_labels(g, labels, w=0.9, theta=0.4)
    res = lbp_run(mrf, max_iter=5000, tol=1e-12)
    assert res.converged
    assert np.max(np.abs(res.beliefs - exact_marginals(mrf))) < 0.05


def test_nonconvergence_is_reported():
    rng = np.random.default_rng(2)
    g = random_connected(10, 10, rng)
    res = lbp_run(random_mrf(g, rng), max_iter=1)
    assert not res.converged and res.iterations == 1


def test_parametrizations_agree():
    rng = np.random.default_rng(3)
    g = random_connected(8, 6, rng)
    theta, J, beta = rng.normal(size=g.n), rng.normal(size=g.m), 0.7
    mrf = PairwiseMRF.from_ising(g, theta, J, beta)
    np.testing.assert_allclose(mrf.node_priors, np.exp(beta * theta) / (np.exp(beta * theta) + np.exp(-beta * theta)))
    np.testing.assert_allclose(mrf.theta_field, theta, atol=1e-12)
    np.testing.assert_allclose(mrf.J, J, atol=1e-12)
    with pytest.raises(ParameterError):
        PairwiseMRF(g, np.full(g.n, 1.0), np.full(g.m, 0.5))


def test_nu_trivial_fixed_point():
    rng = np.random.default_rng(4)
    g = random_connected(10, 8, rng)
    mrf = PairwiseMRF.from_ising(g, 0.0, 0.8)
    assert np.all(nu_update(mrf, np.zeros(2 * g.m)) == 0)


def test_nu_single_edge():
    g = from_edge_list([(0, 1)], 2)
    mrf = PairwiseMRF.from_ising(g, [0.3, -0.2], 0.5, beta=1.5)
    new = nu_update(mrf, np.zeros(2))
    assert new[0] == pytest.approx(np.arctanh(np.tanh(0.75) * np.tanh(0.45)))
    assert new[1] == pytest.approx(np.arctanh(np.tanh(0.75) * np.tanh(-0.3)))


def test_mu_nu_commute():
    rng = np.random.default_rng(5)
    g = random_connected(20, 25, rng)
    mrf = random_mrf(g, rng)
    mu = rng.uniform(0.2, 0.8, 2 * g.m)
    np.testing.assert_allclose(mu_to_nu(mu_update(mrf, mu)), nu_update(mrf, mu_to_nu(mu)), atol=1e-12)


def test_jacobian_at_zero():
    rng = np.random.default_rng(6)
    g = random_connected(12, 10, rng)
    mrf = PairwiseMRF.from_ising(g, 0.0, 0.6, beta=1.0)
    jac = jacobian_at(mrf, np.zeros(2 * g.m)).B.toarray()
    np.testing.assert_allclose(jac, np.tanh(0.6) * non_backtracking(g).B.toarray(), atol=1e-15)


def test_triangle_nb_structure():
    nb = non_backtracking(TRIANGLE)
    b = nb.B.toarray()
    assert b.shape == (6, 6)
    np.testing.assert_array_equal(b.sum(axis=1), np.ones(6))
    de = nb.edges
    for x, y in zip(*np.nonzero(b)):
        assert de.dst[y] == de.src[x] and de.src[y] != de.dst[x]


def test_jacobian_finite_differences():
    eps = 1e-6
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        g = random_connected(10, 6, rng)
        mrf = PairwiseMRF.from_ising(g, rng.normal(0, 0.5, g.n), rng.normal(0.3, 0.3, g.m))
        nu = rng.normal(0, 0.5, 2 * g.m)
        jac = jacobian_at(mrf, nu).B.toarray()
        fd = np.empty_like(jac)
        for y in range(2 * g.m):
            e = np.zeros(2 * g.m)
            e[y] = eps
            fd[:, y] = (nu_update(mrf, nu + e) - nu_update(mrf, nu - e)) / (2 * eps)
        assert np.max(np.abs(fd - jac)) < 1e-5


def test_magnetization_consistency():
    rng = np.random.default_rng(7)
    g = random_connected(15, 15, rng)
    mrf = random_mrf(g, rng)
    res = lbp_run(mrf, max_iter=5000, tol=1e-13)
    m = magnetization(mrf, res.messages.nu)
    np.testing.assert_allclose(m, 2 * res.beliefs - 1, atol=1e-10)
    np.testing.assert_allclose(m, res.magnetization, atol=1e-10)


def test_magnetization_zero_field():
    g = random_connected(8, 4, np.random.default_rng(8))
    mrf = PairwiseMRF.from_ising(g, 0.0, 1e-9)
    assert np.all(np.abs(magnetization(mrf, np.zeros(2 * g.m))) == 0)


def test_tree_magnetization_exact():
    rng = np.random.default_rng(9)
    g = random_tree(12, rng)
    mrf = random_mrf(g, rng)
    res = lbp_run(mrf)
    np.testing.assert_allclose(magnetization(mrf, res.messages.nu), 2 * exact_marginals(mrf) - 1, atol=1e-10)


def _real_nb_eigenpair(g, which=0):
    vals, vecs = np.linalg.eig(non_backtracking(g).B.toarray())
    real = np.flatnonzero((np.abs(vals.imag) < 1e-9) & (np.abs(np.abs(vals.real) - 1) > 1e-3))
    order = real[np.argsort(-np.abs(vals[real].real))]
    j = order[which]
    return float(vals[j].real), np.real_if_close(vecs[:, j]).real


def test_bethe_hessian_from_nb_eigenvector():
    g = random_connected(12, 10, np.random.default_rng(10))
    eta, nu = _real_nb_eigenpair(g)
    m = aggregate_messages(g, nu)
    assert bethe_hessian_nullspace_check(g, eta, m) < 1e-8
    # the appendix construction recovers the messages from m
    np.testing.assert_allclose(messages_from_magnetization(g, eta, m), nu, atol=1e-8)


def test_bethe_hessian_sbm_eigenpair():
    pg = sample_sbm(BlockModelParams.from_degree(200, 5, margin=4.0), seed=0)
    g, _ = largest_connected_component(pg.graph)
    eta, nu = _real_nb_eigenpair(g, which=1)  # second real eigenvalue: the community mode
    assert eta > np.sqrt(5)
    m = aggregate_messages(g, nu)
    assert bethe_hessian_nullspace_check(g, eta, m) < 0.1


def test_bethe_hessian_negative_control():
    rng = np.random.default_rng(11)
    g = random_connected(30, 40, rng)
    res = bethe_hessian_nullspace_check(g, 1.7, rng.normal(size=g.n))
    assert res > 0.1
    with pytest.raises(UndefinedMetricError):
        bethe_hessian_nullspace_check(g, 1.7, np.zeros(g.n))


def _regular(d, n, seed):
    h = nx.random_regular_graph(d, n, seed=seed)
    return from_edge_list(list(h.edges()), n)


def _power_radius(b, iters=2000):
    x = np.ones(b.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = b @ x
        lam = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    return lam


@pytest.mark.parametrize("target,grows", [(0.8, False), (1.3, True)])
def test_linear_stability_regimes(target, grows):
    g = _regular(3, 40, seed=1)
    rho = _power_radius(non_backtracking(g).B)
    assert spectral_radius(non_backtracking(g).B) == pytest.approx(rho, rel=1e-6)
    bj = np.arctanh(target / rho)
    mrf = PairwiseMRF.from_ising(g, 0.0, bj)
    assert jacobian_at(mrf, np.zeros(2 * g.m)).spectral_radius == pytest.approx(target, rel=1e-6)
    nu = np.random.default_rng(0).normal(0, 1e-4, 2 * g.m)
    start = np.linalg.norm(nu)
    for _ in range(400):
        nu = 0.5 * nu_update(mrf, nu) + 0.5 * nu
    if grows:
        assert np.linalg.norm(nu) > 100 * start
    else:
        assert np.linalg.norm(nu) < 1e-6 * start


def test_directed_edge_indexing():
    de = DirectedEdges.of(TRIANGLE)
    assert de.size == 2 * TRIANGLE.m
    np.testing.assert_array_equal(de.src[de.reverse], de.dst)


def test_trajectory_dump(tmp_path):
    g = from_edge_list([(0, 1), (1, 2)], 3)
    res = lbp_run(random_mrf(g, np.random.default_rng(0)), record=True)
    dump_trajectory(res, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,edge,mu_plus" and len(lines) == 1 + 4 * (res.iterations + 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 14), st.integers(0, 2**31 - 1))
def test_random_trees_exact(n, seed):
    rng = np.random.default_rng(seed)
    g = random_tree(n, rng)
    mrf = random_mrf(g, rng, 0.05, 0.95)
    res = lbp_run(mrf, max_iter=5000)
    assert np.max(np.abs(res.beliefs - exact_marginals(mrf))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 20), st.integers(0, 30), st.integers(0, 2**31 - 1))
def test_update_preserves_normalization(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    mrf = random_mrf(g, rng, 0.05, 0.95)
    mu = rng.uniform(0.01, 0.99, 2 * g.m)
    for _ in range(5):
        new = mu_update(mrf, mu)
        ms = MessageSet(new)
        assert np.all((new > 0) & (new < 1))
        np.testing.assert_allclose(ms.mu + ms.mu_minus, 1.0, atol=1e-12)
        np.testing.assert_allclose(mu_to_nu(new), nu_update(mrf, mu_to_nu(mu)), atol=1e-12)
        mu = new
    np.testing.assert_allclose(nu_to_mu(mu_to_nu(mu)), mu, atol=1e-12)
    np.testing.assert_allclose(marginals(mrf, mu), 0.5 * (1 + magnetization(mrf, mu_to_nu(mu))), atol=1e-12)
