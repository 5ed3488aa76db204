"""Loopy belief propagation on the binary pairwise MRF, its one-parameter
(cavity-field) form, the non-backtracking Jacobian and the magnetization /
Bethe-Hessian relations of the linearized dynamics.

Directed edges are indexed so that undirected edge ``e = (u, v)`` with
``u < v`` yields ``2e: u -> v`` and ``2e + 1: v -> u``; the reverse of a
directed edge ``x`` is ``x ^ 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError, UndefinedMetricError
from .graph import Graph, build_shift, ShiftKind


@dataclass(frozen=True, eq=False)
class PairwiseMRF:
    """Binary MRF with node potentials ``(q_i, 1 - q_i)`` and edge potentials
    ``(w_ij, 1 - w_ij)`` for agreeing / disagreeing spins.

    Equivalently ``phi_i(s) ~ exp(beta theta_i s)`` and
    ``psi_ij(s, t) ~ exp(beta J_ij s t)`` with ``q = sigmoid(2 beta theta)``
    and ``w = sigmoid(2 beta J)``.
    """

    graph: Graph = field(repr=False)
    node_priors: np.ndarray = field(repr=False)
    edge_weights: np.ndarray = field(repr=False)
    beta: float = 1.0

    def __post_init__(self):
        q, w = self.node_priors, self.edge_weights
        if q.shape != (self.graph.n,) or w.shape != (self.graph.m,):
            raise ParameterError("prior / weight vectors do not match the graph")
        if np.any((q <= 0) | (q >= 1)) or np.any((w <= 0) | (w >= 1)):
            raise ParameterError("priors and edge weights must lie strictly inside (0, 1)")
        if self.beta <= 0:
            raise ParameterError("beta must be positive")

    @classmethod
    def from_ising(cls, graph: Graph, theta_field, J, beta: float = 1.0) -> "PairwiseMRF":
        theta_field = np.broadcast_to(np.asarray(theta_field, float), (graph.n,)).copy()
        J = np.broadcast_to(np.asarray(J, float), (graph.m,)).copy()
        q = 0.5 * (1.0 + np.tanh(beta * theta_field))
        w = 0.5 * (1.0 + np.tanh(beta * J))
        return cls(graph, q, w, beta)

    @classmethod
    def from_labels(cls, graph: Graph, labels, w: float = 0.9, theta: float = 0.4) -> "PairwiseMRF":
        """Priors ``0.5 +- theta`` on labeled Sybil/benign nodes, 0.5 elsewhere."""
        q = np.full(graph.n, 0.5)
        q[labels.sybil_array()] += theta
        q[labels.benign_array()] -= theta
        return cls(graph, q, np.full(graph.m, float(w)))

    @property
    def field_strength(self) -> np.ndarray:
        """``beta * theta_i``."""
        return np.arctanh(2 * self.node_priors - 1)

    @property
    def coupling(self) -> np.ndarray:
        """``beta * J_ij`` per undirected edge."""
        return np.arctanh(2 * self.edge_weights - 1)

    @property
    def theta_field(self) -> np.ndarray:
        return self.field_strength / self.beta

    @property
    def J(self) -> np.ndarray:
        return self.coupling / self.beta


@dataclass(frozen=True, eq=False)
class DirectedEdges:
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def of(cls, g: Graph) -> "DirectedEdges":
        e = g.edges
        src = np.empty(2 * g.m, dtype=np.int64)
        dst = np.empty(2 * g.m, dtype=np.int64)
        src[0::2], dst[0::2] = e[:, 0], e[:, 1]
        src[1::2], dst[1::2] = e[:, 1], e[:, 0]
        return cls(src, dst)

    @property
    def size(self) -> int:
        return self.src.size

    @property
    def reverse(self) -> np.ndarray:
        return np.arange(self.size) ^ 1


@dataclass(eq=False)
class MessageSet:
    """``mu[x]`` is the message on directed edge ``x`` evaluated at ``s = +1``."""

    mu: np.ndarray

    @property
    def mu_minus(self) -> np.ndarray:
        return 1.0 - self.mu

    @property
    def nu(self) -> np.ndarray:
        return mu_to_nu(self.mu)

    @classmethod
    def uniform(cls, g: Graph) -> "MessageSet":
        return cls(np.full(2 * g.m, 0.5))

    @classmethod
    def from_nu(cls, nu) -> "MessageSet":
        return cls(nu_to_mu(np.asarray(nu, float)))


def mu_to_nu(mu_plus: np.ndarray) -> np.ndarray:
    return np.arctanh(2.0 * mu_plus - 1.0)


def nu_to_mu(nu: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(nu))


def _log_incoming(mrf: PairwiseMRF, de: DirectedEdges, mu: np.ndarray):
    """Per-node log of ``phi_i(s) prod_k mu_ki(s)`` for ``s = +1, -1``."""
    n = mrf.graph.n
    lp = np.log(mrf.node_priors) + np.bincount(de.dst, np.log(mu), minlength=n)
    lm = np.log1p(-mrf.node_priors) + np.bincount(de.dst, np.log1p(-mu), minlength=n)
    return lp, lm


def mu_update(mrf: PairwiseMRF, mu: np.ndarray, de: Optional[DirectedEdges] = None) -> np.ndarray:
    """One synchronous sum-product step on every directed edge."""
    de = de or DirectedEdges.of(mrf.graph)
    lp, lm = _log_incoming(mrf, de, mu)
    rev = de.reverse
    # cavity: drop the message coming back from the recipient
    cp = lp[de.src] - np.log(mu[rev])
    cm = lm[de.src] - np.log1p(-mu[rev])
    top = np.maximum(cp, cm)
    ep, em = np.exp(cp - top), np.exp(cm - top)
    w = np.repeat(mrf.edge_weights, 2)
    to_plus = ep * w + em * (1 - w)
    to_minus = ep * (1 - w) + em * w
    return to_plus / (to_plus + to_minus)


def marginals(mrf: PairwiseMRF, mu: np.ndarray, de: Optional[DirectedEdges] = None) -> np.ndarray:
    """``b_i(+1)`` from the node potential and all incoming messages."""
    de = de or DirectedEdges.of(mrf.graph)
    lp, lm = _log_incoming(mrf, de, mu)
    return 1.0 / (1.0 + np.exp(lm - lp))


@dataclass
class LBPResult:
    beliefs: np.ndarray  # b_i(+1)
    messages: MessageSet
    converged: bool
    iterations: int
    trajectory: list = field(default_factory=list, repr=False)

    @property
    def magnetization(self) -> np.ndarray:
        return 2.0 * self.beliefs - 1.0


def lbp_run(mrf: PairwiseMRF, max_iter: int = 1000, tol: float = 1e-12, damping: float = 0.5,
            init: Optional[MessageSet] = None, record: bool = False) -> LBPResult:
    """Damped synchronous loopy BP from uniform messages.

    Stops when the largest message change drops below ``tol``. Failure to
    converge is reported through ``converged=False``, not raised.
    """
    if not 0 <= damping < 1:
        raise ParameterError("damping must lie in [0, 1)")
    de = DirectedEdges.of(mrf.graph)
    mu = (init or MessageSet.uniform(mrf.graph)).mu.copy()
    traj = [mu.copy()] if record else []
    converged = mu.size == 0
    it = 0
    while not converged and it < max_iter:
        it += 1
        new = (1 - damping) * mu_update(mrf, mu, de) + damping * mu
        delta = np.max(np.abs(new - mu))
        mu = new
        if record:
            traj.append(mu.copy())
        converged = delta < tol
    return LBPResult(marginals(mrf, mu, de), MessageSet(mu), bool(converged), it, traj)


def dump_trajectory(result: LBPResult, path) -> None:
    """Write recorded message iterates as CSV rows ``iteration,edge,mu_plus``."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["iteration", "edge", "mu_plus"])
        for t, mu in enumerate(result.trajectory):
            for x, v in enumerate(mu):
                wr.writerow([t, x, repr(float(v))])


def cavity_fields(mrf: PairwiseMRF, nu: np.ndarray, de: Optional[DirectedEdges] = None) -> np.ndarray:
    """``h_{i\\j} = beta theta_i + sum_{k in di \\ j} nu_ki`` per directed edge ``i -> j``."""
    de = de or DirectedEdges.of(mrf.graph)
    total = mrf.field_strength + np.bincount(de.dst, nu, minlength=mrf.graph.n)
    return total[de.src] - nu[de.reverse]


def nu_update(mrf: PairwiseMRF, nu: np.ndarray, de: Optional[DirectedEdges] = None) -> np.ndarray:
    """``nu_ij <- artanh(tanh(beta J_ij) tanh(h_{i\\j}))``."""
    de = de or DirectedEdges.of(mrf.graph)
    t = np.tanh(np.repeat(mrf.coupling, 2))
    return np.arctanh(t * np.tanh(cavity_fields(mrf, nu, de)))


@dataclass(frozen=True, eq=False)
class NonBacktracking:
    """Sparse operator on directed edges; ``B[(i->j), (k->l)]`` is nonzero only
    for ``l == i`` and ``k != j``."""

    B: sp.csr_matrix = field(repr=False)
    edges: DirectedEdges = field(repr=False)

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.B)


def _nb_pattern(de: DirectedEdges, n: int):
    """Row/col index pairs of the non-backtracking structure."""
    order = np.argsort(de.dst, kind="stable")
    counts = np.bincount(de.dst, minlength=n)
    start = np.concatenate([[0], np.cumsum(counts)])
    rows, cols = [], []
    for x in range(de.size):
        i, j = de.src[x], de.dst[x]
        inc = order[start[i]:start[i + 1]]  # edges k -> i
        inc = inc[de.src[inc] != j]
        rows.append(np.full(inc.size, x))
        cols.append(inc)
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def non_backtracking(g: Graph) -> NonBacktracking:
    """Unweighted non-backtracking matrix."""
    de = DirectedEdges.of(g)
    r, c = _nb_pattern(de, g.n)
    b = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(de.size, de.size))
    return NonBacktracking(b, de)


def jacobian_at(mrf: PairwiseMRF, nu: np.ndarray) -> NonBacktracking:
    """Jacobian of :func:`nu_update` at ``nu``."""
    de = DirectedEdges.of(mrf.graph)
    r, c = _nb_pattern(de, mrf.graph.n)
    t = np.tanh(np.repeat(mrf.coupling, 2))
    th2 = np.tanh(cavity_fields(mrf, nu, de)) ** 2
    vals_per_row = t * (1 - th2) / (1 - t**2 * th2)
    b = sp.csr_matrix((vals_per_row[r], (r, c)), shape=(de.size, de.size))
    return NonBacktracking(b, de)


def spectral_radius(b: sp.spmatrix) -> float:
    if b.shape[0] == 0:
        return 0.0
    if b.shape[0] <= 64:
        return float(np.abs(np.linalg.eigvals(b.toarray())).max())
    vals = spla.eigs(b.astype(float), k=1, which="LM", return_eigenvectors=False, maxiter=10_000)
    return float(np.abs(vals).max())


def magnetization(mrf: PairwiseMRF, nu: np.ndarray) -> np.ndarray:
    """``m_i = tanh(beta theta_i + sum_k nu_ki)``, i.e. ``b_i(+1) - b_i(-1)``."""
    de = DirectedEdges.of(mrf.graph)
    return np.tanh(mrf.field_strength + np.bincount(de.dst, nu, minlength=mrf.graph.n))


def aggregate_messages(g: Graph, nu: np.ndarray) -> np.ndarray:
    """Small-message magnetization ``m_i ~ sum_{k in di} nu_ki``."""
    de = DirectedEdges.of(g)
    return np.bincount(de.dst, nu, minlength=g.n)


def messages_from_magnetization(g: Graph, eta: float, m: np.ndarray) -> np.ndarray:
    """``nu_ij = (eta m_i - m_j) / (eta^2 - 1)`` on every directed edge."""
    de = DirectedEdges.of(g)
    return (eta * m[de.src] - m[de.dst]) / (eta**2 - 1.0)


def bethe_hessian_nullspace_check(g: Graph, eta: float, m: np.ndarray) -> float:
    """Relative residual ``||H(eta) m|| / ||m||``."""
    m = np.asarray(m, dtype=float)
    norm = np.linalg.norm(m)
    if norm == 0:
        raise UndefinedMetricError("residual undefined for a zero magnetization")
    h = build_shift(g, ShiftKind.BETHE_HESSIAN, r=eta).matrix
    return float(np.linalg.norm(h @ m) / norm)
