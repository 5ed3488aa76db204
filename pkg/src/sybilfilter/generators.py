"""Planted-partition graph samplers (SBM / degree-corrected SBM) and label sampling."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LabelBudgetError, ParameterError
from .graph import Graph, LabelSet, from_edge_list

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockModelParams:
    """Symmetric block model: ``c_in`` within blocks, ``c_out`` across them.

    Edge probability between ``i`` and ``j`` is ``theta_i theta_j C[l(i), l(j)] / n``.
    ``theta_spec`` is ``None`` (plain SBM) or ``("cube_uniform", lo, hi)`` for
    ``theta ~ U(lo, hi)**3`` rescaled to unit sample mean.
    """

    n: int
    k: int = 2
    c_in: float = 5.0
    c_out: float = 5.0
    sizes: Optional[tuple[int, ...]] = None
    theta_spec: Optional[tuple] = None

    def __post_init__(self):
        if self.c_in < 0 or self.c_out < 0:
            raise ParameterError("connectivities must be nonnegative")
        if self.k < 1 or self.n < 0:
            raise ParameterError("need k >= 1 and n >= 0")
        if self.sizes is not None:
            if len(self.sizes) != self.k or sum(self.sizes) != self.n:
                raise ParameterError(f"sizes {self.sizes} must have k={self.k} entries summing to n={self.n}")

    @classmethod
    def from_degree(cls, n: int, d_ave: float, *, c_out: Optional[float] = None,
                    margin: Optional[float] = None, k: int = 2, theta_spec=None) -> "BlockModelParams":
        """Two-block parametrization by mean degree and either ``c_out`` or the
        community strength ``margin = (c_in - c_out) / 2``.

        For ``k`` equal blocks the mean degree is ``(c_in + (k-1) c_out) / k``.
        """
        if (c_out is None) == (margin is None):
            raise ParameterError("give exactly one of c_out / margin")
        if margin is not None:
            # c_in - c_out = 2*margin and c_in + (k-1) c_out = k*d_ave
            c_out = (k * d_ave - 2 * margin) / k
        c_in = k * d_ave - (k - 1) * c_out
        return cls(n=n, k=k, c_in=float(c_in), c_out=float(c_out), theta_spec=theta_spec)

    def block_sizes(self) -> tuple[int, ...]:
        if self.sizes is not None:
            return tuple(self.sizes)
        base, extra = divmod(self.n, self.k)
        return tuple(base + (1 if a < extra else 0) for a in range(self.k))

    @property
    def strength(self) -> float:
        return (self.c_in - self.c_out) / 2.0


@dataclass(frozen=True, eq=False)
class PlantedGraph:
    graph: Graph
    communities: np.ndarray
    theta: np.ndarray = field(repr=False)

    @property
    def phi(self) -> float:
        """Empirical second moment of the propensities."""
        return float(np.mean(self.theta**2))

    @property
    def k(self) -> int:
        return int(self.communities.max()) + 1 if self.communities.size else 0


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_theta(theta_spec, n: int, rng: np.random.Generator) -> np.ndarray:
    if theta_spec is None:
        return np.ones(n)
    kind = theta_spec[0]
    if kind == "cube_uniform":
        lo, hi = theta_spec[1], theta_spec[2]
        raw = rng.uniform(lo, hi, size=n) ** 3
    elif kind == "constant":
        raw = np.ones(n)
    else:
        raise ParameterError(f"unknown theta distribution {kind!r}")
    return raw / raw.mean()


def _sample(params: BlockModelParams, theta: np.ndarray, rng: np.random.Generator) -> PlantedGraph:
    n = params.n
    sizes = params.block_sizes()
    comm = np.repeat(np.arange(params.k), sizes)
    if n == 0:
        return PlantedGraph(from_edge_list([], 0), comm, theta)
    iu, ju = np.triu_indices(n, k=1)
    c = np.where(comm[iu] == comm[ju], params.c_in, params.c_out)
    prob = theta[iu] * theta[ju] * c / n
    over = prob > 1.0
    if over.any():
        log.warning("clamping %d edge probabilities above 1 (max %.3f)", int(over.sum()), prob.max())
        prob = np.minimum(prob, 1.0)
    hit = rng.random(prob.size) < prob
    g = from_edge_list(np.column_stack([iu[hit], ju[hit]]), n)
    return PlantedGraph(g, comm, theta)


def sample_sbm(params: BlockModelParams, seed=None) -> PlantedGraph:
    """Stochastic block model; every pair is an independent Bernoulli draw."""
    n = params.n
    if n and max(params.c_in, params.c_out) / n > 1:
        raise ParameterError(f"edge probability above 1 (c/n = {max(params.c_in, params.c_out) / n:.3f})")
    return _sample(params, np.ones(n), _rng(seed))


def sample_dcsbm(params: BlockModelParams, seed=None) -> PlantedGraph:
    """Degree-corrected SBM; probabilities above 1 are clamped with a warning."""
    rng = _rng(seed)
    if params.n and max(params.c_in, params.c_out) / params.n > 1:
        raise ParameterError("base edge probability above 1")
    theta = sample_theta(params.theta_spec, params.n, rng)
    return _sample(params, theta, rng)


def sample_planted(params: BlockModelParams, seed=None) -> PlantedGraph:
    if params.theta_spec is None:
        return sample_sbm(params, seed)
    return sample_dcsbm(params, seed)


def cube_uniform_phi(lo: float, hi: float) -> float:
    """Exact ``E[theta^2]`` for ``theta = X / E[X]``, ``X = U(lo, hi)**3``."""
    m3 = (hi**4 - lo**4) / (4 * (hi - lo))
    m6 = (hi**7 - lo**7) / (7 * (hi - lo))
    return m6 / m3**2


def detectability_margin(c_in: float, c_out: float, phi: float = 1.0) -> float:
    """``(c_in - c_out)/2 - sqrt((c_in + c_out) / (2 phi))``; positive means detectable."""
    return (c_in - c_out) / 2.0 - math.sqrt((c_in + c_out) / (2.0 * phi))


def detectability_threshold(d_ave: float, phi: float = 1.0) -> float:
    """Critical community strength ``(c_in - c_out)/2`` for two equal blocks."""
    return math.sqrt(d_ave / phi)


def label_budget(region_size: int, fraction: float, min_count: int = 0) -> int:
    return max(int(min_count), int(math.floor(fraction * region_size)))


def sample_labels(
    communities,
    benign_communities: Sequence[int],
    fraction: float = 0.1,
    min_count: int = 0,
    seed=None,
) -> LabelSet:
    """Label ``max(min_count, floor(fraction * |region|))`` nodes of each region.

    ``communities`` is a per-node community array or a :class:`PlantedGraph`.
    The benign region is the union of ``benign_communities``; every other node
    is in the Sybil region.
    """
    if not 0 < fraction <= 1:
        raise ParameterError("fraction must lie in (0, 1]")
    rng = _rng(seed)
    communities = np.asarray(getattr(communities, "communities", communities))
    benign_mask = np.isin(communities, list(benign_communities))
    picked = []
    for region in (np.flatnonzero(~benign_mask), np.flatnonzero(benign_mask)):
        budget = label_budget(region.size, fraction, min_count)
        if budget > region.size:
            raise LabelBudgetError(f"region of {region.size} nodes cannot supply {budget} labels")
        picked.append(rng.choice(region, size=budget, replace=False))
    return LabelSet(sybil=picked[0], benign=picked[1])
