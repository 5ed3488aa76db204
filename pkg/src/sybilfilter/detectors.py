"""Graph-based Sybil detectors, each in its propagation form and its
closed-form / spectral-filter form.

Every detector maps ``(graph, labels, params)`` to a :class:`ScoreVector`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from . import spectral
from .errors import (
    ConvergenceError,
    DegenerateDegreeError,
    EmptyBandError,
    NonstandardMethodError,
    ParameterError,
    SingularFilterError,
)
from .graph import Graph, LabelSet, ShiftKind, build_shift, subgraph
from .spectral import FilterKernel

log = logging.getLogger(__name__)

HIGHER_IS_SYBIL = "higher-is-sybil"
HIGHER_IS_BENIGN = "higher-is-benign"


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    orientation: str = HIGHER_IS_SYBIL
    method: str = ""

    def __post_init__(self):
        if self.orientation not in (HIGHER_IS_SYBIL, HIGHER_IS_BENIGN):
            raise ValueError(f"bad orientation {self.orientation!r}")

    def __len__(self) -> int:
        return self.scores.shape[0]

    def sybil_scores(self) -> np.ndarray:
        """Scores oriented so that larger means more Sybil-like."""
        return self.scores if self.orientation == HIGHER_IS_SYBIL else -self.scores

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["node", "score", "orientation"])
            for i, v in enumerate(self.scores):
                wr.writerow([i, repr(float(v)), self.orientation])


@dataclass(frozen=True)
class DetectorParams:
    alpha: float = 0.85
    gamma: Optional[int] = None  # None -> floor(log N)
    gamma_log_base: float = math.e
    theta: float = 0.5
    s: float = 8.0
    tau: Optional[float] = None  # None -> mean degree
    K: int = 30
    tol: float = 1e-10
    max_iter: int = 10_000
    bh_cutoff: Union[str, float] = "negative"
    bh_k: int = 2

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.gamma is not None and self.gamma < 0:
            raise ParameterError("gamma must be nonnegative")
        if not 0 < self.theta <= 0.5:
            raise ParameterError("theta must lie in (0, 0.5]")
        if self.s < 0:
            raise ParameterError("s must be nonnegative")
        if self.K < 0:
            raise ParameterError("K must be nonnegative")

    def gamma_for(self, n: int) -> int:
        if self.gamma is not None:
            return int(self.gamma)
        # the epsilon keeps exact powers (log_10 1000 = 2.9999999999999996) on the right side
        return max(int(math.floor(math.log(n) / math.log(self.gamma_log_base) + 1e-12)), 0)


DEFAULT_PARAMS = DetectorParams()


def _prep(g: Graph, labels: LabelSet) -> None:
    labels.validate(g.n)


def _fixed_point(step, x0: np.ndarray, tol: float, max_iter: int, what: str) -> np.ndarray:
    x = x0
    for _ in range(max_iter):
        nxt = step(x)
        if not np.all(np.isfinite(nxt)):
            raise ConvergenceError(f"{what}: iteration diverged")
        if np.max(np.abs(nxt - x), initial=0.0) < tol:
            return nxt
        x = nxt
    raise ConvergenceError(f"{what}: no convergence within {max_iter} iterations")


def _column_stochastic(g: Graph) -> sp.csr_matrix:
    d = g.degrees
    if np.any(d == 0):
        raise DegenerateDegreeError("random-walk transition needs every node to have an edge")
    return (g.adjacency @ sp.diags(1.0 / d)).tocsr()


def signed_prior(n: int, labels: LabelSet, value: float = 1.0) -> np.ndarray:
    """``+value`` on labeled Sybils, ``-value`` on labeled benign nodes, 0 elsewhere."""
    q = np.zeros(n)
    q[labels.sybil_array()] = value
    q[labels.benign_array()] = -value
    return q


# --------------------------------------------------------------------- CIA

def cia(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
        form: str = "iterative", spectrum=None) -> ScoreVector:
    """Random walk with restart from the labeled Sybils (badness scores)."""
    _prep(g, labels)
    if not labels.sybil:
        raise ParameterError("CIA needs at least one labeled Sybil")
    q = np.zeros(g.n)
    q[labels.sybil_array()] = 1.0
    a = params.alpha
    if form == "iterative":
        p_mat = _column_stochastic(g)
        p = _fixed_point(lambda x: a * (p_mat @ x) + (1 - a) * q, q, params.tol, params.max_iter, "CIA")
    elif form == "spectral":
        spec = spectrum or spectral.eig(build_shift(g, ShiftKind.RANDOM_WALK))
        p = spectral.apply_filter(spec, FilterKernel.cia(a), q)
    elif form == "solve":
        m = sp.identity(g.n, format="csc") - a * _column_stochastic(g).tocsc()
        p = (1 - a) * spla.spsolve(m, q)
    else:
        raise ValueError(f"unknown form {form!r}")
    return ScoreVector(p, HIGHER_IS_SYBIL, "cia")


# ---------------------------------------------------------------- SybilRank

def sybilrank(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
              form: str = "iterative", spectrum=None) -> ScoreVector:
    """Early-terminated random walk from the labeled benign nodes, degree-normalized.

    Runs exactly ``gamma`` propagation steps; the output is a trust score.
    """
    _prep(g, labels)
    if not labels.benign:
        raise ParameterError("SybilRank needs at least one labeled benign node")
    d = g.degrees
    if np.any(d == 0):
        raise DegenerateDegreeError("SybilRank normalizes by degree; isolated node present")
    gamma = params.gamma_for(g.n)
    b = labels.benign_array()
    q = np.zeros(g.n)
    q[b] = 1.0 / b.size
    if form == "iterative":
        p_mat = _column_stochastic(g)
        p = q
        for _ in range(gamma):
            p = p_mat @ p
    elif form == "spectral":
        spec = spectrum or spectral.eig(build_shift(g, ShiftKind.RANDOM_WALK))
        p = spectral.apply_filter(spec, FilterKernel.sybilrank(gamma), q)
    else:
        raise ValueError(f"unknown form {form!r}")
    return ScoreVector(p / d, HIGHER_IS_BENIGN, "sybilrank")


# ---------------------------------------------------------------- SybilWalk

def _walk_inputs(g: Graph, labels: LabelSet):
    dh = g.degrees + labels.indicator(g.n)
    if np.any(dh == 0):
        raise DegenerateDegreeError("SybilWalk: isolated, unlabeled node")
    qs = np.zeros(g.n)
    s = labels.sybil_array()
    qs[s] = 1.0 / dh[s]
    return dh, qs


def _unreachable(g: Graph, labels: LabelSet) -> np.ndarray:
    """Mask of nodes whose component holds no labeled node."""
    _, comp = connected_components(g.adjacency, directed=False)
    lab = np.concatenate([labels.sybil_array(), labels.benign_array()])
    return ~np.isin(comp, comp[lab])


def sybilwalk(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
              form: str = "iterative", spectrum=None) -> ScoreVector:
    """Probability that a walk from each node hits the Sybil label node first.

    Label nodes are absorbing; nodes in components without any label never
    get absorbed and are assigned 0 (with a warning).
    """
    _prep(g, labels)
    if not labels.sybil or not labels.benign:
        raise ParameterError("SybilWalk needs labeled Sybil and benign nodes")
    dh, qs = _walk_inputs(g, labels)
    lost = _unreachable(g, labels)
    if lost.any():
        log.warning("SybilWalk: %d node(s) cannot reach any label node; scored 0", int(lost.sum()))
    keep = np.flatnonzero(~lost)
    a = g.adjacency[keep][:, keep] if lost.any() else g.adjacency
    dh_k, qs_k = dh[keep], qs[keep]
    trans = (sp.diags(1.0 / dh_k) @ a).tocsr()
    if form == "iterative":
        p_k = _fixed_point(lambda x: trans @ x + qs_k, np.zeros(keep.size), params.tol,
                           params.max_iter, "SybilWalk")
    elif form in ("spectral", "solve"):
        if form == "solve":
            m = sp.identity(keep.size, format="csc") - trans.tocsc()
            p_k = spla.spsolve(m, qs_k)
        else:
            if spectrum is None:
                sub = subgraph(g, keep)[0] if lost.any() else g
                sub_labels = labels if not lost.any() else _restrict_labels(labels, keep)
                spectrum = spectral.eig(build_shift(sub, ShiftKind.AUGMENTED, sub_labels))
            p_k = spectral.apply_filter(spectrum, FilterKernel.inverse(), qs_k)
    else:
        raise ValueError(f"unknown form {form!r}")
    p = np.zeros(g.n)
    p[keep] = p_k
    return ScoreVector(p, HIGHER_IS_SYBIL, "sybilwalk")


def _restrict_labels(labels: LabelSet, keep: np.ndarray) -> LabelSet:
    new = {int(o): k for k, o in enumerate(keep)}
    return LabelSet((new[i] for i in labels.sybil if i in new), (new[i] for i in labels.benign if i in new))


# ---------------------------------------------------------------- SybilSCAR

def sybilscar(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
              variant: str = "C", form: str = "iterative", spectrum=None,
              allow_nonstandard: bool = False) -> ScoreVector:
    """Linearized score propagation with residual prior ``+-theta``.

    Variant ``C`` uses the constant residual weight ``1/(2 d_max)``; variant
    ``D`` the degree-normalized ``1/(2 d_j)``, whose iteration is not stable in
    general and is therefore gated behind ``allow_nonstandard``.
    """
    _prep(g, labels)
    variant = variant.upper()
    if variant not in ("C", "D"):
        raise ValueError("variant must be 'C' or 'D'")
    if variant == "D" and not allow_nonstandard:
        raise NonstandardMethodError(
            "SybilSCAR-D is excluded from the standard protocol: its iteration does not converge "
            "stably (the random-walk Laplacian has a zero eigenvalue); pass allow_nonstandard=True"
        )
    qc = signed_prior(g.n, labels, params.theta)
    name = f"sybilscar-{variant.lower()}"
    if variant == "C":
        dmax = g.degrees.max() if g.n else 0
        if dmax == 0:
            raise DegenerateDegreeError("SybilSCAR-C needs at least one edge")
        w2 = (g.adjacency / dmax).tocsr()
        kind = ShiftKind.MAX_DEGREE
    else:
        w2 = _column_stochastic(g)
        kind = ShiftKind.RANDOM_WALK
    if not qc.any():
        return ScoreVector(np.full(g.n, 0.5), HIGHER_IS_SYBIL, name)
    if form == "iterative":
        pc = _fixed_point(lambda x: w2 @ x + qc, qc, params.tol, params.max_iter, name)
    elif form == "spectral":
        spec = spectrum or spectral.eig(build_shift(g, kind))
        pc = spectral.apply_filter(spec, FilterKernel.inverse(), qc)
    elif form == "solve":
        m = (sp.identity(g.n, format="csc") - w2.tocsc())
        lu = spla.splu(m)
        pc = lu.solve(qc)
        if not np.all(np.isfinite(pc)) or np.abs(m @ pc - qc).max() > 1e-8 * max(1.0, np.abs(pc).max()):
            raise SingularFilterError(f"{name}: I - 2W is singular on this graph")
    else:
        raise ValueError(f"unknown form {form!r}")
    return ScoreVector(pc + 0.5, HIGHER_IS_SYBIL, name)


# -------------------------------------------------------------- SybilBelief

def bethe_hessian_band(g: Graph, cutoff: Union[str, float] = "negative", k: int = 2,
                       r: Optional[float] = None) -> spectral.Spectrum:
    """Eigenpairs of ``H(r)`` passed by the ideal low-pass filter.

    ``cutoff="negative"`` keeps the negative eigenvalues (falling back to the
    ``k`` smallest if there are none); ``"smallest"`` keeps the ``k``
    smallest; a number ``c`` keeps every eigenvalue ``<= c``.
    """
    shift = build_shift(g, ShiftKind.BETHE_HESSIAN, r=r)
    h = shift.matrix.toarray()
    if cutoff == "negative":
        vals, vecs = la.eigh(h, subset_by_value=(-np.inf, 0.0))
        if vals.size == 0:
            vals, vecs = la.eigh(h, subset_by_index=(0, min(k, g.n) - 1))
    elif cutoff == "smallest":
        vals, vecs = la.eigh(h, subset_by_index=(0, min(k, g.n) - 1))
    else:
        c = float(cutoff)
        vals, vecs = la.eigh(h)
        keep = vals <= c
        vals, vecs = vals[keep], vecs[:, keep]
    if vals.size == 0:
        raise EmptyBandError(f"ideal low-pass cutoff {cutoff!r} keeps no eigenvectors")
    vecs = spectral._canonical_signs(vecs)
    return spectral.Spectrum(vals, vecs, vecs.T, kind="bh")


def sybilbelief_spectral(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
                         cutoff: Union[str, float, None] = None, k: Optional[int] = None,
                         r: Optional[float] = None) -> ScoreVector:
    """Project the signed prior onto the low band of the Bethe-Hessian."""
    _prep(g, labels)
    cutoff = params.bh_cutoff if cutoff is None else cutoff
    k = params.bh_k if k is None else k
    q = signed_prior(g.n, labels)
    band = bethe_hessian_band(g, cutoff, k, r)
    p = band.basis @ (band.inverse_basis @ q)
    return ScoreVector(p, HIGHER_IS_SYBIL, "sybilbelief")


# ----------------------------------------------------------------- SybilHeat

def sybilheat(g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
              form: str = "chebyshev", spectrum=None) -> ScoreVector:
    """Heat-kernel filtering of the signed prior over the regularized Laplacian."""
    _prep(g, labels)
    d = g.degrees
    tau = float(d.mean()) if params.tau is None else float(params.tau)
    if g.n and tau <= -d.min():
        raise ParameterError(f"tau={tau} must exceed -d_min={-d.min()}")
    shift = build_shift(g, ShiftKind.REGULARIZED, tau=tau)
    q = signed_prior(g.n, labels)
    kernel = FilterKernel.heat(params.s)
    if form == "exact":
        spec = spectrum or spectral.eig(shift)
        p = spectral.apply_filter(spec, kernel, q)
    elif form == "chebyshev":
        coeffs = spectral.chebyshev_coeffs(kernel, params.K)
        p = spectral.chebyshev_apply(shift, coeffs, q)
    else:
        raise ValueError(f"unknown form {form!r}")
    return ScoreVector(p, HIGHER_IS_SYBIL, "sybilheat")


# ----------------------------------------------------------------- dispatch

METHODS = ("cia", "sybilrank", "sybilwalk", "sybilscar-c", "sybilbelief", "sybilheat")
NONSTANDARD_METHODS = ("sybilscar-d",)


def detect(method: str, g: Graph, labels: LabelSet, params: DetectorParams = DEFAULT_PARAMS,
           allow_nonstandard: bool = False) -> ScoreVector:
    """Run a detector by name with its fast default form."""
    method = method.lower()
    if method == "cia":
        return cia(g, labels, params, form="solve")
    if method == "sybilrank":
        return sybilrank(g, labels, params, form="iterative")
    if method == "sybilwalk":
        return sybilwalk(g, labels, params, form="solve")
    if method == "sybilscar-c":
        return sybilscar(g, labels, params, "C", form="solve")
    if method == "sybilscar-d":
        return sybilscar(g, labels, params, "D", form="spectral", allow_nonstandard=allow_nonstandard)
    if method == "sybilbelief":
        return sybilbelief_spectral(g, labels, params)
    if method == "sybilheat":
        return sybilheat(g, labels, params, form="chebyshev")
    raise ValueError(f"unknown method {method!r}; choose from {METHODS + NONSTANDARD_METHODS}")
