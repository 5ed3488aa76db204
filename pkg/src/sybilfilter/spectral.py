"""Graph Fourier machinery: spectra of shift matrices, filter kernels, exact
spectral filtering and Chebyshev polynomial filtering."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la

from .errors import DomainError, NumericalFailureError, ParameterError, SingularFilterError
from .graph import ShiftMatrix

MAX_DENSE_N = 5000
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues in ascending order with the matching eigenbasis.

    For a partial spectrum (``k`` smallest only) ``basis`` is ``n x k`` and
    ``inverse_basis`` holds the corresponding ``k`` rows of ``V^{-1}``.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray = field(repr=False)
    inverse_basis: np.ndarray = field(repr=False)
    kind: Optional[str] = None

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def complete(self) -> bool:
        return self.basis.shape[1] == self.basis.shape[0]

    def gft(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"signal of length {x.shape[0]} on a {self.n}-node spectrum")
        return self.inverse_basis @ x

    def igft(self, xhat: np.ndarray) -> np.ndarray:
        xhat = np.asarray(xhat, dtype=float)
        if xhat.shape[0] != self.basis.shape[1]:
            raise ValueError(f"spectrum has {self.basis.shape[1]} modes, got {xhat.shape[0]}")
        return self.basis @ xhat


def _canonical_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry that is not ~0 is positive."""
    if u.size == 0:
        return u
    scale = np.abs(u).max(axis=0, keepdims=True)
    nz = np.abs(u) > 1e-10 * np.maximum(scale, 1e-300)
    first = nz.argmax(axis=0)
    signs = np.sign(u[first, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def eig(shift: ShiftMatrix, k: Optional[int] = None, check: bool = True) -> Spectrum:
    """Dense eigendecomposition of a shift matrix (all modes, or the ``k`` smallest).

    Non-symmetric Laplacians are diagonalized through their symmetric
    similarity transform, so the spectrum is real and ``V^{-1}`` is explicit.
    """
    n = shift.n
    if n > MAX_DENSE_N:
        raise ParameterError(f"dense eigendecomposition capped at n={MAX_DENSE_N}, got {n}")
    if k is not None and not 1 <= k <= n:
        raise ParameterError(f"k={k} outside [1, {n}]")
    sym = shift.matrix if shift.symmetric else shift.symmetric_form
    subset = None if k is None or k == n else (0, k - 1)
    vals, u = la.eigh(sym.toarray(), subset_by_index=subset)
    u = _canonical_signs(u)
    if shift.symmetric:
        basis, inv = u, u.T
    else:
        w = shift.similarity
        basis = w[:, None] * u
        inv = u.T / w[None, :]
    spec = Spectrum(vals, basis, inv, kind=shift.kind.value)
    if check:
        res = residual(shift, spec)
        if not res <= RESIDUAL_TOL:
            raise NumericalFailureError(f"eigen-reconstruction residual {res:.2e} exceeds {RESIDUAL_TOL}")
    return spec


def residual(shift: ShiftMatrix, spec: Spectrum) -> float:
    """``||S V - V diag(lambda)|| / (||S|| ||V||)`` in the Frobenius norm."""
    sv = shift.matrix @ spec.basis
    r = np.linalg.norm(sv - spec.basis * spec.eigenvalues[None, :])
    s_norm = np.sqrt((shift.matrix.data**2).sum()) or 1.0
    return float(r / (s_norm * np.linalg.norm(spec.basis)))


@dataclass(frozen=True)
class FilterKernel:
    """A scalar response ``h(lambda)`` applied per graph frequency."""

    kind: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    param: Optional[float] = None

    def __call__(self, lam) -> np.ndarray:
        return self.func(np.asarray(lam, dtype=float))

    # kernels from the unified filtering view of the detectors

    @classmethod
    def cia(cls, alpha: float) -> "FilterKernel":
        if not 0 <= alpha < 1:
            raise ParameterError("restart parameter alpha must lie in [0, 1)")
        return cls("cia", lambda x: (1 - alpha) / (1 - alpha * (1 - x)), alpha)

    @classmethod
    def sybilrank(cls, gamma: int) -> "FilterKernel":
        return cls("sybilrank", lambda x: (1 - x) ** gamma, gamma)

    @classmethod
    def inverse(cls, pseudo: bool = False) -> "FilterKernel":
        def h(x):
            with np.errstate(divide="ignore"):
                out = 1.0 / x
            if pseudo:
                out = np.where(x == 0, 0.0, out)
            return out
        return cls("pseudo_inverse" if pseudo else "inverse", h)

    @classmethod
    def ideal_lowpass(cls, cutoff: float) -> "FilterKernel":
        return cls("ideal_lowpass", lambda x: (x <= cutoff).astype(float), cutoff)

    @classmethod
    def heat(cls, s: float) -> "FilterKernel":
        if s < 0:
            raise ParameterError("heat scale s must be nonnegative")
        return cls("heat", lambda x: np.exp(-s * x), s)

    @classmethod
    def constant(cls, c: float = 1.0) -> "FilterKernel":
        return cls("constant", lambda x: np.full_like(x, c, dtype=float), c)


def _zero_modes(lam: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(lam).max()) if lam.size else 1.0)
    return np.abs(lam) <= 1e-10 * scale


def apply_filter(spec: Spectrum, kernel: FilterKernel, q: np.ndarray) -> np.ndarray:
    """``V h(Lambda) V^{-1} q``.

    The inverse kernel is singular at a zero eigenvalue; that mode is allowed
    only when ``q`` has no component along it (within 1e-12 of the largest
    coefficient), and then contributes nothing. The pseudo-inverse kernel
    drops zero modes unconditionally.
    """
    qhat = spec.gft(q)
    lam = spec.eigenvalues
    if kernel.kind in ("inverse", "pseudo_inverse"):
        zero = _zero_modes(lam)
        if zero.any() and kernel.kind == "inverse":
            coef = np.abs(qhat[zero]).reshape(zero.sum(), -1).max(axis=1)
            ref = max(float(np.abs(qhat).max()), 1e-300)
            bad = coef > 1e-12 * ref
            if bad.any():
                ev = float(lam[zero][bad][0])
                raise SingularFilterError(
                    f"inverse kernel has a pole at eigenvalue {ev:.3e} where the input has weight",
                    eigenvalue=ev,
                )
        with np.errstate(divide="ignore"):
            h = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, lam))
    else:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            h = kernel(lam)
        if not np.all(np.isfinite(h)):
            ev = float(lam[~np.isfinite(h)][0])
            raise SingularFilterError(f"{kernel.kind} kernel not finite at eigenvalue {ev:.3e}", eigenvalue=ev)
    hq = qhat * (h if qhat.ndim == 1 else h[:, None])
    return spec.igft(hq)


def chebyshev_coeffs(kernel: Callable, K: int, quadrature_points: int = 8192) -> np.ndarray:
    """Coefficients of ``h`` in the Chebyshev basis shifted to ``[0, 2]``.

    ``c_k = (2/pi) int_0^pi h(cos t + 1) cos(k t) dt``, by the trapezoid rule
    on ``quadrature_points`` panels.
    """
    if K < 0:
        raise ParameterError("Chebyshev order must be nonnegative")
    m = int(quadrature_points)
    t = np.linspace(0.0, np.pi, m + 1)
    w = np.full(m + 1, np.pi / m)
    w[[0, -1]] *= 0.5
    f = np.asarray(kernel(np.cos(t) + 1.0), dtype=float) * w
    ks = np.arange(K + 1)
    return (2.0 / np.pi) * (np.cos(np.outer(ks, t)) @ f)


def chebyshev_apply(shift: ShiftMatrix, coeffs: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``c_0/2 q + sum_k c_k T_k(S) q`` with ``T_k`` shifted to ``[0, 2]``.

    Uses the three-term recurrence, so only sparse products with ``S`` are needed.
    """
    sup = shift.spectral_support
    if sup is None or sup[0] < 0.0 or sup[1] > 2.0:
        raise DomainError(f"{shift.kind.value} shift has spectral support {sup}, not within [0, 2]")
    coeffs = np.asarray(coeffs, dtype=float)
    q = np.asarray(q, dtype=float)
    s = shift.matrix

    def step(x):
        return s @ x - x

    out = 0.5 * coeffs[0] * q
    if coeffs.size == 1:
        return out
    t_prev, t_cur = q, step(q)
    out = out + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_prev, t_cur = t_cur, 2.0 * step(t_cur) - t_prev
        out = out + c * t_cur
    return out


def isolated_low_count(eigenvalues: np.ndarray, max_count: int = 10) -> int:
    """Number of eigenvalues sitting below the widest gap at the bottom of the spectrum."""
    lam = np.sort(np.asarray(eigenvalues))[: max_count + 1]
    return int(np.argmax(np.diff(lam))) + 1


def write_eigenvalues_csv(spec: Spectrum, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["index", "eigenvalue"])
        for i, v in enumerate(spec.eigenvalues):
            wr.writerow([i, repr(float(v))])
