"""Spectral clustering over an arbitrary shift matrix, and NMI scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from . import spectral
from .graph import ShiftMatrix, write_communities


@dataclass(frozen=True, eq=False)
class Clustering:
    assignment: np.ndarray
    k: int

    @classmethod
    def from_labels(cls, labels) -> "Clustering":
        """Relabel arbitrary ids to ``0..k-1`` in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return cls(rank[inv].astype(np.int64), int(first.size))

    def __len__(self) -> int:
        return self.assignment.shape[0]

    def write(self, path) -> None:
        write_communities(self.assignment, path)


def kmeans(points: np.ndarray, k: int, seed=0, restarts: int = 10, max_iter: int = 300) -> np.ndarray:
    """Best of ``restarts`` k-means++ / Lloyd runs by within-cluster sum of squares."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if k == 1:
        return np.zeros(points.shape[0], dtype=np.int64)
    if points.shape[0] < k:
        raise ValueError(f"cannot form {k} clusters from {points.shape[0]} points")
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, max_iter=max_iter,
                random_state=np.random.RandomState(_seed_int(seed)))
    return km.fit_predict(points).astype(np.int64)


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**31 - 1))
    return int(np.random.SeedSequence(seed).generate_state(1)[0] % (2**31 - 1))


def spectral_embedding(shift: ShiftMatrix, k: int) -> np.ndarray:
    """Row-normalized ``k`` smallest eigenvectors; all-zero rows stay zero."""
    spec = spectral.eig(shift, k=k)
    vk = spec.basis
    norms = np.linalg.norm(vk, axis=1, keepdims=True)
    return np.divide(vk, norms, out=np.zeros_like(vk), where=norms > 0)


def spectral_clustering(shift: ShiftMatrix, k: int, seed=0, restarts: int = 10) -> Clustering:
    if not 2 <= k <= shift.n:
        raise ValueError(f"k={k} must lie in [2, n={shift.n}]")
    y = spectral_embedding(shift, k)
    return Clustering.from_labels(kmeans(y, k, seed, restarts))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Mutual information normalized by the arithmetic mean of the two entropies."""
    a = np.asarray(getattr(a, "assignment", a))
    b = np.asarray(getattr(b, "assignment", b))
    if a.shape != b.shape:
        raise ValueError("clusterings cover different node counts")
    if a.size == 0:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    ha, hb = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if ha == 0 and hb == 0:
        return 1.0
    pij = table / a.size
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / a.size**2
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    return float(np.clip(mi / (0.5 * (ha + hb)), 0.0, 1.0))
