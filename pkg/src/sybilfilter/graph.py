"""Undirected graphs, label sets and the shift matrices built on top of them."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateDegreeError, MalformedInputError


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` is an ``(m, 2)`` integer array with ``edges[:, 0] < edges[:, 1]``,
    sorted lexicographically. Use :func:`from_edge_list` to build one.
    """

    n: int
    edges: np.ndarray
    adjacency: sp.csr_matrix = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def degree_stats(self) -> "DegreeVector":
        return DegreeVector.of(self)

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


@dataclass(frozen=True)
class DegreeVector:
    d: np.ndarray
    d_ave: float
    d_max: int
    d_min: int

    @classmethod
    def of(cls, g: Graph) -> "DegreeVector":
        d = g.degrees.astype(np.int64)
        if g.n == 0:
            return cls(d, 0.0, 0, 0)
        return cls(d, float(d.mean()), int(d.max()), int(d.min()))


@dataclass(frozen=True)
class LabelSet:
    """Disjoint sets of labeled Sybil and labeled benign nodes."""

    sybil: frozenset
    benign: frozenset

    def __init__(self, sybil: Iterable[int] = (), benign: Iterable[int] = ()):
        s = frozenset(int(i) for i in sybil)
        b = frozenset(int(i) for i in benign)
        if s & b:
            raise MalformedInputError(f"nodes labeled both sybil and benign: {sorted(s & b)}")
        object.__setattr__(self, "sybil", s)
        object.__setattr__(self, "benign", b)

    def validate(self, n: int) -> None:
        for i in self.sybil | self.benign:
            if not 0 <= i < n:
                raise MalformedInputError(f"label node {i} outside [0, {n})")

    def sybil_array(self) -> np.ndarray:
        return np.array(sorted(self.sybil), dtype=np.int64)

    def benign_array(self) -> np.ndarray:
        return np.array(sorted(self.benign), dtype=np.int64)

    def indicator(self, n: int) -> np.ndarray:
        """0/1 vector marking every labeled node."""
        ind = np.zeros(n)
        ind[self.sybil_array()] = 1.0
        ind[self.benign_array()] = 1.0
        return ind

    def swapped(self) -> "LabelSet":
        return LabelSet(self.benign, self.sybil)

    def relabeled(self, perm: np.ndarray) -> "LabelSet":
        """Labels after renaming node ``i`` to ``perm[i]``."""
        return LabelSet((perm[i] for i in self.sybil), (perm[i] for i in self.benign))

    def __len__(self) -> int:
        return len(self.sybil) + len(self.benign)


def from_edge_list(pairs, n: int) -> Graph:
    """Build a graph, dropping self-loops and collapsing duplicate/reversed pairs."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if n < 0:
        raise MalformedInputError("negative node count")
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise MalformedInputError(f"edge endpoint outside [0, {n})")
    arr = arr[arr[:, 0] != arr[:, 1]]
    arr = np.sort(arr, axis=1)
    arr = np.unique(arr, axis=0) if arr.size else arr.reshape(0, 2)
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    adj.sort_indices()
    return Graph(n=int(n), edges=arr, adjacency=adj)


def from_adjacency(a) -> Graph:
    a = sp.coo_matrix(a)
    return from_edge_list(np.column_stack([a.row, a.col]), a.shape[0])


def subgraph(g: Graph, nodes: np.ndarray) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on ``nodes`` (kept in ascending order), with the old->new map."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    new_id = -np.ones(g.n, dtype=np.int64)
    new_id[nodes] = np.arange(nodes.size)
    e = g.edges
    keep = (new_id[e[:, 0]] >= 0) & (new_id[e[:, 1]] >= 0) if e.size else np.zeros(0, bool)
    sub = from_edge_list(new_id[e[keep]], int(nodes.size))
    return sub, {int(o): int(k) for k, o in enumerate(nodes)}


def largest_connected_component(g: Graph) -> tuple[Graph, dict[int, int]]:
    """Largest connected component; ties broken by the smallest member node id."""
    if g.n == 0:
        return g, {}
    _, comp = connected_components(g.adjacency, directed=False)
    sizes = np.bincount(comp)
    best = int(np.argmax(sizes))  # first max == component containing the smallest node
    return subgraph(g, np.flatnonzero(comp == best))


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    return connected_components(g.adjacency, directed=False)[0] == 1


def bethe_hessian_r(g: Graph) -> float:
    """``sqrt(sum d^2 / sum d - 1)``, the usual Bethe-Hessian parameter."""
    d = g.degrees
    if d.sum() == 0:
        raise DegenerateDegreeError("Bethe-Hessian parameter undefined on an edgeless graph")
    return float(np.sqrt(max((d**2).sum() / d.sum() - 1.0, 0.0)))


def augment_graph(g: Graph, labels: LabelSet) -> tuple[Graph, int, int]:
    """Append a Sybil label node and a benign label node wired to the labeled nodes.

    Returns ``(augmented, sybil_label_node, benign_label_node)`` where the two
    new ids are ``n`` and ``n + 1``.
    """
    labels.validate(g.n)
    ls, lb = g.n, g.n + 1
    extra = [(i, ls) for i in sorted(labels.sybil)] + [(i, lb) for i in sorted(labels.benign)]
    pairs = np.concatenate([g.edges, np.asarray(extra, dtype=np.int64).reshape(-1, 2)])
    return from_edge_list(pairs, g.n + 2), ls, lb


class ShiftKind(str, enum.Enum):
    RANDOM_WALK = "rw"
    AUGMENTED = "aug"
    MAX_DEGREE = "max"
    BETHE_HESSIAN = "bh"
    REGULARIZED = "tau"


@dataclass(frozen=True, eq=False)
class ShiftMatrix:
    """A shift operator over a graph.

    ``similarity`` is set for the non-symmetric Laplacians: with
    ``w = similarity`` the matrix equals ``diag(w) @ sym @ diag(1/w)`` where
    ``sym = I - N^{-1/2} A N^{-1/2}`` and ``N`` the (augmented) degree matrix.
    """

    kind: ShiftKind
    matrix: sp.csr_matrix = field(repr=False)
    symmetric: bool
    graph: Graph = field(repr=False)
    spectral_support: Optional[tuple[float, float]] = None
    param: Optional[float] = None
    similarity: Optional[np.ndarray] = field(default=None, repr=False)
    symmetric_form: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _require_positive(d: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise DegenerateDegreeError(f"{what}: {bad.size} node(s) with zero degree, e.g. node {bad[0]}")


def _normalized(a: sp.csr_matrix, d: np.ndarray) -> sp.csr_matrix:
    s = sp.diags(1.0 / np.sqrt(d))
    n = a.shape[0]
    return (sp.identity(n, format="csr") - s @ a @ s).tocsr()


def build_shift(
    g: Graph,
    kind,
    labels: Optional[LabelSet] = None,
    *,
    r: Optional[float] = None,
    tau: Optional[float] = None,
) -> ShiftMatrix:
    """Construct one of the five shift matrices.

    ``r`` defaults to :func:`bethe_hessian_r` and ``tau`` to the mean degree.
    ``labels`` is required for (and only for) the augmented Laplacian.
    """
    kind = ShiftKind(kind)
    a = g.adjacency
    n = g.n
    eye = sp.identity(n, format="csr")
    d = g.degrees

    if (kind is ShiftKind.AUGMENTED) != (labels is not None):
        raise ValueError("labels are required exactly for the augmented Laplacian")

    if kind is ShiftKind.RANDOM_WALK:
        _require_positive(d, "random-walk Laplacian")
        m = (eye - a @ sp.diags(1.0 / d)).tocsr()
        return ShiftMatrix(kind, m, False, g, (0.0, 2.0), similarity=np.sqrt(d),
                           symmetric_form=_normalized(a, d))
    if kind is ShiftKind.AUGMENTED:
        labels.validate(n)
        dh = d + labels.indicator(n)
        _require_positive(dh, "augmented Laplacian")
        m = (eye - sp.diags(1.0 / dh) @ a).tocsr()
        return ShiftMatrix(kind, m, False, g, (0.0, 2.0), similarity=1.0 / np.sqrt(dh),
                           symmetric_form=_normalized(a, dh))
    if kind is ShiftKind.MAX_DEGREE:
        dmax = d.max() if n else 0
        if dmax <= 0:
            raise DegenerateDegreeError("max-degree Laplacian undefined on an edgeless graph")
        m = (eye - a / dmax).tocsr()
        return ShiftMatrix(kind, m, True, g, (0.0, 2.0), param=float(dmax))
    if kind is ShiftKind.BETHE_HESSIAN:
        if r is None:
            r = bethe_hessian_r(g)
        m = ((r * r - 1.0) * eye + sp.diags(d) - r * a).tocsr()
        return ShiftMatrix(kind, m, True, g, None, param=float(r))
    # regularized Laplacian
    if tau is None:
        tau = float(d.mean())
    dt = d + tau
    _require_positive(dt, "regularized Laplacian")
    support = (0.0, 2.0) if tau >= 0 else None
    return ShiftMatrix(kind, _normalized(a, dt), True, g, support, param=float(tau))


def read_edge_list(path, n: Optional[int] = None) -> tuple[Graph, list[str]]:
    """Read ``u v`` lines (``#`` comments allowed).

    Tokens are mapped to dense ids in order of first appearance unless ``n`` is
    known (argument or a ``# nodes N`` header line), in which case the tokens
    must be integer ids and are kept as-is.
    Returns the graph and the id -> original-name list.
    """
    raw = []
    for line in Path(path).read_text().splitlines():
        header = re.match(r"#\s*nodes\s+(\d+)\s*$", line.strip())
        if header and n is None:
            n = int(header.group(1))
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise MalformedInputError(f"{path}: expected 'u v', got {line!r}")
        raw.append((parts[0], parts[1]))
    if n is not None:
        try:
            pairs = [(int(u), int(v)) for u, v in raw]
        except ValueError as exc:
            raise MalformedInputError(f"{path}: non-integer node id") from exc
        return from_edge_list(pairs, n), [str(i) for i in range(n)]
    names: dict[str, int] = {}
    for u, v in raw:
        for t in (u, v):
            if t not in names:
                names[t] = len(names)
    order = list(names)
    # keep integer-named files in numeric order so ids survive a roundtrip
    if all(t.lstrip("-").isdigit() for t in order):
        order.sort(key=int)
        names = {t: k for k, t in enumerate(order)}
    pairs = [(names[u], names[v]) for u, v in raw]
    return from_edge_list(pairs, len(order)), order


def write_edge_list(g: Graph, path, header: Optional[str] = None) -> None:
    with open(path, "w") as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        f.write(f"# nodes {g.n}\n")
        for u, v in g.edges:
            f.write(f"{u} {v}\n")


def read_communities(path) -> dict[str, list[str]]:
    """``node community [extra columns...]`` lines -> {node name: remaining columns}."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise MalformedInputError(f"{path}: expected 'node community', got {line!r}")
        out[parts[0]] = parts[1:]
    return out


def write_communities(assignment, path, extra: Optional[dict[str, np.ndarray]] = None) -> None:
    extra = extra or {}
    with open(path, "w") as f:
        if extra:
            f.write("# node community " + " ".join(extra) + "\n")
        for i, c in enumerate(np.asarray(assignment)):
            cols = " ".join(repr(float(v[i])) for v in extra.values())
            f.write(f"{i} {int(c)}" + (f" {cols}" if cols else "") + "\n")
