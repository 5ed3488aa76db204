"""Loading real networks with ground-truth communities.

Only the karate club is bundled. Other benchmark networks (dolphins,
football, polblogs) load from user-supplied files in the same text formats.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import MalformedInputError
from .evaluation import Dataset
from .graph import largest_connected_component, read_communities, read_edge_list

BUNDLED = ("karate",)


def _community_ids(tokens: list[str]) -> np.ndarray:
    """Dense community ids ordered by the sorted original ids (numeric when possible)."""
    uniq = set(tokens)
    try:
        order = sorted(uniq, key=float)
    except ValueError:
        order = sorted(uniq)
    rank = {t: i for i, t in enumerate(order)}
    return np.array([rank[t] for t in tokens], dtype=np.int64)


def load_dataset(path, community_path, name: Optional[str] = None,
                 split_seed: Optional[int] = None) -> Dataset:
    """Largest connected component of an edge list plus its community split.

    Communities are ranked by sorted id and the first half (rounded down, at
    least one) form the benign region; ``split_seed`` picks a random half
    instead. Edge direction is ignored.
    """
    g, names = read_edge_list(path)
    comm_rows = read_communities(community_path)
    index = {nm: i for i, nm in enumerate(names)}
    missing = [nm for nm in comm_rows if nm not in index]
    if missing:
        raise MalformedInputError(f"{community_path}: node {missing[0]!r} is not in the graph")
    unassigned = [nm for nm in names if nm not in comm_rows]
    if unassigned:
        raise MalformedInputError(f"{community_path}: node {unassigned[0]!r} has no community")
    comm = _community_ids([comm_rows[nm][0] for nm in names])

    lcc, idmap = largest_connected_component(g)
    keep = np.fromiter(idmap.keys(), dtype=np.int64, count=len(idmap))
    comm = comm[keep]
    ids = np.unique(comm)
    n_benign = max(1, ids.size // 2)
    if split_seed is None:
        benign = ids[:n_benign]
    else:
        benign = np.sort(np.random.default_rng(split_seed).choice(ids, size=n_benign, replace=False))
    return Dataset(name or Path(path).stem, lcc, comm, tuple(int(c) for c in benign))


def bundled(name: str, split_seed: Optional[int] = None) -> Dataset:
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; available: {', '.join(BUNDLED)}")
    base = resources.files("sybilfilter") / "data"
    with resources.as_file(base / f"{name}.edges") as e, resources.as_file(base / f"{name}.communities") as c:
        return load_dataset(e, c, name=name, split_seed=split_seed)


def karate(split_seed: Optional[int] = None) -> Dataset:
    return bundled("karate", split_seed)


def resolve(spec: str, community_path=None, split_seed: Optional[int] = None) -> Dataset:
    """A bundled name, or an edge-list path (communities default to ``<stem>.communities``)."""
    if spec in BUNDLED:
        return bundled(spec, split_seed)
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"dataset {spec!r} is neither bundled nor a file")
    if community_path is None:
        community_path = path.with_suffix(".communities")
    if not Path(community_path).exists():
        raise FileNotFoundError(f"ground-truth file {community_path} not found")
    return load_dataset(path, community_path, split_seed=split_seed)
