"""AUC scoring, label noise, and the experiment runners behind the synthetic
sweeps and the real-network table."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.stats import rankdata

from . import generators
from .community import nmi, spectral_clustering
from .detectors import DEFAULT_PARAMS, DetectorParams, ScoreVector, detect
from .errors import ParameterError, SybilFilterError, UndefinedMetricError
from .graph import Graph, LabelSet, ShiftKind, build_shift, largest_connected_component

log = logging.getLogger(__name__)


def auc(scores, truth, orientation: Optional[str] = None) -> float:
    """Probability that a random Sybil outranks a random benign node (ties count 1/2).

    ``scores`` may be a :class:`ScoreVector` (its orientation is honored) or a
    plain array read as higher-is-sybil. ``truth`` is a boolean is-Sybil mask.
    """
    if isinstance(scores, ScoreVector):
        x = scores.sybil_scores()
    else:
        x = np.asarray(scores, dtype=float)
        if orientation == "higher-is-benign":
            x = -x
    truth = np.asarray(truth, dtype=bool)
    if x.shape != truth.shape:
        raise ValueError("scores and truth differ in length")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both Sybil and benign nodes")
    ranks = rankdata(x)  # midranks
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def flip_labels(labels: LabelSet, epsilon: float, seed=None) -> LabelSet:
    """Move ``round(epsilon * |set|)`` random members of each labeled set to the other set."""
    if not 0 <= epsilon <= 0.5:
        raise ParameterError("epsilon must lie in [0, 0.5]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s, b = labels.sybil_array(), labels.benign_array()
    fs = rng.choice(s, size=int(math.floor(epsilon * s.size + 0.5)), replace=False)
    fb = rng.choice(b, size=int(math.floor(epsilon * b.size + 0.5)), replace=False)
    new_s = np.concatenate([np.setdiff1d(s, fs), fb])
    new_b = np.concatenate([np.setdiff1d(b, fb), fs])
    return LabelSet(new_s, new_b)


# ------------------------------------------------------------ experiment specs

@dataclass(frozen=True)
class SyntheticGenerator:
    """Two-block (D)SBM at fixed mean degree.

    Either ``c_out`` or ``margin`` (community strength ``(c_in - c_out)/2``)
    fixes the block contrast; a margin sweep overrides both.
    """

    n: int = 1000
    d_ave: float = 5.0
    k: int = 2
    c_out: Optional[float] = None
    margin: Optional[float] = None
    theta_spec: Optional[tuple] = None

    def params(self, margin: Optional[float] = None) -> generators.BlockModelParams:
        if margin is not None:
            return generators.BlockModelParams.from_degree(
                self.n, self.d_ave, margin=margin, k=self.k, theta_spec=self.theta_spec)
        return generators.BlockModelParams.from_degree(
            self.n, self.d_ave, c_out=self.c_out, margin=self.margin, k=self.k,
            theta_spec=self.theta_spec)

    @property
    def threshold(self) -> float:
        phi = 1.0
        if self.theta_spec is not None and self.theta_spec[0] == "cube_uniform":
            phi = generators.cube_uniform_phi(self.theta_spec[1], self.theta_spec[2])
        return generators.detectability_threshold(self.d_ave, phi)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A fixed graph with ground-truth communities and a benign/Sybil split."""

    name: str
    graph: Graph
    communities: np.ndarray
    benign_communities: tuple

    @property
    def is_sybil(self) -> np.ndarray:
        return ~np.isin(self.communities, self.benign_communities)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.name == other.name and self.graph == other.graph
                and self.benign_communities == other.benign_communities
                and np.array_equal(self.communities, other.communities))

    def __hash__(self) -> int:
        return hash((self.name, self.graph))


@dataclass(frozen=True)
class ExperimentSpec:
    generator: Union[SyntheticGenerator, Dataset]
    methods: tuple = ("cia", "sybilrank", "sybilwalk", "sybilscar-c", "sybilbelief", "sybilheat")
    sweep_axis: str = "margin"
    sweep_values: tuple = (2.0,)
    repetitions: int = 1
    seed_base: int = 0
    detector_params: DetectorParams = DEFAULT_PARAMS
    label_fraction: float = 0.1
    min_labels: int = 0
    epsilon: float = 0.0
    exclude_training: bool = False
    shifts: tuple = ("rw", "aug", "max", "bh", "tau")

    def __post_init__(self):
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if not self.sweep_values:
            raise ParameterError("sweep_values must be non-empty")
        if self.sweep_axis not in ("margin", "epsilon"):
            raise ParameterError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis == "margin" and isinstance(self.generator, Dataset):
            raise ParameterError("a fixed dataset can only be swept over epsilon")


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    HEADER = ("method", "sweep", "rep", "metric", "value", "seed")

    def add(self, method, sweep, rep, metric, value, seed) -> None:
        self.rows.append(dict(method=method, sweep=float(sweep), rep=int(rep), metric=metric,
                              value=float(value), seed=int(seed)))

    def values(self, method: str, sweep: Optional[float] = None) -> np.ndarray:
        return np.array([r["value"] for r in self.rows
                         if r["method"] == method and (sweep is None or np.isclose(r["sweep"], sweep))])

    def aggregate(self) -> list[dict]:
        """Mean/std per (method, sweep) over non-missing cells, in first-seen order."""
        keys = []
        groups: dict = {}
        for r in self.rows:
            key = (r["method"], r["sweep"])
            if key not in groups:
                keys.append(key)
                groups[key] = []
            groups[key].append(r["value"])
        out = []
        for method, sweep in keys:
            v = np.array(groups[(method, sweep)])
            v = v[np.isfinite(v)]
            out.append(dict(method=method, sweep=sweep,
                            mean=float(v.mean()) if v.size else float("nan"),
                            std=float(v.std(ddof=1)) if v.size > 1 else 0.0,
                            n=int(v.size)))
        return out

    def mean(self, method: str, sweep: Optional[float] = None) -> float:
        v = self.values(method, sweep)
        v = v[np.isfinite(v)]
        return float(v.mean()) if v.size else float("nan")

    def to_csv(self, raw_path, aggregate_path=None) -> None:
        with open(raw_path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(self.HEADER)
            for r in self.rows:
                wr.writerow([r["method"], repr(r["sweep"]), r["rep"], r["metric"], repr(r["value"]), r["seed"]])
        if aggregate_path is not None:
            with open(aggregate_path, "w", newline="") as f:
                wr = csv.writer(f)
                wr.writerow(["method", "sweep", "mean", "std", "n"])
                for a in self.aggregate():
                    wr.writerow([a["method"], repr(a["sweep"]), repr(a["mean"]), repr(a["std"]), a["n"]])


def run_seed(seed_base: int, sweep_index: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed_base, sweep_index, rep]).generate_state(1)[0])


def _instance(spec: ExperimentSpec, value: float, rng: np.random.Generator):
    """Graph, is-Sybil truth, clean labels, community ids and empirical Phi for one run."""
    gen = spec.generator
    phi = 1.0
    if isinstance(gen, Dataset):
        g, truth, comm = gen.graph, gen.is_sybil, gen.communities
    else:
        margin = value if spec.sweep_axis == "margin" else None
        pg = generators.sample_planted(gen.params(margin), rng)
        g, idmap = largest_connected_component(pg.graph)
        keep = np.fromiter(idmap.keys(), dtype=np.int64, count=len(idmap))
        comm = pg.communities[keep]
        truth = comm != 0  # community 0 is the benign region
        phi = pg.phi
    labels = generators.sample_labels(
        comm, np.unique(comm[~truth]), spec.label_fraction, spec.min_labels, rng)
    return g, truth, labels, comm, phi


def _one_run(spec: ExperimentSpec, sweep_index: int, rep: int) -> list[tuple]:
    value = spec.sweep_values[sweep_index]
    seed = run_seed(spec.seed_base, sweep_index, rep)
    rng = np.random.default_rng(seed)
    g, truth, labels, _, _ = _instance(spec, value, rng)
    eps = value if spec.sweep_axis == "epsilon" else spec.epsilon
    if eps > 0:
        labels = flip_labels(labels, eps, rng)
    mask = np.ones(g.n, dtype=bool)
    if spec.exclude_training:
        mask[labels.sybil_array()] = False
        mask[labels.benign_array()] = False
    out = []
    for method in spec.methods:
        try:
            sv = detect(method, g, labels, spec.detector_params)
            val = auc(sv.sybil_scores()[mask], truth[mask])
        except (SybilFilterError, ArithmeticError, ValueError) as exc:
            log.warning("%s failed at sweep=%s rep=%d: %s", method, value, rep, exc)
            val = float("nan")
        out.append((method, value, rep, "auc", val, seed))
    return out


def _one_detectability_run(spec: ExperimentSpec, sweep_index: int, rep: int) -> list[tuple]:
    value = spec.sweep_values[sweep_index]
    seed = run_seed(spec.seed_base, sweep_index, rep)
    rng = np.random.default_rng(seed)
    g, _, labels, comm, phi = _instance(spec, value, rng)
    k = int(np.unique(comm).size)
    out = []
    if spec.generator.theta_spec is not None:
        # per-sample second moment of theta, for placing the threshold line
        out.append(("empirical-phi", value, rep, "phi", phi, seed))
    for kind in spec.shifts:
        try:
            shift = build_shift(g, kind, labels if ShiftKind(kind) is ShiftKind.AUGMENTED else None)
            est = spectral_clustering(shift, k, seed=seed)
            val = nmi(est, comm)
        except (SybilFilterError, ArithmeticError, ValueError) as exc:
            log.warning("%s failed at sweep=%s rep=%d: %s", kind, value, rep, exc)
            val = float("nan")
        out.append((kind, value, rep, "nmi", val, seed))
    return out


def _run_grid(spec: ExperimentSpec, fn, jobs: int) -> ResultTable:
    tasks = [(i, r) for i in range(len(spec.sweep_values)) for r in range(spec.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, [spec] * len(tasks), *zip(*tasks)))
    else:
        results = [fn(spec, i, r) for i, r in tasks]
    table = ResultTable()
    for rows in results:
        for row in rows:
            table.add(*row)
    return table


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """AUC of every method for each (sweep value, repetition)."""
    return _run_grid(spec, _one_run, jobs)


def detectability_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """NMI of spectral clustering with each shift matrix against the planted partition."""
    if isinstance(spec.generator, Dataset):
        raise ParameterError("detectability experiments need a synthetic generator")
    return _run_grid(spec, _one_detectability_run, jobs)
