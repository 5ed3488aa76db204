"""Command-line front end: sample graphs, score nodes, and run the figure/table sweeps.

Settings come from (lowest precedence first) a preset, a ``--config`` file of
flat ``key = value`` lines, and explicit flags. Every output is CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import datasets, generators, spectral
from .detectors import METHODS, NONSTANDARD_METHODS, DetectorParams, detect
from .errors import NonstandardMethodError, ParameterError, SybilFilterError
from .evaluation import (Dataset, ExperimentSpec, SyntheticGenerator, auc, detectability_experiment,
                         flip_labels, run_experiment, run_seed)
from .graph import ShiftKind, build_shift, largest_connected_component, write_communities, write_edge_list

log = logging.getLogger("sybilfilter")

EPSILON_GRID = tuple(round(0.05 * i, 2) for i in range(11))
MARGIN_GRID = tuple(round(0.5 * i, 2) for i in range(1, 10))  # 0.5 .. 4.5 at d_ave = 5
QUICK_POINTS = 3

SCAR_D_REFUSAL = (
    "sybilscar-d is excluded from standard runs: its fixed-point iteration is not "
    "guaranteed to converge and was dropped from the published comparison for that "
    "reason. Pass --allow-nonstandard to run it anyway."
)


@dataclass
class RunConfig:
    preset: Optional[str] = None
    model: str = "sbm"
    n: int = 1000
    k: int = 2
    d_ave: float = 5.0
    c_out: Optional[float] = None
    margin: tuple = ()
    theta_cube_uniform: Optional[tuple] = None
    dataset: Optional[str] = None
    communities: Optional[str] = None
    split_seed: Optional[int] = None
    method: str = "all"
    alpha: float = 0.85
    gamma: Optional[int] = None
    theta: float = 0.5
    s: float = 8.0
    tau: Optional[float] = None
    cheb_order: int = 30
    epsilon: tuple = ()
    axis: str = "margin"
    label_fraction: float = 0.1
    min_labels: int = 0
    exclude_training: bool = False
    reps: int = 1
    jobs: int = 1
    seed: int = 0
    out: str = "."
    quick: bool = False
    allow_nonstandard: bool = False
    auc: bool = False
    shifts: tuple = ("rw", "aug", "max", "bh", "tau")

    # ---------------------------------------------------------------- text io

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name.replace('_', '-')} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        types = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for key, val in raw.items():
            name = key.replace("-", "_")
            if name not in types:
                raise ParameterError(f"unknown setting {key!r}")
            kw[name] = _coerce(name, val, types[name].default)
        return cls(**kw)

    # ------------------------------------------------------------- conversion

    @property
    def methods(self) -> tuple:
        if self.method == "all":
            return METHODS
        ms = tuple(m.strip() for m in self.method.split(",") if m.strip())
        for m in ms:
            if m in NONSTANDARD_METHODS and not self.allow_nonstandard:
                raise NonstandardMethodError(SCAR_D_REFUSAL)
            if m not in METHODS and m not in NONSTANDARD_METHODS:
                raise ParameterError(f"unknown method {m!r}; choose from {', '.join(METHODS + NONSTANDARD_METHODS)} or all")
        return ms

    @property
    def detector_params(self) -> DetectorParams:
        return DetectorParams(alpha=self.alpha, gamma=self.gamma, theta=self.theta, s=self.s,
                              tau=self.tau, K=self.cheb_order)

    @property
    def theta_spec(self):
        if self.model == "sbm":
            return None
        lo, hi = self.theta_cube_uniform or (3.0, 7.0)
        return ("cube_uniform", float(lo), float(hi))

    def generator(self):
        if self.dataset is not None:
            return datasets.resolve(self.dataset, self.communities, self.split_seed)
        if self.model not in ("sbm", "dcsbm"):
            raise ParameterError(f"unknown model {self.model!r}")
        if len(self.margin) > 1 and self.axis != "margin":
            raise ParameterError("several --margin values only make sense on the margin axis")
        margin = self.margin[0] if len(self.margin) == 1 and self.axis != "margin" else None
        return SyntheticGenerator(n=self.n, d_ave=self.d_ave, k=self.k, c_out=self.c_out,
                                  margin=margin, theta_spec=self.theta_spec)

    def sweep_values(self) -> tuple:
        vals = self.margin if self.axis == "margin" else self.epsilon
        if not vals:
            vals = MARGIN_GRID if self.axis == "margin" else EPSILON_GRID
        if self.quick and len(vals) > QUICK_POINTS:
            idx = np.linspace(0, len(vals) - 1, QUICK_POINTS).round().astype(int)
            vals = tuple(vals[i] for i in idx)
        return tuple(float(v) for v in vals)

    def to_spec(self) -> ExperimentSpec:
        gen = self.generator()
        axis = "epsilon" if isinstance(gen, Dataset) else self.axis
        eps = 0.0
        if axis == "margin" and self.epsilon:
            if len(self.epsilon) > 1:
                raise ParameterError("several --epsilon values need the epsilon axis")
            eps = float(self.epsilon[0])
        cfg = self if axis == self.axis else dataclasses.replace(self, axis=axis)
        return ExperimentSpec(
            generator=gen, methods=cfg.methods, sweep_axis=axis, sweep_values=cfg.sweep_values(),
            repetitions=self.reps, seed_base=self.seed, detector_params=self.detector_params,
            label_fraction=self.label_fraction, min_labels=self.min_labels, epsilon=eps,
            exclude_training=self.exclude_training, shifts=tuple(self.shifts),
        )


def _coerce(name: str, val, default):
    if isinstance(val, str):
        val = val.strip()
    if name in ("margin", "epsilon", "theta_cube_uniform", "shifts"):
        if isinstance(val, str):
            val = [v for v in val.replace(",", " ").split() if v]
        if name == "shifts":
            return tuple(str(v) for v in val)
        out = tuple(float(v) for v in val)
        return out if out or name != "theta_cube_uniform" else None
    if val is None or (isinstance(val, str) and val.lower() in ("none", "")):
        return None
    if isinstance(default, bool):
        if isinstance(val, bool):
            return val
        return str(val).lower() in ("1", "true", "yes", "on")
    if name in ("n", "k", "gamma", "cheb_order", "reps", "jobs", "seed", "min_labels", "split_seed"):
        return int(val)
    if name in ("d_ave", "c_out", "alpha", "theta", "s", "tau", "label_fraction"):
        return float(val)
    return str(val)


def config_from_spec(spec: ExperimentSpec, base: Optional[RunConfig] = None) -> RunConfig:
    """Recover a config that rebuilds ``spec`` (inverse of :meth:`RunConfig.to_spec`)."""
    base = base or RunConfig()
    p = spec.detector_params
    kw = dict(
        method=",".join(spec.methods), axis=spec.sweep_axis, reps=spec.repetitions, seed=spec.seed_base,
        alpha=p.alpha, gamma=p.gamma, theta=p.theta, s=p.s, tau=p.tau, cheb_order=p.K,
        label_fraction=spec.label_fraction, min_labels=spec.min_labels,
        exclude_training=spec.exclude_training, shifts=tuple(spec.shifts), quick=False,
        allow_nonstandard=any(m in NONSTANDARD_METHODS for m in spec.methods),
    )
    gen = spec.generator
    if spec.sweep_axis == "margin":
        kw["margin"] = tuple(spec.sweep_values)
        kw["epsilon"] = (spec.epsilon,) if spec.epsilon else ()
    else:
        kw["epsilon"] = tuple(spec.sweep_values)
    if isinstance(gen, Dataset):
        kw["dataset"] = base.dataset or gen.name
    else:
        kw.update(dataset=None, n=gen.n, d_ave=gen.d_ave, k=gen.k, c_out=gen.c_out,
                  model="sbm" if gen.theta_spec is None else "dcsbm",
                  theta_cube_uniform=None if gen.theta_spec is None else tuple(gen.theta_spec[1:]))
        if spec.sweep_axis != "margin":
            kw["margin"] = (gen.margin,) if gen.margin is not None else ()
    return dataclasses.replace(base, **kw)


# --------------------------------------------------------------------- presets

PRESETS: dict[str, dict] = {
    "fig2": dict(model="sbm", n=3000, k=2, c_out=1.0),
    "fig3-sbm": dict(model="sbm", axis="margin"),
    "fig3-dcsbm": dict(model="dcsbm", axis="margin"),
    "fig4-sbm": dict(model="sbm", axis="margin"),
    "fig4-dcsbm": dict(model="dcsbm", axis="margin"),
    "fig5-sbm": dict(model="sbm", axis="epsilon", c_out=0.5),
    "fig5-dcsbm": dict(model="dcsbm", axis="epsilon", c_out=0.5),
    "table2": dict(dataset="karate", axis="epsilon", epsilon=(0.0, 0.1, 0.2), min_labels=3),
}
FIG2_DEGREES = {"dense": 20.0, "sparse": 5.0}


def _preset_dir(preset: Optional[str]) -> str:
    return preset.split("-")[0] if preset else "sweep"


def read_config(path) -> dict:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{i}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ParameterError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
        merged.update(PRESETS[args.preset])
        merged["preset"] = args.preset
    if args.config:
        merged.update(read_config(args.config))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and v is not False:
            merged[f.name] = v
    return RunConfig.from_mapping(merged)


# -------------------------------------------------------------------- commands

def _planted(cfg: RunConfig, rng):
    gen = cfg.generator()
    margin = cfg.margin[0] if cfg.margin else None
    return generators.sample_planted(gen.params(margin), rng)


def cmd_generate(cfg: RunConfig) -> int:
    if len(cfg.margin) > 1:
        raise ParameterError("generate takes a single --margin")
    cfg = dataclasses.replace(cfg, axis="epsilon")  # pins a single margin into the generator
    pg = _planted(cfg, np.random.default_rng(cfg.seed))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"{cfg.model}_n{cfg.n}_seed{cfg.seed}"
    write_edge_list(pg.graph, stem.with_suffix(".edges"),
                    header=f"{cfg.model} sample, n={cfg.n}, k={cfg.k}, d_ave={cfg.d_ave}, seed={cfg.seed}")
    extra = {"theta": pg.theta} if cfg.model == "dcsbm" else None
    write_communities(pg.communities, stem.with_suffix(".communities"), extra)
    print(stem.with_suffix(".edges"))
    print(stem.with_suffix(".communities"))
    return 0


def cmd_detect(cfg: RunConfig) -> int:
    if cfg.dataset is None:
        raise ParameterError("detect needs --dataset (a bundled name or an edge-list path)")
    methods = cfg.methods
    data = cfg.generator()
    eps = cfg.epsilon[0] if cfg.epsilon else 0.0
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    aucs = {m: [] for m in methods}
    for rep in range(cfg.reps):
        rng = np.random.default_rng(run_seed(cfg.seed, 0, rep))
        labels = generators.sample_labels(data.communities, data.benign_communities,
                                          cfg.label_fraction, cfg.min_labels, rng)
        if eps > 0:
            labels = flip_labels(labels, eps, rng)
        for m in methods:
            sv = detect(m, data.graph, labels, cfg.detector_params, allow_nonstandard=cfg.allow_nonstandard)
            if rep == 0:
                sv.to_csv(out / f"{data.name}_{m}_scores.csv")
            if cfg.auc:
                aucs[m].append(auc(sv, data.is_sybil))
    for m in methods:
        print(out / f"{data.name}_{m}_scores.csv")
        if cfg.auc:
            v = np.array(aucs[m])
            print(f"{m}: AUC {v.mean():.4f} (std {v.std():.4f}, {v.size} label seeds)")
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.preset == "fig2":
        return cmd_spectrum(cfg)
    spec = cfg.to_spec()
    fig = _preset_dir(cfg.preset)
    out = Path(cfg.out) / fig
    out.mkdir(parents=True, exist_ok=True)
    if fig == "fig3":
        table = detectability_experiment(spec, jobs=cfg.jobs)
    else:
        table = run_experiment(spec, jobs=cfg.jobs)
    stem = spec.generator.name if isinstance(spec.generator, Dataset) else cfg.model
    raw, agg = out / f"{stem}_raw.csv", out / f"{stem}_aggregate.csv"
    table.to_csv(raw, agg)
    (out / f"{stem}_config.txt").write_text(cfg.to_text())
    missing = sum(1 for r in table.rows if not np.isfinite(r["value"]))
    if missing:
        log.warning("%d of %d cells missing (see warnings above)", missing, len(table.rows))
    print(raw)
    print(agg)
    return 0


def cmd_spectrum(cfg: RunConfig) -> int:
    out = Path(cfg.out) / "fig2"
    out.mkdir(parents=True, exist_ok=True)
    cases = FIG2_DEGREES if cfg.preset == "fig2" else {"graph": cfg.d_ave}
    if cfg.quick:
        cfg = dataclasses.replace(cfg, n=min(cfg.n, 600))
    for case, d in cases.items():
        c = dataclasses.replace(cfg, d_ave=d, axis="epsilon")
        rng = np.random.default_rng(cfg.seed)
        pg = _planted(c, rng)
        g, idmap = largest_connected_component(pg.graph)
        comm = pg.communities[np.fromiter(idmap.keys(), dtype=np.int64, count=len(idmap))]
        labels = generators.sample_labels(comm, [0], cfg.label_fraction, cfg.min_labels, rng)
        for kind in cfg.shifts:
            shift = build_shift(g, kind, labels if ShiftKind(kind) is ShiftKind.AUGMENTED else None)
            spec = spectral.eig(shift)
            path = out / f"{case}_{kind}.csv"
            spectral.write_eigenvalues_csv(spec, path)
            print(f"{path}  isolated low eigenvalues: {spectral.isolated_low_count(spec.eigenvalues)}")
    return 0


COMMANDS = {"generate": cmd_generate, "detect": cmd_detect, "sweep": cmd_sweep, "spectrum": cmd_spectrum}


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat key = value file; flags override it")
    a("--preset", help=f"one of {', '.join(PRESETS)}")
    a("--model", choices=("sbm", "dcsbm"))
    a("--n", type=int)
    a("--k", type=int)
    a("--d-ave", dest="d_ave", type=float)
    a("--c-out", dest="c_out", type=float)
    a("--margin", type=_floats, help="community strength (c_in - c_out)/2; comma list for sweeps")
    a("--theta-cube-uniform", dest="theta_cube_uniform", type=float, nargs=2, metavar=("LO", "HI"))
    a("--dataset", help="bundled name (karate) or an edge-list path")
    a("--communities", help="ground-truth file (default: <edge-list stem>.communities)")
    a("--split-seed", dest="split_seed", type=int)
    a("--method", help="method id, comma list, or 'all'")
    a("--alpha", type=float)
    a("--gamma", type=int)
    a("--theta", type=float)
    a("--s", type=float)
    a("--tau", type=float)
    a("--cheb-order", dest="cheb_order", type=int)
    a("--epsilon", type=_floats, help="label-noise level(s), comma list")
    a("--axis", choices=("margin", "epsilon"))
    a("--label-fraction", dest="label_fraction", type=float)
    a("--min-labels", dest="min_labels", type=int)
    a("--exclude-training", dest="exclude_training", action="store_true")
    a("--reps", type=int)
    a("--jobs", type=int)
    a("--seed", type=int)
    a("--out")
    a("--quick", action="store_true")
    a("--allow-nonstandard", dest="allow_nonstandard", action="store_true")
    a("--auc", action="store_true")
    a("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sybilfilter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="sample an SBM/DCSBM graph with its communities")
    sub.add_parser("detect", parents=[common], help="score nodes of a dataset with one or more detectors")
    sub.add_parser("sweep", parents=[common], help="run a figure/table experiment and write result CSVs")
    sub.add_parser("spectrum", parents=[common], help="write eigenvalue CSVs of every shift matrix")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except (SybilFilterError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
