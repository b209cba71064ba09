"""Experiment runner: ``gclab run --config cfg.json``.

Each experiment writes CSV tables and a ``report.json`` summary to the
output directory. Every table row carries the integer seed it came from;
trial ``t`` of a run with base seed ``s`` uses seed ``s + t``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .barron import approx_rate_experiment, loglog_slope, random_measure, sample_network
from .bounds import (
    covering_bound_ball,
    covering_bound_sparse,
    generalization_bound,
    min_width,
    rademacher_bound,
    rademacher_report,
)
from .dataio import load_weather, preprocess, sample_domain, sv_pairs, synth_quadratic, synthesize_weather, write_weather
from .errors import ConfigError, DataParseError, GclabError, IngestionError
from .graph_core import Graph, knn_graph, shift_matrices
from .model import NormConfig, forward, rmse, ruae
from .spectral import joint_eigs
from .train import TrainConfig, sgdm

log = logging.getLogger("gclab")

SCHEMA_VERSION = 1
EXPERIMENTS = ("quadratic_sgdm", "neurons_sweep", "weather_sv", "approx_rate", "rademacher_check", "bounds_table")
PAPER_TRAIN_DAYS = [1, 6, 11, 16, 21, 26]

_DEFAULTS = {
    "neurons_sweep": {"M_list": [1, 2, 4, 8, 16, 32], "iterations_list": [50, 200]},
    "weather_sv": {"M_list": [1, 2, 4, 8, 16, 32], "iterations_list": [30, 100]},
    "approx_rate": {"M_list": [4, 8, 16, 32, 64, 128, 256], "trials": 50},
    "rademacher_check": {"trials": 20},
}

_SECTION_DEFAULTS = {
    "graph": {"path": None, "n_vertices": 32, "k": 5, "seed": 0, "weighting": "unit"},
    "weather": {"path": None, "B": None, "hours_divisor": None, "train_days": PAPER_TRAIN_DAYS, "seed": 0},
    "approx": {"n_measures": 5, "n_atoms": 10, "N": 8, "S_eval": 1000},
    "rademacher": {"S_values": [25, 100, 400], "N_values": [8, 32], "family_size": 50, "Q": 1.0, "sign_trials": 1000},
    "bounds": {
        "Q": 1.0,
        "S_values": [25, 100, 400, 1600],
        "N_values": [8, 32, 128],
        "eps_values": [0.05, 0.1, 0.2, 0.3, 0.4],
        "delta_values": [0.01, 0.05, 0.1],
        "s_values": [1, 2, 4],
        "n_ext_values": [1, 10, 100, 1000],
    },
    "norm": {"p_norm": "inf", "D0": 1.0, "D1": 1.0, "D2": 1.0, "D3": 1.0},
}


@dataclass
class ExperimentConfig:
    experiment: str
    out: str = "gclab-out"
    seed: int = 0
    trials: int = 100
    M: int = 4
    L: int = 5
    S: int = 100
    iterations: int = 300
    M_list: list | None = None
    iterations_list: list | None = None
    S_list: list | None = None
    learning_rate: float = 0.003
    momentum: float = 0.9
    init: str = "uniform"
    delta: float = 0.1
    eps: float = 1e-5
    record_every: int = 1
    workers: int = 1
    graph: dict = field(default_factory=dict)
    weather: dict = field(default_factory=dict)
    approx: dict = field(default_factory=dict)
    rademacher: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    norm: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}", unknown[0])
        if "experiment" not in obj:
            raise ConfigError("missing required field 'experiment'", "experiment")
        exp = obj["experiment"]
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", "experiment")
        merged = dict(_DEFAULTS.get(exp, {}))
        merged.update(obj)
        for section, defaults in _SECTION_DEFAULTS.items():
            given = merged.get(section, {}) or {}
            if not isinstance(given, dict):
                raise ConfigError(f"{section} must be an object", section)
            bad = sorted(set(given) - set(defaults))
            if bad:
                raise ConfigError(f"unknown field {section}.{bad[0]}", f"{section}.{bad[0]}")
            merged[section] = {**defaults, **given}
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        def positive_int(name, value):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}", name)

        for name in ("trials", "M", "S", "iterations", "record_every", "workers"):
            positive_int(name, getattr(self, name))
        if not isinstance(self.L, int) or self.L < 0:
            raise ConfigError("L must be a nonnegative integer", "L")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer", "seed")
        for name in ("M_list", "iterations_list", "S_list"):
            value = getattr(self, name)
            if value is not None:
                if not isinstance(value, list) or not value:
                    raise ConfigError(f"{name} must be a nonempty list", name)
                for v in value:
                    positive_int(name, v)
        if self.experiment in ("neurons_sweep", "weather_sv", "approx_rate") and not self.M_list:
            raise ConfigError("M_list is required", "M_list")
        g = self.graph
        if g["path"] is None:
            positive_int("graph.n_vertices", g["n_vertices"])
            positive_int("graph.k", g["k"])
            if g["n_vertices"] < 2 or g["k"] >= g["n_vertices"]:
                raise ConfigError("graph.k must be smaller than graph.n_vertices", "graph.k")
        if self.experiment == "approx_rate" and self.trials < 10:
            raise ConfigError("approx_rate needs trials >= 10", "trials")
        try:
            self.train_config(0)
            self.norm_config()
        except GclabError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self, seed: int, iterations: int | None = None) -> TrainConfig:
        return TrainConfig(
            momentum=self.momentum,
            learning_rate=self.learning_rate,
            iterations=iterations or self.iterations,
            init=self.init,
            delta=self.delta,
            seed=seed,
            eps=self.eps,
            record_every=self.record_every,
        )

    def norm_config(self) -> NormConfig:
        return NormConfig(**self.norm)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    metrics: dict
    seeds: list
    files: list
    wall_clock_seconds: float
    notes: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_graph(gcfg: dict) -> Graph:
    if gcfg["path"]:
        return Graph.from_json(Path(gcfg["path"]).read_text())
    coords = synthesize_weather(gcfg["n_vertices"], days=1, seed=gcfg["seed"]).station_xy()
    return knn_graph(coords, gcfg["k"], weighting=gcfg["weighting"])


def _shift_basis(g: Graph):
    return joint_eigs(shift_matrices(g, ["sym_normalized_laplacian"]))


# quadratic target: one trial = fresh target matrix, fresh samples, fresh init
def _quadratic_trial(args):
    cfg, basis, g, trial_seed, S, M, iterations, checkpoints = args
    f, _ = synth_quadratic(g, seed=[trial_seed, 0])
    X = sample_domain(g.order, S, seed=np.random.default_rng([trial_seed, 1]))
    y = f(X)
    traj = sgdm(X, y, basis, M, cfg.L, cfg.train_config(trial_seed, iterations), checkpoints=checkpoints)
    extra = {it: (rmse(p, X, y), ruae(p, X, y)) for it, p in traj.checkpoints.items()}
    return trial_seed, traj.losses, traj.ruae_final, float(y @ y / S), float(np.abs(y).max()), extra


def _exp_quadratic(cfg: ExperimentConfig, out: Path):
    g = build_graph(cfg.graph)
    basis = _shift_basis(g)
    seeds = [cfg.seed + t for t in range(cfg.trials)]
    results = _map(_quadratic_trial, [(cfg, basis, g, s, cfg.S, cfg.M, None, ()) for s in seeds], cfg.workers)
    rows, curves = [], []
    for t, (seed, losses, _, _, _, _) in enumerate(results):
        rows.extend((t, seed, it, v) for it, v in losses)
        curves.append([v for _, v in losses])
    iters = [it for it, _ in results[0][1]]
    mean_curve = np.mean(curves, axis=0)
    _write_csv(out / "trajectories.csv", ["trial", "seed", "iteration", "rmse"], rows)
    _write_csv(out / "mean_rmse.csv", ["iteration", "mean_rmse", "n_trials"],
               [(it, v, len(curves)) for it, v in zip(iters, mean_curve)])
    files = ["trajectories.csv", "mean_rmse.csv"]
    metrics = {
        "N": g.order,
        "graph_connected": g.connected,
        "mean_rmse_initial": float(mean_curve[0]),
        "mean_rmse_final": float(mean_curve[-1]),
        "mean_ruae_final": float(np.mean([r[2] for r in results])),
        "mean_energy": float(np.mean([r[3] for r in results])),
        "mean_sup_target": float(np.mean([r[4] for r in results])),
    }
    if cfg.S_list:
        sweep = []
        for S in cfg.S_list:
            res = _map(_quadratic_trial, [(cfg, basis, g, s, S, cfg.M, None, ()) for s in seeds], cfg.workers)
            sweep.extend((S, t, r[0], r[1][-1][1]) for t, r in enumerate(res))
        _write_csv(out / "sample_size.csv", ["S", "trial", "seed", "rmse_final"], sweep)
        files.append("sample_size.csv")
    return metrics, seeds, files, [
        "target matrices are random and unseeded in the source experiment; absolute RMSE values are not comparable"
    ]


def _exp_neurons(cfg: ExperimentConfig, out: Path):
    g = build_graph(cfg.graph)
    basis = _shift_basis(g)
    seeds = [cfg.seed + t for t in range(cfg.trials)]
    iters = sorted(cfg.iterations_list or [cfg.iterations])
    rows = []
    for M in cfg.M_list:
        res = _map(_quadratic_trial, [(cfg, basis, g, s, cfg.S, M, iters[-1], iters) for s in seeds], cfg.workers)
        for t, r in enumerate(res):
            for it in iters:
                rows.append((M, it, t, r[0], *r[5][it]))
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    _write_csv(out / "neurons_sweep.csv", ["M", "iterations", "trial", "seed", "rmse", "ruae"], rows)
    agg = _aggregate(rows, ("rmse", "ruae"))
    _write_csv(out / "neurons_sweep_mean.csv", ["M", "iterations", "mean_rmse", "mean_ruae", "n_trials"], agg)
    metrics = {"N": g.order, "table": [dict(zip(["M", "iterations", "mean_rmse", "mean_ruae", "n_trials"], a)) for a in agg]}
    return metrics, seeds, ["neurons_sweep.csv", "neurons_sweep_mean.csv"], []


def _aggregate(rows, names):
    groups = {}
    for M, it, _, _, *vals in rows:
        groups.setdefault((M, it), []).append(vals)
    return [(M, it, *np.mean(v, axis=0).tolist(), len(v)) for (M, it), v in sorted(groups.items())]


def _weather_trial(args):
    cfg, basis, X, y, Xall, yall, M, iters, trial_seed = args
    traj = sgdm(X, y, basis, M, cfg.L, cfg.train_config(trial_seed, iters[-1]), checkpoints=iters)
    out = {}
    for it in iters:
        p = traj.checkpoints[it]
        r = yall - forward(p, Xall)
        out[it] = (float(r @ r / (yall @ yall)), float(np.abs(r).max() / np.abs(yall).max()))
    return trial_seed, out


def _exp_weather(cfg: ExperimentConfig, out: Path, weather_dir: Path | None):
    w = cfg.weather
    notes = []
    if w["path"]:
        ds = load_weather(w["path"])
    elif weather_dir is not None:
        ds = load_weather(weather_dir)
        notes.append(f"synthetic weather data written to {weather_dir}")
    else:
        ds = synthesize_weather(seed=w["seed"])
        notes.append("synthetic weather data (no dataset path given)")
    pds = preprocess(ds, w["B"], w["hours_divisor"])
    g = knn_graph(ds.station_xy(), min(cfg.graph["k"], ds.N - 1))
    basis = _shift_basis(g)
    train_days = [d for d in w["train_days"] if d < pds.D]
    X, y = sv_pairs(pds, train_days)
    Xall, yall = sv_pairs(pds, range(1, pds.D))
    notes.append(
        f"training set has S={len(y)} = {pds.values.shape[1]} hours x {len(train_days)} days; "
        "the reference figure caption states S=218=24x12, which matches neither 24x12=288 nor 24x6=144"
    )
    seeds = [cfg.seed + t for t in range(cfg.trials)]
    iters = sorted(cfg.iterations_list or [cfg.iterations])
    rows = []
    for M in cfg.M_list:
        res = _map(_weather_trial, [(cfg, basis, X, y, Xall, yall, M, iters, s) for s in seeds], cfg.workers)
        for t, (seed, vals) in enumerate(res):
            for it in iters:
                rows.append((M, it, t, seed, *vals[it]))
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    _write_csv(out / "weather_sv.csv", ["M", "iterations", "trial", "seed", "wmse", "wuae"], rows)
    agg = _aggregate(rows, ("wmse", "wuae"))
    _write_csv(out / "weather_sv_mean.csv", ["M", "iterations", "mean_wmse", "mean_wuae", "n_trials"], agg)
    metrics = {
        "N": ds.N,
        "D": ds.D,
        "B": pds.B,
        "S_train": int(len(y)),
        "train_days": train_days,
        "table": [dict(zip(["M", "iterations", "mean_wmse", "mean_wuae", "n_trials"], a)) for a in agg],
    }
    return metrics, seeds, ["weather_sv.csv", "weather_sv_mean.csv"], notes


def _exp_approx(cfg: ExperimentConfig, out: Path):
    a = cfg.approx
    normcfg = cfg.norm_config()
    rows, slopes, seeds, checks = [], [], [], []
    for j in range(a["n_measures"]):
        seed = cfg.seed + j
        g = build_graph({**cfg.graph, "n_vertices": a["N"], "k": min(cfg.graph["k"], a["N"] - 1), "seed": seed})
        basis = _shift_basis(g)
        measure, scale = random_measure(basis, a["n_atoms"], seed=seed, normcfg=normcfg)
        table = approx_rate_experiment(measure, scale, cfg.M_list, cfg.trials, a["S_eval"], seed)
        slope = loglog_slope(table)
        slopes.append(slope)
        seeds.append(seed)
        for r in table:
            ok = r.mean_error <= r.bound * (1 + 3 / np.sqrt(cfg.trials))
            checks.append(ok)
            rows.append((j, seed, r.M, r.mean_error, r.stderr, r.bound, int(ok)))
    _write_csv(out / "approx_rate.csv", ["measure", "seed", "M", "mean_error", "stderr", "bound", "within_bound"], rows)
    metrics = {"slopes": slopes, "all_within_bound": bool(all(checks))}
    return metrics, seeds, ["approx_rate.csv"], []


def _exp_rademacher(cfg: ExperimentConfig, out: Path):
    r = cfg.rademacher
    normcfg = cfg.norm_config()
    rows, seeds = [], []
    grid = [(S, N) for S in r["S_values"] for N in r["N_values"]]
    for inst in range(cfg.trials):
        seed = cfg.seed + inst
        S, N = grid[inst % len(grid)]
        g = build_graph({**cfg.graph, "n_vertices": N, "k": min(cfg.graph["k"], N - 1), "seed": seed})
        basis = _shift_basis(g)
        rng = np.random.default_rng([seed, 2])
        family = []
        for _ in range(r["family_size"]):
            measure, _ = random_measure(basis, 10, seed=rng, normcfg=normcfg)
            family.append(sample_network(measure, int(rng.integers(1, 9)), seed=rng, scale=r["Q"]))
        X = sample_domain(N, S, seed=np.random.default_rng([seed, 3]))
        rep = rademacher_report(family, X, r["Q"], r["sign_trials"], seed, normcfg)
        seeds.append(seed)
        rows.append((inst, seed, S, N, rep.empirical_value, rep.inputs["stderr"], rep.bound_value, int(rep.passed)))
    _write_csv(out / "rademacher.csv", ["instance", "seed", "S", "N", "estimate", "stderr", "bound", "passed"], rows)
    metrics = {"all_passed": bool(all(row[-1] for row in rows)), "instances": len(rows)}
    return metrics, seeds, ["rademacher.csv"], ["finite-family estimates lower-bound the complexity of the Barron ball"]


def _exp_bounds(cfg: ExperimentConfig, out: Path):
    b = cfg.bounds
    nrm = cfg.norm
    rows = []
    for N in b["N_values"]:
        for S in b["S_values"]:
            rows.append(("rademacher", N, "", "", "", b["Q"], S, rademacher_bound(b["Q"], S, N, nrm["D0"], nrm["D2"])))
            for d in b["delta_values"]:
                rows.append(("generalization", N, "", "", d, b["Q"], S,
                             generalization_bound(b["Q"], S, N, d, nrm["D0"], nrm["D2"])))
        for eps in b["eps_values"]:
            rows.append(("covering_ball", N, "", eps, "", "", "", covering_bound_ball(N, eps)))
            for s in b["s_values"]:
                if s <= N:
                    rows.append(("covering_sparse", N, s, eps, "", "", "", covering_bound_sparse(N, s, eps)))
    for n_ext in b["n_ext_values"]:
        for eps in b["eps_values"]:
            rows.append(("min_width", n_ext, "", eps, "", "", "", min_width(eps, n_ext)))
    rows = [(*r, cfg.seed) for r in rows]
    _write_csv(out / "bounds.csv", ["bound", "N", "s", "eps", "delta", "Q", "S", "value", "seed"], rows)
    return {"rows": len(rows)}, [cfg.seed], ["bounds.csv"], []


def run(cfg: ExperimentConfig, weather_dir: Path | None = None) -> ExperimentReport:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.experiment == "quadratic_sgdm":
        metrics, seeds, files, notes = _exp_quadratic(cfg, out)
    elif cfg.experiment == "neurons_sweep":
        metrics, seeds, files, notes = _exp_neurons(cfg, out)
    elif cfg.experiment == "weather_sv":
        metrics, seeds, files, notes = _exp_weather(cfg, out, weather_dir)
    elif cfg.experiment == "approx_rate":
        metrics, seeds, files, notes = _exp_approx(cfg, out)
    elif cfg.experiment == "rademacher_check":
        metrics, seeds, files, notes = _exp_rademacher(cfg, out)
    else:
        metrics, seeds, files, notes = _exp_bounds(cfg, out)
    report = ExperimentReport(
        experiment=cfg.experiment,
        config=dataclasses.asdict(cfg),
        metrics=metrics,
        seeds=seeds,
        files=files + ["report.json"],
        wall_clock_seconds=time.perf_counter() - t0,
        notes=notes,
    )
    (out / "report.json").write_text(report.to_json())
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gclab", description="Shallow graph CNN experiments")
    parser.add_argument("--version", action="version", version=f"gclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True, help="path to the experiment JSON config")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--synthesize-weather", action="store_true",
                   help="write synthetic temperatures.csv and stations.csv into OUT/weather")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        raw = json.loads(Path(args.config).read_text())
        if args.out is not None:
            raw["out"] = args.out
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"gclab: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"gclab: config error in {exc.field or 'config'}: {exc}", file=sys.stderr)
        return 2

    weather_dir = None
    if args.synthesize_weather:
        weather_dir = Path(cfg.out) / "weather"
        write_weather(synthesize_weather(seed=cfg.weather["seed"]), weather_dir)
        log.info("wrote synthetic weather data to %s", weather_dir)
    try:
        report = run(cfg, weather_dir)
    except (IngestionError, DataParseError, OSError) as exc:
        print(f"gclab: input error: {exc}", file=sys.stderr)
        return 2
    except GclabError as exc:
        print(f"gclab: numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return 3
    log.info("wrote %s", ", ".join(report.files))
    print(json.dumps(report.metrics, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
