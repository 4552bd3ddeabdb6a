"""Experiment orchestration: configs, multi-seed runs and result tables."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import statistics
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .engine import OnlineRun, run_stream
from .errors import InvalidConfigError, InvalidInputError, OkselectError, RunError
from .hypotheses import RfHypothesis, RkhsHypothesis
from .kernels import DEFAULT_WIDTHS, kernel_set, sample_feature_map
from .losses import LossKind, make_loss
from .selectors import IOKSSelector, OKSPlusPlusSelector, OKSSelector, ioks_parameters, oks_parameters

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

ALGORITHMS = ("oks", "okspp", "ioks", "rf-oks", "rf-okspp", "rf-ioks")
DEFAULT_LAMBDA_GRID = (1.0, 5.0, 10.0, 25.0)
AUTO = "auto"


@dataclass
class RunConfig:
    algorithm: str = "okspp"
    loss: str = "logistic"
    widths: tuple = DEFAULT_WIDTHS
    radius: float | None = None          # U; None -> 15 for logistic, 1 otherwise
    horizon: int | None = None           # T; None -> stream length
    delta: float | str = AUTO
    eta: float | str = AUTO
    lam: float | str = AUTO
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    oks_g: float = 1.0
    ell_max: float | None = 1.0          # None -> derived from the loss
    features: int = 400
    ioks_variant: str = "experiment"
    seeds: tuple = tuple(range(10))
    dataset: str | None = None           # a name from data.KNOWN_DATASETS
    data: str | None = None              # or a file path
    format: str | None = None
    task: str | None = None
    label_col: int = -1
    limit: int | None = None
    output: str | None = None
    trace: str | None = None
    p_every: int = 0
    confidence: float = 0.05             # for the random-feature count check
    report_time: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        try:
            LossKind(self.loss)
        except ValueError:
            raise InvalidConfigError(f"unknown loss {self.loss!r}") from None
        self.widths = tuple(float(w) for w in self.widths)
        if not self.widths or any(w <= 0 for w in self.widths):
            raise InvalidConfigError("kernel widths must be positive and non-empty")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise InvalidConfigError("need at least one seed")
        self.lambda_grid = tuple(float(m) for m in self.lambda_grid)
        if self.radius is not None and not self.radius > 0:
            raise InvalidConfigError("U must be positive")
        if self.ioks_variant not in ("theory", "experiment"):
            raise InvalidConfigError(f"unknown IOKS variant {self.ioks_variant!r}")
        if self.is_rf and int(self.features) < 1:
            raise InvalidConfigError(f"feature count must be >= 1, got {self.features}")
        if self.base_algorithm == "okspp" and any(v != AUTO for v in (self.delta, self.eta, self.lam)):
            raise InvalidConfigError("OKS++ schedules are data-dependent; delta/eta/lambda must be 'auto'")
        if self.loss == "logistic" and self.task is None:
            self.task = "cls"

    @property
    def is_rf(self) -> bool:
        return self.algorithm.startswith("rf-")

    @property
    def base_algorithm(self) -> str:
        return self.algorithm[3:] if self.is_rf else self.algorithm

    @property
    def U(self) -> float:
        if self.radius is not None:
            return float(self.radius)
        return 15.0 if self.loss == "logistic" else 1.0

    @property
    def K(self) -> int:
        return len(self.widths)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["U"] = self.U
        return d

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        aliases = {"U": "radius", "lambda": "lam", "T": "horizon", "algo": "algorithm", "D": "features"}
        kwargs = {}
        for k, v in mapping.items():
            k = aliases.get(k, k).replace("-", "_")
            if k not in known:
                raise InvalidConfigError(f"unknown config key {k!r}")
            if k in ("widths", "seeds", "lambda_grid") and isinstance(v, str):
                v = tuple(float(s) for s in v.split(",") if s.strip())
            kwargs[k] = v
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, path) -> "RunConfig":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


def budget_emulation(config: RunConfig) -> list[int]:
    """Per-arm random-feature counts standing in for the time budget.

    The budget maps directly to ``D_i = D`` for every arm. Warns when ``D``
    is below ``(32/9) C0^2 U^2 B^2 ln(1/confidence)``.
    """
    if not config.is_rf:
        raise InvalidConfigError("budget emulation applies to random-feature algorithms only")
    D = int(config.features)
    if D < 1:
        raise InvalidConfigError(f"feature count must be >= 1, got {D}")
    loss = make_loss(config.loss, config.U, math.sqrt(2.0))
    if loss.c0 is not None:
        need = 32.0 / 9.0 * loss.c0 ** 2 * config.U ** 2 * 2.0 * math.log(1.0 / config.confidence)
        if D <= need:
            warnings.warn(f"D={D} does not exceed the feature count {need:.0f} required for the "
                          f"random-feature regret guarantee at confidence {config.confidence}",
                          stacklevel=2)
    return [D] * config.K


# -- building and running ---------------------------------------------------------

@dataclass
class RunResult:
    algorithm: str
    label: str
    seed: int
    summary: dict
    records: list | None = None


def _loss_for(config: RunConfig):
    fb = math.sqrt(2.0) if config.is_rf else 1.0
    return make_loss(config.loss, config.U, fb)


def resolve_parameters(config: RunConfig, T: int, lam_multiplier: float = 1.0) -> dict:
    """The concrete selector parameters a run will use ('auto' filled in)."""
    loss = _loss_for(config)
    K = config.K
    base = config.base_algorithm
    ell_max = config.ell_max if config.ell_max is not None else loss.ell_max
    if base == "oks":
        delta, lam, eta = oks_parameters(K, T, config.oks_g, ell_max)
        if config.lam == AUTO:
            lam = lam * lam_multiplier
        return {
            "delta": delta if config.delta == AUTO else float(config.delta),
            "eta": eta if config.eta == AUTO else float(config.eta),
            "lambda": lam if config.lam == AUTO else float(config.lam),
            "lambda_multiplier": lam_multiplier, "G": config.oks_g, "ell_max": ell_max,
        }
    if base == "ioks":
        delta, eta, upsilon = ioks_parameters(K, T, config.U, loss.g_rkhs, ell_max, config.ioks_variant)
        return {
            "delta": delta if config.delta == AUTO else float(config.delta),
            "eta_init": eta if config.eta == AUTO else float(config.eta),
            "upsilon": upsilon, "G1": loss.g_rkhs, "ell_max": ell_max,
            "variant": config.ioks_variant,
        }
    return {"C0": loss.c0, "G": 1.0 if loss.nu == 2 else loss.g_scalar, "nu": loss.nu}


def _build_selector(config, T, params):
    loss = _loss_for(config)
    base = config.base_algorithm
    if base == "oks":
        return OKSSelector(config.K, T, params["delta"], params["eta"], params["lambda"])
    if base == "ioks":
        return IOKSSelector(config.K, T, params["delta"], params["eta_init"], params["upsilon"],
                            config.U, params["ell_max"])
    return OKSPlusPlusSelector(config.K, T, loss, config.U)


def _build_arms(config, d, feature_seed):
    kernels = kernel_set(config.widths)
    # OKS as originally stated takes unprojected steps
    radius = math.inf if config.base_algorithm == "oks" else config.U
    if config.is_rf:
        dims = budget_emulation(config)
        seeds = feature_seed.spawn(len(kernels))
        return [RfHypothesis(sample_feature_map(k, D, np.random.default_rng(s), d), radius)
                for k, D, s in zip(kernels, dims, seeds)]
    return [RkhsHypothesis(k, radius, d) for k in kernels]


def load_dataset(config: RunConfig) -> data_mod.Dataset:
    if config.dataset:
        return data_mod.load_named(config.dataset)
    if not config.data:
        raise InvalidConfigError("config needs either 'dataset' or 'data'")
    task = config.task or ("cls" if config.loss in ("logistic", "hinge", "squared_hinge") else "reg")
    raw = data_mod.load_file(config.data, config.format, config.label_col)
    return data_mod.preprocess(raw, task)


def run_single(config: RunConfig, dataset: data_mod.Dataset, seed: int,
               lam_multiplier: float = 1.0, keep_records: bool = False) -> RunResult:
    perm_seed, feat_seed, draw_seed = np.random.SeedSequence(seed).spawn(3)
    order = data_mod.permute(dataset, perm_seed)
    stream = dataset.take(order, config.limit)
    T = config.horizon or stream.T
    if stream.T > T:
        stream = stream.take(np.arange(T))
    params = resolve_parameters(config, T, lam_multiplier)
    selector = _build_selector(config, T, params)
    arms = _build_arms(config, stream.d, feat_seed)
    classification = dataset.task is data_mod.Task.CLASSIFICATION
    run = OnlineRun(selector, arms, _loss_for(config), classification=classification,
                    seed=np.random.default_rng(draw_seed), p_every=config.p_every,
                    keep_records=keep_records or bool(config.trace), config=config)
    try:
        summary = run_stream(run, stream.features, stream.labels)
    except OkselectError as exc:
        raise RunError(f"{config.algorithm} failed for seed {seed}: {exc}") from exc
    out = summary.to_dict()
    out["parameters"] = {**params, "U": config.U, "T": T, "K": config.K}
    if config.is_rf:
        out["parameters"]["D"] = int(config.features)
    label = config.algorithm
    if config.base_algorithm == "oks" and config.lam == AUTO:
        label = f"{config.algorithm}[lambda x{lam_multiplier:g}]"
    return RunResult(config.algorithm, label, seed, out, run.records if run.keep_records else None)


# -- tables -----------------------------------------------------------------------

@dataclass
class ResultRow:
    algorithm: str
    dataset: str
    metric_name: str
    mean: float
    std: float
    mean_time: float
    runs: list = field(default_factory=list)
    note: str = ""


@dataclass
class ResultTable:
    rows: list
    config: dict = field(default_factory=dict)

    def row(self, algorithm: str) -> ResultRow:
        for r in self.rows:
            if r.algorithm == algorithm:
                return r
        raise KeyError(algorithm)


def _aggregate(label, dataset_name, results) -> ResultRow:
    metrics = [r.summary["metric"] for r in results]
    times = [r.summary["seconds"] for r in results]
    std = statistics.stdev(metrics) if len(metrics) >= 2 else float("nan")
    runs = [{"seed": r.seed, "metric": r.summary["metric"], "average_loss": r.summary["average_loss"],
             "cumulative_loss": r.summary["cumulative_loss"], "seconds": r.summary["seconds"],
             "selection_counts": r.summary["selection_counts"], "parameters": r.summary["parameters"]}
            for r in results]
    return ResultRow(label, dataset_name, results[0].summary["metric_name"],
                     statistics.fmean(metrics), std, statistics.fmean(times), runs)


def _run_job(args):
    config, dataset, seed, mult = args
    return run_single(config, dataset, seed, mult)


def run_experiment(config: RunConfig, dataset: data_mod.Dataset | None = None) -> ResultTable:
    """Run every configured seed (and OKS lambda multiplier) and aggregate.

    Writes ``results.json`` / ``results.txt`` (and per-run traces) when the
    config names an output directory.
    """
    dataset = dataset if dataset is not None else load_dataset(config)
    mults = config.lambda_grid if (config.base_algorithm == "oks" and config.lam == AUTO) else (1.0,)
    jobs = [(config, dataset, s, m) for m in mults for s in config.seeds]
    if config.jobs > 1 and not config.trace:
        with ProcessPoolExecutor(config.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = []
        for job in jobs:
            res = run_single(*job, keep_records=bool(config.trace))
            if config.trace:
                write_trace(res, Path(config.trace))
                res.records = None
            results.append(res)
    rows = []
    by_label = {}
    for r in results:
        by_label.setdefault(r.label, []).append(r)
    for label, group in by_label.items():
        rows.append(_aggregate(label, dataset.name, group))
    if len(rows) > 1:
        best = min(rows, key=lambda r: r.mean)
        rows.append(dataclasses.replace(best, algorithm=f"{config.algorithm} (oracle-tuned)",
                                        note=f"best of grid: {best.algorithm}"))
    table = ResultTable(rows, config.to_dict())
    if config.output:
        emit_report(table, config.output, include_time=config.report_time)
    return table


def write_trace(result: RunResult, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    safe = result.label.replace("[", "_").replace("]", "").replace(" ", "")
    path = directory / f"trace_{safe}_seed{result.seed}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "arm", "prediction", "label", "loss", "mistake", "nanoseconds", "p"])
        for rec in result.records:
            p = "" if rec.p is None else " ".join(f"{v:.6g}" for v in rec.p)
            w.writerow([rec.round, rec.arm, repr(rec.prediction), repr(rec.label), repr(rec.loss),
                        rec.mistake, rec.nanoseconds, p])
    return path


def format_metric(metric_name: str, value: float) -> str:
    """AMR as a percentage with 2 decimals; AL with 4 decimals."""
    if metric_name == "AMR":
        return f"{100.0 * value:.2f}"
    return f"{value:.4f}"


def emit_report(table: ResultTable, path, include_time: bool = True) -> None:
    if not table.rows:
        raise InvalidInputError("refusing to write an empty result table")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in table.rows:
        d = dataclasses.asdict(r)
        if not include_time:
            d.pop("mean_time")
            for run in d["runs"]:
                run.pop("seconds")
        rows.append(d)
    payload = {"config": table.config, "rows": rows}
    (out / "results.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")

    header = ["Algorithm", "Dataset", "Metric", "Mean", "Std"] + (["Time (s)"] if include_time else [])
    lines = []
    for r in table.rows:
        name = "AMR (%)" if r.metric_name == "AMR" else r.metric_name
        std = format_metric(r.metric_name, r.std) if not math.isnan(r.std) else "-"
        cells = [r.algorithm, r.dataset, name, format_metric(r.metric_name, r.mean), std]
        if include_time:
            cells.append(f"{r.mean_time:.2f}")
        lines.append(cells)
    widths = [max(len(h), *(len(c[i]) for c in lines)) for i, h in enumerate(header)]
    text = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    text.append("  ".join("-" * w for w in widths))
    for cells in lines:
        text.append("  ".join(c.rjust(w) if i >= 3 else c.ljust(w)
                              for i, (c, w) in enumerate(zip(cells, widths))))
    (out / "results.txt").write_text("\n".join(text) + "\n")
