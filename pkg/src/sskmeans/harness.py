"""Experiment orchestration: secure run, centralized reference, leakage audit.

``run_experiment`` writes everything a run produces into one directory::

    config.txt          resolved configuration
    graph.txt           edge list
    data.csv            one observation per row
    centers.csv         final centers, one cluster per row
    center_history.csv  iteration, cluster, coordinates
    labels.csv          node, final label
    metrics.csv         one summary row
    detail.json         trajectories and per-iteration statistics
    leakage.jsonl       one record per honest node
    transcripts/        per-node logs, public log and a copy of graph.txt
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .adversary import Occupancy, coalition_knowledge, leakage_report
from .averaging import parse_protocol
from .config import ConfigError, SimConfig
from .kmeans import (
    AveragingFailure,
    Dataset,
    RunResult,
    SecureConfig,
    as_centers,
    centralized_oracle,
    random_init,
    run_kmeans,
)
from .topology import HonestPartition, Topology, make_topology
from .transcript import TranscriptStore

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_AVERAGING = 3
EXIT_KMEANS = 4
EXIT_MISMATCH = 5


@dataclass(frozen=True)
class MixtureSpec:
    means: list[list[float]]
    stds: list[float]
    weights: list[float]
    x_max: float
    decimals: int = 0

    def __post_init__(self) -> None:
        if not self.means:
            raise ValueError("mixture needs at least one component")
        if len(self.weights) != len(self.means):
            raise ValueError("one weight per component required")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if len(self.stds) not in (1, len(self.means)):
            raise ValueError("give one std or one per component")
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")


def generate_data(spec: MixtureSpec, n: int, seed: int) -> Dataset:
    """Seeded Gaussian-mixture draws, clipped to ``x_max`` and rounded to ``decimals``."""
    means = np.asarray(spec.means, dtype=float)
    d = means.shape[1]
    if n == 0:
        return Dataset(np.empty((0, d)), spec.x_max)
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(means), size=n, p=np.asarray(spec.weights))
    stds = np.asarray(spec.stds * len(means) if len(spec.stds) == 1 else spec.stds)
    pts = means[comp] + rng.normal(size=(n, d)) * stds[comp][:, None]
    pts = np.clip(np.round(pts, spec.decimals), -spec.x_max, spec.x_max)
    return Dataset(pts, spec.x_max)


def read_dataset(path: str | Path, x_max: float | None = None) -> Dataset:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append([float(x) for x in line.replace(",", " ").split()])
    if len({len(r) for r in rows}) > 1:
        raise ValueError(f"{path}: rows have differing column counts")
    return Dataset.from_rows(rows, x_max)


def format_rows(rows) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in rows)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(format_rows(ds.points))


@dataclass
class Scenario:
    graph: Topology
    dataset: Dataset
    init: np.ndarray
    partition: HonestPartition
    secure: SecureConfig


def build_scenario(cfg: SimConfig) -> Scenario:
    try:
        if cfg.data_file:
            dataset = read_dataset(cfg.resolve(cfg.data_file), cfg.data_x_max)
        else:
            if cfg.n is None:
                raise ConfigError("topology.n is required when data is generated")
            spec = mixture_from_config(cfg)
            dataset = generate_data(spec, cfg.n, cfg.seed_for("data"))
        n = dataset.n
        if cfg.topology_file:
            graph = Topology.load(cfg.resolve(cfg.topology_file))
        else:
            graph = make_topology(
                cfg.topology_kind, cfg.n if cfg.n is not None else n,
                prob=cfg.topology_prob, radius=cfg.topology_radius, seed=cfg.seed_for("topology"),
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if graph.n != n:
        raise ConfigError(f"graph has {graph.n} nodes but the dataset has {n}")
    if not graph.is_connected():
        raise ConfigError("the configured graph is not connected; averaging needs connectivity")

    if cfg.init == "uniform":
        init = random_init(dataset, cfg.k, cfg.seed_for("init"))
    else:
        init = as_centers(cfg.init)
        if init.shape != (cfg.k, dataset.d):
            raise ConfigError(f"kmeans.init has shape {init.shape}, expected ({cfg.k}, {dataset.d})")

    if cfg.corrupted is not None:
        corrupted = cfg.corrupted
    elif cfg.corrupt_fraction:
        rng = np.random.default_rng(cfg.seed_for("corrupt"))
        m = int(round(cfg.corrupt_fraction * n))
        corrupted = sorted(int(c) for c in rng.choice(n, size=m, replace=False))
    else:
        corrupted = []
    try:
        partition = HonestPartition.from_corrupted(n, corrupted)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    protocol = parse_protocol(cfg.protocol, cfg.budget, seed=cfg.derived_seed("gossip"))
    secure = SecureConfig(
        scale=cfg.scale, protocol=protocol, seed=cfg.derived_seed("randoms"),
        trace_averaging=cfg.trace,
    )
    return Scenario(graph, dataset, init, partition, secure)


def mixture_from_config(cfg: SimConfig) -> MixtureSpec:
    k = len(cfg.data_means)
    weights = cfg.data_weights or [1.0 / k] * k
    x_max = cfg.data_x_max
    if x_max is None:
        span = max(abs(v) for row in cfg.data_means for v in row)
        x_max = span + 4 * max(cfg.data_std) or 1.0
    return MixtureSpec(cfg.data_means, cfg.data_std, weights, x_max, cfg.data_decimals)


@dataclass
class MetricsRecord:
    run_id: str
    seed: int
    kmeans_converged: bool
    averaging_converged: bool
    iterations: int
    rounds: list[int]
    label_agreement: bool
    max_center_deviation: float
    quantization_bound: float
    leakage_perfect: int
    leakage_bounded: int
    leakage_full: int
    center_trajectory: list[list[list[float]]] = field(default_factory=list)

    CSV_FIELDS = (
        "run_id", "seed", "kmeans_converged", "averaging_converged", "iterations", "rounds",
        "label_agreement", "max_center_deviation", "quantization_bound",
        "leakage_perfect", "leakage_bounded", "leakage_full",
    )

    def csv_row(self) -> dict[str, str]:
        row = {}
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            if isinstance(v, list):
                v = ";".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            row[name] = str(v)
        return row


def metrics_csv(records: list[MetricsRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=MetricsRecord.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_centers(out: Path, result: RunResult) -> None:
    (out / "centers.csv").write_text(format_rows(result.centers))
    lines = [
        ",".join([str(t), str(j)] + [repr(float(x)) for x in row])
        for t, centers in enumerate(result.center_history)
        for j, row in enumerate(centers)
    ]
    (out / "center_history.csv").write_text("".join(line + "\n" for line in lines))
    (out / "labels.csv").write_text("".join(f"{i},{l}\n" for i, l in enumerate(result.labels)))


def _deviation(a: RunResult, b: RunResult) -> float:
    if len(a.center_history) != len(b.center_history):
        return float("inf")
    return max(
        (float(np.abs(x - y).max()) for x, y in zip(a.center_history, b.center_history)),
        default=0.0,
    )


def _quantization_bound(n: int, scale: int, secure: RunResult) -> float:
    occupied = [c for u in secure.updates for c in u.counts if c > 0]
    if not occupied:
        return 0.0
    return n / (2 * scale * min(occupied))


@dataclass
class ExperimentOutcome:
    metrics: MetricsRecord
    exit_code: int
    message: str = ""
    report_text: str = ""


def analyze_run(transcripts: TranscriptStore, graph: Topology, partition: HonestPartition):
    knowledge = coalition_knowledge(transcripts, partition, graph)
    occupancy = Occupancy.from_transcripts(transcripts, partition.honest)
    return leakage_report(knowledge, occupancy, partition.honest)


def run_experiment(cfg: SimConfig, out_dir: str | Path | None = None) -> ExperimentOutcome:
    """Secure run, centralized reference and leakage audit for one configuration."""
    out = Path(out_dir) if out_dir is not None else cfg.default_output()
    sc = build_scenario(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.dump())
    (out / "graph.txt").write_text(sc.graph.to_edge_list())
    write_dataset(sc.dataset, out / "data.csv")

    oracle = centralized_oracle(sc.dataset, sc.init, cfg.T)
    try:
        secure = run_kmeans(sc.graph, sc.dataset, sc.init, cfg.T, sc.secure)
    except AveragingFailure as exc:
        log.error("%s", exc)
        metrics = MetricsRecord(
            cfg.run_id, cfg.seed, False, False, exc.iteration, [], False,
            float("inf"), 0.0, 0, 0, 0,
        )
        (out / "metrics.csv").write_text(metrics_csv([metrics]))
        (out / "detail.json").write_text(_dump_json({"error": str(exc), "metrics": asdict(metrics)}))
        return ExperimentOutcome(metrics, EXIT_AVERAGING, str(exc))

    transcripts = secure.transcripts
    tdir = out / "transcripts"
    transcripts.save(tdir)
    (tdir / "graph.txt").write_text(sc.graph.to_edge_list())
    write_centers(out, secure)

    report = analyze_run(transcripts, sc.graph, sc.partition)
    report_text = report.to_text()
    (out / "leakage.jsonl").write_text(report_text)
    summary = report.summary()

    agreement = secure.label_history == oracle.label_history and secure.labels == oracle.labels
    metrics = MetricsRecord(
        run_id=cfg.run_id,
        seed=cfg.seed,
        kmeans_converged=secure.converged,
        averaging_converged=True,
        iterations=secure.iterations,
        rounds=[u.rounds for u in secure.updates],
        label_agreement=agreement,
        max_center_deviation=_deviation(secure, oracle),
        quantization_bound=_quantization_bound(sc.dataset.n, cfg.scale, secure),
        leakage_perfect=summary["perfect"],
        leakage_bounded=summary["bounded"],
        leakage_full=summary["full"],
        center_trajectory=[c.tolist() for c in secure.center_history],
    )
    (out / "metrics.csv").write_text(metrics_csv([metrics]))
    detail = {
        "metrics": asdict(metrics),
        "modulus": secure.modulus,
        "corrupted": sorted(sc.partition.corrupted),
        "label_history": [list(l) for l in secure.label_history],
        "oracle_center_trajectory": [c.tolist() for c in oracle.center_history],
        "aggregates": [
            {"iteration": u.iteration, "sums": u.sums, "counts": u.counts, "rounds": u.rounds}
            for u in secure.updates
        ],
        "unattributed_exposures": len(report.unattributed),
    }
    (out / "detail.json").write_text(_dump_json(detail))

    code, message = EXIT_OK, "ok"
    if not agreement:
        code, message = EXIT_MISMATCH, "secure run disagrees with the centralized reference"
    elif not secure.converged:
        code, message = EXIT_KMEANS, f"k-means did not converge within T={cfg.T} iterations"
    return ExperimentOutcome(metrics, code, message, report_text)


def run_oracle(cfg: SimConfig, out_dir: str | Path) -> RunResult:
    sc = build_scenario(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = centralized_oracle(sc.dataset, sc.init, cfg.T)
    write_centers(out, result)
    return result


def _trial(args: tuple[SimConfig, str]) -> ExperimentOutcome:
    cfg, out = args
    try:
        return run_experiment(cfg, out)
    except ConfigError as exc:
        return ExperimentOutcome(
            MetricsRecord(cfg.run_id, cfg.seed, False, False, 0, [], False, float("inf"), 0.0, 0, 0, 0),
            EXIT_USAGE, str(exc),
        )


def sweep(cfg: SimConfig, trials: int, out_dir: str | Path, jobs: int = 1) -> tuple[list[ExperimentOutcome], dict]:
    """Repeat ``run_experiment`` over master seeds ``seed .. seed + trials - 1``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (cfg.with_seed(cfg.seed + t), str(out / f"trial_{t:03d}"))
        for t in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial, tasks))
    else:
        outcomes = [_trial(t) for t in tasks]
    records = [o.metrics for o in outcomes]
    (out / "sweep.csv").write_text(metrics_csv(records))
    summary = {
        "trials": trials,
        "failures": sum(o.exit_code != EXIT_OK for o in outcomes),
        "label_agreement": sum(r.label_agreement for r in records),
        "kmeans_converged": sum(r.kmeans_converged for r in records),
        "mean_iterations": float(np.mean([r.iterations for r in records])) if records else 0.0,
        "leakage": {
            "perfect": sum(r.leakage_perfect for r in records),
            "bounded": sum(r.leakage_bounded for r in records),
            "full": sum(r.leakage_full for r in records),
        },
    }
    (out / "sweep_summary.json").write_text(_dump_json(summary))
    return outcomes, summary
