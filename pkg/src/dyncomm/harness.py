"""End-to-end pipeline, ablation variants, synthetic data and report files.

Variants:

* ``mntd``: decomposition -> argmax partitions -> seeded Louvain refinement
* ``nrd``: decomposition -> argmax partitions, no refinement
* ``merandom``: Louvain refinement seeded with all-singleton partitions
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO

import numpy as np
import scipy

from . import __version__
from .community import PartitionSequence, assign_partition, indicator_matrices, write_memberships
from .errors import ConfigError, DyncommError, StageError
from .metrics import metrics_summary, modularity, nmi, score_series, write_metrics_csv, write_metrics_json
from .refine import refine_sequence, slice_graph
from .rescal import DecompositionState, Hyperparams, fit, save_factors, write_history
from .temporal import (
    DEFAULT_MEMORY_BUDGET,
    SlicingSpec,
    TemporalNetwork,
    build_adjacency_tensor,
    load_edge_events,
    load_ground_truth,
    presence_mask,
    slice_events,
)

VARIANTS = ("mntd", "nrd", "merandom")
WORKERS_ENV = "DYNCOMM_WORKERS"


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    out_dir: str
    k: int | None = None
    slicing: SlicingSpec = SlicingSpec()
    weighting: str = "binary"
    lambda_A: float = 0.2
    lambda_R: float = 0.07
    max_iters: int = 500
    tol: float = 1e-6
    restarts: int = 10
    variant: str = "mntd"
    ground_truth: str | None = None
    runs: int = 20
    seed: int = 0
    zero_row_fallback: bool = False
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.weighting not in ("binary", "count-sum"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if self.variant != "merandom":
            if self.k is None and self.ground_truth is None:
                raise ConfigError("k is required when no ground truth file is given")
            if self.k is not None and self.k < 1:
                raise ConfigError("k must be >= 1")
            # validates the decomposition fields up front
            self.hyper(self.seed, k=self.k or 1)

    def hyper(self, seed: int, k: int | None = None) -> Hyperparams:
        return Hyperparams(
            k=k if k is not None else self.k,
            lambda_A=self.lambda_A,
            lambda_R=self.lambda_R,
            max_iters=self.max_iters,
            tol=self.tol,
            seed=seed,
            restarts=self.restarts,
        )


@dataclass
class RunResult:
    run: int
    seed: int
    partitions: PartitionSequence
    metrics: list  # per-slice dicts: slice, modularity, nmi
    state: DecompositionState | None = None
    indicators: object = None


@dataclass
class Report:
    config: PipelineConfig
    network: TemporalNetwork
    k: int | None
    runs: list = field(default_factory=list)

    def aggregate_rows(self) -> list[dict]:
        """Per-slice scores averaged over runs."""
        rows = []
        for t, label in enumerate(self.network.slice_labels):
            row = {"slice": label}
            for m in ("modularity", "nmi"):
                vals = [r.metrics[t][m] for r in self.runs if r.metrics[t][m] is not None]
                row[m] = float(np.mean(vals)) if vals else None
            rows.append(row)
        return rows

    def summary(self) -> dict:
        rows = self.aggregate_rows()
        summ = metrics_summary(rows)
        table = {"variant": self.config.variant}
        for m in ("modularity", "nmi"):
            vals = [(r["slice"], r[m]) for r in rows if r[m] is not None]
            table[m] = score_series(vals).formatted() if vals else None
        return {"slices": rows, "summary": summ, "table_row": table}


# ---------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SbmParams:
    n_nodes: int = 120
    n_communities: int = 4
    T: int = 5
    p_in: float = 0.3
    p_out: float = 0.02
    migrate_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.p_out < self.p_in <= 1):
            raise ConfigError("need 0 <= p_out < p_in <= 1")
        if not (0 <= self.migrate_fraction < 1):
            raise ConfigError("need 0 <= migrate_fraction < 1")
        if self.n_nodes < 1 or self.n_communities < 1 or self.T < 1:
            raise ConfigError("n_nodes, n_communities and T must be >= 1")
        if self.n_communities > self.n_nodes:
            raise ConfigError("more communities than nodes")


def sbm_memberships(p: SbmParams, rng: np.random.Generator) -> np.ndarray:
    """(T, n) planted community of every node in every slice."""
    n, C = p.n_nodes, p.n_communities
    member = np.empty((p.T, n), dtype=np.int64)
    member[0] = np.arange(n) % C
    n_move = math.ceil(p.migrate_fraction * n)
    for t in range(1, p.T):
        member[t] = member[t - 1]
        if n_move and C > 1:
            movers = rng.choice(n, size=n_move, replace=False)
            shift = rng.integers(1, C, size=n_move)  # uniform over the other communities
            member[t, movers] = (member[t, movers] + shift) % C
    return member


def generate_dynamic_sbm(p: SbmParams) -> tuple[str, str]:
    """Return (event file text, ground-truth file text), both tab separated.

    Slices are labelled 0..T-1 and nodes 0..n-1.
    """
    rng = np.random.default_rng(p.seed)
    member = sbm_memberships(p, rng)
    iu, ju = np.triu_indices(p.n_nodes, k=1)
    events, truth = [], []
    for t in range(p.T):
        same = member[t, iu] == member[t, ju]
        prob = np.where(same, p.p_in, p.p_out)
        hit = rng.random(iu.size) < prob
        events.extend(f"{t}\t{i}\t{j}\n" for i, j in zip(iu[hit], ju[hit]))
        truth.extend(f"{t}\t{i}\t{c}\n" for i, c in enumerate(member[t]))
    return "".join(events), "".join(truth)


def write_sbm(p: SbmParams, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ev, gt = generate_dynamic_sbm(p)
    ev_path, gt_path = out / "events.tsv", out / "truth.tsv"
    ev_path.write_text("# time\tu\tv\n" + ev, encoding="utf-8")
    gt_path.write_text("# slice\tnode\tcommunity\n" + gt, encoding="utf-8")
    (out / "params.json").write_text(json.dumps(asdict(p), indent=2, sort_keys=True) + "\n")
    return ev_path, gt_path


# ---------------------------------------------------------------- pipeline


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except (DyncommError, ValueError, ArithmeticError, OSError) as exc:
                raise StageError(name, exc) from exc

        inner.__name__ = fn.__name__
        return inner

    return wrap


@_stage("load")
def _load(config: PipelineConfig):
    with open(config.input, "rb") as fh:
        events = load_edge_events(fh)
    truth = None
    if config.ground_truth:
        with open(config.ground_truth, "rb") as fh:
            truth = load_ground_truth(fh)
    return events, truth


@_stage("slice")
def _slice(events, config: PipelineConfig) -> TemporalNetwork:
    return slice_events(events, config.slicing, config.weighting)


def _truth_by_index(net: TemporalNetwork, truth) -> list[dict | None]:
    """Map ground truth onto slice indices and dense node indices."""
    out = []
    for label in net.slice_labels:
        part = truth.get(label)
        if part is None:
            out.append(None)
            continue
        out.append({net.node_index[n]: c for n, c in part.items() if n in net.node_index})
    return out


def score_partitions(
    net: TemporalNetwork, parts: PartitionSequence, truth_idx: list | None = None
) -> list[dict]:
    rows = []
    for t, label in enumerate(net.slice_labels):
        g, present = slice_graph(net, t)
        if present.size:
            q = modularity(g, [parts[t][i] for i in present.tolist()])
        else:
            q = 0.0
        score = None
        if truth_idx is not None and truth_idx[t] and parts[t]:
            if any(i in truth_idx[t] for i in parts[t]):
                score = nmi(truth_idx[t], parts[t])
        rows.append({"slice": label, "modularity": q, "nmi": score})
    return rows


@_stage("decompose")
def _decompose(tensor, hyper: Hyperparams) -> DecompositionState:
    return fit(tensor, hyper)


@_stage("assign")
def _assign(state, mask, fallback: bool):
    ind = indicator_matrices(state)
    return ind, assign_partition(ind, mask, zero_row_fallback=fallback)


@_stage("refine")
def _refine(net, parts):
    return refine_sequence(net, parts)


@_stage("score")
def _score(net, parts, truth_idx):
    return score_partitions(net, parts, truth_idx)


def singleton_partitions(net: TemporalNetwork) -> PartitionSequence:
    return PartitionSequence(tuple({i: i for i in net.present_nodes(t).tolist()} for t in range(net.T)))


def run_once(net, tensor, mask, truth_idx, config: PipelineConfig, k, run: int) -> RunResult:
    seed = config.seed + run
    state = ind = None
    if config.variant == "merandom":
        parts = _refine(net, singleton_partitions(net))
    else:
        state = _decompose(tensor, config.hyper(seed, k))
        ind, parts = _assign(state, mask, config.zero_row_fallback)
        if config.variant == "mntd":
            parts = _refine(net, parts)
    return RunResult(run, seed, parts, _score(net, parts, truth_idx), state, ind)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def run_pipeline(config: PipelineConfig, workers: int | None = None) -> Report:
    events, truth = _load(config)
    net = _slice(events, config)

    k = config.k
    if k is None and config.variant != "merandom":
        k = len({c for part in truth.values() for c in part.values()})

    truth_idx = _truth_by_index(net, truth) if truth is not None else None
    tensor = mask = None
    if config.variant != "merandom":
        tensor = _stage("tensor")(build_adjacency_tensor)(net, config.memory_budget)
        mask = presence_mask(tensor)
        if k > net.N:
            raise StageError("decompose", ConfigError(f"k={k} exceeds node count N={net.N}"))

    report = Report(config, net, k)
    workers = workers or worker_count()
    job = lambda r: run_once(net, tensor, mask, truth_idx, config, k, r)  # noqa: E731
    if workers == 1 or config.runs == 1:
        report.runs = [job(r) for r in range(config.runs)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            report.runs = list(pool.map(job, range(config.runs)))
    return report


# ---------------------------------------------------------------- report files


def write_partitions(net: TemporalNetwork, parts: PartitionSequence, out: IO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "node", "community"])
    for t, label in enumerate(net.slice_labels):
        for i in sorted(parts[t]):
            w.writerow([label, net.nodes[i], parts[t][i]])


def read_partitions(net: TemporalNetwork, source: IO) -> PartitionSequence:
    """Inverse of write_partitions for the same network."""
    by_label = {str(label): t for t, label in enumerate(net.slice_labels)}
    by_node = {str(n): i for i, n in enumerate(net.nodes)}
    parts: list[dict] = [{} for _ in range(net.T)]
    for row in csv.DictReader(source):
        c = row["community"]
        parts[by_label[row["t"]]][by_node[row["node"]]] = int(c) if c.lstrip("-").isdigit() else c
    return PartitionSequence(tuple(parts))


def manifest(report: Report) -> dict:
    cfg = asdict(report.config)
    return {
        "config": cfg,
        "k": report.k,
        "runs": [{"run": r.run, "seed": r.seed} for r in report.runs],
        "nodes": report.network.N,
        "slices": list(report.network.slice_labels),
        "versions": {
            "dyncomm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def emit_report(report: Report, out_dir) -> list[Path]:
    """Write every artifact of a report; returns the paths written.

    Layout: ``manifest.json``, ``summary.csv``/``summary.json`` (run-averaged
    per-slice scores) and one ``run_XXX/`` directory per run holding
    ``partitions.csv``, ``metrics.csv``, ``metrics.json`` and, for the
    decomposition variants, ``objective.csv``, ``memberships.csv`` and
    ``factors.npz``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = report.network
    written = []

    def text(path: Path, fn):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fn(fh)
        written.append(path)

    text(out / "manifest.json", lambda fh: fh.write(json.dumps(manifest(report), indent=2, sort_keys=True) + "\n"))
    summary = report.summary()
    text(out / "summary.csv", lambda fh: write_metrics_csv(summary["slices"], fh))
    text(out / "summary.json", lambda fh: fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n"))

    for r in report.runs:
        d = out / f"run_{r.run:03d}"
        d.mkdir(exist_ok=True)
        text(d / "partitions.csv", lambda fh: write_partitions(net, r.partitions, fh))
        text(d / "metrics.csv", lambda fh: write_metrics_csv(r.metrics, fh))
        text(d / "metrics.json", lambda fh: write_metrics_json(r.metrics, fh))
        if r.state is not None:
            text(d / "objective.csv", lambda fh: write_history(r.state, fh))
            text(d / "memberships.csv", lambda fh: write_memberships(r.indicators, fh, net.nodes, net.slice_labels))
            save_factors(r.state, d / "factors.npz")
            written.append(d / "factors.npz")
    return written


def table_rows(summary_paths) -> list[dict]:
    """Collect the Table-shaped ``table_row`` of several summary.json files."""
    rows = []
    for p in summary_paths:
        with open(p, encoding="utf-8") as fh:
            rows.append(json.load(fh)["table_row"])
    return rows


def format_table(rows: list[dict], metric: str = "nmi") -> str:
    head = "\t".join(["metric"] + [r["variant"].upper() for r in rows])
    body = "\t".join([metric.upper()] + [r.get(metric) or "-" for r in rows])
    return head + "\n" + body + "\n"
