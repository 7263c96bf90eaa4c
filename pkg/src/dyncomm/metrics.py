"""Partition scores: per-slice modularity, NMI against ground truth, mean/std."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .graph import SliceGraph


def _labels_array(g: SliceGraph, partition) -> np.ndarray:
    if isinstance(partition, Mapping):
        missing = [i for i in range(g.n) if i not in partition]
        if missing:
            raise ValueError(f"partition misses nodes {missing[:10]}")
        partition = [partition[i] for i in range(g.n)]
    labels = np.asarray(partition)
    if labels.shape != (g.n,):
        raise ValueError(f"partition has {labels.size} labels for {g.n} nodes")
    return np.unique(labels, return_inverse=True)[1].ravel()


def modularity_with_flag(g: SliceGraph, partition) -> tuple[float, bool]:
    """Return (Q, degenerate). An edgeless graph is degenerate and scores 0."""
    codes = _labels_array(g, partition)
    if g.two_L <= 0:
        return 0.0, True
    adj = g.adjacency
    rows = np.repeat(np.arange(g.n), np.diff(adj.indptr))
    intra = adj.data[codes[rows] == codes[adj.indices]].sum()
    tot = np.bincount(codes, weights=g.degree)
    m2 = g.two_L
    return float(intra / m2 - np.dot(tot, tot) / (m2 * m2)), False


def modularity(g: SliceGraph, partition) -> float:
    """(1/2L) sum_ij [w_ij - d_i d_j / 2L] delta(c_i, c_j) over ordered pairs, i = j included."""
    return modularity_with_flag(g, partition)[0]


@dataclass(frozen=True, eq=False)
class ConfusionTable:
    counts: np.ndarray  # (C_U, C_V)
    row_sums: np.ndarray
    col_sums: np.ndarray
    total: int

    @classmethod
    def build(cls, truth: Mapping, detected: Mapping) -> ConfusionTable:
        common = [n for n in truth if n in detected]
        if not common:
            raise ValueError("partitions share no nodes")
        u = np.unique([truth[n] for n in common], return_inverse=True)[1].ravel()
        v = np.unique([detected[n] for n in common], return_inverse=True)[1].ravel()
        counts = np.zeros((u.max() + 1, v.max() + 1), dtype=np.int64)
        np.add.at(counts, (u, v), 1)
        return cls(counts, counts.sum(axis=1), counts.sum(axis=0), len(common))


def _as_mapping(p) -> Mapping:
    return p if isinstance(p, Mapping) else dict(enumerate(p))


def nmi(truth, detected) -> float:
    """Normalized mutual information over the nodes both partitions cover.

    Two single-community partitions score 1; if only one of them is a single
    community the score is 0.
    """
    tab = ConfusionTable.build(_as_mapping(truth), _as_mapping(detected))
    N = tab.total
    nz = tab.counts > 0
    nij = tab.counts[nz].astype(float)
    ni = np.broadcast_to(tab.row_sums[:, None], tab.counts.shape)[nz]
    nj = np.broadcast_to(tab.col_sums[None, :], tab.counts.shape)[nz]
    numer = -2.0 * np.sum(nij * np.log(nij * N / (ni * nj)))
    denom = np.sum(tab.row_sums * np.log(tab.row_sums / N)) + np.sum(
        tab.col_sums * np.log(tab.col_sums / N)
    )
    if denom == 0:  # both partitions are a single community
        return 1.0
    return float(min(max(numer / denom, 0.0), 1.0))


@dataclass(frozen=True)
class ScoreSeries:
    per_slice: tuple
    mean: float
    std: float

    def formatted(self, digits: int = 3, std_digits: int = 2) -> str:
        return f"{self.mean:.{digits}f}±{self.std:.{std_digits}f}"


def score_series(values: Sequence[tuple]) -> ScoreSeries:
    """Mean and population std of the per-slice values."""
    if not values:
        raise ValueError("no values to summarise")
    arr = np.array([v for _, v in values], dtype=float)
    return ScoreSeries(tuple((t, float(v)) for t, v in values), float(arr.mean()), float(arr.std()))


def _num(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_metrics_csv(rows: Sequence[dict], out: IO) -> None:
    """``slice,modularity,nmi`` rows, then ``mean`` and ``std`` summary rows.

    ``nmi`` is left blank when there is no ground truth for a slice.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["slice", "modularity", "nmi"])
    for r in rows:
        w.writerow([r["slice"], _num(r["modularity"]), _num(r.get("nmi"))])
    summary = metrics_summary(rows)
    for stat in ("mean", "std"):
        w.writerow([stat] + [_num((summary.get(m) or {}).get(stat)) for m in ("modularity", "nmi")])


def metrics_summary(rows: Sequence[dict]) -> dict:
    out = {}
    for m in ("modularity", "nmi"):
        vals = [(r["slice"], r[m]) for r in rows if r.get(m) is not None]
        if vals:
            s = score_series(vals)
            out[m] = {"mean": s.mean, "std": s.std}
        else:
            out[m] = None
    return out


def metrics_json(rows: Sequence[dict]) -> dict:
    return {"slices": list(rows), "summary": metrics_summary(rows)}


def write_metrics_json(rows: Sequence[dict], out: IO) -> None:
    json.dump(metrics_json(rows), out, indent=2, sort_keys=True)
    out.write("\n")


def read_metrics_csv(source: IO) -> list[dict]:
    rows = []
    for r in csv.DictReader(source):
        if r["slice"] in ("mean", "std"):
            continue
        rows.append(
            {
                "slice": int(r["slice"]) if r["slice"].lstrip("-").isdigit() else r["slice"],
                "modularity": float(r["modularity"]) if r["modularity"] else None,
                "nmi": float(r["nmi"]) if r["nmi"] else None,
            }
        )
    return rows
