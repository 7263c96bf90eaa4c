"""Soft indicator matrices and hard per-slice partitions from a fitted state."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import DegeneratePartitionError
from .rescal import DecompositionState


@dataclass(frozen=True, eq=False)
class IndicatorSet:
    B: np.ndarray  # (T, N, k); B[t] = A @ R[t]


def indicator_matrices(state: DecompositionState) -> IndicatorSet:
    B = state.A @ state.R
    B.setflags(write=False)
    return IndicatorSet(B)


@dataclass(frozen=True)
class PartitionSequence:
    """One {node index: community label} map per slice.

    Labels from the decomposition are raw columns of B, so the same label in
    two slices names the same latent community.
    """

    assignments: tuple
    labels_are_canonical: bool = False

    @property
    def T(self) -> int:
        return len(self.assignments)

    def __getitem__(self, t: int) -> dict:
        return self.assignments[t]

    def canonical(self) -> PartitionSequence:
        """Relabel each slice to 0..c-1 in order of first appearance by node index."""
        out = []
        for part in self.assignments:
            relabel: dict = {}
            out.append({i: relabel.setdefault(part[i], len(relabel)) for i in sorted(part)})
        return PartitionSequence(tuple(out), labels_are_canonical=True)


def assign_partition(
    ind: IndicatorSet, mask: np.ndarray, zero_row_fallback: bool = False
) -> PartitionSequence:
    """Row-argmax of every B[t] over the nodes present at t.

    Ties go to the lowest column. A present node whose indicator row is all
    zero raises DegeneratePartitionError when k > 1, unless
    ``zero_row_fallback`` sends it to community 0.
    """
    T, N, k = ind.B.shape
    if mask.shape != (N, T):
        raise ValueError(f"mask has shape {mask.shape}, expected {(N, T)}")
    parts = []
    for t in range(T):
        present = np.flatnonzero(mask[:, t])
        rows = ind.B[t, present]
        labels = np.argmax(rows, axis=1)  # first maximum wins
        if k > 1 and present.size:
            dead = ~rows.any(axis=1)
            if dead.any() and not zero_row_fallback:
                raise DegeneratePartitionError(
                    f"slice {t}: present nodes {present[dead].tolist()} have all-zero indicator rows"
                )
        parts.append(dict(zip(present.tolist(), labels.tolist())))
    return PartitionSequence(tuple(parts))


def write_memberships(
    ind: IndicatorSet, out: IO, nodes: Sequence | None = None, slice_labels: Sequence | None = None
) -> None:
    """CSV ``t,node,c0,...,c{k-1}`` with one row per node per slice."""
    T, N, k = ind.B.shape
    nodes = nodes if nodes is not None else range(N)
    slice_labels = slice_labels if slice_labels is not None else range(T)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "node"] + [f"c{j}" for j in range(k)])
    for t, lab in enumerate(slice_labels):
        for i, node in enumerate(nodes):
            w.writerow([lab, node] + [repr(float(v)) for v in ind.B[t, i]])
