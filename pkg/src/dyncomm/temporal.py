"""Edge-event ingestion, time slicing and adjacency-tensor materialization.

Event files are UTF-8, one event per line, tab separated::

    time<TAB>u<TAB>v[<TAB>weight]

Lines starting with ``#`` and blank lines are ignored. Ground-truth files use
``slice<TAB>node<TAB>community`` with the same conventions.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import IO, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, MemoryBudgetError, ParseError

NodeId = Hashable

DEFAULT_MEMORY_BUDGET = 4 * 1024**3  # bytes


@dataclass(frozen=True)
class EdgeEvent:
    time: float
    u: NodeId
    v: NodeId
    weight: float = 1.0

    def __post_init__(self):
        if not (self.weight >= 0) or not math.isfinite(self.weight):
            raise ValueError(f"edge weight must be finite and >= 0, got {self.weight!r}")
        for x in (self.u, self.v):
            if x is None or (isinstance(x, str) and not x):
                raise ValueError("node identifiers must be non-empty")


@dataclass(frozen=True)
class SlicingSpec:
    """How event times map onto slice indices.

    ``prelabeled``: the time column is an integer slice label; slice index is
    ``label - origin`` (origin defaults to the smallest label seen).
    ``window``: slice index is ``floor((time - origin) / window)``, origin
    defaults to 0.

    ``n_slices`` forces the slice count so trailing empty slices survive.
    """

    mode: str = "prelabeled"
    window: float | None = None
    origin: float | None = None
    n_slices: int | None = None

    def __post_init__(self):
        if self.mode not in ("prelabeled", "window"):
            raise ConfigError(f"unknown slicing mode {self.mode!r}")
        if self.mode == "window":
            if self.window is None or not self.window > 0:
                raise ConfigError("window mode needs a positive window")
        if self.n_slices is not None and self.n_slices < 1:
            raise ConfigError("n_slices must be >= 1")


def _parse_node(tok: str) -> NodeId:
    # decimal integers become ints so numeric ids sort numerically
    if tok.isdigit() and (tok == "0" or not tok.startswith("0")):
        return int(tok)
    return tok


def node_sort_key(x: NodeId):
    if isinstance(x, (int, np.integer)):
        return (0, int(x), "")
    return (1, 0, str(x))


def _parse_number(tok: str, what: str, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(f"line {lineno}: bad {what} {tok!r}", lineno) from None
    if not math.isfinite(val):
        raise ParseError(f"line {lineno}: non-finite {what} {tok!r}", lineno)
    return val


def _rows(source: IO) -> Iterable[tuple[int, list[str]]]:
    text = source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line.split("\t")


def load_edge_events(source: IO) -> list[EdgeEvent]:
    """Parse an event stream (text or bytes). Malformed rows raise ParseError."""
    events = []
    for lineno, cols in _rows(source):
        if len(cols) not in (3, 4):
            raise ParseError(
                f"line {lineno}: expected 3 or 4 tab-separated fields, got {len(cols)}", lineno
            )
        t = _parse_number(cols[0], "time", lineno)
        if not cols[1] or not cols[2]:
            raise ParseError(f"line {lineno}: empty node identifier", lineno)
        w = 1.0
        if len(cols) == 4:
            w = _parse_number(cols[3], "weight", lineno)
            if w < 0:
                raise ParseError(f"line {lineno}: negative weight {w}", lineno)
        t = int(t) if t.is_integer() else t
        events.append(EdgeEvent(t, _parse_node(cols[1]), _parse_node(cols[2]), w))
    return events


def load_ground_truth(source: IO) -> dict[float, dict[NodeId, NodeId]]:
    """Read ``slice<TAB>node<TAB>community`` rows into {slice label: {node: community}}."""
    truth: dict[float, dict[NodeId, NodeId]] = {}
    for lineno, cols in _rows(source):
        if len(cols) != 3 or not all(cols):
            raise ParseError(f"line {lineno}: expected slice, node, community", lineno)
        s = _parse_number(cols[0], "slice", lineno)
        s = int(s) if s.is_integer() else s
        node = _parse_node(cols[1])
        slice_truth = truth.setdefault(s, {})
        if node in slice_truth:
            raise ParseError(f"line {lineno}: node {node!r} listed twice for slice {s}", lineno)
        slice_truth[node] = _parse_node(cols[2])
    return truth


@dataclass(frozen=True, eq=False)
class TemporalNetwork:
    """Per-slice symmetric sparse adjacency over a shared node universe."""

    nodes: tuple  # index -> identifier
    slices: tuple  # T csr matrices, N x N
    slice_labels: tuple  # label reported for each slice index
    node_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "node_index", {n: i for i, n in enumerate(self.nodes)})
        if len(self.nodes) < 1 or len(self.slices) < 1:
            raise ValueError("a temporal network needs N >= 1 and T >= 1")
        if len(self.slice_labels) != len(self.slices):
            raise ValueError("one label per slice required")

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def T(self) -> int:
        return len(self.slices)

    def present_nodes(self, t: int) -> np.ndarray:
        deg = np.asarray(abs(self.slices[t]).sum(axis=1)).ravel()
        return np.flatnonzero(deg > 0)


def _slice_index(t: float, spec: SlicingSpec, origin: float) -> int:
    if spec.mode == "prelabeled":
        if not float(t).is_integer():
            raise ConfigError(f"prelabeled slicing needs integer slice ids, got {t}")
        idx = int(t) - int(origin)
    else:
        idx = math.floor((t - origin) / spec.window)
    if idx < 0:
        raise ConfigError(f"event time {t} precedes origin {origin}")
    return idx


def slice_events(
    events: Sequence[EdgeEvent], spec: SlicingSpec = SlicingSpec(), weighting: str = "binary"
) -> TemporalNetwork:
    """Bin events into slices and aggregate them into undirected adjacency.

    ``binary`` puts 1 on every pair that interacted at least once in a slice;
    ``count-sum`` adds up event weights. Self-loops are dropped, but their
    endpoint still joins the node universe.
    """
    if weighting not in ("binary", "count-sum"):
        raise ConfigError(f"unknown weighting {weighting!r}")
    if not events:
        raise ConfigError("no events to slice")

    if spec.origin is not None:
        origin = spec.origin
    elif spec.mode == "prelabeled":
        origin = min(e.time for e in events)
    else:
        origin = 0
    if spec.mode == "prelabeled" and not float(origin).is_integer():
        raise ConfigError("prelabeled origin must be an integer")

    idx = [_slice_index(e.time, spec, origin) for e in events]
    T = max(idx) + 1
    if spec.n_slices is not None:
        if T > spec.n_slices:
            raise ConfigError(f"events span {T} slices but n_slices={spec.n_slices}")
        T = spec.n_slices
    if T < 1:
        raise ConfigError("zero slices")

    universe = {e.u for e in events} | {e.v for e in events}
    nodes = tuple(sorted(universe, key=node_sort_key))
    pos = {n: i for i, n in enumerate(nodes)}
    N = len(nodes)

    acc: list[dict[tuple[int, int], float]] = [{} for _ in range(T)]
    for e, t in zip(events, idx):
        if e.u == e.v:
            continue
        i, j = pos[e.u], pos[e.v]
        key = (i, j) if i < j else (j, i)
        if weighting == "binary":
            acc[t][key] = 1.0
        else:
            acc[t][key] = acc[t].get(key, 0.0) + e.weight

    slices = []
    for pairs in acc:
        if pairs:
            ij = np.array(list(pairs.keys()), dtype=np.int64)
            w = np.array(list(pairs.values()), dtype=float)
            rows = np.concatenate([ij[:, 0], ij[:, 1]])
            cols = np.concatenate([ij[:, 1], ij[:, 0]])
            m = sp.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(N, N))
        else:
            m = sp.csr_matrix((N, N))
        m.sort_indices()
        slices.append(m)

    if spec.mode == "prelabeled":
        labels = tuple(int(origin) + t for t in range(T))
    else:
        labels = tuple(range(T))
    return TemporalNetwork(nodes, tuple(slices), labels)


def write_edge_events(net: TemporalNetwork, out: IO) -> None:
    """Serialize a network as events, one per stored edge, labelled by slice.

    Nodes that never carry an edge are written as a zero-weight self-loop so
    they stay in the node universe on reload.
    """
    seen = np.zeros(net.N, dtype=bool)
    for label, m in zip(net.slice_labels, net.slices):
        upper = sp.triu(m, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        for r, c, w in zip(upper.row[order], upper.col[order], upper.data[order]):
            seen[r] = seen[c] = True
            out.write(f"{label}\t{net.nodes[r]}\t{net.nodes[c]}\t{float(w)!r}\n")
    for i in np.flatnonzero(~seen):
        out.write(f"{net.slice_labels[0]}\t{net.nodes[i]}\t{net.nodes[i]}\t0\n")


@dataclass(frozen=True, eq=False)
class AdjacencyTensor:
    """Dense N x N x T tensor; ``frontal[t]`` is the contiguous slice W^(t)."""

    frontal: np.ndarray  # shape (T, N, N)

    @property
    def values(self) -> np.ndarray:
        return np.moveaxis(self.frontal, 0, -1)

    @property
    def dims(self) -> tuple[int, int, int]:
        T, N, _ = self.frontal.shape
        return (N, N, T)


def build_adjacency_tensor(
    net: TemporalNetwork, memory_budget: int = DEFAULT_MEMORY_BUDGET
) -> AdjacencyTensor:
    need = net.N * net.N * net.T * np.dtype(float).itemsize
    if need > memory_budget:
        raise MemoryBudgetError(
            f"dense tensor of {net.N}x{net.N}x{net.T} needs {need} bytes, budget is {memory_budget}"
        )
    X = np.zeros((net.T, net.N, net.N))
    for t, m in enumerate(net.slices):
        X[t] = m.toarray()
    X.setflags(write=False)
    return AdjacencyTensor(X)


def presence_mask(tensor: AdjacencyTensor) -> np.ndarray:
    """N x T boolean table: True where the node has an incident edge in the slice."""
    mask = (tensor.frontal > 0).any(axis=2).T
    return np.ascontiguousarray(mask)
