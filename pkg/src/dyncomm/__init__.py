"""Dynamic community detection with nonnegative RESCAL and seeded Louvain refinement."""

__version__ = "0.1.0"

from .community import IndicatorSet, PartitionSequence, assign_partition, indicator_matrices
from .graph import SliceGraph
from .metrics import modularity, nmi, score_series
from .refine import refine_partition, refine_sequence
from .rescal import DecompositionState, Hyperparams, fit, init_decomposition, objective
from .temporal import (
    AdjacencyTensor,
    EdgeEvent,
    SlicingSpec,
    TemporalNetwork,
    build_adjacency_tensor,
    load_edge_events,
    presence_mask,
    slice_events,
)

__all__ = [
    "AdjacencyTensor",
    "DecompositionState",
    "EdgeEvent",
    "Hyperparams",
    "IndicatorSet",
    "PartitionSequence",
    "SliceGraph",
    "SlicingSpec",
    "TemporalNetwork",
    "assign_partition",
    "build_adjacency_tensor",
    "fit",
    "indicator_matrices",
    "init_decomposition",
    "load_edge_events",
    "modularity",
    "nmi",
    "objective",
    "presence_mask",
    "refine_partition",
    "refine_sequence",
    "score_series",
    "slice_events",
]
