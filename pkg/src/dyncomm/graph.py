from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class SliceGraph:
    """Undirected weighted graph of one slice, stored as a symmetric CSR matrix.

    A diagonal entry ``w_ii`` is a self-loop counted once in the degree; the
    quotient graphs built during refinement put intra-community weight there.
    """

    adjacency: sp.csr_matrix
    degree: np.ndarray
    two_L: float

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_matrix(cls, m) -> SliceGraph:
        adj = sp.csr_matrix(m, dtype=float)
        adj.eliminate_zeros()
        adj.sort_indices()
        if adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("adjacency weights must be >= 0")
        tr = adj.T.tocsr()
        tr.sort_indices()
        if not (np.array_equal(tr.indptr, adj.indptr) and np.array_equal(tr.indices, adj.indices)
                and np.array_equal(tr.data, adj.data)):
            raise ValueError("adjacency must be symmetric")
        degree = np.asarray(adj.sum(axis=1)).ravel()
        return cls(adj, degree, float(degree.sum()))

    @classmethod
    def from_edges(cls, n: int, edges, weights=None) -> SliceGraph:
        """Build from an undirected edge list; each pair listed once.

        A loop ``(i, i, w)`` sets the diagonal entry ``w_ii = w`` as given.
        """
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=float)
        off = edges[:, 0] != edges[:, 1]
        rows = np.concatenate([edges[:, 0], edges[off, 1]])
        cols = np.concatenate([edges[:, 1], edges[off, 0]])
        data = np.concatenate([w, w[off]])
        return cls.from_matrix(sp.csr_matrix((data, (rows, cols)), shape=(n, n)))

    def induced(self, nodes) -> SliceGraph:
        nodes = np.asarray(nodes, dtype=np.int64)
        return SliceGraph.from_matrix(self.adjacency[nodes][:, nodes])
