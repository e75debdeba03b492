"""Sparse graph structures: CSR adjacency, self-loops, normalization, k-hop.

All structures are immutable after construction (backing arrays are marked
read-only) and safe to share across concurrent training runs.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from bgnn import backend


class GraphStructureError(ValueError):
    """Raised when an adjacency violates a structural precondition."""


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class SparseAdjacency:
    """Symmetric graph adjacency in CSR form.

    ``values is None`` means a binary matrix (all entries 1). Column indices
    are strictly increasing within each row; construction validates this.
    """

    def __init__(self, num_nodes, indptr, indices, values=None):
        indptr = _freeze(np.asarray(indptr, dtype=np.int64))
        indices = _freeze(np.asarray(indices, dtype=np.int64))
        if indptr.shape != (num_nodes + 1,):
            raise GraphStructureError(
                f"indptr length {indptr.shape[0]} != num_nodes+1 ({num_nodes + 1})")
        if indptr[0] != 0 or indptr[-1] != indices.shape[0]:
            raise GraphStructureError("indptr must start at 0 and end at nnz")
        if np.any(np.diff(indptr) < 0):
            raise GraphStructureError("indptr must be monotone non-decreasing")
        if indices.shape[0] and (indices.min() < 0 or indices.max() >= num_nodes):
            raise GraphStructureError("column index out of range")
        # strictly increasing columns within each row (checks duplicates too)
        if indices.shape[0] > 1:
            interior = np.ones(indices.shape[0] - 1, dtype=bool)
            # mask positions crossing a row boundary; empty rows repeat 0 or
            # nnz in indptr, and those have no crossing position to mask
            boundaries = indptr[1:-1]
            boundaries = boundaries[(boundaries > 0) & (boundaries < indices.shape[0])]
            interior[boundaries - 1] = False
            if np.any((np.diff(indices) <= 0) & interior):
                raise GraphStructureError(
                    "column indices must be strictly increasing within each row")
        if values is not None:
            values = _freeze(np.asarray(values, dtype=np.float64))
            if values.shape != indices.shape:
                raise GraphStructureError("values length != nnz")
        self.num_nodes = int(num_nodes)
        self.indptr = indptr
        self.indices = indices
        self.values = values

    @classmethod
    def from_edges(cls, num_nodes, edges):
        """Build a binary symmetric adjacency from undirected edges (u, v), u != v.

        Each undirected edge appears once in ``edges``; both directions are
        materialized. Duplicate edges and self-loops are rejected.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.shape[0] == 0:
            return cls(num_nodes, np.zeros(num_nodes + 1, dtype=np.int64),
                       np.empty(0, dtype=np.int64))
        if np.any(edges < 0) or np.any(edges >= num_nodes):
            raise GraphStructureError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphStructureError("self-loop in edge list")
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        if np.any(dup):
            u, v = int(rows[1:][dup][0]), int(cols[1:][dup][0])
            raise GraphStructureError(f"duplicate edge ({u}, {v})")
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(num_nodes, indptr, cols)

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    @cached_property
    def row_lengths(self):
        return _freeze(np.diff(self.indptr))

    @cached_property
    def row_of_edge(self):
        """Row index of each CSR entry (edge-ordered)."""
        return _freeze(np.repeat(np.arange(self.num_nodes, dtype=np.int64),
                                 self.row_lengths))

    @cached_property
    def transpose_perm(self):
        """Permutation p with entry e of A^T (in CSR order) = entry p[e] of A.

        Only meaningful when the structure is symmetric (checked lazily by
        callers via ``is_structurally_symmetric``).
        """
        return _freeze(np.lexsort((self.row_of_edge, self.indices)))

    def is_structurally_symmetric(self):
        p = self.transpose_perm
        return (np.array_equal(self.indices[p], self.row_of_edge)
                and np.array_equal(self.row_of_edge[p], self.indices))

    def has_diagonal_entries(self):
        return bool(np.any(self.indices == self.row_of_edge))

    def has_full_diagonal(self):
        """True when every row carries exactly one self-loop entry."""
        per_row = backend.segment_sum(
            self.indptr, (self.indices == self.row_of_edge).astype(np.float64))
        return bool(np.all(per_row == 1.0))

    def with_values(self, values):
        return SparseAdjacency(self.num_nodes, self.indptr, self.indices, values)

    def dense(self):
        """Dense ndarray (tests and small-graph oracles only)."""
        out = np.zeros((self.num_nodes, self.num_nodes))
        vals = self.values if self.values is not None else 1.0
        out[self.row_of_edge, self.indices] = vals
        return out

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def __repr__(self):
        kind = "binary" if self.values is None else "weighted"
        return f"SparseAdjacency(n={self.num_nodes}, nnz={self.nnz}, {kind})"


def add_self_loops(adj):
    """A + I: insert one diagonal entry per row, keeping columns sorted.

    Rejects inputs that already carry diagonal entries (a second self-loop
    would silently double-count the target node downstream).
    """
    if adj.values is not None:
        raise GraphStructureError("add_self_loops expects a binary adjacency")
    if adj.has_diagonal_entries():
        raise GraphStructureError("adjacency already has self-loop entries")
    n = adj.num_nodes
    below = (adj.indices < adj.row_of_edge).astype(np.float64)
    offsets = backend.segment_sum(adj.indptr, below).astype(np.int64)
    positions = adj.indptr[:-1] + offsets
    new_indices = np.insert(adj.indices, positions, np.arange(n, dtype=np.int64))
    new_indptr = adj.indptr + np.arange(n + 1, dtype=np.int64)
    return SparseAdjacency(n, new_indptr, new_indices)


def extended_degrees(adj_with_loops):
    """Per-node extended degree: row length of A + I (>= 1 everywhere)."""
    deg = adj_with_loops.row_lengths
    if np.any(deg < 1):
        raise GraphStructureError("extended degree < 1: self-loops missing")
    return deg


def gcn_normalize(adj_with_loops):
    """Symmetric normalization: entry (v, i) becomes 1/sqrt(deg(v) * deg(i)).

    Degrees count the self-loop, so every row has degree >= 1 and no division
    by zero can occur.
    """
    if not adj_with_loops.has_full_diagonal():
        raise GraphStructureError("gcn_normalize expects self-loops on every row")
    deg = extended_degrees(adj_with_loops).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    values = inv_sqrt[adj_with_loops.row_of_edge] * inv_sqrt[adj_with_loops.indices]
    return adj_with_loops.with_values(values)


def _strip_diagonal(n, indptr, indices):
    row_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    keep = indices != row_of
    new_indices = indices[keep]
    counts = np.zeros(n + 1, dtype=np.int64)
    np.add.at(counts, row_of[keep] + 1, 1)
    return np.cumsum(counts), new_indices


def khop_binarize(adj, k, cumulative=False):
    """Binarized k-step connectivity with the diagonal removed.

    Computes the boolean structure of A^k (walks of length exactly k) and
    drops self-connections; the bilinear aggregator re-adds exactly one
    self-loop afterwards. ``cumulative=True`` switches to "reachable within
    k hops" (boolean (A + I)^k, diagonal dropped) for experimentation.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if adj.has_diagonal_entries():
        raise GraphStructureError("khop_binarize expects a self-loop-free adjacency")
    if k == 1 and not cumulative:
        return adj
    # memoized on the adjacency: hop structures are shared read-only across
    # training runs, so each SpGEMM chain happens once per graph
    cache = adj.__dict__.setdefault("_khop_cache", {})
    key = (int(k), bool(cumulative))
    if key in cache:
        return cache[key]
    base = add_self_loops(adj) if cumulative else adj
    indptr, indices = base.indptr, base.indices
    for _ in range(k - 1):
        indptr, indices = backend.spgemm_bool(
            adj.num_nodes, indptr, indices, base.indptr, base.indices)
    indptr, indices = _strip_diagonal(adj.num_nodes, indptr, indices)
    cache[key] = SparseAdjacency(adj.num_nodes, indptr, indices)
    return cache[key]


def interaction_counts(adj_with_loops):
    """Number of unordered neighbor pairs per node: deg * (deg - 1) / 2.

    Nodes whose extended neighborhood is just themselves get 0 (no pair
    exists); the bilinear aggregator emits a zero row for them.
    """
    deg = extended_degrees(adj_with_loops).astype(np.float64)
    return deg * (deg - 1.0) / 2.0


def half_inv_pair_counts(adj_with_loops):
    """Row scale 0.5 / b_v for the fast bilinear form, 0 where no pair exists."""
    b = interaction_counts(adj_with_loops)
    out = np.zeros_like(b)
    np.divide(0.5, b, out=out, where=b > 0)
    return out


def inv_neighbor_counts(adj_with_loops):
    """Row scale 1 / d_v over plain (loop-free) degree, 0 for isolated nodes."""
    d = extended_degrees(adj_with_loops).astype(np.float64) - 1.0
    out = np.zeros_like(d)
    np.divide(1.0, d, out=out, where=d > 0)
    return out
