"""Neighborhood aggregation kernels.

Three families over an extended (self-loop-augmented) neighborhood:

* ``linear_agg_gcn`` — weighted sum with fixed 1/sqrt(deg_v * deg_i) weights;
* ``linear_agg_gat`` — weighted sum with learned softmax attention weights;
* ``bilinear_fast`` — mean of element-wise products over distinct neighbor
  pairs, computed in O(nnz) via the square-of-sums identity
  sum_{i<j} s_i*s_j = ((sum_i s_i)^2 - sum_i s_i^2) / 2,
  with ``bilinear_naive`` as the O(degree^2) reference oracle used in tests
  and benchmarks.

The "all pairs" scope ranges over every unordered pair drawn from the
extended neighborhood; the "target only" scope keeps the pairs that contain
the target node, normalized by the plain neighbor count.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from bgnn import autodiff as ad
from bgnn.graph import half_inv_pair_counts, inv_neighbor_counts


class BilinearScope(enum.Enum):
    ALL_PAIRS = "all-pairs"
    TARGET_ONLY = "target-only"


@dataclass
class AttentionParams:
    """Single-head attention: score(v, i) = leaky(a_src . s_v + a_dst . s_i)."""
    a_src: ad.Variable  # (D, 1)
    a_dst: ad.Variable  # (D, 1)
    slope: float = 0.2


def linear_agg_gcn(h, norm_adj, w):
    """Degree-normalized weighted sum: rows of norm_adj @ (h @ w)."""
    if norm_adj.values is None:
        raise ValueError("linear_agg_gcn expects a normalized (weighted) adjacency")
    return ad.spmm(norm_adj, ad.matmul(h, w))


def linear_agg_gat(h, adj_with_loops, w, att):
    """Attention-weighted sum; coefficients softmax-normalized per target row."""
    s = ad.matmul(h, w)
    row_part = ad.matmul(s, att.a_src)
    col_part = ad.matmul(s, att.a_dst)
    scores = ad.leaky_relu(ad.edge_gather_add(adj_with_loops, row_part, col_part),
                           att.slope)
    alpha = ad.edge_softmax(adj_with_loops, scores)
    return ad.edge_weighted_spmm(adj_with_loops, alpha, s)


def gat_coefficients(h_value, adj_with_loops, w_value, att_src, att_dst, slope=0.2):
    """Attention coefficients only (CSR edge order), for inspection and tests."""
    from bgnn import backend

    s = ad.as_matrix(h_value) @ ad.as_matrix(w_value)
    scores = (s @ ad.as_matrix(att_src))[adj_with_loops.row_of_edge, 0] \
        + (s @ ad.as_matrix(att_dst))[adj_with_loops.indices, 0]
    scores = np.where(scores > 0, scores, slope * scores)
    return backend.edge_softmax(adj_with_loops.indptr, scores)


def bilinear_fast(h, adj_with_loops, w, scope):
    """Linear-time bilinear aggregation (tape-recorded, both scopes).

    All pairs:   0.5/b_v * ((A~ S)^2 - A~ S^2) with S = h w, zero row when
                 the pair count b_v is zero.
    Target only: (1/d_v) * s_v * sum_{i in N(v)} s_i, zero row when d_v = 0;
                 the neighbor sum reuses A~ S minus the node's own s_v.
    """
    s = ad.matmul(h, w)
    if scope is BilinearScope.ALL_PAIRS:
        sum_sq = ad.square(ad.spmm(adj_with_loops, s))
        sq_sum = ad.spmm(adj_with_loops, ad.square(s))
        diff = ad.add_scaled(sum_sq, sq_sum, 1.0, -1.0)
        return ad.row_scale(diff, half_inv_pair_counts(adj_with_loops))
    if scope is BilinearScope.TARGET_ONLY:
        neigh_sum = ad.add_scaled(ad.spmm(adj_with_loops, s), s, 1.0, -1.0)
        return ad.row_scale(ad.hadamard(s, neigh_sum),
                            inv_neighbor_counts(adj_with_loops))
    raise ValueError(f"unknown bilinear scope {scope!r}")


def bilinear_naive(h_value, adj_with_loops, w_value, scope):
    """Reference oracle: explicit O(degree^2) pairwise loop (tests/bench only)."""
    h_value = getattr(h_value, "value", h_value)
    w_value = getattr(w_value, "value", w_value)
    s = ad.as_matrix(h_value) @ ad.as_matrix(w_value)
    n, d = adj_with_loops.num_nodes, s.shape[1]
    out = np.zeros((n, d))
    for v in range(n):
        nbrs = adj_with_loops.neighbors(v)
        if scope is BilinearScope.ALL_PAIRS:
            pairs = 0
            acc = np.zeros(d)
            for a in range(nbrs.shape[0]):
                for b in range(a + 1, nbrs.shape[0]):
                    acc += s[nbrs[a]] * s[nbrs[b]]
                    pairs += 1
            if pairs:
                out[v] = acc / pairs
        elif scope is BilinearScope.TARGET_ONLY:
            others = nbrs[nbrs != v]
            if others.shape[0]:
                out[v] = s[v] * s[others].sum(axis=0) / others.shape[0]
        else:
            raise ValueError(f"unknown bilinear scope {scope!r}")
    return out
