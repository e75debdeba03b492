"""Pure-numpy implementations of the sparse hot kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via BGNN_KERNELS=numpy). Same call signatures as ``bgnn._ckern``. All kernels
are deterministic for fixed inputs.

CSR convention throughout: ``indptr`` (n+1,) int64, ``indices`` (nnz,) int64
sorted within rows, optional ``values`` (nnz,) float64 (None means all-ones).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _segment_reduce(ufunc, edge_mat, indptr, empty_fill):
    """Per-row reduction of edge-ordered data using ufunc.reduceat.

    A sentinel row is appended so trailing empty rows stay in range; empty
    rows are overwritten with ``empty_fill`` afterwards.
    """
    n = indptr.shape[0] - 1
    if edge_mat.ndim == 1:
        sentinel = np.asarray([empty_fill], dtype=edge_mat.dtype)
    else:
        sentinel = np.full((1, edge_mat.shape[1]), empty_fill, dtype=edge_mat.dtype)
    ext = np.concatenate([edge_mat, sentinel], axis=0)
    out = ufunc.reduceat(ext, indptr[:n], axis=0)
    empty = indptr[:n] == indptr[1:]
    if empty.any():
        out[empty] = empty_fill
    return out


def spmm(indptr, indices, values, dense):
    """Sparse @ dense: out[v] = sum_e values[e] * dense[indices[e]] over row v."""
    gathered = dense[indices]
    if values is not None:
        gathered = gathered * values[:, None]
    return _segment_reduce(np.add, gathered, indptr, 0.0)


def segment_sum(indptr, edge_vals):
    """Per-row sum of a 1-D edge vector."""
    return _segment_reduce(np.add, edge_vals, indptr, 0.0)


def edge_softmax(indptr, scores):
    """Row-wise softmax over edge scores, max-subtracted for stability."""
    row_len = np.diff(indptr)
    row_max = _segment_reduce(np.maximum, scores, indptr, -np.inf)
    shifted = np.exp(scores - np.repeat(row_max, row_len))
    denom = segment_sum(indptr, shifted)
    return shifted / np.repeat(denom, row_len)


def edge_softmax_backward(indptr, alpha, d_alpha):
    """Gradient of edge_softmax: a * (da - rowsum(a * da))."""
    row_len = np.diff(indptr)
    inner = segment_sum(indptr, alpha * d_alpha)
    return alpha * (d_alpha - np.repeat(inner, row_len))


def edge_rowcol_dot(row_of_edge, indices, a, b):
    """Per-edge dot product a[row(e)] . b[col(e)] for dense a, b."""
    return np.einsum("ed,ed->e", a[row_of_edge], b[indices])


def spgemm_bool(n, indptr_a, indices_a, indptr_b, indices_b):
    """Structure-only sparse product: columns present in row v of A @ B.

    Returns (indptr, indices) with sorted unique columns per row.
    """
    rows = []
    counts = np.zeros(n + 1, dtype=np.int64)
    for v in range(n):
        nbrs = indices_a[indptr_a[v]:indptr_a[v + 1]]
        if nbrs.shape[0] == 0:
            rows.append(None)
            continue
        segs = [indices_b[indptr_b[j]:indptr_b[j + 1]] for j in nbrs]
        cols = np.unique(np.concatenate(segs))
        counts[v + 1] = cols.shape[0]
        rows.append(cols)
    indptr_c = np.cumsum(counts)
    nnz = int(indptr_c[-1])
    indices_c = np.empty(nnz, dtype=np.int64)
    for v in range(n):
        if rows[v] is not None:
            indices_c[indptr_c[v]:indptr_c[v + 1]] = rows[v]
    return indptr_c, indices_c
