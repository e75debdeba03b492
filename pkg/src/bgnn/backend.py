"""Kernel backend selection.

The compiled extension (``bgnn._ckern``) is preferred when importable; the
numpy implementation is the fallback and can be forced with the environment
variable ``BGNN_KERNELS=numpy``. Both expose the same functions; see
``bgnn._knumpy`` for the reference semantics.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from bgnn import _knumpy

try:
    from bgnn import _ckern
except ImportError:
    _ckern = None

if os.environ.get("BGNN_KERNELS", "").lower() == "numpy":
    _active = _knumpy
else:
    _active = _ckern if _ckern is not None else _knumpy


def active():
    """Name of the kernel backend currently in use."""
    return _active.NAME


def available():
    """Names of all importable kernel backends, compiled first."""
    return [b.NAME for b in (_ckern, _knumpy) if b is not None]


def get(name):
    for b in (_ckern, _knumpy):
        if b is not None and b.NAME == name:
            return b
    raise ValueError(f"unknown kernel backend {name!r}; available: {available()}")


@contextmanager
def use(name):
    """Temporarily switch the active kernel backend (tests, benchmarks)."""
    global _active
    prev = _active
    _active = get(name)
    try:
        yield _active
    finally:
        _active = prev


def spmm(indptr, indices, values, dense):
    return _active.spmm(indptr, indices, values, dense)


def segment_sum(indptr, edge_vals):
    return _active.segment_sum(indptr, edge_vals)


def edge_softmax(indptr, scores):
    return _active.edge_softmax(indptr, scores)


def edge_softmax_backward(indptr, alpha, d_alpha):
    return _active.edge_softmax_backward(indptr, alpha, d_alpha)


def edge_rowcol_dot(row_of_edge, indices, a, b):
    return _active.edge_rowcol_dot(row_of_edge, indices, a, b)


def spgemm_bool(n, indptr_a, indices_a, indptr_b, indices_b):
    return _active.spgemm_bool(n, indptr_a, indices_a, indptr_b, indices_b)
