"""Reverse-mode differentiation over dense matrices and sparse products.

A ``Tape`` records operations in execution order; ``Tape.backward`` replays
the records in exact reverse order, accumulating gradients into every
``Variable`` that requires them. One training run owns one tape per forward
pass; everything is float64 and deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np


def as_matrix(x):
    """Coerce to a C-contiguous float64 2-D array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={arr.ndim}")
    return arr


class Variable:
    """A matrix value plus its (lazily created) gradient on a tape."""

    __slots__ = ("value", "grad", "requires_grad", "tape")

    def __init__(self, tape, value, requires_grad):
        self.tape = tape
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, delta):
        if self.grad is None:
            self.grad = delta
        else:
            self.grad += delta

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add_scaled(self, other, 1.0, 1.0)

    def __mul__(self, other):
        return hadamard(self, other)

    def __repr__(self):
        return f"Variable(shape={self.value.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of differentiable operations (reverse-replayed)."""

    def __init__(self):
        self._records = []

    def variable(self, value, requires_grad=True):
        return Variable(self, as_matrix(value), requires_grad)

    def constant(self, value):
        return self.variable(value, requires_grad=False)

    def _push(self, backward_fn):
        self._records.append(backward_fn)

    def backward(self, loss):
        """Seed d(loss)/d(loss) = 1 and propagate through all records."""
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.shape != (1, 1):
            raise ValueError(f"backward requires a scalar loss, got {loss.value.shape}")
        loss.grad = np.ones((1, 1))
        for rec in reversed(self._records):
            rec()


def _same_tape(*vars_):
    tape = vars_[0].tape
    for v in vars_[1:]:
        if v.tape is not tape:
            raise ValueError("operands recorded on different tapes")
    return tape


def _result(tape, value, inputs, make_backward):
    needs = any(v.requires_grad for v in inputs)
    out = Variable(tape, value, needs)
    if needs:
        tape._push(make_backward(out))
    return out


# ---------------------------------------------------------------------------
# dense ops

def matmul(a, b):
    tape = _same_tape(a, b)
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}")
    value = a.value @ b.value

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            if a.requires_grad:
                a._accumulate(out.grad @ b.value.T)
            if b.requires_grad:
                b._accumulate(a.value.T @ out.grad)
        return backward

    return _result(tape, value, (a, b), make_backward)


def hadamard(a, b):
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"hadamard shape mismatch: {a.value.shape} vs {b.value.shape}")
    value = a.value * b.value

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            if a.requires_grad:
                a._accumulate(out.grad * b.value)
            if b.requires_grad:
                b._accumulate(out.grad * a.value)
        return backward

    return _result(tape, value, (a, b), make_backward)


def square(a):
    value = a.value * a.value

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(2.0 * a.value * out.grad)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def add_scaled(a, b, wa, wb):
    """wa * a + wb * b, elementwise."""
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"add_scaled shape mismatch: {a.value.shape} vs {b.value.shape}")
    value = wa * a.value + wb * b.value

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            if a.requires_grad:
                a._accumulate(wa * out.grad)
            if b.requires_grad:
                b._accumulate(wb * out.grad)
        return backward

    return _result(tape, value, (a, b), make_backward)


def scale(a, c):
    value = c * a.value

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(c * out.grad)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def row_scale(a, s):
    """Multiply row v by s[v] (diagonal scaling; s is a constant vector)."""
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.shape[0] != a.value.shape[0]:
        raise ValueError(f"row_scale length {s.shape[0]} != rows {a.value.shape[0]}")
    col = s[:, None]
    value = a.value * col

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(out.grad * col)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def relu(a):
    value = np.maximum(a.value, 0.0)

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(out.grad * (a.value > 0.0))
        return backward

    return _result(a.tape, value, (a,), make_backward)


def elu(a):
    pos = a.value > 0.0
    value = np.where(pos, a.value, np.expm1(a.value))

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(out.grad * np.where(pos, 1.0, value + 1.0))
        return backward

    return _result(a.tape, value, (a,), make_backward)


def leaky_relu(a, slope=0.2):
    pos = a.value > 0.0
    factor = np.where(pos, 1.0, slope)
    value = a.value * factor

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(out.grad * factor)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def log_softmax(a):
    """Row-wise log-softmax with max subtraction."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    value = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def make_backward(out):
        def backward():
            if out.grad is not None:
                soft = np.exp(value)
                a._accumulate(out.grad - soft * out.grad.sum(axis=1, keepdims=True))
        return backward

    return _result(a.tape, value, (a,), make_backward)


def frobenius_sq(a):
    """Sum of squared entries, as a 1x1 scalar (L2 penalty building block)."""
    value = np.array([[np.sum(a.value * a.value)]])

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(2.0 * out.grad[0, 0] * a.value)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def dropout(a, rate, rng, training):
    """Inverted dropout: scale survivors by 1/(1-rate) at train time."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    keep = rng.random(a.value.shape) >= rate
    mask = keep / (1.0 - rate)
    value = a.value * mask

    def make_backward(out):
        def backward():
            if out.grad is not None:
                a._accumulate(out.grad * mask)
        return backward

    return _result(a.tape, value, (a,), make_backward)


def masked_cross_entropy(logits, labels, mask):
    """Mean negative log-likelihood of ``labels`` over the rows in ``mask``."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    mask = np.asarray(mask, dtype=np.int64).reshape(-1)
    if mask.shape[0] == 0:
        raise ValueError("masked_cross_entropy: empty mask")
    if labels.shape[0] != logits.value.shape[0]:
        raise ValueError("labels length != number of rows")
    sub = logits.value[mask]
    picked = labels[mask]
    shifted = sub - sub.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    m = mask.shape[0]
    value = np.array([[-log_probs[np.arange(m), picked].mean()]])

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            d = np.exp(log_probs)
            d[np.arange(m), picked] -= 1.0
            d *= out.grad[0, 0] / m
            full = np.zeros_like(logits.value)
            full[mask] = d
            logits._accumulate(full)
        return backward

    return _result(logits.tape, value, (logits,), make_backward)


# ---------------------------------------------------------------------------
# sparse ops (adjacency is a constant SparseAdjacency; see bgnn.graph)

def spmm(adj, x):
    """Sparse adjacency times dense matrix; structure must be symmetric."""
    from bgnn import backend
    if adj.num_nodes != x.value.shape[0]:
        raise ValueError(f"spmm shape mismatch: adjacency n={adj.num_nodes}, "
                         f"dense rows={x.value.shape[0]}")
    value = backend.spmm(adj.indptr, adj.indices, adj.values, x.value)
    values_t = None if adj.values is None else adj.values[adj.transpose_perm]

    def make_backward(out):
        def backward():
            if out.grad is not None:
                x._accumulate(backend.spmm(adj.indptr, adj.indices, values_t, out.grad))
        return backward

    return _result(x.tape, value, (x,), make_backward)


def edge_weighted_spmm(adj, edge_weights, x):
    """Aggregation with differentiable per-edge weights (attention path).

    ``edge_weights`` is an (nnz, 1) Variable in CSR order over a binary
    symmetric structure; output row v sums weights[e] * x[col(e)].
    """
    from bgnn import backend
    tape = _same_tape(edge_weights, x)
    if edge_weights.value.shape != (adj.nnz, 1):
        raise ValueError(f"edge weights shape {edge_weights.value.shape} != ({adj.nnz}, 1)")
    if adj.num_nodes != x.value.shape[0]:
        raise ValueError("edge_weighted_spmm: dense rows != num_nodes")
    w = edge_weights.value[:, 0]
    value = backend.spmm(adj.indptr, adj.indices, w, x.value)

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            if x.requires_grad:
                x._accumulate(backend.spmm(
                    adj.indptr, adj.indices, w[adj.transpose_perm], out.grad))
            if edge_weights.requires_grad:
                d = backend.edge_rowcol_dot(
                    adj.row_of_edge, adj.indices, out.grad, x.value)
                edge_weights._accumulate(d[:, None])
        return backward

    return _result(tape, value, (edge_weights, x), make_backward)


def edge_gather_add(adj, row_part, col_part):
    """Per-edge score row_part[row(e)] + col_part[col(e)] (both (N, 1))."""
    from bgnn import backend
    tape = _same_tape(row_part, col_part)
    n = adj.num_nodes
    if row_part.value.shape != (n, 1) or col_part.value.shape != (n, 1):
        raise ValueError("edge_gather_add expects (N, 1) operands")
    value = (row_part.value[adj.row_of_edge, 0]
             + col_part.value[adj.indices, 0])[:, None]

    def make_backward(out):
        def backward():
            if out.grad is None:
                return
            g = out.grad[:, 0]
            if row_part.requires_grad:
                row_part._accumulate(
                    backend.segment_sum(adj.indptr, g)[:, None])
            if col_part.requires_grad:
                col_part._accumulate(
                    backend.segment_sum(adj.indptr, g[adj.transpose_perm])[:, None])
        return backward

    return _result(tape, value, (row_part, col_part), make_backward)


def edge_softmax(adj, scores):
    """Softmax of edge scores within each target row (coefficients sum to 1)."""
    from bgnn import backend
    if scores.value.shape != (adj.nnz, 1):
        raise ValueError(f"edge scores shape {scores.value.shape} != ({adj.nnz}, 1)")
    alpha = backend.edge_softmax(adj.indptr, scores.value[:, 0])
    value = alpha[:, None]

    def make_backward(out):
        def backward():
            if out.grad is not None:
                d = backend.edge_softmax_backward(adj.indptr, alpha, out.grad[:, 0])
                scores._accumulate(d[:, None])
        return backward

    return _result(scores.tape, value, (scores,), make_backward)


# ---------------------------------------------------------------------------

def gradcheck(f, inputs, eps=1e-5):
    """Max relative error between tape gradients and central differences.

    ``f(tape, *variables) -> scalar Variable`` must be deterministic and
    twice-differentiable at ``inputs`` (a sequence of arrays). The relative
    error denominator is floored at 1 so near-zero coordinates compare
    absolutely.
    """
    inputs = [as_matrix(x) for x in inputs]

    def run(arrays, want_grads):
        tape = Tape()
        vars_ = [tape.variable(a.copy(), requires_grad=want_grads) for a in arrays]
        loss = f(tape, *vars_)
        if loss.value.shape != (1, 1):
            raise ValueError("gradcheck requires a scalar-valued function")
        if not np.isfinite(loss.value[0, 0]):
            raise FloatingPointError("gradcheck: non-finite function value")
        if want_grads:
            tape.backward(loss)
            return [np.zeros_like(v.value) if v.grad is None else v.grad
                    for v in vars_]
        return float(loss.value[0, 0])

    analytic = run(inputs, want_grads=True)
    worst = 0.0
    for idx, base in enumerate(inputs):
        flat = base.reshape(-1)
        for coord in range(flat.shape[0]):
            orig = flat[coord]
            flat[coord] = orig + eps
            f_plus = run(inputs, want_grads=False)
            flat[coord] = orig - eps
            f_minus = run(inputs, want_grads=False)
            flat[coord] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[idx].reshape(-1)[coord]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, err)
    return worst
