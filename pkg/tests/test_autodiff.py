"""Tape-based reverse-mode differentiation: values, gradients, tape rules."""

import numpy as np
import pytest

from bgnn import autodiff as ad
from bgnn.graph import SparseAdjacency, add_self_loops, gcn_normalize

PATH3_TILDE = add_self_loops(SparseAdjacency.from_edges(3, [(0, 1), (1, 2)]))


def scalar(tape, x):
    return ad.frobenius_sq(x)


class TestForwardValues:
    def test_spmm_path_with_loops(self):
        tape = ad.Tape()
        x = tape.constant([[1.0], [2.0], [3.0]])
        out = ad.spmm(PATH3_TILDE, x)
        assert out.value.tolist() == [[3.0], [6.0], [5.0]]

    def test_log_softmax_two_equal_logits(self):
        tape = ad.Tape()
        out = ad.log_softmax(tape.constant([[0.0, 0.0]]))
        assert np.allclose(out.value, [[-np.log(2.0)] * 2], atol=1e-15)

    def test_log_softmax_rows_exponentiate_to_one(self):
        rng = np.random.default_rng(0)
        tape = ad.Tape()
        out = ad.log_softmax(tape.constant(rng.normal(size=(9, 5)) * 10))
        sums = np.exp(out.value).sum(axis=1)
        assert np.all(np.abs(sums - 1.0) <= 1e-12)

    def test_log_softmax_shift_invariant(self):
        rng = np.random.default_rng(1)
        base = rng.normal(size=(4, 6))
        tape = ad.Tape()
        a = ad.log_softmax(tape.constant(base)).value
        b = ad.log_softmax(tape.constant(base + 123.0)).value
        assert np.allclose(a, b, atol=1e-12)

    def test_cross_entropy_uniform_logits_is_log_classes(self):
        tape = ad.Tape()
        logits = tape.constant(np.zeros((4, 7)))
        loss = ad.masked_cross_entropy(logits, [0, 1, 2, 3], [0, 1, 2, 3])
        assert loss.value[0, 0] == pytest.approx(np.log(7.0), abs=1e-12)

    def test_cross_entropy_confident_correct_is_tiny(self):
        tape = ad.Tape()
        logits = np.full((3, 4), -50.0)
        logits[np.arange(3), [1, 2, 0]] = 50.0
        loss = ad.masked_cross_entropy(tape.constant(logits), [1, 2, 0],
                                       [0, 1, 2])
        assert loss.value[0, 0] < 1e-12

    def test_cross_entropy_empty_mask_rejected(self):
        tape = ad.Tape()
        logits = tape.constant(np.zeros((3, 2)))
        with pytest.raises(ValueError, match="empty"):
            ad.masked_cross_entropy(logits, [0, 0, 1], [])

    def test_cross_entropy_ignores_unmasked_rows(self):
        rng = np.random.default_rng(2)
        tape = ad.Tape()
        base = rng.normal(size=(5, 3))
        poked = base.copy()
        poked[4] = 99.0
        labels = [0, 1, 2, 0, 1]
        a = ad.masked_cross_entropy(tape.constant(base), labels, [0, 2])
        b = ad.masked_cross_entropy(tape.constant(poked), labels, [0, 2])
        assert a.value[0, 0] == b.value[0, 0]

    def test_elu_matches_definition(self):
        tape = ad.Tape()
        out = ad.elu(tape.constant([[-1.0, 0.0, 2.0]]))
        want = [np.expm1(-1.0), 0.0, 2.0]
        assert np.allclose(out.value, [want], atol=1e-15)

    def test_leaky_relu_slope(self):
        tape = ad.Tape()
        out = ad.leaky_relu(tape.constant([[-10.0, 5.0]]), slope=0.2)
        assert out.value.tolist() == [[-2.0, 5.0]]

    def test_edge_softmax_zero_scores_uniform(self):
        tape = ad.Tape()
        scores = tape.constant(np.zeros((PATH3_TILDE.nnz, 1)))
        alpha = ad.edge_softmax(PATH3_TILDE, scores).value[:, 0]
        # row 1 has three incident entries -> 1/3 each
        row1 = alpha[PATH3_TILDE.indptr[1]:PATH3_TILDE.indptr[2]]
        assert np.allclose(row1, 1.0 / 3.0, atol=1e-15)

    def test_edge_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        tape = ad.Tape()
        scores = tape.constant(rng.normal(size=(PATH3_TILDE.nnz, 1)) * 5)
        alpha = ad.edge_softmax(PATH3_TILDE, scores).value[:, 0]
        for v in range(3):
            lo, hi = PATH3_TILDE.indptr[v], PATH3_TILDE.indptr[v + 1]
            assert abs(alpha[lo:hi].sum() - 1.0) <= 1e-12

    def test_edge_gather_add_values(self):
        tape = ad.Tape()
        row = tape.constant([[10.0], [20.0], [30.0]])
        col = tape.constant([[1.0], [2.0], [3.0]])
        out = ad.edge_gather_add(PATH3_TILDE, row, col).value[:, 0]
        # CSR order for the path with loops: (0,0)(0,1) (1,0)(1,1)(1,2) (2,1)(2,2)
        assert out.tolist() == [11.0, 12.0, 21.0, 22.0, 23.0, 32.0, 33.0]


class TestDropout:
    def test_rate_zero_is_identity_object(self):
        tape = ad.Tape()
        a = tape.variable(np.ones((3, 3)))
        out = ad.dropout(a, 0.0, np.random.default_rng(0), training=True)
        assert out is a

    def test_eval_mode_is_identity_object(self):
        tape = ad.Tape()
        a = tape.variable(np.ones((3, 3)))
        out = ad.dropout(a, 0.9, np.random.default_rng(0), training=False)
        assert out is a

    def test_bad_rate_rejected(self):
        tape = ad.Tape()
        a = tape.variable(np.ones((2, 2)))
        for rate in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                ad.dropout(a, rate, np.random.default_rng(0), training=True)

    def test_monte_carlo_mean_preserved(self):
        """Inverted scaling keeps the expected activation within 2%."""
        tape = ad.Tape()
        a = tape.constant(np.ones((300, 300)))
        out = ad.dropout(a, 0.4, np.random.default_rng(4), training=True)
        dropped = np.mean(out.value == 0.0)
        survivors = out.value[out.value != 0.0]
        assert abs(dropped - 0.4) < 0.02
        assert np.allclose(survivors, 1.0 / 0.6, atol=1e-15)
        assert abs(out.value.mean() - 1.0) < 0.02

    def test_seeded_mask_deterministic(self):
        tape = ad.Tape()
        a = tape.constant(np.ones((50, 50)))
        one = ad.dropout(a, 0.5, np.random.default_rng(7), training=True)
        two = ad.dropout(a, 0.5, np.random.default_rng(7), training=True)
        assert np.array_equal(one.value, two.value)

    def test_gradient_equals_mask(self):
        tape = ad.Tape()
        a = tape.variable(np.ones((6, 6)))
        out = ad.dropout(a, 0.5, np.random.default_rng(8), training=True)
        tape.backward(ad.frobenius_sq(out))
        # d/da of sum((a*m)^2) = 2*m^2*a; mask entries are 0 or 2
        want = 2.0 * out.value * np.where(out.value != 0.0, 2.0, 0.0)
        assert np.allclose(a.grad, want, atol=1e-12)


class TestTapeRules:
    def test_backward_requires_scalar(self):
        tape = ad.Tape()
        a = tape.variable(np.ones((2, 2)))
        with pytest.raises(ValueError, match="scalar|1, 1"):
            tape.backward(ad.square(a))

    def test_mixing_tapes_rejected(self):
        one, two = ad.Tape(), ad.Tape()
        a = one.variable(np.ones((2, 2)))
        b = two.variable(np.ones((2, 2)))
        with pytest.raises(ValueError, match="tape"):
            ad.hadamard(a, b)

    def test_gradients_accumulate_across_reuse(self):
        tape = ad.Tape()
        a = tape.variable([[3.0]])
        loss = ad.frobenius_sq(ad.hadamard(a, a))  # (a^2)^2 = a^4
        tape.backward(loss)
        assert a.grad[0, 0] == pytest.approx(4 * 3.0 ** 3, abs=1e-12)

    def test_constant_receives_no_gradient(self):
        tape = ad.Tape()
        a = tape.variable([[2.0]])
        c = tape.constant([[5.0]])
        tape.backward(ad.frobenius_sq(ad.hadamard(a, c)))
        assert c.grad is None
        assert a.grad[0, 0] == pytest.approx(2 * 2.0 * 25.0, abs=1e-12)

    def test_no_requires_grad_no_recording(self):
        tape = ad.Tape()
        a = tape.constant(np.ones((4, 4)))
        before = len(tape._records)
        ad.square(ad.hadamard(a, a))
        assert len(tape._records) == before

    def test_operator_sugar(self):
        tape = ad.Tape()
        a = tape.constant([[1.0, 2.0]])
        b = tape.constant([[3.0, 4.0]])
        assert (a + b).value.tolist() == [[4.0, 6.0]]
        assert (a * b).value.tolist() == [[3.0, 8.0]]
        c = tape.constant([[1.0], [1.0]])
        assert (a @ c).value.tolist() == [[3.0]]


def check_grad(f, inputs, tol=1e-6):
    err = ad.gradcheck(f, inputs)
    assert err < tol, f"gradcheck relative error {err:.3e} >= {tol}"


class TestGradcheckBattery:
    """Central-difference agreement < 1e-6 for every differentiable op."""

    rng = np.random.default_rng(9)

    def test_matmul(self):
        a = self.rng.normal(size=(3, 4))
        b = self.rng.normal(size=(4, 2))
        check_grad(lambda t, x, y: ad.frobenius_sq(ad.matmul(x, y)), [a, b])

    def test_hadamard(self):
        a = self.rng.normal(size=(3, 3))
        b = self.rng.normal(size=(3, 3))
        check_grad(lambda t, x, y: ad.frobenius_sq(ad.hadamard(x, y)), [a, b])

    def test_square(self):
        a = self.rng.normal(size=(4, 3))
        check_grad(lambda t, x: ad.frobenius_sq(ad.square(x)), [a])

    def test_add_scaled(self):
        a = self.rng.normal(size=(3, 3))
        b = self.rng.normal(size=(3, 3))
        check_grad(
            lambda t, x, y: ad.frobenius_sq(ad.add_scaled(x, y, 0.7, -1.3)),
            [a, b])

    def test_scale(self):
        a = self.rng.normal(size=(2, 5))
        check_grad(lambda t, x: ad.frobenius_sq(ad.scale(x, -2.5)), [a])

    def test_row_scale(self):
        a = self.rng.normal(size=(4, 3))
        s = self.rng.normal(size=4)
        check_grad(lambda t, x: ad.frobenius_sq(ad.row_scale(x, s)), [a])

    def test_relu_away_from_kink(self):
        a = self.rng.normal(size=(4, 4))
        a[np.abs(a) < 0.1] = 0.5
        check_grad(lambda t, x: ad.frobenius_sq(ad.relu(x)), [a])

    def test_elu_away_from_kink(self):
        a = self.rng.normal(size=(4, 4))
        a[np.abs(a) < 0.1] = -0.5
        check_grad(lambda t, x: ad.frobenius_sq(ad.elu(x)), [a])

    def test_leaky_relu_away_from_kink(self):
        a = self.rng.normal(size=(4, 4))
        a[np.abs(a) < 0.1] = -0.7
        check_grad(
            lambda t, x: ad.frobenius_sq(ad.leaky_relu(x, slope=0.2)), [a])

    def test_log_softmax(self):
        a = self.rng.normal(size=(3, 5))
        check_grad(lambda t, x: ad.frobenius_sq(ad.log_softmax(x)), [a])

    def test_frobenius_sq_direct(self):
        """Quadratic in x, so central differences are essentially exact."""
        a = self.rng.normal(size=(5, 4))
        err = ad.gradcheck(lambda t, x: ad.frobenius_sq(x), [a])
        assert err < 1e-8

    def test_masked_cross_entropy(self):
        logits = self.rng.normal(size=(6, 3))
        labels = self.rng.integers(0, 3, size=6)
        check_grad(
            lambda t, x: ad.masked_cross_entropy(x, labels, [0, 2, 5]),
            [logits])

    def test_spmm(self):
        norm = gcn_normalize(PATH3_TILDE)
        x = self.rng.normal(size=(3, 4))
        check_grad(lambda t, v: ad.frobenius_sq(ad.spmm(norm, v)), [x])

    def test_edge_weighted_spmm(self):
        x = self.rng.normal(size=(3, 2))
        w = self.rng.normal(size=(PATH3_TILDE.nnz, 1))
        check_grad(
            lambda t, wv, xv: ad.frobenius_sq(
                ad.edge_weighted_spmm(PATH3_TILDE, wv, xv)),
            [w, x])

    def test_edge_gather_add(self):
        r = self.rng.normal(size=(3, 1))
        c = self.rng.normal(size=(3, 1))
        check_grad(
            lambda t, rv, cv: ad.frobenius_sq(
                ad.edge_gather_add(PATH3_TILDE, rv, cv)),
            [r, c])

    def test_edge_softmax(self):
        s = self.rng.normal(size=(PATH3_TILDE.nnz, 1))
        x = self.rng.normal(size=(3, 3))

        def f(t, sv):
            alpha = ad.edge_softmax(PATH3_TILDE, sv)
            return ad.frobenius_sq(
                ad.edge_weighted_spmm(PATH3_TILDE, alpha, t.constant(x)))

        check_grad(f, [s])

    def test_dropout_fixed_mask(self):
        a = self.rng.normal(size=(5, 5))

        def f(t, x):
            return ad.frobenius_sq(
                ad.dropout(x, 0.5, np.random.default_rng(11), training=True))

        check_grad(f, [a])

    def test_composed_attention_like_chain(self):
        """Gather -> leaky_relu -> softmax -> weighted aggregate -> loss."""
        r = self.rng.normal(size=(3, 1))
        c = self.rng.normal(size=(3, 1))
        x = self.rng.normal(size=(3, 2))

        def f(t, rv, cv, xv):
            scores = ad.leaky_relu(ad.edge_gather_add(PATH3_TILDE, rv, cv))
            alpha = ad.edge_softmax(PATH3_TILDE, scores)
            return ad.frobenius_sq(
                ad.edge_weighted_spmm(PATH3_TILDE, alpha, xv))

        check_grad(f, [r, c, x])
