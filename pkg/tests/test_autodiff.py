import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplex_infomax import autodiff as ad
from multiplex_infomax.errors import ContractError, NonFiniteError, ShapeMismatchError


def gradcheck(build, arrays, step=1e-6, rtol=1e-5, atol=1e-7):
    """Compare reverse-mode gradients of build(tensors) with central differences."""
    tensors = [ad.parameter(a.copy()) for a in arrays]
    loss = build(tensors)
    got = ad.backward(loss, tensors)

    def loss_fn(values):
        return float(build([ad.constant(v) for v in values]).value[0, 0])

    want = ad.finite_difference_oracle(loss_fn, arrays, step)
    for g, w in zip(got, want):
        np.testing.assert_allclose(g, w, rtol=rtol, atol=atol)


class TestForwardValues:
    def test_sigmoid_of_zero_is_half(self):
        out = ad.sigmoid(ad.constant(np.zeros((2, 2))))
        np.testing.assert_array_equal(out.value, np.full((2, 2), 0.5))

    def test_matmul_identity(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=(3, 4))
        out = ad.matmul(ad.constant(np.eye(3)), ad.constant(b))
        np.testing.assert_array_equal(out.value, b)

    def test_relu_definition(self):
        out = ad.relu(ad.constant([[-1.0, 2.0], [0.5, -3.0]]))
        np.testing.assert_array_equal(out.value, [[0.0, 2.0], [0.5, 0.0]])

    def test_row_softmax_rows_normalized(self):
        rng = np.random.default_rng(1)
        out = ad.row_softmax(ad.constant(rng.normal(scale=5, size=(7, 5))))
        np.testing.assert_allclose(out.value.sum(axis=1), np.ones(7), atol=1e-12)
        assert (out.value > 0).all() and (out.value < 1).all()

    def test_log_sigmoid_identity(self):
        xs = np.linspace(-30, 30, 601).reshape(1, -1)
        lhs = ad.log_sigmoid(ad.constant(xs)).value
        rhs = xs + ad.log_sigmoid(ad.constant(-xs)).value
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_mean_rows(self):
        out = ad.mean_rows(ad.constant([[1.0, 2.0], [3.0, 6.0]]))
        np.testing.assert_array_equal(out.value, [[2.0, 4.0]])

    def test_max_rows(self):
        out = ad.max_rows(ad.constant([[1.0, 5.0], [3.0, 2.0]]))
        np.testing.assert_array_equal(out.value, [[3.0, 5.0]])

    def test_row_dot(self):
        out = ad.row_dot(ad.constant([[1.0, 2.0], [3.0, 4.0]]),
                         ad.constant([[5.0, 6.0], [7.0, 8.0]]))
        np.testing.assert_array_equal(out.value, [[17.0], [53.0]])

    def test_hconcat_and_col_slice(self):
        a = ad.constant([[1.0], [2.0]])
        b = ad.constant([[3.0, 4.0], [5.0, 6.0]])
        cat = ad.hconcat([a, b])
        np.testing.assert_array_equal(cat.value, [[1.0, 3.0, 4.0], [2.0, 5.0, 6.0]])
        np.testing.assert_array_equal(ad.col_slice(cat, 1, 3).value, b.value)


class TestErrors:
    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError, match="inner dimensions"):
            ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))

    def test_add_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ad.add(ad.constant(np.ones((2, 3))), ad.constant(np.ones((3, 2))))

    def test_non_finite_input_rejected(self):
        with pytest.raises(NonFiniteError):
            ad.constant([[np.inf, 0.0]])

    def test_overflow_in_op_rejected(self):
        big = ad.constant([[1e300, 1e300]])
        with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
            ad.square(big)

    def test_non_scalar_loss_rejected(self):
        p = ad.parameter(np.ones((2, 2)))
        with pytest.raises(ContractError, match="scalar"):
            ad.backward(ad.relu(p), [p])

    def test_crooked_matrix_rejected(self):
        with pytest.raises(ShapeMismatchError):
            ad.constant(np.ones(3))


class TestBackward:
    def test_sum_of_squares(self):
        p = ad.parameter([[3.0]])
        loss = ad.sum_all(ad.square(p))
        (grad,) = ad.backward(loss, [p])
        np.testing.assert_allclose(grad, [[6.0]], atol=1e-12)

    def test_unused_parameter_gets_zero_gradient(self):
        p = ad.parameter([[2.0]])
        q = ad.parameter(np.ones((3, 2)))
        loss = ad.sum_all(ad.square(p))
        grads = ad.backward(loss, [p, q])
        np.testing.assert_array_equal(grads[1], np.zeros((3, 2)))

    def test_gradient_accumulates_over_multiple_uses(self):
        p = ad.parameter([[1.5]])
        loss = ad.sum_all(ad.add(p, p))
        (grad,) = ad.backward(loss, [p])
        np.testing.assert_array_equal(grad, [[2.0]])

    def test_sigmoid_matmul_sum_matches_oracle(self):
        rng = np.random.default_rng(7)
        weight = rng.normal(size=(4, 3))
        mixer = rng.normal(size=(3, 2))
        gradcheck(lambda ts: ad.sum_all(ad.sigmoid(ad.matmul(ts[0], ad.constant(mixer)))),
                  [weight])

    def test_stale_gradients_do_not_leak(self):
        p = ad.parameter([[2.0]])
        loss = ad.sum_all(ad.square(p))
        first = ad.backward(loss, [p])[0]
        second = ad.backward(ad.sum_all(ad.square(p)), [p])[0]
        np.testing.assert_array_equal(first, second)


def _random_shapes(rng, max_dim=16):
    return int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1))


PRIMITIVE_CASES = [
    ("matmul", lambda ts, aux: ad.sum_all(ad.mul_const(ad.matmul(ts[0], ts[1]), aux))),
    ("add", lambda ts, aux: ad.sum_all(ad.mul_const(ad.add(ts[0], ts[1]), aux))),
    ("sub", lambda ts, aux: ad.sum_all(ad.mul_const(ad.sub(ts[0], ts[1]), aux))),
    ("mul", lambda ts, aux: ad.sum_all(ad.mul_const(ad.mul(ts[0], ts[1]), aux))),
    ("scale", lambda ts, aux: ad.sum_all(ad.mul_const(ad.scale(ts[0], -2.7), aux))),
    ("transpose", lambda ts, aux: ad.sum_all(ad.mul_const(ad.transpose(ts[0]), aux.T))),
    ("relu", lambda ts, aux: ad.sum_all(ad.mul_const(ad.relu(ts[0]), aux))),
    ("sigmoid", lambda ts, aux: ad.sum_all(ad.mul_const(ad.sigmoid(ts[0]), aux))),
    ("log_sigmoid", lambda ts, aux: ad.sum_all(ad.mul_const(ad.log_sigmoid(ts[0]), aux))),
    ("square", lambda ts, aux: ad.sum_all(ad.mul_const(ad.square(ts[0]), aux))),
    ("row_softmax", lambda ts, aux: ad.sum_all(ad.mul_const(ad.row_softmax(ts[0]), aux))),
    ("row_log_softmax",
     lambda ts, aux: ad.sum_all(ad.mul_const(ad.row_log_softmax(ts[0]), aux))),
    ("row_dot", lambda ts, aux: ad.sum_all(ad.square(ad.row_dot(ts[0], ts[1])))),
    ("sum_all", lambda ts, aux: ad.square(ad.sum_all(ts[0]))),
]


@pytest.mark.parametrize("name,build", PRIMITIVE_CASES, ids=[c[0] for c in PRIMITIVE_CASES])
def test_primitive_gradients_match_finite_differences(name, build):
    rng = np.random.default_rng(hash(name) % 2**32)
    for trial in range(3):
        n, d = _random_shapes(rng)
        first = rng.normal(size=(n, d))
        if name == "relu":
            # keep values away from the kink so central differences are valid
            first = np.where(np.abs(first) < 0.05, 0.2, first)
        if name == "matmul":
            k = int(rng.integers(1, 17))
            arrays = [rng.normal(size=(n, k)), rng.normal(size=(k, d))]
        elif name in ("add", "sub", "mul", "row_dot"):
            arrays = [first, rng.normal(size=(n, d))]
        else:
            arrays = [first]
        aux = rng.normal(size=(n, d))
        gradcheck(lambda ts: build(ts, aux), arrays)


def test_structural_primitive_gradients():
    rng = np.random.default_rng(42)
    row = rng.normal(size=(1, 5))
    aux = rng.normal(size=(6, 5))
    gradcheck(lambda ts: ad.sum_all(ad.mul_const(ad.row_broadcast(ts[0], 6), aux)), [row])
    col = rng.normal(size=(6, 1))
    gradcheck(lambda ts: ad.sum_all(ad.mul_const(ad.col_broadcast(ts[0], 5), aux)), [col])
    a = rng.normal(size=(4, 2))
    b = rng.normal(size=(4, 3))
    aux2 = rng.normal(size=(4, 5))
    gradcheck(lambda ts: ad.sum_all(ad.mul_const(ad.hconcat([ts[0], ts[1]]), aux2)), [a, b])
    gradcheck(lambda ts: ad.sum_all(ad.square(ad.col_slice(ts[0], 1, 3))),
              [rng.normal(size=(4, 5))])
    gradcheck(lambda ts: ad.sum_all(ad.square(ad.mean_rows(ts[0]))),
              [rng.normal(size=(6, 4))])
    # distinct values keep the argmax away from ties
    spread = rng.permutation(30).reshape(6, 5) * 1.0
    gradcheck(lambda ts: ad.sum_all(ad.square(ad.max_rows(ts[0]))), [spread])


def test_spmm_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    dense = (rng.random((6, 6)) < 0.4) * rng.random((6, 6))
    sparse = ad.SparseMatrix.from_dense(dense)
    aux = rng.normal(size=(6, 4))
    gradcheck(lambda ts: ad.sum_all(ad.mul_const(ad.spmm(sparse, ts[0]), aux)),
              [rng.normal(size=(6, 4))])


def _dense_matmul_loops(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for k in range(b.shape[1]):
            acc = 0.0
            for j in range(a.shape[1]):
                acc += a[i, j] * b[j, k]
            out[i, k] = acc
    return out


@pytest.mark.parametrize("n,density", [(5, 0.3), (16, 0.2), (32, 0.1), (32, 0.9)])
def test_spmm_equals_densified_matmul_exactly(n, density):
    rng = np.random.default_rng(n * 100 + int(density * 10))
    dense = np.where(rng.random((n, n)) < density, rng.normal(size=(n, n)), 0.0)
    sparse = ad.SparseMatrix.from_dense(dense)
    other = rng.normal(size=(n, 7))
    got = ad.spmm(sparse, ad.constant(other)).value
    want = _dense_matmul_loops(dense, other)
    np.testing.assert_array_equal(got, want)


class TestSparseMatrix:
    def test_round_trip_dense(self):
        rng = np.random.default_rng(9)
        dense = np.where(rng.random((5, 4)) < 0.5, rng.normal(size=(5, 4)), 0.0)
        np.testing.assert_array_equal(ad.SparseMatrix.from_dense(dense).to_dense(), dense)

    def test_duplicate_entries_rejected(self):
        with pytest.raises(ContractError, match="duplicate"):
            ad.SparseMatrix(2, 2, [0, 0], [1, 1], [1.0, 2.0])

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ContractError):
            ad.SparseMatrix(2, 2, [0, 2], [1, 0], [1.0, 1.0])

    def test_transpose(self):
        m = ad.SparseMatrix(2, 3, [0, 1], [2, 0], [5.0, 7.0])
        np.testing.assert_array_equal(m.transpose().to_dense(), m.to_dense().T)

    def test_permuted(self):
        rng = np.random.default_rng(11)
        dense = np.where(rng.random((6, 6)) < 0.4, rng.normal(size=(6, 6)), 0.0)
        perm = rng.permutation(6)
        got = ad.SparseMatrix.from_dense(dense).permuted(perm).to_dense()
        np.testing.assert_array_equal(got, dense[np.ix_(perm, perm)])


class TestFiniteDifferenceOracle:
    def test_square_at_three(self):
        def loss_fn(params):
            return float(params[0][0, 0] ** 2)

        (grad,) = ad.finite_difference_oracle(loss_fn, [np.array([[3.0]])], 1e-6)
        assert math.isclose(grad[0, 0], 6.0, abs_tol=1e-6)

    def test_constant_function(self):
        grads = ad.finite_difference_oracle(lambda p: 1.25, [np.ones((2, 3))], 1e-6)
        np.testing.assert_array_equal(grads[0], np.zeros((2, 3)))

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ContractError):
            ad.finite_difference_oracle(lambda p: 0.0, [np.ones((1, 1))], 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-30, max_value=30, allow_nan=False))
def test_log_sigmoid_identity_property(x):
    arr = np.array([[x]])
    lhs = ad.log_sigmoid(ad.constant(arr)).value[0, 0]
    rhs = x + ad.log_sigmoid(ad.constant(-arr)).value[0, 0]
    assert abs(lhs - rhs) <= 1e-12
