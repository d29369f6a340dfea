import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from olslab.ndkernel import ShapeError, as_mat, matmul, relu, relu_mask, softmax_rows, top_k_indices


def naive_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in a]
    for i in range(len(a)):
        for j in range(len(b[0])):
            s = 0.0
            for k in range(len(b)):
                s += a[i][k] * b[k][j]
            out[i][j] = s
    return out


def test_matmul_identity():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), m), m)


def test_matmul_zero():
    assert np.array_equal(matmul(np.zeros((2, 2)), np.arange(6.0).reshape(2, 3)), np.zeros((2, 3)))


def test_matmul_hand_example():
    got = matmul([[1, 2], [3, 4]], [[5, 6], [7, 8]])
    assert got.tolist() == [[19.0, 22.0], [43.0, 50.0]]


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_matches_triple_loop_exactly(rng):
    for _ in range(50):
        m, k, n = rng.integers(1, 7, size=3)
        a = rng.standard_normal((m, k))
        b = rng.standard_normal((k, n))
        assert matmul(a, b).tolist() == naive_matmul(a.tolist(), b.tolist())


def test_as_mat_rejects_nan():
    with pytest.raises(ValueError):
        as_mat([[1.0, float("nan")]])


def test_softmax_uniform():
    assert np.allclose(softmax_rows(np.zeros((1, 4))), 0.25, rtol=0, atol=1e-15)


def test_softmax_closed_form():
    logits = np.log([[1.0, 2.0, 3.0, 4.0]])
    np.testing.assert_allclose(softmax_rows(logits)[0], [0.1, 0.2, 0.3, 0.4], rtol=0, atol=1e-15)


def test_softmax_large_logits_stay_finite():
    p = softmax_rows(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.all(np.isfinite(p))
    assert p[0, 0] == 1.0


def test_softmax_rows_sum_to_one_many_rows(rng):
    logits = rng.normal(scale=10.0, size=(1000, 7))
    p = softmax_rows(logits)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12
    assert np.all(p > 0) and np.all(p <= 1)


@settings(max_examples=200)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 6)), elements=st.floats(-50, 50)),
    st.floats(-100, 100),
)
def test_softmax_shift_invariance(x, c):
    np.testing.assert_allclose(softmax_rows(x + c), softmax_rows(x), rtol=0, atol=1e-12)


def test_relu_cases():
    assert relu([[-1.0, 0.0, 2.0]]).tolist() == [[0.0, 0.0, 2.0]]
    assert relu_mask([[-3.0, 5.0]]).tolist() == [[0.0, 1.0]]


@given(arrays(np.float64, (3, 4), elements=st.floats(-1e6, 1e6)))
def test_relu_idempotent(x):
    assert np.array_equal(relu(relu(x)), relu(x))


def test_top_k_examples():
    assert top_k_indices([0.1, 0.7, 0.2], 1) == [1]
    assert top_k_indices([0.5, 0.5], 2) == [0, 1]
    assert top_k_indices([0.05, 0.4, 0.3, 0.25], 3) == [1, 2, 3]


def test_top_k_rejects_large_k():
    with pytest.raises(ValueError):
        top_k_indices([0.1, 0.9], 3)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12))
def test_top_k_full_is_sorted_permutation(row):
    idx = top_k_indices(row, len(row))
    assert sorted(idx) == list(range(len(row)))
    # full-sort oracle: descending value, ascending index on ties
    assert idx == sorted(range(len(row)), key=lambda i: (-row[i], i))
