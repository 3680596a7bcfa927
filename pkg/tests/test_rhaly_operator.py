from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rhaly.rhaly_operator import (
    CombinatorialBlowup,
    RhalyOperator,
    apply,
    cesaro_mean_apply,
    cesaro_states,
    chain_count,
    column,
    power_apply,
    power_coefficient,
)
from rhaly.sequences import CoefficientSequence
from rhaly.verdict import TruncationPolicy

THETAS = {
    "cesaro": CoefficientSequence.reciprocal(),
    "geometric": CoefficientSequence.geometric(1.0, 0.5),
    "alternating": CoefficientSequence.geometric(0.7, -0.8),
    "complex": CoefficientSequence.geometric(0.5 + 0.5j, 0.9j),
    "basis": CoefficientSequence.basis(1),
    "finite": CoefficientSequence.finite([0.3, -1.2, 2.0, 0.1]),
}


@pytest.mark.parametrize("name", sorted(THETAS))
def test_apply_matches_dense_matrix(name):
    op = RhalyOperator(THETAS[name])
    P = TruncationPolicy(N=60)
    rng = np.random.default_rng(7)
    x = rng.standard_normal(60)
    np.testing.assert_allclose(apply(op, x, P), op.matrix(60) @ x, rtol=1e-13, atol=1e-15)


def test_apply_accepts_block_of_columns():
    op = RhalyOperator(THETAS["geometric"])
    P = TruncationPolicy(N=30)
    X = np.random.default_rng(1).standard_normal((30, 4))
    np.testing.assert_allclose(apply(op, X, P), op.matrix(30) @ X, rtol=1e-13)


def test_short_input_is_zero_padded():
    op = RhalyOperator(THETAS["cesaro"])
    y = apply(op, [1.0], TruncationPolicy(N=16))
    np.testing.assert_allclose(y, 1 / np.arange(1, 17))


def test_column_is_shifted_theta():
    op = RhalyOperator(THETAS["geometric"])
    col = column(op, 3, TruncationPolicy(N=16)).values(6)
    np.testing.assert_allclose(col, [0, 0, 0.125, 0.0625, 0.03125, 0.015625])
    with pytest.raises(IndexError):
        column(op, 17, TruncationPolicy(N=16))


def test_power_apply_matches_matrix_power():
    op = RhalyOperator(THETAS["alternating"])
    P = TruncationPolicy(N=25)
    x = np.linspace(-1, 1, 25)
    A = op.matrix(25)
    for k in range(5):
        np.testing.assert_allclose(power_apply(op, x, k, P), np.linalg.matrix_power(A, k) @ x, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("n, m, k", [(1, 1, 1), (1, 5, 2), (2, 7, 3), (3, 3, 4), (1, 12, 4)])
def test_chain_count_matches_enumeration(n, m, k):
    chains = [c for c in itertools.combinations_with_replacement(range(n, m + 1), k - 1)]
    assert chain_count(n, m, k) == len(chains)


@pytest.mark.parametrize("method", ["enumerate", "dp"])
def test_power_coefficient_matches_matrix_power(method):
    op = RhalyOperator(THETAS["complex"])
    A = np.linalg.matrix_power(op.matrix(10), 3)
    for n in range(1, 11):
        for m in range(1, 11):
            got = power_coefficient(op, n, m, 3, method=method)
            assert abs(got - A[m - 1, n - 1]) <= 1e-13 * max(1.0, abs(A[m - 1, n - 1]))


def test_power_coefficient_refuses_huge_enumeration():
    op = RhalyOperator(THETAS["geometric"])
    with pytest.raises(CombinatorialBlowup):
        power_coefficient(op, 1, 200, 6, method="enumerate")
    assert power_coefficient(op, 1, 200, 6) == pytest.approx(power_coefficient(op, 1, 200, 6, method="dp"))


def test_cesaro_means_telescope():
    op = RhalyOperator(THETAS["alternating"])
    N = 40
    x = np.random.default_rng(3).standard_normal(N)
    states = list(cesaro_states(op, x, 12, N))
    for prev, cur in zip(states, states[1:]):
        k = cur.k
        np.testing.assert_allclose(k * cur.mean - (k - 1) * prev.mean, cur.current, atol=1e-13)


def test_idempotent_means_are_constant():
    op = RhalyOperator(THETAS["basis"])
    P = TruncationPolicy(N=20)
    x = np.arange(1.0, 21.0)
    px = apply(op, x, P)
    np.testing.assert_array_equal(apply(op, px, P), px)
    for k in (1, 2, 7, 64):
        np.testing.assert_array_equal(cesaro_mean_apply(op, x, k, P), px)


finite_theta = arrays(np.float64, st.integers(1, 12), elements=st.floats(-2, 2))


@settings(max_examples=80, deadline=None)
@given(finite_theta, st.integers(0, 2 ** 31 - 1))
def test_apply_is_linear_and_matches_oracle(theta, seed):
    N = 16  # smallest admissible truncation; theta is zero beyond its support
    op = RhalyOperator(CoefficientSequence.finite(theta))
    P = TruncationPolicy(N=N)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(N), rng.standard_normal(N)
    a = float(rng.standard_normal())
    np.testing.assert_allclose(apply(op, a * x + y, P), a * apply(op, x, P) + apply(op, y, P), atol=1e-10)
    np.testing.assert_allclose(apply(op, x, P), op.matrix(N) @ x, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite_theta, st.integers(1, 4))
def test_power_coefficient_methods_agree(theta, k):
    op = RhalyOperator(CoefficientSequence.finite(theta))
    M = theta.size
    for n in range(1, M + 1):
        e = power_coefficient(op, n, M, k, method="enumerate")
        d = power_coefficient(op, n, M, k, method="dp")
        assert abs(e - d) <= 1e-10 * max(1.0, abs(e))


@settings(max_examples=40, deadline=None)
@given(finite_theta)
def test_lower_triangular_structure(theta):
    N = theta.size
    A = RhalyOperator(CoefficientSequence.finite(theta)).matrix(N)
    assert np.all(np.triu(A, 1) == 0)
    for i in range(N):
        assert np.all(A[i, : i + 1] == theta[i])
