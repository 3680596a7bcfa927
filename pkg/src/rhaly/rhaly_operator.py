"""The Rhaly operator R_theta: columns, prefix-sum application, powers and
Cesaro means.

R_theta is lower triangular with constant rows, ``(R x)_n = theta_n *
sum_{j<=n} x_j``.  Because of the triangular shape, applying it to a
sequence truncated at N reproduces entries 1..N of the infinite-dimensional
result exactly, so every array computed here is exact in its support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .sequences import CoefficientSequence
from .verdict import RhalyError, TruncationPolicy

ENUMERATION_LIMIT = 10 ** 6


class CombinatorialBlowup(RhalyError):
    """Direct chain enumeration would visit too many chains."""


@dataclass(frozen=True)
class RhalyOperator:
    theta: CoefficientSequence

    def theta_values(self, N: int) -> np.ndarray:
        return self.theta.values(N)

    def matrix(self, N: int) -> np.ndarray:
        """Dense N x N matrix; intended for oracles and small N only."""
        th = self.theta_values(N)
        return np.tril(np.ones((N, N), dtype=th.dtype)) * th[:, None]


def as_array(x, N: int) -> np.ndarray:
    if isinstance(x, CoefficientSequence):
        return x.values(N)
    x = np.asarray(x)
    if x.shape[0] >= N:
        return x[:N]
    out = np.zeros((N,) + x.shape[1:], dtype=np.result_type(x.dtype, float))
    out[: x.shape[0]] = x
    return out


def column(op: RhalyOperator, n: int, policy: TruncationPolicy) -> CoefficientSequence:
    """``R e_n = (0, ..., 0, theta_n, theta_{n+1}, ...)``."""
    if not 1 <= n <= policy.N:
        raise IndexError(f"column index {n} outside 1..{policy.N}")
    return op.theta.column_from(n)


def _apply(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    if x.ndim == 1:
        return np.cumsum(x) * theta
    return np.cumsum(x, axis=0) * theta[:, None]


def apply(op: RhalyOperator, x, policy: TruncationPolicy) -> np.ndarray:
    """Entries 1..N of ``R_theta x``.  ``x`` may also be an (N, m) block of
    column vectors."""
    N = policy.N
    return _apply(op.theta_values(N), as_array(x, N))


def power_apply(op: RhalyOperator, x, k: int, policy: TruncationPolicy) -> np.ndarray:
    if k < 0:
        raise ValueError("power must be nonnegative")
    N = policy.N
    theta = op.theta_values(N)
    v = as_array(x, N)
    for _ in range(k):
        v = _apply(theta, v)
    return v


def power_orbit(op: RhalyOperator, x, k_max: int, N: int):
    """Yield ``R^k x`` for ``k = 1..k_max`` (arrays of length N)."""
    theta = op.theta_values(N)
    v = as_array(x, N)
    for _ in range(k_max):
        v = _apply(theta, v)
        yield v


def chain_count(n: int, m: int, k: int) -> int:
    """Number of chains ``n <= j_1 <= ... <= j_k = m``."""
    return math.comb(m - n + k - 1, k - 1)


def power_coefficient(op: RhalyOperator, n: int, m: int, k: int, method: str = "auto"):
    """``(R^k e_n)_m`` from the chain sum over ``n <= j_1 <= ... <= j_k = m``.

    ``method`` is ``"enumerate"`` (direct sum over chains), ``"dp"``
    (accumulate over chain length) or ``"auto"``, which enumerates while the
    chain count stays below ``ENUMERATION_LIMIT``.
    """
    if k < 1 or n < 1:
        raise ValueError("need k >= 1 and n >= 1")
    if m < n:
        return 0.0
    count = chain_count(n, m, k)
    if method == "auto":
        method = "enumerate" if count <= ENUMERATION_LIMIT else "dp"
    th = op.theta_values(m)
    if method == "enumerate":
        if count > ENUMERATION_LIMIT:
            raise CombinatorialBlowup(
                f"{count} chains exceed the enumeration limit; use method='dp'")
        total = 0.0
        for chain in itertools.combinations_with_replacement(range(n - 1, m), k - 1):
            prod = th[m - 1]
            for j in chain:
                prod = prod * th[j]
            total += prod
        return total
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    # s[j] = sum over chains of current length ending at j
    s = np.zeros(m, dtype=th.dtype)
    s[n - 1:] = th[n - 1:]
    for _ in range(k - 1):
        s = np.cumsum(s) * th
        s[: n - 1] = 0
    return s[m - 1]


@dataclass(frozen=True)
class CesaroMeanState:
    """Running state for ``T^[k] x = (1/k) sum_{m=1..k} T^m x``."""

    k: int
    accumulated: np.ndarray
    current: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.accumulated / self.k


def cesaro_states(op: RhalyOperator, x, k_max: int, N: int):
    """Yield the Cesaro mean state for ``k = 1..k_max``."""
    theta = op.theta_values(N)
    v = as_array(x, N)
    acc = np.zeros_like(_apply(theta, v))
    for k in range(1, k_max + 1):
        v = _apply(theta, v)
        acc = acc + v
        yield CesaroMeanState(k, acc, v)


def cesaro_mean_apply(op: RhalyOperator, x, k: int, policy: TruncationPolicy) -> np.ndarray:
    if k < 1:
        raise ValueError("Cesaro means start at k = 1")
    for state in cesaro_states(op, x, k, policy.N):
        pass
    return state.mean
