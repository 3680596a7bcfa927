from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhaly.dynamics import (
    FINITE_RULE,
    INFINITE_RULE,
    cesaro_bounded_check,
    ergodic_projection_estimate,
    fesas_bound_check,
    log_orbit,
    m_topologizability_witness,
    orbit_decay_check,
    power_bound_witness,
    recheck_m_topologizability,
    recheck_power_bound,
    sup_grade_seminorm,
    topologizability_constants,
)
from rhaly.koethe import seminorm
from rhaly.rhaly_operator import RhalyOperator
from rhaly.sequences import CoefficientSequence, ExponentSequence, WeightGrid
from rhaly.verdict import HypothesisError, TruncationPolicy

P = TruncationPolicy()
LIN = ExponentSequence.linear()
L1N = WeightGrid.finite_type(LIN)
LINF = WeightGrid.infinite_type(LIN)
HALF = CoefficientSequence.geometric(0.5, 0.5)       # sum = 1/2
ONE = CoefficientSequence.geometric(1.0, 0.5)        # sum = 1
THREE = CoefficientSequence.geometric(3.0, 0.5)      # sum = 3
GAUSS = CoefficientSequence.exp_exponent(1.0, 1.0, ExponentSequence.power(1.0, 2.0))


def dense_orbit_norms(theta, grid, N, K, n, p, form="l1"):
    """``||R^k e_n||_p`` for k = 1..K from explicit matrix powers."""
    A = RhalyOperator(theta).matrix(N)
    w = np.exp(grid.log_weights(N, p))
    v = np.zeros(N)
    v[n - 1] = 1.0
    out = []
    for _ in range(K):
        v = A @ v
        t = np.abs(v) * w
        out.append(float(t.max() if form == "sup" else t.sum()))
    return np.array(out)


def test_log_orbit_matches_dense_powers():
    N = 40
    A = RhalyOperator(ONE).matrix(N)
    v = np.zeros(N)
    v[2] = 1.0
    for k, u in log_orbit(ONE, 3, 6, N):
        v = A @ v
        with np.errstate(divide="ignore"):
            np.testing.assert_allclose(u[2:], np.log(v[2:]), rtol=1e-12)
        assert np.all(u[:2] == -np.inf)


@pytest.mark.parametrize("theta, total", [(HALF, 0.5), (ONE, 1.0), (THREE, 3.0)])
def test_sup_grade_is_l1_sum(theta, total):
    v = sup_grade_seminorm(theta, LIN, P)
    assert v.upper == pytest.approx(total, rel=1e-12)
    assert v.exact


def test_sup_grade_rejects_non_member():
    with pytest.raises(HypothesisError):
        sup_grade_seminorm(CoefficientSequence.geometric(1.0, 3.0), LIN, P)


def test_half_sum_power_bounded_with_three_p():
    v = power_bound_witness(HALF, L1N, P, 32, 100, 4)
    assert v.is_certified
    w = v.witness
    assert w.rule == FINITE_RULE and not w.boundary
    assert w.q_for_p == {p: 3 * p for p in range(1, 5)}
    assert recheck_power_bound(HALF, L1N, w, P) == []
    for n in (1, 5, 20):
        for p in (1, 4):
            lhs = dense_orbit_norms(HALF, L1N, 150, 32, n, p)
            assert np.all(lhs <= math.exp(-n / (3 * p)) * (1 + 1e-12))


def test_unit_sum_is_boundary_case():
    v = power_bound_witness(ONE, L1N, P, 16, 40, 3)
    assert v.is_certified and v.witness.boundary


def test_sum_three_refuted_by_explicit_point():
    v = power_bound_witness(THREE, L1N, P, 32, 100, 4)
    assert v.is_refuted
    cex = v.counterexample
    lhs = dense_orbit_norms(THREE, L1N, 200, cex["k"], cex["n"], cex["p"], form="sup")[-1]
    assert lhs > 1.0
    assert lhs == pytest.approx(cex["lhs"], rel=1e-9)


def test_large_single_entry_refuted_on_infinite_type():
    v = power_bound_witness(CoefficientSequence.finite([2.0]), LINF, P)
    assert v.is_refuted
    assert v.counterexample["theta_n"] == 2.0


def test_infinite_type_gaussian_table():
    v = power_bound_witness(GAUSS, LINF, P, 20, 50, 3)
    assert v.is_certified
    w = v.witness
    assert w.rule == INFINITE_RULE and w.m0 == 1
    assert w.q_p == {1: 1, 2: 2, 3: 3}
    assert w.q_for_p == {1: 2, 2: 3, 3: 4}
    assert recheck_power_bound(GAUSS, LINF, w, P) == []


def test_fesas_holds_on_box():
    v = fesas_bound_check(HALF, LIN, P, 8)
    assert v.is_certified
    assert v.witness["checked"] == 512 and v.witness["max_log_gap"] <= 0


@pytest.mark.parametrize("theta", [CoefficientSequence.reciprocal(), HALF,
                                   CoefficientSequence.geometric(1.0, 1.0)])
def test_fesas_holds_without_summable_theta(theta):
    v = fesas_bound_check(theta, LIN, P, 8)
    assert v.is_certified


def test_fesas_left_side_tail_dominates_dense_orbit():
    # the bound from a short truncation must cover the orbit computed far beyond it
    short, N = P.replace(N=16), 300
    v = fesas_bound_check(CoefficientSequence.reciprocal(), LIN, short, 4)
    assert v.is_certified
    for n in (1, 3):
        for p in (1, 4):
            dense = dense_orbit_norms(CoefficientSequence.reciprocal(), L1N, N, 4, n, p, form="sup")
            rhs = [math.exp(-n / (3 * p)) * seminorm(CoefficientSequence.reciprocal(), L1N, 3 * p * k, P.replace(k_max=48)).upper ** k
                   for k in range(1, 5)]
            assert np.all(dense <= np.array(rhs) * (1 + 1e-12))


def test_fesas_needs_nuclear_space():
    with pytest.raises(HypothesisError):
        fesas_bound_check(HALF, ExponentSequence.log(), P)


def test_topologizability_constants_formula():
    consts = topologizability_constants(HALF, LIN, P, k_max=3, p_max=2)
    for (k, p), M in consts.items():
        norm = seminorm(HALF, L1N, 3 * p * k, P.replace(k_max=18)).upper
        assert M == pytest.approx(norm ** k, rel=1e-12)


@pytest.mark.parametrize("theta, grid, route", [(HALF, L1N, "finite_type_3p"), (GAUSS, LINF, "inf_weight")])
def test_m_topologizability(theta, grid, route):
    v = m_topologizability_witness(theta, grid, P, 16, 30)
    assert v.is_certified and v.witness.route == route
    assert recheck_m_topologizability(theta, grid, v.witness, P, 16, 30) == []


@pytest.mark.parametrize("theta, outcome", [(HALF, "Certified"), (THREE, "Refuted"),
                                            (CoefficientSequence.basis(1), "Certified")])
def test_cesaro_boundedness(theta, outcome):
    v = cesaro_bounded_check(theta, L1N, P, 16, 40, 3)
    assert v.outcome == outcome


@pytest.mark.parametrize("theta, cls", [(CoefficientSequence.basis(1), "decaying"),
                                        (HALF, "decaying"), (THREE, "growing")])
def test_orbit_classification(theta, cls):
    x = CoefficientSequence.basis(1)
    assert orbit_decay_check(theta, x, L1N, P, 32).classification == cls


def test_idempotent_ergodic_limit_is_exact():
    e1 = CoefficientSequence.basis(1)
    est = ergodic_projection_estimate(e1, e1, L1N, P)
    for k in est.schedule:
        np.testing.assert_array_equal(est.means[k], e1.values(P.N))
    assert all(v == 0 for inc in est.increments.values() for v in inc.values())
    assert est.limit is not None and not est.non_convergent_risk


def test_geometric_ergodic_increments_shrink():
    est = ergodic_projection_estimate(HALF, CoefficientSequence.basis(1), L1N, P)
    for inc in est.increments.values():
        vals = [inc[k] for k in sorted(inc)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6


def test_schedule_validation():
    with pytest.raises(ValueError):
        ergodic_projection_estimate(HALF, HALF, L1N, P, schedule=(0, 2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.05, 0.5))
def test_small_sum_always_power_bounded(c, r):
    th = CoefficientSequence.geometric(c, r)
    v = power_bound_witness(th, L1N, P, 12, 20, 2)
    assert v.is_certified
    for n in (1, 7):
        lhs = dense_orbit_norms(th, L1N, 80, 12, n, 2)
        assert np.all(lhs <= math.exp(-n / 6) * (1 + 1e-12))


@settings(max_examples=25, deadline=None)
@given(st.floats(1.05, 4.0), st.floats(0.3, 0.7))
def test_large_sum_never_certified(c, r):
    th = CoefficientSequence.geometric(c, r)
    if sum(c * r ** n for n in range(1, 400)) > 1.0 + 1e-9:
        assert power_bound_witness(th, L1N, P, 16, 20, 3).is_refuted


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 12))
def test_cesaro_mean_increments_bounded_by_orbit(r, K):
    # ||T^[k]x - T^[k-1]x|| <= (2/k) max_j ||T^j x|| for nonnegative orbits
    th = CoefficientSequence.geometric(1.0 - r, r)
    x = CoefficientSequence.basis(1)
    est = ergodic_projection_estimate(th, x, L1N, P, schedule=range(1, K + 1), grades=[1])
    orbit = dense_orbit_norms(th, L1N, P.N, K, 1, 1)
    for k, v in est.increments[1].items():
        assert v <= 2.0 / k * orbit[:k].max() * (1 + 1e-9) + 1e-15
