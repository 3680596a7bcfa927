from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhaly.holomorphic import (
    AnalyticFunction,
    QuadratureSpec,
    SeriesOnlyError,
    adapter_check,
    adaptive_quadrature,
    apply_Rg_integral,
    apply_Rg_series,
    circle_quadrature,
    cross_validate,
    dump_coefficients,
    extract_theta,
    load_coefficients,
    sequence_to_taylor,
    series_tail_estimate,
    taylor_to_sequence,
)

EXP = AnalyticFunction.exp()
ONE = AnalyticFunction.constant(1.0)
Z = AnalyticFunction.polynomial([0.0, 1.0])
GEO = AnalyticFunction.geometric(1.0)          # 1/(1-z)
ENTIRE_SPEC = QuadratureSpec(r0=0.5)


def test_trapezoid_integrates_monomials_exactly():
    spec = QuadratureSpec(M=32)
    # residue of 1/w is 1; w^j has none
    assert abs(circle_quadrature(lambda w: 1 / w, spec) - 1.0) < 1e-15
    for j in (0, 3, -2):
        assert abs(circle_quadrature(lambda w: w ** j, spec)) < 1e-15


def test_adaptive_quadrature_converges_for_analytic_integrand():
    res = adaptive_quadrature(lambda w: np.exp(w) / w, QuadratureSpec(M=16), r=0.7)
    assert res.converged and abs(res.value - 1.0) < 1e-14


def test_exp_coefficients_match_factorials():
    theta = extract_theta(EXP, 20, QuadratureSpec(M=64)).values(21)
    exact = np.array([1 / math.factorial(n) for n in range(21)])
    assert np.max(np.abs(theta - exact)) < 1e-14


def test_geometric_coefficients_inside_disc():
    g = AnalyticFunction.geometric(0.5)
    theta = extract_theta(g, 20, QuadratureSpec(r=1.0, M=128)).values(21)
    assert np.max(np.abs(theta - 0.5 ** np.arange(21))) < 1e-14


def test_extract_rejects_bad_setups():
    with pytest.raises(ValueError):
        extract_theta(EXP, 32, QuadratureSpec(M=64))
    with pytest.raises(ValueError):
        extract_theta(AnalyticFunction.geometric(2.0), 4, QuadratureSpec(r=0.6))


@pytest.mark.parametrize("kw", [dict(M=48), dict(M=8), dict(r0=1.2), dict(r0=0.6, r1=0.3), dict(r1=0.5)])
def test_quadrature_spec_validation(kw):
    with pytest.raises(ValueError):
        QuadratureSpec(**kw)


def test_index_adapter_round_trip():
    b = np.array([1.0, 2.0, 3.0 + 1j])
    theta = taylor_to_sequence(b)
    assert theta.value(1) == 1.0 and theta.value(3) == 3.0 + 1j
    np.testing.assert_array_equal(sequence_to_taylor(theta, 2), b)


@pytest.mark.parametrize(
    "f, closed",
    [
        (ONE, lambda z: cmath.exp(z)),
        (Z, lambda z: cmath.exp(z) - 1),
        (GEO, lambda z: (1 + z) * cmath.exp(z)),
        (AnalyticFunction.polynomial([1.0, -1.0]), lambda z: 1.0),
    ],
)
@pytest.mark.parametrize("z", [0.3, -0.8 + 0.2j, 1.0, 2.5j])
def test_integral_form_matches_closed_form(f, closed, z):
    got = apply_Rg_integral(EXP, f, z, ENTIRE_SPEC)
    assert abs(got - closed(z)) < 1e-11 * max(1.0, abs(closed(z)))
    assert abs(apply_Rg_series(EXP, f, z, 200) - closed(z)) < 1e-12 * max(1.0, abs(closed(z)))


def test_disc_case_needs_point_on_evaluation_circle():
    g = AnalyticFunction.geometric(1 / 3)
    spec = QuadratureSpec(r0=0.3, r1=0.6)
    with pytest.raises(ValueError):
        apply_Rg_integral(g, ONE, 0.5, spec)
    z = 0.6 * cmath.exp(0.4j)
    assert abs(apply_Rg_integral(g, ONE, z, spec) - g(z)) < 1e-12


def test_disc_case_pole_on_contour_is_series_only():
    g = AnalyticFunction.geometric(0.5)
    spec = QuadratureSpec(r0=0.3, r1=0.6)
    with pytest.raises(SeriesOnlyError):
        apply_Rg_integral(g, g, 0.6, spec)
    rep = cross_validate(g, g, [0.6, -0.6], spec)
    assert all(r.note.startswith("series-only") for r in rep.rows)


def test_cross_validate_entire_pair():
    rep = cross_validate(EXP, GEO, [0.1, 0.5j, -1.0, 1 + 1j, 2.0], ENTIRE_SPEC)
    assert rep.passed
    assert max(r.difference for r in rep.rows) < 1e-12


def test_series_tail_estimate_trust():
    est, trusted = series_tail_estimate(EXP, ONE, 1.0, 60)
    assert trusted and est < 1e-60
    _, trusted = series_tail_estimate(AnalyticFunction.geometric(1.0), ONE, 1.5, 60)
    assert not trusted


def test_coefficient_file_round_trip(tmp_path):
    vals = [1.0, 0.5 - 0.25j, 1e-300]
    path = tmp_path / "g.txt"
    path.write_text("# header\n" + dump_coefficients(vals))
    g = load_coefficients(path, radius=2.0)
    np.testing.assert_array_equal(g.taylor_coefficients(2), np.array(vals, dtype=complex))
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        load_coefficients(bad)


coef = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=1, max_size=10), st.lists(coef, min_size=1, max_size=10),
       st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False))
def test_polynomial_pairs_agree(b, a, z):
    g = AnalyticFunction.polynomial(b)
    f = AnalyticFunction.polynomial(a)
    series = apply_Rg_series(g, f, z, 20)
    integral = apply_Rg_integral(g, f, z, ENTIRE_SPEC)
    assert abs(series - integral) <= 1e-10 * max(1.0, abs(series))


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=1, max_size=12), st.complex_numbers(max_magnitude=1.0, allow_nan=False,
                                                                   allow_infinity=False))
def test_matrix_path_matches_series(b, z):
    g = AnalyticFunction.polynomial(b)
    assert adapter_check(g, GEO, z, n_max=15) <= 1e-12 * max(1.0, abs(apply_Rg_series(g, GEO, z, 15)))


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_constant_input_reproduces_g(z):
    assert abs(apply_Rg_integral(EXP, ONE, z, ENTIRE_SPEC) - cmath.exp(z)) <= 1e-11 * max(1.0, abs(cmath.exp(z)))
