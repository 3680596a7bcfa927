"""Acceptance gate: each criterion runs at its stated tolerance and time
limit and reports one PASS/FAIL line (also collected in the terminal
summary by ``conftest.py``)."""

from __future__ import annotations

import cmath
import contextlib
import math
import time

import numpy as np
import pytest

from rhaly.cli import main
from rhaly.config import CHECKS
from rhaly.criteria import (
    SUP,
    column_ratio_table,
    compactness_witness,
    dual_compactness_test,
    recheck_compactness,
)
from rhaly.dynamics import (
    ergodic_projection_estimate,
    fesas_bound_check,
    orbit_decay_check,
    power_bound_witness,
    recheck_power_bound,
)
from rhaly.holomorphic import (
    AnalyticFunction,
    QuadratureSpec,
    apply_Rg_integral,
    cross_validate,
    extract_theta,
)
from rhaly.rhaly_operator import RhalyOperator, apply, power_apply, power_coefficient
from rhaly.sequences import CoefficientSequence, ExponentSequence, WeightGrid
from rhaly.verdict import TruncationPolicy

RESULTS: dict[int, str] = {}

LIN = ExponentSequence.linear()
L1N = WeightGrid.finite_type(LIN)
LINF = WeightGrid.infinite_type(LIN)
E1 = CoefficientSequence.basis(1)
HALF = CoefficientSequence.geometric(0.5, 0.5)     # sum |theta_n| = 1/2
THREE = CoefficientSequence.geometric(3.0, 0.5)    # sum |theta_n| = 3


@contextlib.contextmanager
def criterion(num: int, title: str, limit: float | None):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException as err:
        elapsed = time.perf_counter() - start
        RESULTS[num] = f"FAIL  {num:>2}. {title} ({elapsed:.2f} s): {type(err).__name__}: {err}"
        print(RESULTS[num])
        raise
    elapsed = time.perf_counter() - start
    ok = limit is None or elapsed < limit
    info = ", ".join(f"{k}={v}" for k, v in detail.items())
    bound = "" if limit is None else f" < {limit:g} s"
    RESULTS[num] = f"{'PASS' if ok else 'FAIL'}  {num:>2}. {title} ({elapsed:.2f} s{bound}){': ' + info if info else ''}"
    print(RESULTS[num])
    assert ok, f"time limit exceeded: {elapsed:.2f} s >= {limit} s"


def random_fixtures(count: int, seed: int) -> list[CoefficientSequence]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = i % 6
        if kind == 0:
            out.append(CoefficientSequence.geometric(rng.uniform(0.1, 3.0), rng.uniform(-0.99, 0.99)))
        elif kind == 1:
            c = complex(rng.normal(), rng.normal())
            r = complex(*rng.uniform(-0.7, 0.7, 2))
            out.append(CoefficientSequence.geometric(c, r))
        elif kind == 2:
            out.append(CoefficientSequence.exp_exponent(rng.uniform(0.5, 2.0), rng.uniform(0.5, 4.0),
                                                        ExponentSequence.power(1.0, rng.uniform(1.0, 2.0))))
        elif kind == 3:
            out.append(CoefficientSequence.finite(rng.normal(size=int(rng.integers(1, 200)))))
        elif kind == 4:
            out.append(CoefficientSequence.reciprocal())
        else:
            out.append(CoefficientSequence.log_quadratic(rng.uniform(-1, 1), rng.uniform(-0.5, 0.0),
                                                         rng.uniform(-0.01, 0.0)))
    return out


def test_01_matrix_oracle():
    with criterion(1, "apply vs dense lower-triangular matvec, N=200, 50 fixtures", 5.0) as d:
        N = 200
        P = TruncationPolicy(N=N)
        rng = np.random.default_rng(2024)
        worst = 0.0
        for theta in random_fixtures(50, 11):
            op = RhalyOperator(theta)
            x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            ref = op.matrix(N) @ x
            got = apply(op, x, P)
            worst = max(worst, float(np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-300)))
        d["max_rel_err"] = f"{worst:.2e}"
        assert worst < 1e-12


def test_02_chain_sum():
    with criterion(2, "chain-sum power coefficients, n<=m<=12, k<=4, 10 fixtures", 10.0) as d:
        P = TruncationPolicy(N=16)
        worst = 0.0
        for theta in random_fixtures(10, 12):
            op = RhalyOperator(theta)
            for k in range(1, 5):
                for n in range(1, 13):
                    e = np.zeros(16)
                    e[n - 1] = 1.0
                    ref = power_apply(op, e, k, P)
                    for m in range(n, 13):
                        got = power_coefficient(op, n, m, k)
                        worst = max(worst, abs(got - ref[m - 1]) / max(1.0, abs(ref[m - 1])))
        d["max_err"] = f"{worst:.2e}"
        assert worst < 1e-12


def infinite_type_fixtures():
    out = [CoefficientSequence.exp_exponent(c, s, ExponentSequence.power(1.0, g))
           for c, s, g in [(1, 1, 2), (2, 1, 2), (0.5, 2, 2), (1, 0.5, 1.5), (3, 1, 1.8),
                           (1, 3, 2.5), (0.1, 1, 3)]]
    out += [E1, CoefficientSequence.finite([1.0, -2.0, 0.5j]), CoefficientSequence.zero()]
    return out


def test_03_infinite_type_compactness():
    with criterion(3, "compactness on Lambda_inf(n) certified with m=1, 10 fixtures", 5.0) as d:
        P = TruncationPolicy()
        for theta in infinite_type_fixtures():
            v = compactness_witness(theta, LINF, LINF, P)
            assert v.is_certified and v.witness.m == 1, theta.describe()
            assert recheck_compactness(theta, LINF, LINF, v.witness, P) == [], theta.describe()
        d["fixtures"] = len(infinite_type_fixtures())


def _divergence_rechecks(theta, counterexample, P):
    """Each per-m entry must show the column ratio still growing on a four
    times longer truncation."""
    Pl = P.replace(N=4 * P.N)
    for m, info in counterexample["per_m"].items():
        r = column_ratio_table(theta, L1N, L1N, info["k"], int(m), Pl, SUP)
        assert r[-1] > r[P.N - 1] > 0, (m, info)


def test_04_dual_compactness():
    with criterion(4, "compact iff theta in the dual; 20-fixture consistency", 10.0) as d:
        P = TruncationPolicy()
        pos = CoefficientSequence.exp_exponent(1.0, 2.0, LIN)
        assert dual_compactness_test(pos, LIN, P).is_certified
        assert compactness_witness(pos, L1N, L1N, P).is_certified
        neg = CoefficientSequence.reciprocal()
        dv = dual_compactness_test(neg, LIN, P)
        cv = compactness_witness(neg, L1N, L1N, P)
        assert dv.is_refuted and cv.is_refuted
        n_ext = 4 * P.N
        yv = np.abs(neg.values(n_ext))
        for k in dv.counterexample["grades"]:
            ratio = np.log(yv) + np.arange(1, n_ext + 1) / k
            assert np.all(np.diff(ratio[P.N:]) > 0)
        _divergence_rechecks(neg, cv.counterexample, P)
        fixtures = [CoefficientSequence.exp_exponent(1.0, s, LIN) for s in (1.1, 1.5, 2, 3, 4.5, 6)]
        fixtures += [CoefficientSequence.geometric(1.0, r) for r in (0.3, 0.9, 0.999)]
        fixtures += [CoefficientSequence.exp_exponent(2.0, s, ExponentSequence.power(1.0, 0.5)) for s in (1, 3)]
        fixtures += [neg, E1, CoefficientSequence.zero(), CoefficientSequence.finite([1, 2, 3]),
                     CoefficientSequence.log_quadratic(0.0, -1.0, 0.0), CoefficientSequence.geometric(0.5, -0.7),
                     CoefficientSequence.exp_exponent(1.0, 1.0, ExponentSequence.power(1.0, 2.0)), pos,
                     CoefficientSequence.geometric(1j, 0.5)]
        assert len(fixtures) == 20
        decided = 0
        for th in fixtures:
            v = dual_compactness_test(th, LIN, P, cross_check=True)
            assert not v.diagnostics["contradiction"], th.describe()
            decided += v.outcome == v.diagnostics["compactness_outcome"] != "Inconclusive"
        d["agreeing_decisions"] = f"{decided}/20"


def test_05_fesas():
    with criterion(5, "3p power bound on the box n,k,p<=8, 10 nuclear fixtures", 10.0) as d:
        P = TruncationPolicy()
        cases = [
            (LIN, HALF), (LIN, THREE), (LIN, CoefficientSequence.reciprocal()),
            (LIN, CoefficientSequence.exp_exponent(1.0, 2.0, LIN)),
            (ExponentSequence.linear(2.0), CoefficientSequence.geometric(1.0, 0.9)),
            (ExponentSequence.power(1.0, 1.5), CoefficientSequence.geometric(2.0, 0.5)),
            (ExponentSequence.power(1.0, 2.0), E1),
            (ExponentSequence.power(1.0, 2.0), CoefficientSequence.finite([0.5, -1.5, 2.0])),
            (LIN, CoefficientSequence.geometric(0.8 + 0.3j, 0.6j)),
            (ExponentSequence.linear(0.5), CoefficientSequence.zero()),
        ]
        checked = 0
        for alpha, theta in cases:
            v = fesas_bound_check(theta, alpha, P, 8)
            assert v.is_certified, (alpha.describe(), theta.describe(), v.counterexample)
            checked += v.witness["checked"]
        d["points"] = checked


def dense_sup_norm(theta, N, k, n, p):
    A = RhalyOperator(theta).matrix(N)
    v = np.zeros(N)
    v[n - 1] = 1.0
    for _ in range(k):
        v = A @ v
    return float(np.max(np.abs(v) * np.exp(L1N.log_weights(N, p))))


def test_06_finite_type_power_bound():
    with criterion(6, "finite-type power boundedness: sum 1/2 certified, sum 3 refuted", 20.0) as d:
        P = TruncationPolicy()
        v = power_bound_witness(HALF, L1N, P, K_test=32, n_max=100, p_max=4)
        assert v.is_certified
        assert v.witness.q_for_p == {p: 3 * p for p in range(1, 5)}
        assert v.witness.box == {"k": 32, "n": 100, "p": 4}
        assert recheck_power_bound(HALF, L1N, v.witness, P) == []
        r = power_bound_witness(THREE, L1N, P, K_test=32, n_max=100, p_max=4)
        assert r.is_refuted
        cex = r.counterexample
        # ||e_n||_q = e^{-n/q} <= 1 for every q, so lhs > 1 fails every q
        lhs = dense_sup_norm(THREE, P.N, cex["k"], cex["n"], cex["p"])
        assert lhs > 1.0 and lhs == pytest.approx(cex["lhs"], rel=1e-9)
        d["refuted_at"] = f"k={cex['k']},n={cex['n']},p={cex['p']},lhs={lhs:.4f},margin={lhs - 1:.4f}"


def test_07_infinite_type_power_bound():
    with criterion(7, "power boundedness of e^{-n^2} on Lambda_inf(n), k<=20, n<=50, p<=3", 20.0) as d:
        P = TruncationPolicy()
        theta = CoefficientSequence.exp_exponent(1.0, 1.0, ExponentSequence.power(1.0, 2.0))
        v = power_bound_witness(theta, LINF, P, K_test=20, n_max=50, p_max=3)
        assert v.is_certified
        assert recheck_power_bound(theta, LINF, v.witness, P) == []
        d["q_p"] = v.witness.q_p
        d["q"] = v.witness.q_for_p


def test_08_exp_coefficients():
    with criterion(8, "exp Taylor coefficients by circle quadrature, M=64, n<=20", 1.0) as d:
        theta = extract_theta(AnalyticFunction.exp(), 20, QuadratureSpec(M=64)).values(21)
        exact = np.array([1.0 / math.factorial(n) for n in range(21)])
        err = float(np.max(np.abs(theta - exact)))
        d["max_err"] = f"{err:.2e}"
        assert err < 1e-12


def test_09_representation_equivalence():
    with criterion(9, "integral vs series forms of R_g, 10 pairs x 5 points + disc case", 5.0) as d:
        spec = QuadratureSpec(r0=0.5)
        points = [0.3, -0.5 + 0.2j, 0.9j, -0.9, 0.6 + 0.6j]
        exp, one = AnalyticFunction.exp(), AnalyticFunction.constant(1.0)
        poly = AnalyticFunction.polynomial([1.0, -2.0, 0.5, 3.0])
        cosh = AnalyticFunction.from_callable(np.cosh, name="cosh")
        exp2 = AnalyticFunction.from_callable(lambda w: np.exp(2 * w), name="exp(2z)")
        pairs = [(exp, one), (exp, AnalyticFunction.polynomial([0, 1])), (exp, AnalyticFunction.geometric(1.0)),
                 (exp, poly), (poly, one), (poly, AnalyticFunction.geometric(1.0)), (cosh, one),
                 (exp2, AnalyticFunction.geometric(0.5)), (poly, exp), (exp2, one)]
        worst = 0.0
        for g, f in pairs:
            rep = cross_validate(g, f, points, spec, n_max=200, tol=1e-10)
            assert rep.passed, (g.describe(), f.describe(), rep.rows)
            worst = max(worst, max(r.difference / max(1.0, abs(r.series)) for r in rep.rows))
            if f == one:
                for z in points:
                    assert abs(apply_Rg_integral(g, one, z, spec) - complex(g(z))) < 1e-10 * max(1.0, abs(g(z)))
        g = AnalyticFunction.geometric(1 / 3)
        f = AnalyticFunction.geometric(0.5)
        disc = QuadratureSpec(r0=0.3, r1=0.6)
        zs = [0.6 * cmath.exp(2j * math.pi * t / 5 + 0.1j) for t in range(5)]
        rep = cross_validate(g, f, zs, disc, n_max=200, tol=1e-8)
        assert rep.passed and all(r.integral is not None for r in rep.rows)
        disc_err = max(r.difference for r in rep.rows)
        d["entire_max_rel"] = f"{worst:.1e}"
        d["disc_max"] = f"{disc_err:.1e}"


def test_10_ergodic_behaviour():
    with criterion(10, "ergodic means: idempotent exact, geometric converges, sum 3 grows", 30.0) as d:
        P = TruncationPolicy()
        est = ergodic_projection_estimate(E1, E1, L1N, P)
        target = E1.values(P.N)
        assert all(np.array_equal(est.means[k], target) for k in est.schedule)
        assert est.limit is not None
        geo = ergodic_projection_estimate(HALF, E1, L1N, P)
        last = 0.0
        for p, inc in geo.increments.items():
            vals = [inc[k] for k in sorted(inc)]
            assert all(b <= a for a, b in zip(vals, vals[1:])), p
            assert vals[-1] < 1e-6, (p, vals[-1])
            last = max(last, vals[-1])
        assert orbit_decay_check(THREE, E1, L1N, P).classification == "growing"
        d["geometric_increment_at_1024"] = f"{last:.2e}"


FULL_CONFIG = """
[space]
kind = finite
alpha = linear:1

theta = geometric:0.5,0.5
checks = [{checks}]
g = exp
f = geometric:1
quad.r0 = 0.5
points = [0.3, -0.5, 0.9i]
n_max = 10
schedule = [1, 2, 4, 8, 16, 32, 64, 128]
"""


def test_11_determinism(tmp_path, capsys):
    with criterion(11, "byte-identical reports with 1 and 8 workers", None) as d:
        cfg = tmp_path / "all.cfg"
        cfg.write_text(FULL_CONFIG.format(checks=", ".join(CHECKS)))
        outs = {}
        for fmt in ("json", "csv", "text"):
            for w in (1, 8):
                assert main(["check", "--config", str(cfg), "--workers", str(w), "--no-timing",
                             "--format", fmt]) == 0
                outs[fmt, w] = capsys.readouterr().out
            assert outs[fmt, 1] == outs[fmt, 8], fmt
        d["checks"] = len(CHECKS)
        d["bytes"] = len(outs["json", 1])
