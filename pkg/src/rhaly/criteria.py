"""Continuity and compactness certificates for R_theta between Koethe spaces.

Every search works with the column ratios

    rho_n(k, m) = ||R e_n||_k / ||e_n||_m,    ||e_n||_m = a(n, m),

evaluated in log space.  For ``n <= N`` they are computed directly; for
``n > N`` the increment bounds of the underlying families either bound them
(certificate) or show that they grow without bound (refutation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .koethe import as_sequence, grid_is_nuclear, membership, nuclearity_power_series, dual_membership
from .sequences import (
    FINITE,
    INFINITE,
    NEG_INF,
    CoefficientSequence,
    ExponentSequence,
    LogSequence,
    TermSum,
    WeightGrid,
    decay_rate,
)
from .verdict import HypothesisError, TruncationPolicy, Verdict, ZeroWeightError

SUP = "sup"
L1 = "l1"


@dataclass(frozen=True)
class ContinuityWitness:
    entries: dict  # k -> (m, C)
    form: str


@dataclass(frozen=True)
class CompactnessWitness:
    m: int
    constants: dict  # k -> C_k
    route: str
    montel_assumed: bool
    form: str = "sup"
    grade_scope: str = "all"


@dataclass(frozen=True)
class DominationWitness:
    mode: str
    entries: dict  # k -> (m, C)


@dataclass(frozen=True)
class ShiftBound:
    A: float
    B: float


@dataclass
class RatioProfile:
    """Column ratios for one (k, m) pair.

    ``log_ratios[n-1]`` is ``ln rho_n`` for ``n <= N``.  ``log_bound`` bounds
    ``ln sup_n rho_n`` over all n, or is ``None``.  ``divergent`` is set when
    ``rho_n -> inf`` is certified; ``lower`` then holds the certifying data.
    """

    k: float
    m: int
    log_ratios: np.ndarray
    log_bound: float | None
    divergent: bool
    lower: dict = field(default_factory=dict)

    @property
    def truncated_sup(self) -> float:
        return float(np.exp(np.max(self.log_ratios)))


def column_log_seminorms(theta: CoefficientSequence, target: WeightGrid, k: float, N: int, form: str):
    """``ln ||R e_n||_k`` for ``n = 1..N`` (tail included when available),
    together with the log-terms ``ln |theta_j| b(j, k)``.

    Returns ``(values, terms)``; ``values`` is ``None`` if the tail beyond
    ``N`` cannot be bounded.
    """
    t = TermSum(N).seq(theta).weight(target, k).build()
    head = t.head
    if form == SUP:
        beyond = t.log_sup_beyond()
        acc = np.maximum.accumulate(head[::-1])[::-1]
        if beyond is None:
            return None, t
        return np.maximum(acc, beyond), t
    tail = t.log_tail_bound()
    acc = np.logaddexp.accumulate(head[::-1])[::-1]
    if tail is None:
        return None, t
    return np.logaddexp(acc, tail), t


def ratio_profile(theta: CoefficientSequence, source: WeightGrid, target: WeightGrid,
                  k: float, m: int, N: int, form: str) -> RatioProfile:
    try:
        w = TermSum(N).seq(theta).weight(target, k).weight(source, m, sign=-1).build()
    except ZeroWeightError as err:
        return RatioProfile(k, m, np.full(N, math.inf), None, True,
                            {"n": err.n, "reason": "source weight vanishes"})
    cols, t = column_log_seminorms(theta, target, k, N, form)
    lw = source.log_weights(N, m)
    if cols is None:
        # lower bound |theta_n| b(n,k) / a(n,m) still decides divergence
        return RatioProfile(k, m, w.head, None, w.unbounded(),
                            _lower_info(w, N) if w.unbounded() else {})
    with np.errstate(invalid="ignore"):
        logs = cols - lw
    logs = np.where(np.isnan(logs), NEG_INF, logs)
    top = float(np.max(logs))
    beyond = _beyond_bound(w, t, form)
    if beyond is not None:
        return RatioProfile(k, m, logs, max(top, beyond), False)
    div = w.unbounded()
    return RatioProfile(k, m, logs, None, div, _lower_info(w, N) if div else {})


def _lower_info(w: LogSequence, N: int) -> dict:
    return {"n": N + 1, "log_ratio_lower": w.next_value, "min_log_increment": w.lo,
            "reason": "|theta_n| b(n,k) / a(n,m) increases without bound"}


def _beyond_bound(w: LogSequence, t: LogSequence, form: str) -> float | None:
    if w.zero_beyond or t.zero_beyond:
        return NEG_INF
    wb = w.log_sup_beyond()
    if wb is None:
        return None
    if form == SUP:
        return wb if t.hi is not None and t.hi <= 0 else None
    if t.hi is None or not t.hi < 0:
        return None
    return wb - math.log1p(-math.exp(t.hi))


def choose_form(target: WeightGrid, policy: TruncationPolicy, form: str | None) -> str:
    if form is not None:
        return form
    return SUP if grid_is_nuclear(target, policy) else L1


def _require_member(theta, target, policy):
    v = membership(theta, target, policy)
    if v.is_refuted:
        raise HypothesisError(f"theta is not in the target space {target.describe()}: {v.counterexample}")
    return v


def continuity_witness(theta, source: WeightGrid, target: WeightGrid, policy: TruncationPolicy,
                       form: str | None = None) -> Verdict:
    """For every target grade k search the smallest source grade m with
    ``sup_n ||R e_n||_k / ||e_n||_m`` finite."""
    theta = as_sequence(theta)
    _require_member(theta, target, policy)
    form = choose_form(target, policy, form)
    N = policy.N
    entries, table, refuted, open_k = {}, {}, {}, []
    for k in range(1, policy.k_max + 1):
        div = {}
        table[k] = {}
        for m in range(1, policy.m_max + 1):
            prof = ratio_profile(theta, source, target, k, m, N, form)
            table[k][m] = prof.truncated_sup
            if prof.log_bound is not None:
                entries[k] = (m, math.exp(prof.log_bound))
                break
            if prof.divergent:
                div[m] = prof.lower
        if k in entries:
            continue
        if len(div) == policy.m_max:
            refuted[k] = div
        else:
            open_k.append(k)
    if refuted:
        k = min(refuted)
        return Verdict.refuted({"k": k, "per_m": refuted[k]}, form=form, ratio_table=table)
    if open_k:
        return Verdict.inconclusive(reason="ratio bound not certified", grades=open_k,
                                    form=form, ratio_table=table)
    return Verdict.certified(ContinuityWitness(entries, form), ratio_table=table)


COMPACT_GRADE_CAP = 4096


def _compact_at(theta, source, target, m, policy, form, member, montel_flag):
    """Try one source grade: a certified verdict, ``("div", info)`` when a
    target grade diverges, or ``None``."""
    N = policy.N
    log_a = source.log_inf_weight(m, N)
    if log_a is not None and member.is_certified:
        consts = {k: (partial + tail) / math.exp(log_a) for k, (partial, tail) in member.witness.grades.items()}
        return Verdict.certified(CompactnessWitness(m, consts, "inf_weight", montel_flag, form),
                                 form=form, log_inf_weight=log_a)
    if target.kind == FINITE:
        # the limit grade dominates every finite one
        lim = ratio_profile(theta, source, target, math.inf, m, N, form)
        if lim.log_bound is not None:
            c_inf = math.exp(lim.log_bound)
            consts = {}
            for k in range(1, policy.k_max + 1):
                p = ratio_profile(theta, source, target, k, m, N, form)
                consts[k] = math.exp(p.log_bound) if p.log_bound is not None else c_inf
            consts["inf"] = c_inf
            return Verdict.certified(CompactnessWitness(m, consts, "limit_grade", montel_flag, form), form=form)
    grades = list(range(1, max(policy.k_max, 2 * m) + 1))
    profiles = {k: ratio_profile(theta, source, target, k, m, N, form) for k in grades}
    div = {k: p.lower for k, p in profiles.items() if p.divergent}
    if div:
        k = min(div)
        return "div", {"k": k, **div[k]}
    if target.kind == FINITE:
        return None
    if all(p.log_bound is not None for p in profiles.values()):
        consts = {k: math.exp(p.log_bound) for k, p in profiles.items()}
        return Verdict.certified(
            CompactnessWitness(m, consts, "grade_window", montel_flag, form, f"k<={grades[-1]}"), form=form)
    return None


def compactness_witness(theta, source: WeightGrid, target: WeightGrid, policy: TruncationPolicy,
                        montel: bool | None = None, form: str | None = None) -> Verdict:
    """Search one source grade m serving every target grade k.

    Routes, tried for m = 1, 2, ... in order:

    * ``inf_weight``: ``inf_n a(n, m) = A > 0`` gives ``C_k = ||theta||_k / A``
      for every k;
    * ``limit_grade``: for finite-type targets the weights increase to 1 as
      ``k -> inf``, so a bound at the limit grade bounds every k;
    * ``grade_window``: otherwise the grades ``1..max(k_max, 2m)`` are checked
      and the witness is marked with that scope.

    Divergence for every ``m <= m_max`` refutes only when it provably
    persists for all m: on a finite-type space mapped to itself this is
    ``L = lim -ln|theta_n| / alpha_n <= 0``; ``L > 0`` instead extends the
    search to ``m > 1/L``.
    """
    theta = as_sequence(theta)
    member = _require_member(theta, target, policy)
    montel_flag = True if target.is_power_series else bool(montel if montel is not None else target.montel)
    if not montel_flag:
        return Verdict.inconclusive(reason="target space not asserted Montel")
    form = choose_form(target, policy, form)
    same_space = source.kind == target.kind == FINITE and source.alpha == target.alpha
    rate = decay_rate(theta, source.alpha) if same_space else None
    candidates = list(range(1, policy.m_max + 1))
    if rate is not None and 0 < rate < math.inf:
        # the column ratios decay like exp(-(L - 1/m) alpha_n): jump to m just above 1/L
        first = math.floor(1.0 / rate) + 1
        candidates += [m for m in (first, first + 1) if policy.m_max < m <= COMPACT_GRADE_CAP]
    refuted = {}
    for m in candidates:
        res = _compact_at(theta, source, target, m, policy, form, member, montel_flag)
        if isinstance(res, Verdict):
            return Verdict(res.outcome, res.witness, res.counterexample, dict(res.diagnostics, decay_rate=rate))
        if res is not None and m <= policy.m_max:
            refuted[m] = res[1]
    if len(refuted) == policy.m_max and rate is not None and rate <= 0:
        return Verdict.refuted({"per_m": refuted, "decay_rate": rate, "all_m": True,
                                "reason": "lim -ln|theta_n|/alpha_n <= 0: every source grade m "
                                          "has a divergent target grade"}, form=form)
    return Verdict.inconclusive(reason="no single source grade certified", refuted_m=sorted(refuted),
                                decay_rate=rate, form=form)


def column_ratio_table(theta, source: WeightGrid, target: WeightGrid, k: float, m: int,
                       policy: TruncationPolicy, form: str = L1) -> np.ndarray:
    """``||R e_n||_k / ||e_n||_m`` for ``n = 1..N`` by direct summation
    (no tail), for use as an independent recheck."""
    theta = as_sequence(theta)
    N = policy.N
    with np.errstate(divide="ignore"):
        terms = np.log(np.abs(theta.values(N))) + target.log_weights(N, k)
    rev = terms[::-1]
    cols = (np.maximum.accumulate(rev) if form == SUP else np.logaddexp.accumulate(rev))[::-1]
    with np.errstate(over="ignore"):
        return np.exp(cols - source.log_weights(N, m))


def dual_compactness_test(theta, alpha: ExponentSequence, policy: TruncationPolicy,
                          cross_check: bool = False) -> Verdict:
    """Compactness of R_theta on a nuclear finite-type space as membership
    of theta in the dual."""
    if not nuclearity_power_series(alpha, FINITE, policy).is_certified:
        raise HypothesisError("the finite-type space must be nuclear")
    theta = as_sequence(theta)
    grid = WeightGrid.finite_type(alpha)
    _require_member(theta, grid, policy)
    v = dual_membership(theta, grid, policy)
    if not cross_check:
        return v
    other = compactness_witness(theta, grid, grid, policy)
    contradiction = (v.is_certified and other.is_refuted) or (v.is_refuted and other.is_certified)
    diag = dict(v.diagnostics, compactness_outcome=other.outcome, contradiction=contradiction)
    return Verdict(v.outcome, v.witness, v.counterexample, diag)


FOR_ALL_K_EXISTS_M = "ForAllK_ExistsM"
EXISTS_M_FOR_ALL_K = "ExistsM_ForAllK"


def _domination_terms(beta, grid, k, m, kind, N) -> LogSequence:
    if kind == INFINITE:
        c = -k
    elif kind == FINITE:
        c = 0.0 if k == math.inf else -1.0 / k
    else:
        raise ValueError(f"kind must be 'finite' or 'infinite', got {kind!r}")
    return TermSum(N).exponent(beta, c).weight(grid, m, sign=-1).build()


def _domination_constant(d: LogSequence) -> float | None:
    beyond = d.log_sup_beyond()
    if beyond is None:
        return None
    return math.exp(max(float(np.max(d.head)), beyond))


def domination_check(beta: ExponentSequence, grid: WeightGrid, mode: str, kind: str,
                     policy: TruncationPolicy) -> Verdict:
    """Search (m, C) with ``e^{-k beta_n} <= C a(n, m)`` (infinite kind) or
    ``e^{-beta_n / k} <= C a(n, m)`` (finite kind) in either quantifier order."""
    N = policy.N
    if mode == FOR_ALL_K_EXISTS_M:
        entries, open_k = {}, []
        for k in range(1, policy.k_max + 1):
            div = {}
            for m in range(1, policy.m_max + 1):
                d = _domination_terms(beta, grid, k, m, kind, N)
                C = _domination_constant(d)
                if C is not None:
                    entries[k] = (m, C)
                    break
                if d.unbounded():
                    div[m] = {"n": N + 1, "log_gap": d.next_value, "min_log_increment": d.lo}
            if k in entries:
                continue
            if len(div) == policy.m_max:
                return Verdict.refuted({"k": k, "per_m": div})
            open_k.append(k)
        if open_k:
            return Verdict.inconclusive(reason="tail of the ratio not certified", grades=open_k)
        return Verdict.certified(DominationWitness(mode, entries))
    if mode != EXISTS_M_FOR_ALL_K:
        raise ValueError(f"unknown mode {mode!r}")
    # the strongest requirement over all k: k = 1 (infinite kind) or k -> inf (finite kind)
    dominant = 1 if kind == INFINITE else math.inf
    refuted = {}
    for m in range(1, policy.m_max + 1):
        C_dom = _domination_constant(_domination_terms(beta, grid, dominant, m, kind, N))
        if C_dom is not None:
            entries = {}
            for k in range(1, policy.k_max + 1):
                C = _domination_constant(_domination_terms(beta, grid, k, m, kind, N))
                entries[k] = (m, C if C is not None else C_dom)
            return Verdict.certified(DominationWitness(mode, entries), dominant_constant=C_dom)
        # grades beyond k_max may be needed to exhibit divergence (finite kind)
        for k in range(1, max(policy.k_max, 2 * m) + 1):
            d = _domination_terms(beta, grid, k, m, kind, N)
            if d.unbounded():
                refuted[m] = {"k": k, "n": N + 1, "log_gap": d.next_value, "min_log_increment": d.lo}
                break
    if len(refuted) == policy.m_max:
        return Verdict.refuted({"per_m": refuted})
    return Verdict.inconclusive(reason="no single m certified", refuted_m=sorted(refuted))


def shift_bound_search(alpha: ExponentSequence, beta: ExponentSequence, policy: TruncationPolicy) -> Verdict:
    """Find ``A > 0`` and ``B`` with ``alpha_n <= A beta_n + B`` for all n."""
    N = policy.N
    a = alpha.values(N + 1)
    b = beta.values(N + 1)
    if not b[-1] > 0:
        raise ValueError("beta must be positive beyond some index")
    oa, ob = alpha.growth_order(), beta.growth_order()
    if oa is None or ob is None:
        A = 1.0
        return Verdict.inconclusive(reason="custom sequence: truncated fit only",
                                    A=A, B_truncated=float(np.max(a - A * b)))
    if oa > ob:
        bad = np.nonzero(a > b)[0]
        return Verdict.refuted({"reason": "alpha grows faster than beta; alpha_n - A beta_n -> inf for every A",
                                "alpha_order": list(oa), "beta_order": list(ob),
                                "sample": {"A": 1.0, "B": 0.0,
                                           "n": int(bad[0]) + 1 if bad.size else None}})
    candidates = []
    if oa == ob:
        candidates.append(alpha.leading_coefficient() / beta.leading_coefficient())
    candidates += [2.0 ** i for i in range(0, 21)]
    x = float(N + 1)
    for A in candidates:
        # beyond N the gap alpha - A beta is nonincreasing once its derivative is <= 0 at N+1
        if alpha.derivative(x) - A * beta.derivative(x) <= 0:
            B = float(np.max(a - A * b))
            return Verdict.certified(ShiftBound(A, B))
    return Verdict.inconclusive(reason="no candidate A certified", tried=candidates[-1])


# -- independent pointwise rechecks -----------------------------------------

def _ratio_violations(theta, source, target, k, m, C, policy, form, rtol):
    r = column_ratio_table(theta, source, target, k, m, policy, form)
    bad = np.nonzero(r > C * (1 + rtol) + policy.tol)[0]
    return [{"k": k, "m": m, "n": int(i) + 1, "ratio": float(r[i]), "C": C} for i in bad[:5]]


def recheck_continuity(theta, source, target, witness: ContinuityWitness, policy: TruncationPolicy,
                       rtol: float = 1e-9) -> list[dict]:
    """Violations of ``||R e_n||_k <= C ||e_n||_m`` over ``n <= N``; empty
    when the witness holds."""
    out = []
    for k, (m, C) in witness.entries.items():
        out += _ratio_violations(theta, source, target, k, m, C, policy, witness.form, rtol)
    return out


def recheck_compactness(theta, source, target, witness: CompactnessWitness, policy: TruncationPolicy,
                        rtol: float = 1e-9) -> list[dict]:
    out = []
    for k, C in witness.constants.items():
        kk = math.inf if k == "inf" else k
        out += _ratio_violations(theta, source, target, kk, witness.m, C, policy, witness.form, rtol)
    return out


def recheck_domination(beta, grid, kind, witness: DominationWitness, policy: TruncationPolicy,
                       rtol: float = 1e-9) -> list[dict]:
    b = beta.values(policy.N)
    out = []
    for k, (m, C) in witness.entries.items():
        lhs = -k * b if kind == INFINITE else -b / k
        gap = np.exp(lhs - grid.log_weights(policy.N, m))
        for i in np.nonzero(gap > C * (1 + rtol))[0][:5]:
            out.append({"k": k, "m": m, "n": int(i) + 1, "ratio": float(gap[i]), "C": C})
    return out


def recheck_shift(alpha, beta, bound: ShiftBound, policy: TruncationPolicy) -> list[int]:
    a, b = alpha.values(policy.N), beta.values(policy.N)
    return [int(i) + 1 for i in np.nonzero(a > bound.A * b + bound.B + policy.tol)[0]]
