"""Power boundedness, topologizability, Cesaro means and orbit diagnostics.

Norms of orbits are evaluated in log space.  For a nonnegative theta the
recursion

    u^{(k)}_m = ln|theta_m| + ln sum_{j<=m} exp(u^{(k-1)}_j)

reproduces ``ln (R^k e_n)_m`` exactly; for signed or complex theta it is an
upper bound of ``ln |(R^k e_n)_m|``, which is what the box rechecks need.
Beyond the truncation ``|(R^k e_n)_m| <= |theta_m| S^{k-1}`` with
``S = sum_j |theta_j|``, which supplies the tail of every seminorm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .koethe import as_sequence, grid_is_nuclear, membership, nuclearity_power_series
from .rhaly_operator import RhalyOperator, as_array, cesaro_states, power_orbit
from .sequences import FINITE, INFINITE, NEG_INF, CoefficientSequence, ExponentSequence, TermSum, WeightGrid
from .verdict import HypothesisError, TruncationPolicy, Verdict

FINITE_RULE = "FiniteTypeRule(q=3p)"
INFINITE_RULE = "InfiniteTypeRule(q=q_p+m0)"
SEARCHED = "Searched"

DEFAULT_K_TEST = 32
DEFAULT_SCHEDULE = tuple(2 ** i for i in range(11))


@dataclass(frozen=True)
class SupGradeValue:
    """``sup_p ||theta||_p = sum_n |theta_n|`` as partial sum plus tail."""

    partial: float
    tail: float | None
    exact: bool

    @property
    def upper(self) -> float:
        return math.inf if self.tail is None else self.partial + self.tail


@dataclass(frozen=True)
class PowerBoundWitness:
    q_for_p: dict
    rule: str
    box: dict
    boundary: bool = False
    q_p: dict | None = None
    m0: int | None = None


@dataclass(frozen=True)
class MTopologizabilityWitness:
    route: str
    m0: int | None
    q_for_p: dict
    C: dict
    D: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OrbitDecayReport:
    table: dict     # p -> [||T^k x||_p / k for k = 1..K]
    slopes: dict    # p -> log-log slope over the growth window
    classes: dict   # p -> decaying | flat | growing
    classification: str


@dataclass(frozen=True)
class ErgodicEstimate:
    schedule: tuple
    means: dict         # k -> T^[k] x (truncated)
    increments: dict    # p -> {k: ||T^[k]x - T^[k-1]x||_p}
    limit: np.ndarray | None
    non_convergent_risk: bool


# -- log-space orbit machinery ----------------------------------------------

def _log_abs(v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v))


def _lse(u: np.ndarray) -> float:
    top = np.max(u) if u.size else NEG_INF
    if top == NEG_INF:
        return NEG_INF
    return float(top + np.log(np.sum(np.exp(u - top))))


def log_orbit(theta: CoefficientSequence, n: int, K: int, N: int):
    """Yield ``(k, u)`` with ``u`` the log-magnitude bound of ``R^k e_n``."""
    lt = _log_abs(theta.values(N))
    u = np.full(N, NEG_INF)
    u[n - 1] = 0.0
    for k in range(1, K + 1):
        u = lt + np.logaddexp.accumulate(u)
        yield k, u


def _is_nonnegative(theta: CoefficientSequence, N: int) -> bool:
    v = theta.values(N)
    return not np.iscomplexobj(v) and bool(np.all(v >= 0))


@dataclass(frozen=True)
class _TailData:
    log_S: float | None                 # ln sum_j |theta_j|
    log_tails: dict                     # p -> ln sum_{m>N} |theta_m| a(m, p), or None


def _tail_data(theta: CoefficientSequence, grid: WeightGrid, grades, N: int) -> _TailData:
    t = TermSum(N).seq(theta).build()
    lt = t.log_tail_bound()
    log_S = None if lt is None else float(np.logaddexp(t.log_partial_sum(), lt))
    tails = {}
    for p in grades:
        tails[p] = TermSum(N).seq(theta).weight(grid, p).build().log_tail_bound()
    return _TailData(log_S, tails)


def _orbit_norm_upper(u: np.ndarray, lw: np.ndarray, k: int, td: _TailData, p) -> float | None:
    """Upper bound of ``ln ||R^k e_n||_p`` (l1 form), tail included."""
    head = _lse(u + lw)
    tail = td.log_tails.get(p)
    if tail is None or td.log_S is None:
        return None
    if tail == NEG_INF:
        return head
    return float(np.logaddexp(head, tail + (k - 1) * td.log_S))


def _exact_orbits(theta: CoefficientSequence, n_max: int, K: int, N: int) -> np.ndarray:
    """``(R^k e_n)_m`` for k = 1..K, n = 1..n_max as an array [k-1, m-1, n-1]."""
    op = RhalyOperator(theta)
    block = np.eye(N, n_max, dtype=theta.values(1).dtype)
    return np.array(list(power_orbit(op, block, K, N)))


# -- sup grade ----------------------------------------------------------------

def sup_grade_seminorm(theta, alpha: ExponentSequence, policy: TruncationPolicy) -> SupGradeValue:
    """``sup_p ||theta||_p`` on the finite-type space: the weights increase to
    1, so the supremum is the plain l1 sum."""
    theta = as_sequence(theta)
    if membership(theta, WeightGrid.finite_type(alpha), policy).is_refuted:
        raise HypothesisError("theta is not in the finite-type space")
    t = TermSum(policy.N).seq(theta).build()
    partial = math.exp(t.log_partial_sum())
    lt = t.log_tail_bound()
    if lt is None:
        return SupGradeValue(partial, None, False)
    exact = lt == NEG_INF or theta.family == "geometric"
    return SupGradeValue(partial, math.exp(lt), exact)


# -- power boundedness ----------------------------------------------------------

def _box(policy: TruncationPolicy, K_test: int, n_max: int | None, p_max: int | None) -> dict:
    return {"k": K_test, "n": min(policy.N, n_max or 100), "p": p_max or policy.k_max}


def recheck_power_bound(theta, grid: WeightGrid, witness: PowerBoundWitness, policy: TruncationPolicy,
                        rtol: float = 1e-12) -> list[dict]:
    """Box points where ``||R^k e_n||_p <= ||e_n||_q`` fails or cannot be
    bounded; empty when the witness holds on its box."""
    theta = as_sequence(theta)
    N = policy.N
    box = witness.box
    grades = sorted(witness.q_for_p)
    td = _tail_data(theta, grid, grades, N)
    lws = {p: grid.log_weights(N, p) for p in grades}
    rhs = {p: grid.log_weights(N, witness.q_for_p[p]) for p in grades}
    bad = []
    for n in range(1, box["n"] + 1):
        for k, u in log_orbit(theta, n, box["k"], N):
            for p in grades:
                lhs = _orbit_norm_upper(u, lws[p], k, td, p)
                if lhs is None or lhs > rhs[p][n - 1] + math.log1p(rtol):
                    bad.append({"k": k, "n": n, "p": p, "q": witness.q_for_p[p], "log_lhs": lhs,
                                "log_rhs": float(rhs[p][n - 1])})
                    if len(bad) >= 10:
                        return bad
    return bad


def _diagonal_refutation(theta, grid, policy, p_max) -> Verdict | None:
    """``(R^k e_n)_n = theta_n^k``: any ``|theta_n| > 1`` makes the orbit of
    ``e_n`` unbounded in every grade with ``a(n, p) > 0``."""
    N = policy.N
    mags = np.abs(theta.values(N))
    big = np.nonzero(mags > 1)[0]
    if big.size == 0:
        return None
    n = int(big[0]) + 1
    lth = math.log(mags[n - 1])
    for p in range(1, p_max + 1):
        lp = float(grid.log_weights(n, p)[-1])
        if lp > NEG_INF:
            break
    else:
        return None
    k_for_q = {}
    for q in range(1, policy.m_max + 1):
        lq = float(grid.log_weights(n, q)[-1])
        k_for_q[q] = max(1, math.floor((lq - lp) / lth) + 1)
    k = max(k_for_q.values())
    return Verdict.refuted({
        "k": k, "n": n, "p": p, "q_range": [1, policy.m_max], "theta_n": abs(complex(theta.value(n))),
        "log_lhs_lower": k * lth + lp,
        "k_for_q": k_for_q,
        "reason": "(R^k e_n)_n = theta_n^k grows without bound; fails every q for large k",
    })


def _finite_refutation(theta, grid, policy, box) -> Verdict | None:
    """Exhibit ``||R^k e_n||_p > 1 >= sup_q ||e_n||_q`` (alpha >= 0)."""
    N = policy.N
    orbits = _exact_orbits(theta, box["n"], box["k"], N)   # [k, m, n]
    mags = np.abs(orbits)
    for p in range(1, box["p"] + 1):
        w = np.exp(grid.log_weights(N, p))
        sup_form = np.max(mags * w[None, :, None], axis=1)   # [k, n]
        hits = np.argwhere(sup_form.T > 1.0)                 # rows (n, k), ascending n then k
        if hits.size:
            n, k = int(hits[0][0]) + 1, int(hits[0][1]) + 1
            lhs = float(sup_form[k - 1, n - 1])
            return Verdict.refuted({
                "k": k, "n": n, "p": p, "q_range": "all q", "lhs": lhs, "form": "sup",
                "rhs_sup": 1.0, "margin": lhs - 1.0,
                "reason": "||R^k e_n||_p > 1 >= ||e_n||_q for every q",
            })
    # necessary condition with k = n = 1: ||theta||_p <= ||e_1||_q < 1
    p = 1
    while p <= 2 ** 20:
        s = math.exp(TermSum(N).seq(theta).weight(grid, p).build().log_partial_sum())
        if s > 1.0:
            return Verdict.refuted({"k": 1, "n": 1, "p": p, "q_range": "all q", "lhs": s, "form": "l1",
                                    "rhs_sup": 1.0, "margin": s - 1.0,
                                    "reason": "||theta||_p = ||R e_1||_p > 1 >= ||e_1||_q"})
        p *= 2
    return None


def power_bound_witness(theta, space: WeightGrid, policy: TruncationPolicy, K_test: int = DEFAULT_K_TEST,
                        n_max: int | None = None, p_max: int | None = None) -> Verdict:
    """Search ``q`` per ``p`` with ``||R^k e_n||_p <= ||e_n||_q`` for all k, n.

    Finite type: certified by ``q = 3p`` when ``sum |theta_n| <= 1``.
    Infinite type: ``q = q_p + m0`` where ``||theta||_{m0} <= e^{m0 alpha_1}``
    and ``||theta||_p <= e^{q_p alpha_1}``.
    """
    theta = as_sequence(theta)
    box = _box(policy, K_test, n_max, p_max)
    diag = _diagonal_refutation(theta, space, policy, box["p"])
    if space.kind == FINITE:
        return _power_bound_finite(theta, space, policy, box, diag)
    if diag is not None:
        return diag
    if space.kind == INFINITE:
        return _power_bound_infinite(theta, space, policy, box)
    return _power_bound_searched(theta, space, policy, box)


def _power_bound_finite(theta, grid, policy, box, diag) -> Verdict:
    nuclear = nuclearity_power_series(grid.alpha, FINITE, policy).is_certified
    s = sup_grade_seminorm(theta, grid.alpha, policy)
    if s.upper <= 1 + policy.tol:
        w = PowerBoundWitness({p: 3 * p for p in range(1, box["p"] + 1)}, FINITE_RULE, box,
                              boundary=s.upper > 1 - policy.tol)
        bad = recheck_power_bound(theta, grid, w, policy)
        if bad:
            return Verdict.inconclusive(reason="box recheck failed", violations=bad, sup_grade=s.upper)
        return Verdict.certified(w, sup_grade=s.upper, sup_grade_exact=s.exact, nuclear=nuclear)
    ref = _finite_refutation(theta, grid, policy, box) or diag
    if ref is not None:
        return Verdict(ref.outcome, None, ref.counterexample,
                       dict(ref.diagnostics, sup_grade=s.upper, nuclear=nuclear))
    return Verdict.inconclusive(reason="sup_p ||theta||_p not certified <= 1", sup_grade=s.upper,
                                sup_grade_partial=s.partial, nuclear=nuclear)


def _log_norm_upper(theta, grid, p, N) -> float | None:
    t = TermSum(N).seq(theta).weight(grid, p).build()
    tail = t.log_tail_bound()
    if tail is None:
        return None
    return float(np.logaddexp(t.log_partial_sum(), tail))


def _power_bound_infinite(theta, grid, policy, box) -> Verdict:
    N = policy.N
    a1 = grid.alpha.value(1)
    if not a1 > 0:
        return Verdict.inconclusive(reason="alpha_1 = 0: q_p rule needs alpha_1 > 0")
    m0 = None
    for m in range(1, policy.m_max + 1):
        ln = _log_norm_upper(theta, grid, m, N)
        if ln is not None and ln <= m * a1:
            m0 = m
            break
    if m0 is None:
        return Verdict.inconclusive(reason="no m0 with ||theta||_m0 <= exp(m0 alpha_1)")
    q_p, q = {}, {}
    for p in range(1, box["p"] + 1):
        ln = _log_norm_upper(theta, grid, p, N)
        if ln is None:
            return Verdict.inconclusive(reason="tail bound unavailable", grade=p)
        q_p[p] = max(1, math.ceil(max(ln, 0.0) / a1))
        q[p] = q_p[p] + m0
    w = PowerBoundWitness(q, INFINITE_RULE, box, q_p=q_p, m0=m0)
    bad = recheck_power_bound(theta, grid, w, policy)
    if bad:
        return Verdict.inconclusive(reason="box recheck failed", violations=bad)
    return Verdict.certified(w)


def _power_bound_searched(theta, grid, policy, box) -> Verdict:
    N = policy.N
    table = {}
    for p in range(1, box["p"] + 1):
        table[p] = None
        for q in range(p, policy.m_max + 1):
            w = PowerBoundWitness({p: q}, SEARCHED, box)
            if not recheck_power_bound(theta, grid, w, policy):
                table[p] = q
                break
    return Verdict.inconclusive(reason="general grid: box search only", searched=PowerBoundWitness(
        table, SEARCHED, box), N=N)


# -- the finite-type power inequality -------------------------------------------

def _as_box(box) -> tuple[int, int, int]:
    if isinstance(box, int):
        return box, box, box
    return tuple(box)


def _fesas_tail(theta, grid, td, sup_beyond, k, p, N) -> float | None:
    """Upper bound for ``ln sup_{j>N} |(R^k e_n)_j| e^{-alpha_j/p}``.

    Uses ``|(R^k e_n)_j| <= |theta_j| Theta_j^(k-1)`` with ``Theta_j`` the
    partial sums of ``|theta|``, bounded either by ``sum |theta|`` or by
    ``e^{alpha_j/q} ||theta||_q`` with ``q = 2p(k-1)``.
    """
    sb = sup_beyond(p)
    best = None
    if k == 1:
        return sb
    if sb is not None and td.log_S is not None:
        best = sb + (k - 1) * td.log_S if sb > NEG_INF else NEG_INF
    if k > 1:
        q = 2 * p * (k - 1)
        half = sup_beyond(2 * p)
        norm = _log_norm_upper(theta, grid, q, N)
        if half is not None and norm is not None:
            alt = half + (k - 1) * norm if half > NEG_INF else NEG_INF
            best = alt if best is None else min(best, alt)
    return best


def fesas_bound_check(theta, alpha: ExponentSequence, policy: TruncationPolicy, box=8) -> Verdict:
    """Check ``||R^k e_n||_p <= ||e_n||_{3p} (||theta||_{3pk})^k`` with
    sup-form left side over ``n, k, p <= box``.

    The left side is bounded from above (tail included) and the right side
    from below (truncated sum), so a pass is rigorous up to rounding.
    """
    N = policy.N
    if not nuclearity_power_series(alpha, FINITE, policy).is_certified:
        raise HypothesisError("the finite-type space must be nuclear")
    theta = as_sequence(theta)
    grid = WeightGrid.finite_type(alpha)
    n_max, k_max, p_max = _as_box(box)
    a = alpha.values(N)
    td = _tail_data(theta, grid, [], N)
    sup_cache = {}

    def sup_beyond(g):
        if g not in sup_cache:
            sup_cache[g] = TermSum(N).seq(theta).weight(grid, g).build().log_sup_beyond()
        return sup_cache[g]

    log_theta_norm = {}
    checked, worst = 0, NEG_INF
    for n in range(1, n_max + 1):
        for k, u in log_orbit(theta, n, k_max, N):
            for p in range(1, p_max + 1):
                lw = -a / p
                lhs = float(np.max(u + lw))
                tail = _fesas_tail(theta, grid, td, sup_beyond, k, p, N)
                if tail is None:
                    return Verdict.inconclusive(reason="no tail bound for the left side", n=n, k=k, p=p)
                lhs = max(lhs, tail)
                g = 3 * p * k
                if g not in log_theta_norm:
                    log_theta_norm[g] = TermSum(N).seq(theta).weight(grid, g).build().log_partial_sum()
                rhs = -a[n - 1] / (3 * p) + k * log_theta_norm[g]
                checked += 1
                if lhs == NEG_INF:
                    continue
                gap = lhs - rhs
                worst = max(worst, gap)
                if gap > 1e-12:
                    return Verdict.refuted({"n": n, "k": k, "p": p, "log_lhs": lhs, "log_rhs": rhs},
                                           checked=checked)
    return Verdict.certified({"box": [n_max, k_max, p_max], "checked": checked,
                              "max_log_gap": worst}, checked=checked)


def topologizability_constants(theta, alpha: ExponentSequence, policy: TruncationPolicy,
                               k_max: int = 8, p_max: int | None = None) -> dict:
    """``M_{k,p} = (||theta||_{3pk})^k`` with ``q = 3p``; upper bounds."""
    theta = as_sequence(theta)
    grid = WeightGrid.finite_type(alpha)
    out = {}
    for p in range(1, (p_max or policy.k_max) + 1):
        for k in range(1, k_max + 1):
            ln = _log_norm_upper(theta, grid, 3 * p * k, policy.N)
            out[(k, p)] = math.inf if ln is None else math.exp(k * ln)
    return out


def m_topologizability_witness(theta, grid: WeightGrid, policy: TruncationPolicy,
                               K_test: int = DEFAULT_K_TEST, n_max: int = 50) -> Verdict:
    """Find ``q`` and ``C_p`` with ``||R^k e_n||_p <= C_p^k ||e_n||_q``."""
    theta = as_sequence(theta)
    N = policy.N
    n_max = min(n_max, N)
    m0 = log_a = None
    for m in range(1, policy.m_max + 1):
        log_a = grid.log_inf_weight(m, N)
        if log_a is not None:
            m0 = m
            break
    if m0 is not None:
        D = {}
        for p in sorted(set(range(1, policy.k_max + 1)) | {m0}):
            ln = _log_norm_upper(theta, grid, p, N)
            if ln is None:
                return Verdict.inconclusive(reason="tail bound unavailable", grade=p)
            D[p] = math.exp(ln - log_a)
        C = {p: max(D[p], D[m0]) for p in range(1, policy.k_max + 1)}
        C = {p: (c if c > 0 else 1.0) for p, c in C.items()}
        w = MTopologizabilityWitness("inf_weight", m0, {p: m0 for p in C}, C, D)
    elif grid.kind == FINITE and grid_is_nuclear(grid, policy):
        s = sup_grade_seminorm(theta, grid.alpha, policy)
        if s.tail is None:
            return Verdict.inconclusive(reason="sup_p ||theta||_p not bounded")
        C = {p: max(1.0, s.upper) for p in range(1, policy.k_max + 1)}
        w = MTopologizabilityWitness("finite_type_3p", None, {p: 3 * p for p in C}, C)
    else:
        return Verdict.inconclusive(reason="no m0 with inf_n a(n, m0) > 0 certified")
    bad = recheck_m_topologizability(theta, grid, w, policy, K_test, n_max)
    if bad:
        return Verdict.inconclusive(reason="box recheck failed", violations=bad)
    return Verdict.certified(w, box={"k": K_test, "n": n_max, "p": policy.k_max})


def recheck_m_topologizability(theta, grid, witness: MTopologizabilityWitness, policy: TruncationPolicy,
                               K_test: int = DEFAULT_K_TEST, n_max: int = 50, rtol: float = 1e-12) -> list[dict]:
    theta = as_sequence(theta)
    N = policy.N
    grades = sorted(witness.C)
    td = _tail_data(theta, grid, grades, N)
    lws = {p: grid.log_weights(N, p) for p in grades}
    rhs = {p: grid.log_weights(N, witness.q_for_p[p]) for p in grades}
    bad = []
    for n in range(1, min(n_max, N) + 1):
        for k, u in log_orbit(theta, n, K_test, N):
            for p in grades:
                lhs = _orbit_norm_upper(u, lws[p], k, td, p)
                bound = k * math.log(witness.C[p]) + rhs[p][n - 1]
                if lhs is None or lhs > bound + math.log1p(rtol):
                    bad.append({"k": k, "n": n, "p": p, "log_lhs": lhs, "log_rhs": bound})
                    if len(bad) >= 10:
                        return bad
    return bad


# -- Cesaro means -----------------------------------------------------------------

def _cesaro_box_violations(theta, grid, q_for_p, policy, box) -> list[dict]:
    """``||T^[k] e_n||_p <= ||e_n||_q`` with the mean bounded by the average
    of the power bounds."""
    N = policy.N
    grades = sorted(q_for_p)
    td = _tail_data(theta, grid, grades, N)
    lws = {p: grid.log_weights(N, p) for p in grades}
    bad = []
    for n in range(1, box["n"] + 1):
        acc = {p: NEG_INF for p in grades}
        for k, u in log_orbit(theta, n, box["k"], N):
            for p in grades:
                lhs = _orbit_norm_upper(u, lws[p], k, td, p)
                acc[p] = math.inf if lhs is None else float(np.logaddexp(acc[p], lhs))
                mean = acc[p] - math.log(k)
                rhs = float(grid.log_weights(n, q_for_p[p])[-1])
                if mean > rhs + 1e-12:
                    bad.append({"k": k, "n": n, "p": p, "q": q_for_p[p], "log_lhs": mean, "log_rhs": rhs})
                    if len(bad) >= 10:
                        return bad
    return bad


def cesaro_bounded_check(theta, space: WeightGrid, policy: TruncationPolicy, K_test: int = DEFAULT_K_TEST,
                         n_max: int | None = None, p_max: int | None = None) -> Verdict:
    """Search ``q`` per ``p`` with ``||T^[k] e_n||_p <= ||e_n||_q``."""
    theta = as_sequence(theta)
    N = policy.N
    box = _box(policy, K_test, n_max, p_max)
    if space.kind == FINITE:
        # k = n = 1: ||theta||_p = ||T^[1] e_1||_p <= ||e_1||_q <= 1 is necessary
        p = 1
        while p <= 2 ** 20:
            s = math.exp(TermSum(N).seq(theta).weight(space, p).build().log_partial_sum())
            if s > 1.0:
                return Verdict.refuted({"k": 1, "n": 1, "p": p, "q_range": "all q", "lhs": s,
                                        "reason": "||theta||_p = ||T^[1] e_1||_p > 1 >= ||e_1||_q"})
            p *= 2
    pb = power_bound_witness(theta, space, policy, K_test, n_max, p_max)
    if pb.is_certified:
        bad = _cesaro_box_violations(theta, space, pb.witness.q_for_p, policy, box)
        if not bad:
            return Verdict.certified(PowerBoundWitness(pb.witness.q_for_p, pb.witness.rule, box,
                                                       pb.witness.boundary, pb.witness.q_p, pb.witness.m0),
                                     via="power bounded")
    table = {}
    for p in range(1, box["p"] + 1):
        table[p] = None
        for q in range(p, policy.m_max + 1):
            if not _cesaro_box_violations(theta, space, {p: q}, policy, box):
                table[p] = q
                break
    return Verdict.inconclusive(reason="no analytic Cesaro bound", searched=table,
                                power_bound=pb.outcome)


# -- orbits and ergodic means ---------------------------------------------------------

def _weighted_log_norm(v: np.ndarray, lw: np.ndarray) -> float:
    return _lse(_log_abs(v) + lw)


def _orbit_log_norms(theta: CoefficientSequence, x, grid: WeightGrid, grades, K: int, N: int) -> dict:
    """``ln ||T^k x||_p`` over the truncation for k = 1..K."""
    lws = {p: grid.log_weights(N, p) for p in grades}
    xv = as_array(x, N)
    out = {p: [] for p in grades}
    if _is_nonnegative(theta, N) and not np.iscomplexobj(xv) and np.all(xv >= 0):
        lt = _log_abs(theta.values(N))
        u = _log_abs(xv)
        for _ in range(K):
            u = lt + np.logaddexp.accumulate(u)
            for p in grades:
                out[p].append(_lse(u + lws[p]))
        return out
    for v in power_orbit(RhalyOperator(theta), xv, K, N):
        for p in grades:
            out[p].append(_weighted_log_norm(v, lws[p]))
    return out


_ORDER = {"decaying": 0, "flat": 1, "growing": 2}


def orbit_decay_check(theta, x, space: WeightGrid, policy: TruncationPolicy,
                      K_test: int = DEFAULT_K_TEST) -> OrbitDecayReport:
    """``||T^k x||_p / k`` for k = 1..K with a log-log slope classification
    over the last ``growth_window`` powers."""
    theta = as_sequence(theta)
    grades = list(range(1, policy.k_max + 1))
    logs = _orbit_log_norms(theta, x, space, grades, K_test, policy.N)
    ks = np.arange(1, K_test + 1, dtype=float)
    w = min(policy.growth_window, K_test)
    table, slopes, classes = {}, {}, {}
    for p in grades:
        lr = np.array(logs[p]) - np.log(ks)
        table[p] = [math.exp(v) if v < 709 else math.inf for v in lr]
        tail = lr[-w:]
        if np.all(tail == NEG_INF):
            slope = -math.inf
        elif np.any(tail == NEG_INF):
            slope = -math.inf if tail[-1] == NEG_INF else math.inf
        else:
            slope = float(np.polyfit(np.log(ks[-w:]), tail, 1)[0])
        slopes[p] = slope
        classes[p] = "decaying" if slope <= -0.25 else ("growing" if slope >= 0.25 else "flat")
    worst = max(classes.values(), key=_ORDER.__getitem__)
    return OrbitDecayReport(table, slopes, classes, worst)


def ergodic_projection_estimate(theta, x, space: WeightGrid, policy: TruncationPolicy,
                                schedule=DEFAULT_SCHEDULE, grades=None) -> ErgodicEstimate:
    """Cesaro means ``T^[k] x`` at the schedule points with the Cauchy
    increments ``||T^[k]x - T^[k-1]x||_p``; the last mean is the limit
    candidate once every increment at the final point is below ``tol``."""
    theta = as_sequence(theta)
    N = policy.N
    schedule = tuple(sorted(set(int(k) for k in schedule)))
    if not schedule or schedule[0] < 1:
        raise ValueError("schedule points must be positive")
    grades = list(grades or range(1, policy.k_max + 1))
    lws = {p: space.log_weights(N, p) for p in grades}
    wanted = set(schedule)
    means, increments = {}, {p: {} for p in grades}
    prev = None
    for st in cesaro_states(RhalyOperator(theta), x, schedule[-1], N):
        mean = st.mean
        if st.k in wanted:
            means[st.k] = mean
            if prev is not None:
                d = mean - prev
                for p in grades:
                    ln = _weighted_log_norm(d, lws[p])
                    increments[p][st.k] = math.exp(ln) if ln < 709 else math.inf
        prev = mean
    last = schedule[-1]
    converged = last > 1 and all(increments[p][last] < policy.tol for p in grades)
    if schedule == (1,):
        converged = False
    risk = not power_bound_witness(theta, space, policy).is_certified
    return ErgodicEstimate(schedule, means, increments, means[last] if converged else None, risk)
