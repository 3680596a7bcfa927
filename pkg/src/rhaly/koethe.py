"""Seminorms, membership, duality, nuclearity and weak stability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequences import (
    FINITE,
    INFINITE,
    NEG_INF,
    CoefficientSequence,
    ExponentSequence,
    TermSum,
    WeightGrid,
    decay_rate,
)
from .verdict import GradeError, NonFiniteError, TruncationPolicy, Verdict, ZeroWeightError


@dataclass(frozen=True)
class SeminormValue:
    """Partial sum over ``n <= N`` and a bound on the remaining tail.

    Both are stored as logarithms; ``log_tail is None`` means no analytic
    tail bound is available for the sequence family.
    """

    log_partial: float
    log_tail: float | None

    @property
    def partial(self) -> float:
        return math.exp(self.log_partial)

    @property
    def tail(self) -> float | None:
        return None if self.log_tail is None else math.exp(self.log_tail)

    @property
    def tail_available(self) -> bool:
        return self.log_tail is not None

    @property
    def log_upper(self) -> float | None:
        if self.log_tail is None:
            return None
        return float(np.logaddexp(self.log_partial, self.log_tail))

    @property
    def upper(self) -> float | None:
        lu = self.log_upper
        return None if lu is None else math.exp(lu)


@dataclass(frozen=True)
class SupSeminormValue:
    log_value: float
    index: int
    exact: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


@dataclass(frozen=True)
class MembershipWitness:
    grades: dict  # k -> (partial, tail)


@dataclass(frozen=True)
class DualWitness:
    k: int
    D: float
    attained_at: int


@dataclass(frozen=True)
class NuclearityWitness:
    criterion: str
    limit: float
    truncated_sup: float


@dataclass(frozen=True)
class GrothendieckPietschWitness:
    l_for_k: dict  # k -> l
    sums: dict     # k -> upper bound of sum_n a(n,k)/a(n,l)


@dataclass(frozen=True)
class StabilityWitness:
    M: float
    attained_at: int


def as_sequence(x) -> CoefficientSequence:
    if isinstance(x, CoefficientSequence):
        return x
    return CoefficientSequence.finite(list(np.asarray(x).ravel()))


def _check_grade(k, policy: TruncationPolicy) -> None:
    if not (1 <= k <= policy.k_max):
        raise GradeError(f"grade {k} outside 1..{policy.k_max}")


def weighted_terms(x: CoefficientSequence, grid: WeightGrid, k: float, N: int):
    """``ln(|x_n| a(n, k))`` for ``n = 1..N+1`` with tail increment bounds."""
    return TermSum(N).seq(x).weight(grid, k).build()


def _seminorm(x: CoefficientSequence, grid: WeightGrid, k: float, N: int) -> SeminormValue:
    terms = weighted_terms(x, grid, k, N)
    if np.any(np.isnan(terms.head)):
        raise NonFiniteError("non-finite weight encountered")
    return SeminormValue(terms.log_partial_sum(), terms.log_tail_bound())


def seminorm(x, grid: WeightGrid, k: int, policy: TruncationPolicy) -> SeminormValue:
    """``||x||_k = sum |x_n| a(n, k)`` as partial sum plus tail bound."""
    _check_grade(k, policy)
    return _seminorm(as_sequence(x), grid, k, policy.N)


def _sup_seminorm(x: CoefficientSequence, grid: WeightGrid, k: float, N: int) -> SupSeminormValue:
    terms = weighted_terms(x, grid, k, N)
    head = terms.head
    i = int(np.argmax(head))
    top = float(head[i])
    beyond = terms.log_sup_beyond()
    exact = beyond is not None and beyond <= top
    return SupSeminormValue(top, i + 1, exact)


def sup_seminorm(x, grid: WeightGrid, k: int, policy: TruncationPolicy) -> SupSeminormValue:
    """``sup_n |x_n| a(n, k)`` over the truncation.

    ``exact`` is set when the summand is certified nonincreasing beyond ``N``
    and does not exceed the truncated maximum there.
    """
    _check_grade(k, policy)
    return _sup_seminorm(as_sequence(x), grid, k, policy.N)


def membership(x, grid: WeightGrid, policy: TruncationPolicy) -> Verdict:
    x = as_sequence(x)
    N = policy.N
    table = {}
    missing = []
    for k in range(1, policy.k_max + 1):
        terms = weighted_terms(x, grid, k, N)
        tail = terms.log_tail_bound()
        if tail is None:
            if terms.nonvanishing():
                return Verdict.refuted(
                    {"k": k, "n": N + 1, "log_term": terms.next_value,
                     "min_log_increment": terms.lo,
                     "reason": "terms |x_n| a(n,k) nondecreasing from n on; series diverges"},
                    sequence=x.describe(), grid=grid.describe())
            missing.append(k)
        table[k] = (math.exp(terms.log_partial_sum()), None if tail is None else math.exp(tail))
    if missing:
        return Verdict.inconclusive(reason="no tail bound", grades_without_tail=missing,
                                    partial_sums={k: v[0] for k, v in table.items()})
    return Verdict.certified(MembershipWitness(table), sequence=x.describe(), grid=grid.describe())


def dual_ratio_terms(y: CoefficientSequence, grid: WeightGrid, k: int, N: int):
    """``ln(|y_n| / a(n, k))`` with tail increment bounds."""
    lw = grid.log_weights(N, k)
    if np.any(lw == NEG_INF):
        yv = np.abs(y.values(N))
        bad = np.nonzero((lw == NEG_INF) & (yv > 0))[0]
        if bad.size:
            raise ZeroWeightError(int(bad[0]) + 1, k)
    return TermSum(N).seq(y).weight(grid, k, sign=-1).build()


DUAL_GRADE_CAP = 4096


def _dual_grade_ceiling(grid: WeightGrid, rate: float | None, k_max: int) -> int:
    """Grades worth searching: beyond ``k_max`` when the decay rate shows
    where boundedness starts (``k > 1/L`` finite type, ``k > -L`` infinite)."""
    if rate is None or not math.isfinite(rate):
        return k_max
    if grid.kind == FINITE and rate > 0:
        need = math.floor(1.0 / rate) + 2
    elif grid.kind == INFINITE:
        need = math.ceil(-rate) + 2
    else:
        return k_max
    return max(k_max, min(need, DUAL_GRADE_CAP))


def dual_membership(y, grid: WeightGrid, policy: TruncationPolicy) -> Verdict:
    """Search the smallest grade ``k`` with ``sup_n |y_n| / a(n,k) < inf``.

    A refutation has to hold for every grade.  For power series grids it
    rests on ``L = lim -ln|y_n| / alpha_n``: ``L <= 0`` (finite type) or
    ``L = -inf`` (infinite type) leaves every ratio unbounded.
    """
    y = as_sequence(y)
    N = policy.N
    rate = decay_rate(y, grid.alpha) if grid.is_power_series else None
    divergent = {}
    truncated = {}
    for k in range(1, _dual_grade_ceiling(grid, rate, policy.k_max) + 1):
        r = dual_ratio_terms(y, grid, k, N)
        i = int(np.argmax(r.head))
        top = float(r.head[i])
        if k <= policy.k_max:
            truncated[k] = top
        beyond = r.log_sup_beyond()
        if beyond is not None:
            if beyond > top:
                return Verdict.certified(DualWitness(k, math.exp(beyond), N + 1), decay_rate=rate)
            return Verdict.certified(DualWitness(k, math.exp(top), i + 1), decay_rate=rate)
        if r.unbounded() and k <= policy.k_max:
            divergent[k] = {"n": N + 1, "log_ratio": r.next_value, "min_log_increment": r.lo}
    if rate is not None and ((grid.kind == FINITE and rate <= 0) or rate == -math.inf):
        return Verdict.refuted({"grades": divergent, "decay_rate": rate, "all_grades": True,
                                "reason": "lim -ln|y_n|/alpha_n = L rules out every grade; "
                                          "|y_n|/a(n,k) is unbounded for every k"})
    return Verdict.inconclusive(reason="ratio not certified bounded", log_truncated_sup=truncated,
                                divergent_grades=sorted(divergent), decay_rate=rate)


def _ratio_trend(values: np.ndarray, window: int) -> str:
    tail = values[-window:]
    d = np.diff(tail)
    if np.all(d < 0):
        return "decreasing"
    if np.all(d > 0):
        return "increasing"
    return "flat" if np.allclose(d, 0) else "mixed"


def nuclearity_power_series(alpha: ExponentSequence, kind: str, policy: TruncationPolicy) -> Verdict:
    """Nuclearity of a power series space via ``ln n / alpha_n``.

    Finite type needs the ratio to tend to 0, infinite type only needs it
    bounded.
    """
    if kind not in (FINITE, INFINITE):
        raise ValueError(f"kind must be 'finite' or 'infinite', got {kind!r}")
    N = policy.N
    n = np.arange(1, N + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(n == 1, 0.0, np.log(n) / alpha.values(N))
    ratios = np.nan_to_num(ratios, nan=math.inf)
    tsup = float(np.max(ratios))
    order = alpha.growth_order()
    if order is None:
        return Verdict.inconclusive(reason="custom exponent sequence", truncated_sup=tsup,
                                    trend=_ratio_trend(ratios, policy.growth_window),
                                    window_ratios=ratios[-policy.growth_window:].tolist())
    if order == (0, 0.0):
        return Verdict.refuted({"n": 2, "ratio": math.inf, "reason": "alpha is constant zero"})
    if order[0] == 1:
        return Verdict.certified(NuclearityWitness("lim ln n / alpha_n = 0", 0.0, tsup))
    # logarithmic alpha: ln n / ln(n+1) -> 1
    if kind == INFINITE:
        return Verdict.certified(NuclearityWitness("sup ln n / alpha_n <= 1", 1.0, tsup))
    return Verdict.refuted({"n": N, "ratio": float(ratios[-1]), "limit": 1.0,
                            "reason": "ln n / ln(n+1) -> 1, not 0"})


def gp_nuclearity(grid: WeightGrid, policy: TruncationPolicy) -> Verdict:
    """Grothendieck-Pietsch: for each k find l > k with sum a(n,k)/a(n,l) < inf.

    Candidate ``l`` ranges over ``k+1 .. k_max + m_max``.
    """
    N = policy.N
    l_map, sums = {}, {}
    undecided = []
    l_top = policy.k_max + policy.m_max
    for k in range(1, policy.k_max + 1):
        diverging = []
        for l in range(k + 1, l_top + 1):
            terms = TermSum(N).weight(grid, k).weight(grid, l, sign=-1).build()
            tail = terms.log_tail_bound()
            if tail is not None:
                l_map[k] = l
                sums[k] = math.exp(np.logaddexp(terms.log_partial_sum(), tail))
                break
            if terms.nonvanishing():
                diverging.append(l)
        else:
            if len(diverging) == l_top - k:
                return Verdict.refuted({"k": k, "l_range": [k + 1, l_top],
                                        "reason": "a(n,k)/a(n,l) does not tend to 0 for any l"})
            undecided.append(k)
    if undecided:
        return Verdict.inconclusive(reason="no tail bound", grades=undecided, found=l_map)
    return Verdict.certified(GrothendieckPietschWitness(l_map, sums))


def grid_is_nuclear(grid: WeightGrid, policy: TruncationPolicy) -> bool:
    if grid.is_power_series:
        return nuclearity_power_series(grid.alpha, grid.kind, policy).is_certified
    return gp_nuclearity(grid, policy).is_certified


def weak_stability(beta: ExponentSequence, policy: TruncationPolicy) -> Verdict:
    """``M = sup beta_{n+1} / beta_n``."""
    if not beta.value(1) > 0:
        raise ZeroDivisionError("weak stability needs beta_1 > 0")
    fam = beta.family
    if fam == "linear":
        return Verdict.certified(StabilityWitness(2.0, 1))
    if fam == "power":
        return Verdict.certified(StabilityWitness(2.0 ** beta.params[1], 1))
    if fam == "log":
        return Verdict.certified(StabilityWitness(math.log(3) / math.log(2), 1))
    lv = beta.log_values(policy.N)
    if np.any(~np.isfinite(lv)):
        raise ZeroDivisionError("beta vanishes inside the truncation")
    lr = np.diff(lv)
    i = int(np.argmax(lr))
    trend = _ratio_trend(lr, policy.growth_window)
    return Verdict.inconclusive(
        reason="custom sequence: truncated supremum only",
        truncated_sup=math.exp(float(lr[i])) if lr[i] < 700 else math.inf,
        log_truncated_sup=float(lr[i]), attained_at=i + 1,
        trend="diverging" if trend == "increasing" else trend,
        window_log_ratios=lr[-policy.growth_window:].tolist())
