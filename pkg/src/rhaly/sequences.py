"""Sequence families, Koethe weight grids and log-space term sequences.

All sequences here are 1-based: ``values(N)[i]`` holds the entry with index
``n = i + 1``.  Closed-form families know bounds on the increments of their
logarithms beyond any truncation point, which is what turns a partial sum
into a certified statement about the whole series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .verdict import NonFiniteError, ZeroWeightError

NEG_INF = -math.inf


def indices(N: int) -> np.ndarray:
    return np.arange(1, N + 1, dtype=float)


def logsumexp(log_u: np.ndarray) -> float:
    """Compute ``log(sum(exp(log_u)))`` without overflow."""
    log_u = np.asarray(log_u, dtype=float)
    if log_u.size == 0:
        return NEG_INF
    top = np.max(log_u)
    if top == NEG_INF:
        return NEG_INF
    if top == math.inf:
        return math.inf
    return float(np.log(np.sum(np.exp(log_u - top))) + top)


def _add_bounds(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    s = a + b
    return None if math.isnan(s) else s


def _eval_map(fn: Callable, N: int, start: int = 1) -> np.ndarray:
    return np.array([fn(n) for n in range(start, start + N)])


@dataclass(frozen=True, eq=False)
class LogSequence:
    """``u_j = ln|term_j|`` for ``j = 1..N+1`` plus bounds on ``u_{j+1} - u_j``
    valid for every ``j >= N+1``.

    ``lo``/``hi`` are ``None`` when no analytic bound is known.
    ``zero_beyond`` marks sequences that vanish from index ``N+1`` on.
    """

    values: np.ndarray
    lo: float | None
    hi: float | None
    zero_beyond: bool = False

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def head(self) -> np.ndarray:
        return self.values[:-1]

    @property
    def next_value(self) -> float:
        return float(self.values[-1])

    def __add__(self, other: "LogSequence") -> "LogSequence":
        if other.N != self.N:
            raise ValueError("log sequences truncated at different N")
        with np.errstate(invalid="ignore"):
            vals = self.values + other.values
        # 0 * finite weight: the zero coefficient wins
        vals = np.where(np.isnan(vals), NEG_INF, vals)
        if self.zero_beyond or other.zero_beyond:
            return LogSequence(vals, NEG_INF, NEG_INF, True)
        return LogSequence(vals, _add_bounds(self.lo, other.lo), _add_bounds(self.hi, other.hi))

    def __neg__(self) -> "LogSequence":
        if self.zero_beyond:
            raise ZeroDivisionError("cannot invert a sequence that vanishes")
        lo = None if self.hi is None else -self.hi
        hi = None if self.lo is None else -self.lo
        return LogSequence(-self.values, lo, hi)

    def __sub__(self, other: "LogSequence") -> "LogSequence":
        return self + (-other)

    def scaled(self, c: float) -> "LogSequence":
        """Multiply the underlying logs by ``c >= 0`` (raise terms to a power)."""
        if c < 0:
            raise ValueError("scale must be nonnegative")
        vals = self.values * c if c > 0 else np.where(self.values == NEG_INF, NEG_INF, 0.0)
        if self.zero_beyond:
            return LogSequence(vals, NEG_INF, NEG_INF, True)
        lo = None if self.lo is None else self.lo * c
        hi = None if self.hi is None else self.hi * c
        return LogSequence(vals, lo, hi)

    def shift(self, c: float) -> "LogSequence":
        return LogSequence(self.values + c, self.lo, self.hi, self.zero_beyond)

    def log_partial_sum(self) -> float:
        return logsumexp(self.head)

    def log_tail_bound(self) -> float | None:
        """Upper bound for ``ln sum_{j>N} e^{u_j}`` or ``None``."""
        if self.zero_beyond:
            return NEG_INF
        if self.hi is None or not self.hi < 0:
            return None
        if self.next_value == NEG_INF:
            return NEG_INF
        return self.next_value - math.log1p(-math.exp(self.hi))

    def log_sup_beyond(self) -> float | None:
        """Upper bound for ``ln sup_{j>N} e^{u_j}`` or ``None``."""
        if self.zero_beyond:
            return NEG_INF
        if self.hi is None or self.hi > 0:
            return None
        return self.next_value

    def unbounded(self) -> bool:
        """True when ``u_j`` provably increases without bound."""
        return (not self.zero_beyond and self.lo is not None and self.lo > 0
                and self.next_value > NEG_INF)

    def nonvanishing(self) -> bool:
        """True when the terms provably do not tend to zero."""
        return (not self.zero_beyond and self.lo is not None and self.lo >= 0
                and self.next_value > NEG_INF)


# -- exponent sequences ------------------------------------------------------

@dataclass(frozen=True)
class ExponentSequence:
    """A nonnegative nondecreasing sequence such as ``alpha`` or ``beta``.

    Families: ``linear`` (c*n), ``power`` (c*n**gamma), ``log`` (ln(n+1)) and
    ``custom``.  A custom map given with ``log=True`` returns ``ln alpha_n``,
    which keeps fast growing sequences such as ``exp(n**2)`` representable.
    """

    family: str
    params: tuple = ()
    fn: Callable | None = None
    log: bool = False
    name: str = ""

    @classmethod
    def linear(cls, c: float = 1.0) -> "ExponentSequence":
        if c < 0:
            raise ValueError("slope must be nonnegative")
        return cls("linear", (float(c),))

    @classmethod
    def power(cls, c: float, gamma: float) -> "ExponentSequence":
        if c < 0 or gamma < 0:
            raise ValueError("power family needs c >= 0 and gamma >= 0")
        return cls("power", (float(c), float(gamma)))

    @classmethod
    def log(cls) -> "ExponentSequence":
        return cls("log")

    @classmethod
    def custom(cls, fn: Callable[[int], float], log: bool = False, name: str = "custom") -> "ExponentSequence":
        return cls("custom", (), fn, log, name)

    @property
    def closed_form(self) -> bool:
        return self.family != "custom"

    def describe(self) -> str:
        if self.family == "custom":
            return self.name or "custom"
        return self.family + (":" + ",".join(f"{p:g}" for p in self.params) if self.params else "")

    def values(self, N: int) -> np.ndarray:
        n = indices(N)
        if self.family == "linear":
            return self.params[0] * n
        if self.family == "power":
            c, g = self.params
            return c * n ** g
        if self.family == "log":
            return np.log(n + 1.0)
        raw = _eval_map(self.fn, N).astype(float)
        return np.exp(raw) if self.log else raw

    def log_values(self, N: int) -> np.ndarray:
        if self.family == "custom" and self.log:
            return _eval_map(self.fn, N).astype(float)
        with np.errstate(divide="ignore"):
            return np.log(self.values(N))

    def value(self, n: int) -> float:
        return float(self.values(n)[-1])

    def increment_bounds(self, N: int) -> tuple[float | None, float | None]:
        """Bounds on ``alpha_{j+1} - alpha_j`` valid for all ``j >= N+1``."""
        j = N + 1
        if self.family == "linear":
            c = self.params[0]
            return c, c
        if self.family == "power":
            c, g = self.params
            d = c * ((j + 1) ** g - j ** g)
            if c == 0 or g == 0:
                return 0.0, 0.0
            if g == 1:
                return c, c
            if g > 1:
                return d, math.inf
            return 0.0, d
        if self.family == "log":
            return 0.0, math.log((j + 2) / (j + 1))
        return None, None

    def derivative(self, x: float) -> float | None:
        """Derivative of the closed form at real ``x``."""
        if self.family == "linear":
            return self.params[0]
        if self.family == "power":
            c, g = self.params
            return c * g * x ** (g - 1) if g != 0 else 0.0
        if self.family == "log":
            return 1.0 / (x + 1.0)
        return None

    def growth_order(self) -> tuple | None:
        """Comparable growth key for closed forms: log < n**g, ties by g."""
        if self.family == "linear":
            return (1, 1.0) if self.params[0] > 0 else (0, 0.0)
        if self.family == "power":
            c, g = self.params
            return (1, g) if c > 0 and g > 0 else (0, 0.0)
        if self.family == "log":
            return (0, 1.0)
        return None

    def leading_coefficient(self) -> float | None:
        if self.family == "linear":
            return self.params[0]
        if self.family == "power":
            return self.params[0]
        if self.family == "log":
            return 1.0
        return None


# -- coefficient sequences ---------------------------------------------------

@dataclass(frozen=True)
class CoefficientSequence:
    """A sequence ``theta`` or ``x`` with 1-based indices.

    Closed-form families: ``geometric`` (c*r**n), ``exp_exponent``
    (c*exp(-alpha_n/s)), ``reciprocal`` (1/n), ``log_quadratic``
    (exp(c0 + c1*n + c2*n**2)), ``finite`` (finitely supported) and ``zero``.
    ``custom`` sequences carry no analytic tail information.
    ``start > 1`` zeroes every entry below ``start`` (a column of R_theta).
    """

    family: str
    params: tuple = ()
    fn: Callable | None = None
    log: bool = False
    start: int = 1
    name: str = ""

    @classmethod
    def geometric(cls, c: complex, r: complex) -> "CoefficientSequence":
        return cls("geometric", (c, r))

    @classmethod
    def exp_exponent(cls, c: float, s: float, alpha: ExponentSequence) -> "CoefficientSequence":
        if s <= 0:
            raise ValueError("s must be positive")
        return cls("exp_exponent", (c, float(s), alpha))

    @classmethod
    def reciprocal(cls) -> "CoefficientSequence":
        return cls("reciprocal")

    @classmethod
    def log_quadratic(cls, c0: float, c1: float, c2: float) -> "CoefficientSequence":
        return cls("log_quadratic", (float(c0), float(c1), float(c2)))

    @classmethod
    def finite(cls, values: Sequence[complex]) -> "CoefficientSequence":
        vals = tuple(complex(v) if isinstance(v, complex) else float(v) for v in values)
        return cls("finite", vals)

    @classmethod
    def basis(cls, n: int) -> "CoefficientSequence":
        if n < 1:
            raise IndexError("basis vectors are indexed from 1")
        return cls.finite([0.0] * (n - 1) + [1.0])

    @classmethod
    def zero(cls) -> "CoefficientSequence":
        return cls("zero")

    @classmethod
    def custom(cls, fn: Callable[[int], complex], log: bool = False, name: str = "custom") -> "CoefficientSequence":
        return cls("custom", (), fn, log, 1, name)

    @property
    def tail_available(self) -> bool:
        return self.family != "custom"

    def describe(self) -> str:
        if self.family == "custom":
            base = self.name or "custom"
        elif self.family == "exp_exponent":
            c, s, a = self.params
            base = f"exp_exponent:{c:g},{s:g},{a.describe()}"
        elif self.family == "finite":
            base = "finite:" + ";".join(f"{v:g}" for v in self.params)
        elif self.params:
            base = self.family + ":" + ",".join(f"{p:g}" for p in self.params)
        else:
            base = self.family
        return base if self.start == 1 else f"{base}[n>={self.start}]"

    def column_from(self, start: int) -> "CoefficientSequence":
        """The copy of this sequence with entries below ``start`` removed."""
        return CoefficientSequence(self.family, self.params, self.fn, self.log,
                                   max(start, self.start), self.name)

    def _raw_values(self, N: int) -> np.ndarray:
        n = indices(N)
        f = self.family
        if f == "geometric":
            c, r = self.params
            return c * np.power(r, n) if c != 0 else np.zeros(N)
        if f == "exp_exponent":
            c, s, alpha = self.params
            return c * np.exp(-alpha.values(N) / s)
        if f == "reciprocal":
            return 1.0 / n
        if f == "log_quadratic":
            c0, c1, c2 = self.params
            return np.exp(c0 + c1 * n + c2 * n * n)
        if f == "finite":
            dtype = complex if any(isinstance(v, complex) for v in self.params) else float
            out = np.zeros(N, dtype=dtype)
            m = min(N, len(self.params))
            out[:m] = self.params[:m]
            return out
        if f == "zero":
            return np.zeros(N)
        raw = _eval_map(self.fn, N)
        if self.log:
            return np.exp(raw.astype(float))
        return raw.astype(complex) if np.iscomplexobj(raw) else raw.astype(float)

    def values(self, N: int) -> np.ndarray:
        vals = self._raw_values(N)
        if self.start > 1:
            vals = vals.copy()
            vals[: self.start - 1] = 0
        return vals

    def value(self, n: int) -> complex:
        return self.values(n)[-1]

    def _raw_log_abs(self, M: int) -> np.ndarray:
        n = indices(M)
        f = self.family
        with np.errstate(divide="ignore"):
            if f == "geometric":
                c, r = self.params
                if c == 0 or r == 0:
                    return np.full(M, NEG_INF)
                return math.log(abs(c)) + n * math.log(abs(r))
            if f == "exp_exponent":
                c, s, alpha = self.params
                if c == 0:
                    return np.full(M, NEG_INF)
                return math.log(abs(c)) - alpha.values(M) / s
            if f == "reciprocal":
                return -np.log(n)
            if f == "log_quadratic":
                c0, c1, c2 = self.params
                return c0 + c1 * n + c2 * n * n
            if f == "custom" and self.log:
                return _eval_map(self.fn, M).astype(float)
            return np.log(np.abs(self._raw_values(M)))

    def _log_increment_bounds(self, N: int) -> tuple[float | None, float | None, bool]:
        """(lo, hi, zero_beyond) for ``ln|x_{j+1}| - ln|x_j|``, ``j >= N+1``."""
        j = N + 1
        f = self.family
        if f == "zero":
            return NEG_INF, NEG_INF, True
        if f == "finite":
            if len(self.params) > N:
                raise ValueError(f"finite support of length {len(self.params)} exceeds truncation N={N}")
            return NEG_INF, NEG_INF, True
        if f == "geometric":
            c, r = self.params
            if c == 0 or r == 0:
                return NEG_INF, NEG_INF, True
            lr = math.log(abs(r))
            return lr, lr, False
        if f == "exp_exponent":
            c, s, alpha = self.params
            if c == 0:
                return NEG_INF, NEG_INF, True
            alo, ahi = alpha.increment_bounds(N)
            lo = None if ahi is None else -ahi / s
            hi = None if alo is None else -alo / s
            return lo, hi, False
        if f == "reciprocal":
            return math.log(j / (j + 1)), 0.0, False
        if f == "log_quadratic":
            c0, c1, c2 = self.params
            d = c1 + c2 * (2 * j + 1)
            if c2 < 0:
                return NEG_INF, d, False
            if c2 > 0:
                return d, math.inf, False
            return c1, c1, False
        return None, None, False

    def log_decay(self) -> tuple | None:
        """Asymptotics ``-ln|x_n| ~ coef * g(n)`` as ``(coef, order)`` with
        ``order`` keyed like ``ExponentSequence.growth_order``; ``coef = inf``
        for eventually vanishing sequences, ``None`` when unknown."""
        f = self.family
        const = (0.0, (0, 0.0))
        if f in ("zero", "finite"):
            return math.inf, None
        if f == "geometric":
            c, r = self.params
            if c == 0 or r == 0:
                return math.inf, None
            lr = -math.log(abs(r))
            return (lr, (1, 1.0)) if lr != 0 else const
        if f == "exp_exponent":
            c, s, beta = self.params
            if c == 0:
                return math.inf, None
            order, lead = beta.growth_order(), beta.leading_coefficient()
            if order is None:
                return None
            return const if order == (0, 0.0) else (lead / s, order)
        if f == "reciprocal":
            return 1.0, (0, 1.0)
        if f == "log_quadratic":
            c0, c1, c2 = self.params
            if c2 != 0:
                return -c2, (1, 2.0)
            return (-c1, (1, 1.0)) if c1 != 0 else const
        return None

    def log_abs(self, N: int) -> LogSequence:
        """``ln|x_j|`` for ``j = 1..N+1`` with increment bounds beyond ``N``."""
        vals = self._raw_log_abs(N + 1)
        if self.start > 1:
            vals = vals.copy()
            vals[: self.start - 1] = NEG_INF
        if np.any(np.isnan(vals)) or np.any(vals == math.inf):
            raise NonFiniteError(f"non-finite entry in sequence {self.describe()}")
        lo, hi, zero = self._log_increment_bounds(N)
        if zero:
            vals = vals.copy()
            vals[-1] = NEG_INF
        return LogSequence(vals, lo, hi, zero)


def decay_rate(x: CoefficientSequence, alpha: ExponentSequence) -> float | None:
    """``lim -ln|x_n| / alpha_n`` from the closed-form asymptotics, or
    ``None`` when either sequence lacks them."""
    d = x.log_decay()
    oa, ca = alpha.growth_order(), alpha.leading_coefficient()
    if d is None or oa is None or oa == (0, 0.0):
        return None
    coef, order = d
    if coef == math.inf:
        return math.inf
    if coef == 0 or order == (0, 0.0) or order < oa:
        return 0.0
    if order > oa:
        return math.copysign(math.inf, coef)
    return coef / ca


# -- Koethe weight grids -----------------------------------------------------

FINITE = "finite"
INFINITE = "infinite"
GENERAL = "general"


@dataclass(frozen=True)
class WeightGrid:
    """A Koethe matrix ``(n, k) -> a(n, k)`` stored through its logarithm.

    ``finite`` grids are exp(-alpha_n/k), ``infinite`` grids exp(k*alpha_n).
    A ``general`` grid is given by ``log_weight(n, k)`` and, optionally,
    ``increment_bounds(N, k) -> (lo, hi)`` bounding
    ``ln a(j+1, k) - ln a(j, k)`` for ``j >= N+1``.
    """

    kind: str
    alpha: ExponentSequence | None = None
    log_weight: Callable[[int, float], float] | None = field(default=None, compare=False)
    increment_bounds: Callable[[int, float], tuple] | None = field(default=None, compare=False)
    montel: bool | None = None
    name: str = ""

    @classmethod
    def finite_type(cls, alpha: ExponentSequence) -> "WeightGrid":
        return cls(FINITE, alpha, montel=True)

    @classmethod
    def infinite_type(cls, alpha: ExponentSequence) -> "WeightGrid":
        return cls(INFINITE, alpha, montel=True)

    @classmethod
    def general(cls, log_weight: Callable[[int, float], float], increment_bounds=None,
                montel: bool = False, name: str = "general") -> "WeightGrid":
        return cls(GENERAL, None, log_weight, increment_bounds, montel, name)

    @property
    def is_power_series(self) -> bool:
        return self.kind in (FINITE, INFINITE)

    def describe(self) -> str:
        if self.kind == FINITE:
            return f"Lambda_1({self.alpha.describe()})"
        if self.kind == INFINITE:
            return f"Lambda_inf({self.alpha.describe()})"
        return self.name or "general"

    def log_weights(self, N: int, k: float) -> np.ndarray:
        """``ln a(n, k)`` for ``n = 1..N``.  ``k = inf`` is the limit grade
        of a finite-type grid (all weights 1)."""
        if self.kind == FINITE:
            if k == math.inf:
                return np.zeros(N)
            return -self.alpha.values(N) / k
        if self.kind == INFINITE:
            if k == math.inf:
                raise ValueError("infinite-type grids have no limit grade")
            return k * self.alpha.values(N)
        if k == math.inf:
            raise ValueError("general grids have no limit grade")
        out = np.array([self.log_weight(n, k) for n in range(1, N + 1)], dtype=float)
        if np.any(np.isnan(out)) or np.any(out == math.inf):
            bad = int(np.argmax(np.isnan(out) | (out == math.inf))) + 1
            raise NonFiniteError(f"non-finite weight at (n={bad}, k={k})")
        return out

    def weight(self, n: int, k: float) -> float:
        return float(np.exp(self.log_weights(n, k)[-1]))

    def log_terms(self, N: int, k: float) -> LogSequence:
        vals = self.log_weights(N + 1, k)
        if self.kind == GENERAL:
            lo, hi = self.increment_bounds(N, k) if self.increment_bounds else (None, None)
            return LogSequence(vals, lo, hi)
        if k == math.inf:
            return LogSequence(vals, 0.0, 0.0)
        alo, ahi = self.alpha.increment_bounds(N)
        if self.kind == FINITE:
            lo = None if ahi is None else -ahi / k
            hi = None if alo is None else -alo / k
        else:
            lo = None if alo is None else k * alo
            hi = None if ahi is None else k * ahi
        return LogSequence(vals, lo, hi)

    def log_inf_weight(self, m: int, N: int) -> float | None:
        """A certified value of ``ln inf_n a(n, m)`` when it is positive
        (finite log), else ``None``."""
        if self.kind == INFINITE:
            return m * self.alpha.value(1)
        if self.kind == FINITE:
            return None
        terms = self.log_terms(N, m)
        if terms.lo is None or terms.lo < 0:
            return None
        if np.any(np.diff(terms.values) < 0):
            return None
        first = float(terms.values[0])
        return first if first > NEG_INF else None

    def check_axioms(self, N: int, k_max: int) -> list[str]:
        """Truncated verification of the Koethe matrix axioms."""
        problems = []
        table = np.array([self.log_weights(N, k) for k in range(1, k_max + 1)])
        positive = np.any(table > NEG_INF, axis=0)
        for n in np.nonzero(~positive)[0][:5]:
            problems.append(f"a({n + 1}, k) = 0 for every k <= {k_max}")
        dec = np.argwhere(np.diff(table, axis=0) < -1e-12)
        for k, n in dec[:5]:
            problems.append(f"a({n + 1}, {k + 2}) < a({n + 1}, {k + 1})")
        if self.is_power_series:
            a = self.alpha.values(N)
            if np.any(a < 0):
                problems.append("alpha has negative entries")
            if np.any(np.diff(a) < 0):
                problems.append("alpha is not nondecreasing")
            if not a[-1] > a[0]:
                problems.append("alpha shows no growth on 1..N")
        return problems


def _scaled_alpha(alpha: ExponentSequence, c: float, N: int) -> LogSequence:
    vals = c * alpha.values(N + 1) if c != 0 else np.zeros(N + 1)
    if c == 0:
        return LogSequence(vals, 0.0, 0.0)
    alo, ahi = alpha.increment_bounds(N)
    if c > 0:
        lo = None if alo is None else c * alo
        hi = None if ahi is None else c * ahi
    else:
        lo = None if ahi is None else c * ahi
        hi = None if alo is None else c * alo
    return LogSequence(vals, lo, hi)


class TermSum:
    """Accumulates ``ln`` of a product of sequences and weights.

    Contributions that are multiples of the same exponent sequence ``alpha``
    are merged before increment bounds are formed, so quotients such as
    ``a(n, k) / a(n, m)`` keep exact bounds instead of widening.
    """

    def __init__(self, N: int):
        self.N = N
        self.alpha_coefs: dict[ExponentSequence, float] = {}
        self.const = 0.0
        self.parts: list[LogSequence] = []

    def exponent(self, alpha: ExponentSequence, c: float) -> "TermSum":
        """Multiply by ``exp(c * alpha_n)``."""
        self.alpha_coefs[alpha] = self.alpha_coefs.get(alpha, 0.0) + c
        return self

    def weight(self, grid: WeightGrid, k: float, sign: int = 1) -> "TermSum":
        """Multiply by ``a(., k) ** sign``."""
        if grid.kind == FINITE:
            if k != math.inf:
                self.exponent(grid.alpha, -sign / k)
        elif grid.kind == INFINITE:
            self.exponent(grid.alpha, sign * k)
        else:
            terms = grid.log_terms(self.N, k)
            if sign < 0:
                if np.any(terms.values == NEG_INF):
                    n = int(np.argmax(terms.values == NEG_INF)) + 1
                    raise ZeroWeightError(n, k)
                terms = -terms
            self.parts.append(terms)
        return self

    def seq(self, x: CoefficientSequence) -> "TermSum":
        """Multiply by ``|x_n|``."""
        if x.family == "exp_exponent" and x.start == 1 and x.params[0] != 0:
            c, s, alpha = x.params
            self.const += math.log(abs(c))
            self.exponent(alpha, -1.0 / s)
        else:
            self.parts.append(x.log_abs(self.N))
        return self

    def log_terms(self, terms: LogSequence) -> "TermSum":
        self.parts.append(terms)
        return self

    def build(self) -> LogSequence:
        out = LogSequence(np.full(self.N + 1, self.const), 0.0, 0.0)
        for alpha, c in self.alpha_coefs.items():
            out = out + _scaled_alpha(alpha, c, self.N)
        for part in self.parts:
            out = out + part
        return out
