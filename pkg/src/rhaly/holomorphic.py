"""Rhaly operators on entire functions and on disc functions.

Functions are indexed by their 0-based Taylor coefficients,
``g(z) = sum_{n>=0} b_n z^n``, whereas the sequence-space code is 1-based.
``taylor_to_sequence`` and ``sequence_to_taylor`` are the only places where
the shift between the two conventions happens.

The operator acts by

    (R_g f)(z) = (1/2 pi i) oint_{|w|=r0} f(w) / (w (1 - w)) g(z/w) dw
               = sum_n (a_0 + ... + a_n) b_n z^n,

where the integral form needs ``g`` analytic on ``|zeta| <= |z| / r0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rhaly_operator import RhalyOperator, apply
from .sequences import CoefficientSequence
from .verdict import NonFiniteError, RhalyError, TruncationPolicy

ENTIRE = "entire"
DISC = "disc"


class SeriesOnlyError(RhalyError):
    """The contour for the integral form leaves the domain of ``g``."""


class QuadratureError(RhalyError):
    """Adaptive quadrature did not reach the requested agreement."""


@dataclass(frozen=True)
class AnalyticFunction:
    """An analytic function given by a closed form, Taylor coefficients or an
    evaluator.  ``radius`` is the radius of convergence of the Taylor series
    about 0 (``inf`` for entire functions)."""

    kind: str
    domain: str = ENTIRE
    radius: float = math.inf
    coefficients: tuple = ()
    c: complex = 0.0
    fn: Callable | None = field(default=None, compare=False)
    name: str = ""

    @classmethod
    def exp(cls) -> "AnalyticFunction":
        return cls("exp", ENTIRE, math.inf, name="exp")

    @classmethod
    def geometric(cls, c: complex) -> "AnalyticFunction":
        """``1 / (1 - c z)``."""
        radius = math.inf if c == 0 else 1.0 / abs(c)
        domain = ENTIRE if c == 0 else DISC
        return cls("geometric", domain, radius, c=complex(c), name=f"1/(1-({c})z)")

    @classmethod
    def polynomial(cls, coefficients) -> "AnalyticFunction":
        coefs = tuple(complex(v) for v in coefficients) or (0j,)
        return cls("polynomial", ENTIRE, math.inf, coefs, name=f"poly(deg {len(coefs) - 1})")

    @classmethod
    def constant(cls, value: complex = 1.0) -> "AnalyticFunction":
        return cls.polynomial([value])

    @classmethod
    def taylor(cls, coefficients, domain: str = DISC, radius: float = 1.0) -> "AnalyticFunction":
        """Truncated Taylor series; evaluation ignores the tail."""
        coefs = tuple(complex(v) for v in coefficients)
        if domain == ENTIRE:
            radius = math.inf
        return cls("taylor", domain, radius, coefs, name=f"taylor({len(coefs)})")

    @classmethod
    def from_callable(cls, fn: Callable, domain: str = ENTIRE, radius: float = math.inf,
                      name: str = "callable") -> "AnalyticFunction":
        return cls("callable", domain, radius if domain == DISC else math.inf, fn=fn, name=name)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "exp":
            return np.exp(w)
        if self.kind == "geometric":
            return 1.0 / (1.0 - self.c * w)
        if self.kind in ("polynomial", "taylor"):
            return np.polynomial.polynomial.polyval(w, np.array(self.coefficients))
        return np.asarray(self.fn(w), dtype=complex)

    def taylor_coefficients(self, n_max: int, spec: "QuadratureSpec | None" = None) -> np.ndarray:
        """``b_0 .. b_{n_max}``; exact for the closed forms, by quadrature
        for evaluators."""
        n = np.arange(n_max + 1)
        if self.kind == "exp":
            return np.exp(-np.array([math.lgamma(k + 1) for k in n])).astype(complex)
        if self.kind == "geometric":
            return self.c ** n
        if self.kind in ("polynomial", "taylor"):
            out = np.zeros(n_max + 1, dtype=complex)
            m = min(n_max + 1, len(self.coefficients))
            out[:m] = self.coefficients[:m]
            return out
        if spec is None:
            r = 1.0 if self.radius == math.inf else 0.5 * self.radius
            M = max(64, 1 << (2 * n_max + 2).bit_length())
            spec = QuadratureSpec(r=r, M=M)
        return extract_theta(self, n_max, spec).values(n_max + 1)

    def describe(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class QuadratureSpec:
    """Equispaced trapezoidal rule with ``M`` nodes on ``|w| = r``.

    ``r0`` and ``r1`` are the contour and evaluation radii for ``R_g``:
    ``0 < r0 < 1`` in the entire case, ``0 < r0 < r1 < 1`` with ``|z| = r1``
    in the disc case.
    """

    r: float = 1.0
    M: int = 64
    r0: float | None = None
    r1: float | None = None
    tol: float = 1e-14
    M_max: int = 1 << 16

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("quadrature radius must be positive")
        if self.M < 16 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of two >= 16, got {self.M}")
        if self.r0 is not None and not 0 < self.r0 < 1:
            raise ValueError("r0 must lie in (0, 1)")
        if self.r1 is not None:
            if self.r0 is None:
                raise ValueError("r1 needs r0")
            if not self.r0 < self.r1 < 1:
                raise ValueError(f"need 0 < r0 < r1 < 1, got r0={self.r0}, r1={self.r1}")

    def nodes(self, M: int | None = None, r: float | None = None) -> np.ndarray:
        M = M or self.M
        r = self.r if r is None else r
        return r * np.exp(2j * np.pi * np.arange(M) / M)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    M: int
    converged: bool
    change: float


def circle_quadrature(fn: Callable, spec: QuadratureSpec, M: int | None = None, r: float | None = None) -> complex:
    """``(1/M) sum_j fn(w_j) w_j``, the trapezoidal value of
    ``(1/2 pi i) oint fn(w) dw``."""
    w = spec.nodes(M, r)
    vals = np.asarray(fn(w), dtype=complex) * np.ones_like(w)
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        raise NonFiniteError(f"non-finite integrand at w = {w[bad]}")
    return complex(np.sum(vals * w) / len(w))


def adaptive_quadrature(fn: Callable, spec: QuadratureSpec, r: float | None = None,
                        tol: float | None = None) -> QuadratureResult:
    """Double ``M`` until two successive values agree within ``tol``
    (relative to ``max(1, |value|)``)."""
    tol = spec.tol if tol is None else tol
    M = spec.M
    prev = circle_quadrature(fn, spec, M, r)
    while 2 * M <= spec.M_max:
        M *= 2
        cur = circle_quadrature(fn, spec, M, r)
        change = abs(cur - prev)
        if change <= tol * max(1.0, abs(cur)):
            return QuadratureResult(cur, M, True, change)
        prev = cur
    return QuadratureResult(prev, M, False, change)


def extract_theta(g: AnalyticFunction, n_max: int, spec: QuadratureSpec) -> CoefficientSequence:
    """Taylor coefficients ``theta_n = (1/2 pi i) oint g(w) / w^{n+1} dw``.

    The returned sequence holds ``theta_n`` at array position ``n``, i.e.
    ``extract_theta(g, n_max, spec).values(n_max + 1)[n]``.
    """
    if n_max >= spec.M // 2:
        raise ValueError(f"n_max = {n_max} needs more than M = {spec.M} nodes (M > 2 n_max)")
    if spec.r >= g.radius:
        raise ValueError(f"quadrature radius {spec.r} outside the disc of convergence ({g.radius})")
    w = spec.nodes()
    samples = g(w)
    if not np.all(np.isfinite(samples)):
        raise NonFiniteError("g is not finite on the quadrature circle")
    n = np.arange(n_max + 1)
    j = np.arange(spec.M)
    phase = np.exp(-2j * np.pi * np.outer(n, j) / spec.M)
    theta = (phase @ samples) / spec.M / spec.r ** n
    return CoefficientSequence.finite(list(theta))


def taylor_to_sequence(b) -> CoefficientSequence:
    """0-based Taylor coefficients ``b_0, b_1, ...`` as the 1-based sequence
    ``theta_j = b_{j-1}``."""
    return CoefficientSequence.finite(list(np.asarray(b)))


def sequence_to_taylor(theta: CoefficientSequence, n_max: int) -> np.ndarray:
    """Inverse of ``taylor_to_sequence``: ``b_0 .. b_{n_max}``."""
    return theta.values(n_max + 1)


def _integral_case(g: AnalyticFunction, f: AnalyticFunction, z: complex, spec: QuadratureSpec) -> str:
    if spec.r0 is None:
        raise ValueError("apply_Rg_integral needs spec.r0")
    if f.radius <= spec.r0:
        raise ValueError(f"f must be analytic on |w| <= r0 = {spec.r0}")
    if spec.r1 is not None:
        if abs(abs(z) - spec.r1) > 1e-12 * max(1.0, spec.r1):
            raise ValueError(f"disc case evaluates at |z| = r1 = {spec.r1}, got |z| = {abs(z)}")
        case = DISC
    elif g.domain == ENTIRE:
        case = ENTIRE
    else:
        raise ValueError("g is a disc function: set spec.r1 with |z| = r1")
    if abs(z) / spec.r0 >= g.radius:
        raise SeriesOnlyError(
            f"|z|/r0 = {abs(z) / spec.r0:g} reaches the radius {g.radius:g} of g; use the series form")
    return case


def apply_Rg_integral(g: AnalyticFunction, f: AnalyticFunction, z: complex, spec: QuadratureSpec,
                      tol: float | None = None) -> complex:
    """``(R_g f)(z)`` by adaptive trapezoidal quadrature on ``|w| = r0``."""
    z = complex(z)
    _integral_case(g, f, z, spec)

    def integrand(w):
        return f(w) / (w * (1.0 - w)) * g(z / w)

    res = adaptive_quadrature(integrand, spec, r=spec.r0, tol=tol)
    if not res.converged:
        raise QuadratureError(f"no agreement up to M = {res.M} (last change {res.change:g})")
    return res.value


def _series_terms(g, f, z, n_max):
    a = f.taylor_coefficients(n_max)
    b = g.taylor_coefficients(n_max)
    c = np.cumsum(a)
    zn = complex(z) ** np.arange(n_max + 1)
    return c * b * zn


def apply_Rg_series(g: AnalyticFunction, f: AnalyticFunction, z: complex, n_max: int = 200) -> complex:
    """``sum_{n<=n_max} (a_0 + ... + a_n) b_n z^n``."""
    return complex(np.sum(_series_terms(g, f, z, n_max)))


def series_tail_estimate(g: AnalyticFunction, f: AnalyticFunction, z: complex,
                         n_max: int = 200, window: int = 8) -> tuple[float, bool]:
    """Geometric estimate of the neglected tail and whether it is trusted.

    Exact (zero) when ``g`` is a polynomial within the truncation; otherwise
    trusted when the last ``window`` terms decay at a ratio below 1.
    """
    t = np.abs(_series_terms(g, f, z, n_max))
    if g.kind == "polynomial" and len(g.coefficients) <= n_max + 1:
        return 0.0, True
    tail = t[-window:]
    if np.all(tail == 0):
        return 0.0, True
    nz = tail[tail > 0]
    if len(nz) < 2:
        return float(nz[-1]) if nz.size else 0.0, False
    ratio = float(np.max(nz[1:] / nz[:-1]))
    if ratio >= 1:
        return math.inf, False
    return float(nz[-1] * ratio / (1 - ratio)), True


@dataclass(frozen=True)
class ValidationRow:
    z: complex
    integral: complex | None
    series: complex
    difference: float | None
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple
    adapter_error: float
    adapter_passed: bool

    @property
    def passed(self) -> bool:
        return self.adapter_passed and all(r.passed for r in self.rows)


def adapter_check(g: AnalyticFunction, f: AnalyticFunction, z: complex, n_max: int = 40,
                  spec: QuadratureSpec | None = None) -> float:
    """``|sum_j (R_theta a)_j z^{j-1} - apply_Rg_series|`` where ``theta`` is
    extracted from ``g`` and ``R_theta`` acts on the 1-based coefficient
    sequence of ``f``."""
    if spec is None or spec.r >= g.radius or n_max >= spec.M // 2:
        r = 1.0 if g.radius == math.inf else min(1.0, 0.5 * g.radius)
        spec = QuadratureSpec(r=r, M=max(64, 1 << (2 * n_max + 2).bit_length()))
    theta = extract_theta(g, n_max, spec)
    N = max(16, n_max + 1)
    a = f.taylor_coefficients(n_max)
    y = apply(RhalyOperator(theta), taylor_to_sequence(a), TruncationPolicy(N=N))[: n_max + 1]
    via_matrix = complex(np.sum(y * complex(z) ** np.arange(n_max + 1)))
    return abs(via_matrix - apply_Rg_series(g, f, z, n_max))


def cross_validate(g: AnalyticFunction, f: AnalyticFunction, points, spec: QuadratureSpec,
                   n_max: int = 200, tol: float = 1e-10) -> ValidationReport:
    """Compare the integral and series forms at each point."""
    rows = []
    for z in points:
        z = complex(z)
        series = apply_Rg_series(g, f, z, n_max)
        try:
            integral = apply_Rg_integral(g, f, z, spec)
        except SeriesOnlyError as err:
            rows.append(ValidationRow(z, None, series, None, True, f"series-only: {err}"))
            continue
        except (QuadratureError, NonFiniteError) as err:
            rows.append(ValidationRow(z, None, series, None, False, str(err)))
            continue
        diff = abs(integral - series)
        rows.append(ValidationRow(z, integral, series, diff, diff <= tol * max(1.0, abs(series))))
    z0 = complex(points[0]) if len(points) else 0.5
    a_err = adapter_check(g, f, z0, min(40, n_max))
    return ValidationReport(tuple(rows), a_err, a_err <= 1e-12 * max(1.0, abs(apply_Rg_series(g, f, z0, n_max))))


# -- coefficient files --------------------------------------------------------

def load_coefficients(path, domain: str = DISC, radius: float = 1.0) -> AnalyticFunction:
    """Read one complex coefficient per line as ``re im`` (``im`` optional,
    ``#`` starts a comment)."""
    coefs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) > 2:
                raise ValueError(f"{path}:{lineno}: expected 're im'")
            try:
                coefs.append(complex(float(parts[0]), float(parts[1]) if len(parts) == 2 else 0.0))
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
    return AnalyticFunction.taylor(coefs, domain, radius)


def dump_coefficients(values) -> str:
    return "".join(f"{float(complex(v).real)!r} {float(complex(v).imag)!r}\n" for v in values)
