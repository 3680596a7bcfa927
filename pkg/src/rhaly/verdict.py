"""Three-valued outcomes and the truncation policy shared by every check."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

CERTIFIED = "Certified"
REFUTED = "Refuted"
INCONCLUSIVE = "Inconclusive"


class RhalyError(Exception):
    """Base class for errors raised by this package."""


class GradeError(RhalyError, ValueError):
    """A seminorm grade outside the allowed range."""


class ZeroWeightError(RhalyError, ZeroDivisionError):
    """Division by a vanishing Koethe weight a(n, k)."""

    def __init__(self, n: int, k: int | float):
        super().__init__(f"weight a({n}, {k}) vanishes; cannot divide by it")
        self.n = n
        self.k = k


class NonFiniteError(RhalyError, ArithmeticError):
    """A weight or sample evaluated to nan or +inf."""


class HypothesisError(RhalyError, ValueError):
    """A theorem hypothesis required by a check does not hold."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Finite window in which sequences, grades and witnesses are examined.

    ``N`` is the largest sequence index, ``k_max`` the largest target grade,
    ``m_max`` the ceiling for witness searches, ``tol`` an absolute tolerance
    and ``growth_window`` the span used to summarise numeric trends.
    """

    N: int = 200
    k_max: int = 6
    m_max: int = 12
    tol: float = 1e-10
    growth_window: int = 8

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 16:
            raise ValueError(f"N must be an integer >= 16, got {self.N}")
        if self.k_max < 1 or self.m_max < 1:
            raise ValueError("k_max and m_max must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 1 <= self.growth_window < self.N:
            raise ValueError("growth_window must satisfy 1 <= growth_window < N")

    def replace(self, **changes) -> "TruncationPolicy":
        return dataclasses.replace(self, **changes)


def jsonable(obj: Any) -> Any:
    """Convert witness payloads into plain JSON-compatible values.

    Dict keys become strings, tuples become lists, complex numbers become
    ``[re, im]`` pairs and non-finite floats become the strings ``"inf"``,
    ``"-inf"`` or ``"nan"`` so that the output is strict JSON.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):  # numpy scalars and arrays
        return jsonable(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return str(obj)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a criterion check.

    Exactly one of three outcomes.  A ``Certified`` verdict carries a witness
    record, a ``Refuted`` verdict a counterexample that can be rechecked
    without rerunning the search, and an ``Inconclusive`` verdict only
    diagnostics.
    """

    outcome: str
    witness: Any = None
    counterexample: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome == CERTIFIED and self.witness is None:
            raise ValueError("a Certified verdict needs a witness")
        if self.outcome == REFUTED and not self.counterexample:
            raise ValueError("a Refuted verdict needs a counterexample")
        if self.outcome not in (CERTIFIED, REFUTED, INCONCLUSIVE):
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @classmethod
    def certified(cls, witness, **diagnostics) -> "Verdict":
        return cls(CERTIFIED, witness=witness, diagnostics=diagnostics)

    @classmethod
    def refuted(cls, counterexample: dict, **diagnostics) -> "Verdict":
        return cls(REFUTED, counterexample=counterexample, diagnostics=diagnostics)

    @classmethod
    def inconclusive(cls, **diagnostics) -> "Verdict":
        return cls(INCONCLUSIVE, diagnostics=diagnostics)

    @property
    def is_certified(self) -> bool:
        return self.outcome == CERTIFIED

    @property
    def is_refuted(self) -> bool:
        return self.outcome == REFUTED

    @property
    def is_inconclusive(self) -> bool:
        return self.outcome == INCONCLUSIVE

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "witness": jsonable(self.witness),
            "counterexample": jsonable(self.counterexample),
            "diagnostics": jsonable(self.diagnostics),
        }
