"""Line-oriented run configuration.

Entries are ``key = value`` pairs separated by newlines or commas; a
``[section]`` header prefixes the keys below it with ``section.`` (top-level
keys may still follow it); ``#`` starts a comment.  Families are written ``name:params``::

    [space]
    kind = finite
    alpha = linear:1

    theta = geometric:1,0.5
    checks = [continuity, compactness, power_bound]
    N = 200

See the README for the full list of keys.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .holomorphic import AnalyticFunction, QuadratureSpec, load_coefficients
from .sequences import CoefficientSequence, ExponentSequence, WeightGrid
from .verdict import RhalyError, TruncationPolicy

DEFAULTS = {"N": 200, "k_max": 6, "m_max": 12, "tol": 1e-10, "growth_window": 8, "K_test": 32}
POLICY_FIELDS = ("N", "k_max", "m_max", "tol", "growth_window")

CHECKS = (
    "membership", "dual_membership", "nuclearity", "gp_nuclearity", "weak_stability",
    "continuity", "compactness", "dual_compactness", "domination", "shift",
    "sup_grade", "power_bound", "fesas", "m_topologizability", "topologizability",
    "cesaro_bounded", "orbit_decay", "ergodic", "extract", "cross_validate",
)

_SCALAR_KEYS = {
    "space.kind", "space.alpha", "target.kind", "target.alpha", "beta", "theta", "theta.alpha", "x",
    "checks", "N", "k_max", "m_max", "tol", "growth_window", "K_test", "seed",
    "box.n", "box.p", "fesas.box", "schedule", "domination.mode", "domination.kind",
    "quad.r", "quad.M", "quad.r0", "quad.r1", "g", "f", "points", "n_max",
    "output.format", "output.path", "sweep.theta", "sweep.values",
}
HOLOMORPHIC_CHECKS = ("extract", "cross_validate")
FORMATS = ("json", "csv", "text")


class ConfigError(RhalyError, ValueError):
    """Malformed or inconsistent run configuration."""


# -- family parsers -----------------------------------------------------------

def _split_family(text: str) -> tuple[str, list[str]]:
    name, _, rest = text.partition(":")
    params = [p.strip() for p in re.split(r"[,;]", rest)] if rest.strip() else []
    return name.strip().lower(), params


def _num(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: malformed number {text!r}") from None


def _cnum(text: str, key: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"{key}: malformed complex number {text!r}") from None


def parse_exponent(text: str, key: str = "alpha") -> ExponentSequence:
    name, params = _split_family(text)
    if name == "linear":
        return ExponentSequence.linear(_num(params[0], key) if params else 1.0)
    if name == "power":
        if len(params) != 2:
            raise ConfigError(f"{key}: power needs c,gamma")
        return ExponentSequence.power(_num(params[0], key), _num(params[1], key))
    if name == "log":
        return ExponentSequence.log()
    raise ConfigError(f"{key}: unknown exponent family {name!r}")


def parse_grid(kind: str, alpha: ExponentSequence, key: str) -> WeightGrid:
    if kind == "finite":
        return WeightGrid.finite_type(alpha)
    if kind == "infinite":
        return WeightGrid.infinite_type(alpha)
    raise ConfigError(f"{key}: kind must be 'finite' or 'infinite', got {kind!r}")


def parse_theta(text: str, alpha: ExponentSequence, key: str = "theta") -> CoefficientSequence:
    name, params = _split_family(text)

    def need(n):
        if len(params) != n:
            raise ConfigError(f"{key}: {name} needs {n} parameters, got {len(params)}")

    if name == "reciprocal":
        return CoefficientSequence.reciprocal()
    if name == "zero":
        return CoefficientSequence.zero()
    if name == "geometric":
        need(2)
        return CoefficientSequence.geometric(_cnum(params[0], key), _cnum(params[1], key))
    if name == "expexp":
        need(2)
        return CoefficientSequence.exp_exponent(_num(params[0], key), _num(params[1], key), alpha)
    if name == "finite":
        if not params:
            raise ConfigError(f"{key}: finite needs at least one value")
        return CoefficientSequence.finite([_cnum(p, key) for p in params])
    if name == "basis":
        need(1)
        n = int(_num(params[0], key))
        if n < 1:
            raise ConfigError(f"{key}: basis index must be >= 1")
        return CoefficientSequence.basis(n)
    if name == "logquad":
        need(3)
        return CoefficientSequence.log_quadratic(*(_num(p, key) for p in params))
    raise ConfigError(f"{key}: unknown theta family {name!r}")


def parse_function(text: str, key: str) -> AnalyticFunction:
    name, params = _split_family(text)
    if name == "exp":
        return AnalyticFunction.exp()
    if name == "geometric":
        if len(params) != 1:
            raise ConfigError(f"{key}: geometric needs c (g = 1/(1 - c z))")
        return AnalyticFunction.geometric(_cnum(params[0], key))
    if name in ("poly", "polynomial"):
        return AnalyticFunction.polynomial([_cnum(p, key) for p in params])
    if name == "const":
        return AnalyticFunction.constant(_cnum(params[0], key) if params else 1.0)
    if name == "file":
        path = text.partition(":")[2].strip()
        try:
            return load_coefficients(path)
        except OSError as err:
            raise ConfigError(f"{key}: cannot read {path}: {err.strerror}") from None
        except ValueError as err:
            raise ConfigError(f"{key}: {err}") from None
    raise ConfigError(f"{key}: unknown function family {name!r}")


def _parse_list(text: str, key: str) -> list[str]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ConfigError(f"{key}: expected a bracketed list, got {text!r}")
    inner = text[1:-1].strip()
    return [t.strip() for t in inner.split(",")] if inner else []


# -- tokenizer ------------------------------------------------------------------

_ENTRY_SPLIT = re.compile(r",\s*(?=[A-Za-z_][\w.]*\s*=)")


def _entries(text: str):
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_][\w.]*)\s*\]", line)
        if m:
            section = m.group(1) + "."
            continue
        depth, parts, start = 0, [], 0
        for i, ch in enumerate(line):
            depth += ch == "["
            depth -= ch == "]"
            if ch == "," and depth == 0 and _ENTRY_SPLIT.match(line, i):
                parts.append(line[start:i])
                start = i + 1
        parts.append(line[start:])
        for part in parts:
            key, eq, value = part.partition("=")
            if not eq:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {part.strip()!r}")
            key = key.strip()
            # keys that are only valid at top level may follow a section
            if section and section + key not in _SCALAR_KEYS and key in _SCALAR_KEYS:
                yield lineno, key, value.strip()
            else:
                yield lineno, section + key, value.strip()


# -- the config object ---------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    raw: dict
    space: WeightGrid
    target: WeightGrid
    alpha: ExponentSequence
    beta: ExponentSequence
    theta: CoefficientSequence | None
    checks: tuple
    policy: TruncationPolicy
    K_test: int
    x: CoefficientSequence
    box: dict = field(default_factory=dict)
    fesas_box: int = 8
    schedule: tuple = tuple(2 ** i for i in range(11))
    domination_mode: str = "ForAllK_ExistsM"
    domination_kind: str | None = None
    quad: QuadratureSpec | None = None
    g: AnalyticFunction | None = None
    f: AnalyticFunction | None = None
    points: tuple = ()
    n_max: int = 20
    output_format: str = "json"
    output_path: str | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)   # check -> policy field overrides
    sweep_theta: str | None = None
    sweep_values: tuple = ()

    def policy_for(self, check: str) -> TruncationPolicy:
        ov = self.overrides.get(check)
        return self.policy.replace(**ov) if ov else self.policy

    def with_theta(self, text: str) -> "RunConfig":
        raw = dict(self.raw, theta=text)
        return parse_config(raw)


def _as_int(value: str, key: str) -> int:
    v = _num(value, key)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return int(v)


def parse_config(text, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a configuration.  ``text`` may also be an already
    tokenized ``{key: value}`` mapping; ``overrides`` (e.g. from command-line
    flags) replace parsed values."""
    raw: dict[str, str] = {}
    if isinstance(text, dict):
        raw.update(text)
    else:
        for lineno, key, value in _entries(text):
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = str(v)

    check_overrides: dict[str, dict] = {}
    for key in raw:
        if key in _SCALAR_KEYS:
            continue
        head, _, tail = key.partition(".")
        if head in CHECKS and tail in POLICY_FIELDS:
            continue
        raise ConfigError(f"unknown key {key!r}")

    num = {}
    for key in DEFAULTS:
        if key in raw:
            num[key] = _num(raw[key], key) if key == "tol" else _as_int(raw[key], key)
        else:
            num[key] = DEFAULTS[key]
    try:
        policy = TruncationPolicy(**{k: num[k] for k in POLICY_FIELDS})
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if num["K_test"] < 1:
        raise ConfigError("K_test must be positive")

    for key, value in raw.items():
        head, _, tail = key.partition(".")
        if head in CHECKS and tail in POLICY_FIELDS:
            conv = _num(value, key) if tail == "tol" else _as_int(value, key)
            check_overrides.setdefault(head, {})[tail] = conv
    for check, ov in check_overrides.items():
        try:
            policy.replace(**ov)
        except ValueError as err:
            raise ConfigError(f"{check}: {err}") from None

    checks = tuple(_parse_list(raw.get("checks", "[]"), "checks"))
    for c in checks:
        if c not in CHECKS:
            raise ConfigError(f"checks: unknown check {c!r}")
    # holomorphic-only runs do not need a sequence space
    needs_space = "sweep.theta" in raw or any(c not in HOLOMORPHIC_CHECKS for c in checks)
    if "space.kind" not in raw and needs_space:
        raise ConfigError("missing key 'space.kind'")
    kind = raw.get("space.kind", "finite").lower()
    alpha = parse_exponent(raw.get("space.alpha", "linear:1"), "space.alpha")
    space = parse_grid(kind, alpha, "space.kind")
    t_alpha = parse_exponent(raw["target.alpha"], "target.alpha") if "target.alpha" in raw else alpha
    target = parse_grid(raw.get("target.kind", kind).lower(), t_alpha, "target.kind")
    beta = parse_exponent(raw["beta"], "beta") if "beta" in raw else t_alpha

    theta_alpha = parse_exponent(raw["theta.alpha"], "theta.alpha") if "theta.alpha" in raw else alpha
    theta = parse_theta(raw["theta"], theta_alpha) if "theta" in raw else None
    needs_theta = [c for c in checks if c not in
                   ("nuclearity", "gp_nuclearity", "weak_stability", "domination", "shift",
                    "extract", "cross_validate")]
    if theta is None and needs_theta and "sweep.theta" not in raw:
        raise ConfigError("missing key 'theta'")
    x = parse_theta(raw.get("x", "basis:1"), alpha, "x")

    quad = None
    if any(k.startswith("quad.") for k in raw):
        r0 = _num(raw["quad.r0"], "quad.r0") if "quad.r0" in raw else None
        r1 = _num(raw["quad.r1"], "quad.r1") if "quad.r1" in raw else None
        if r0 is not None and r1 is not None and r0 >= r1:
            raise ConfigError(f"quad: radius order violated, need r0 < r1 (got r0={r0}, r1={r1})")
        try:
            quad = QuadratureSpec(r=_num(raw.get("quad.r", "1"), "quad.r"),
                                  M=_as_int(raw.get("quad.M", "64"), "quad.M"), r0=r0, r1=r1)
        except ValueError as err:
            raise ConfigError(f"quad: {err}") from None
    g = parse_function(raw["g"], "g") if "g" in raw else None
    f = parse_function(raw["f"], "f") if "f" in raw else None
    for c in checks:
        if c in ("extract", "cross_validate") and g is None:
            raise ConfigError(f"check {c!r} needs key 'g'")
        if c == "cross_validate" and (f is None or quad is None or quad.r0 is None):
            raise ConfigError("check 'cross_validate' needs keys 'f' and 'quad.r0'")
    points = tuple(_cnum(p, "points") for p in _parse_list(raw.get("points", "[]"), "points"))

    fmt = raw.get("output.format", "json").lower()
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}, got {fmt!r}")
    mode = raw.get("domination.mode", "ForAllK_ExistsM")
    if mode not in ("ForAllK_ExistsM", "ExistsM_ForAllK"):
        raise ConfigError(f"domination.mode: unknown mode {mode!r}")
    dkind = raw.get("domination.kind")
    if dkind is not None and dkind not in ("finite", "infinite"):
        raise ConfigError(f"domination.kind must be finite or infinite, got {dkind!r}")
    schedule = tuple(_as_int(v, "schedule") for v in _parse_list(raw["schedule"], "schedule")) \
        if "schedule" in raw else tuple(2 ** i for i in range(11))
    if not schedule or min(schedule) < 1:
        raise ConfigError("schedule must list positive integers")
    box = {}
    if "box.n" in raw:
        box["n_max"] = _as_int(raw["box.n"], "box.n")
    if "box.p" in raw:
        box["p_max"] = _as_int(raw["box.p"], "box.p")
    sweep_values = tuple(_parse_list(raw["sweep.values"], "sweep.values")) if "sweep.values" in raw else ()
    if "sweep.theta" in raw and "{}" not in raw["sweep.theta"]:
        raise ConfigError("sweep.theta must contain a '{}' placeholder")

    return RunConfig(
        raw=dict(sorted(raw.items())), space=space, target=target, alpha=alpha, beta=beta, theta=theta,
        checks=checks, policy=policy, K_test=num["K_test"], x=x, box=box,
        fesas_box=_as_int(raw.get("fesas.box", "8"), "fesas.box"), schedule=schedule,
        domination_mode=mode, domination_kind=dkind, quad=quad, g=g, f=f, points=points,
        n_max=_as_int(raw.get("n_max", "20"), "n_max"), output_format=fmt,
        output_path=raw.get("output.path"), seed=_as_int(raw.get("seed", "0"), "seed"),
        overrides=check_overrides, sweep_theta=raw.get("sweep.theta"), sweep_values=sweep_values,
    )
