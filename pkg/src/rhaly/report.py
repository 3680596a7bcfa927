"""Execute configured checks and serialize the results."""

from __future__ import annotations

import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__, criteria, dynamics, holomorphic, koethe
from .config import RunConfig
from .verdict import CERTIFIED, INCONCLUSIVE, REFUTED, Verdict, jsonable

VALUES = "Values"
ERROR = "Error"


def _run_check(name: str, cfg: RunConfig):
    P = cfg.policy_for(name)
    th, sp, tg = cfg.theta, cfg.space, cfg.target
    if name == "membership":
        return koethe.membership(th, sp, P)
    if name == "dual_membership":
        return koethe.dual_membership(th, sp, P)
    if name == "nuclearity":
        return koethe.nuclearity_power_series(cfg.alpha, sp.kind, P)
    if name == "gp_nuclearity":
        return koethe.gp_nuclearity(sp, P)
    if name == "weak_stability":
        return koethe.weak_stability(cfg.beta, P)
    if name == "continuity":
        return criteria.continuity_witness(th, sp, tg, P)
    if name == "compactness":
        return criteria.compactness_witness(th, sp, tg, P)
    if name == "dual_compactness":
        return criteria.dual_compactness_test(th, cfg.alpha, P, cross_check=True)
    if name == "domination":
        kind = cfg.domination_kind or sp.kind
        return criteria.domination_check(cfg.beta, sp, cfg.domination_mode, kind, P)
    if name == "shift":
        return criteria.shift_bound_search(cfg.alpha, cfg.beta, P)
    if name == "sup_grade":
        return dynamics.sup_grade_seminorm(th, cfg.alpha, P)
    if name == "power_bound":
        return dynamics.power_bound_witness(th, sp, P, cfg.K_test, **cfg.box)
    if name == "fesas":
        return dynamics.fesas_bound_check(th, cfg.alpha, P, cfg.fesas_box)
    if name == "m_topologizability":
        return dynamics.m_topologizability_witness(th, sp, P, cfg.K_test)
    if name == "topologizability":
        consts = dynamics.topologizability_constants(th, cfg.alpha, P)
        return {f"k={k},p={p}": v for (k, p), v in consts.items()}
    if name == "cesaro_bounded":
        return dynamics.cesaro_bounded_check(th, sp, P, cfg.K_test, **cfg.box)
    if name == "orbit_decay":
        return dynamics.orbit_decay_check(th, cfg.x, sp, P, cfg.K_test)
    if name == "ergodic":
        est = dynamics.ergodic_projection_estimate(th, cfg.x, sp, P, cfg.schedule)
        return {"schedule": est.schedule, "increments": est.increments,
                "limit_head": None if est.limit is None else est.limit[:8],
                "non_convergent_risk": est.non_convergent_risk}
    if name == "extract":
        spec = cfg.quad or holomorphic.QuadratureSpec()
        vals = holomorphic.extract_theta(cfg.g, cfg.n_max, spec).values(cfg.n_max + 1)
        return {"theta": [[float(v.real), float(v.imag)] for v in vals]}
    if name == "cross_validate":
        rep = holomorphic.cross_validate(cfg.g, cfg.f, cfg.points, cfg.quad)
        return {"passed": rep.passed, "adapter_error": rep.adapter_error,
                "rows": [{"z": r.z, "integral": r.integral, "series": r.series,
                          "difference": r.difference, "passed": r.passed, "note": r.note}
                         for r in rep.rows]}
    raise ValueError(f"unknown check {name!r}")


def _record(name: str, cfg: RunConfig) -> dict:
    start = time.perf_counter()
    P = cfg.policy_for(name)
    rec = {"name": name, "policy": jsonable(P), "K_test": cfg.K_test}
    try:
        result = _run_check(name, cfg)
    except Exception as err:  # recorded as an error row; the run continues
        rec.update(outcome=ERROR, error=f"{type(err).__name__}: {err}")
    else:
        if isinstance(result, Verdict):
            rec.update(result.to_dict())
        else:
            rec.update(outcome=VALUES, values=jsonable(result))
    rec["timing_s"] = round(time.perf_counter() - start, 6)
    return rec


@dataclass
class Report:
    version: str
    config: dict
    records: list

    def to_dict(self, timing: bool = True) -> dict:
        recs = self.records if timing else [{k: v for k, v in r.items() if k != "timing_s"}
                                            for r in self.records]
        return {"version": self.version, "config": self.config, "records": recs}


def run(config: RunConfig, workers: int = 1, label: str | None = None) -> Report:
    """Run every configured check; rows keep declaration order."""
    names = list(config.checks)
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda n: _record(n, config), names))
    else:
        records = [_record(n, config) for n in names]
    if label is not None:
        for r in records:
            r["sweep"] = label
    return Report(__version__, dict(config.raw), records)


def run_sweep(config: RunConfig, workers: int = 1) -> Report:
    records = []
    for value in config.sweep_values:
        sub = config.with_theta(config.sweep_theta.replace("{}", value))
        records += run(sub, workers, label=value).records
    return Report(__version__, dict(config.raw), records)


# -- serialization ------------------------------------------------------------------

CSV_FIELDS = ("check", "sweep", "outcome", "grade", "n", "k", "p", "q", "m", "value", "detail")


def _grade_rows(rec: dict) -> list[dict]:
    base = {"check": rec["name"], "sweep": rec.get("sweep", ""), "outcome": rec["outcome"]}
    rows = []
    w = rec.get("witness")
    if isinstance(w, dict):
        if "entries" in w:                       # k -> (m, C)
            for k, (m, C) in w["entries"].items():
                rows.append(dict(base, grade=k, k=k, m=m, value=C))
        elif "constants" in w:                   # compactness
            for k, C in w["constants"].items():
                rows.append(dict(base, grade=k, k=k, m=w["m"], value=C))
        elif "q_for_p" in w:                     # power bounds, m-topologizability
            for p, q in w["q_for_p"].items():
                c = w.get("C", {}).get(p, "")
                rows.append(dict(base, grade=p, p=p, q=q, value=c))
        elif "grades" in w:                      # membership
            for k, pair in w["grades"].items():
                rows.append(dict(base, grade=k, k=k, value=pair[0], detail=f"tail={pair[1]}"))
    cex = rec.get("counterexample")
    if isinstance(cex, dict):
        row = dict(base)
        for key in ("n", "k", "p", "q", "m"):
            if key in cex and not isinstance(cex[key], (dict, list)):
                row[key] = cex[key]
        if "q_range" in cex:
            row["q"] = cex["q_range"] if isinstance(cex["q_range"], str) else "-".join(map(str, cex["q_range"]))
        for key in ("lhs", "log_lhs", "log_ratio_lower", "log_ratio", "log_gap", "log_lhs_lower", "ratio"):
            if key in cex:
                row["value"] = cex[key]
                break
        row["detail"] = json.dumps(cex, sort_keys=True)
        rows.append(row)
    if rec["outcome"] == VALUES:
        vals = rec["values"]
        if isinstance(vals, dict) and "table" in vals:   # orbit decay
            for p, cls in vals["classes"].items():
                rows.append(dict(base, grade=p, p=p, value=vals["slopes"][p], detail=cls))
        elif isinstance(vals, dict) and "increments" in vals:
            for p, inc in vals["increments"].items():
                for k, v in inc.items():
                    rows.append(dict(base, grade=p, p=p, k=k, value=v))
        else:
            rows.append(dict(base, detail=json.dumps(vals, sort_keys=True)))
    if rec["outcome"] == ERROR:
        rows.append(dict(base, detail=rec["error"]))
    if not rows:
        rows.append(dict(base, detail=json.dumps(rec.get("diagnostics", {}), sort_keys=True)[:500]))
    return rows


def _summary(rec: dict) -> str:
    if rec["outcome"] == ERROR:
        return rec["error"]
    if rec["outcome"] == CERTIFIED:
        w = rec["witness"]
        if isinstance(w, dict):
            keys = [k for k in ("m", "m0", "route", "rule", "k", "A", "B", "criterion", "form") if k in w]
            return ", ".join(f"{k}={w[k]}" for k in keys) or "witness attached"
        return f"value={w}"
    if rec["outcome"] == REFUTED:
        cex = rec["counterexample"]
        keys = [k for k in ("k", "n", "p", "q_range") if k in cex]
        if "per_m" in cex:
            if cex.get("all_m"):
                return f"divergent for every m (decay rate {cex['decay_rate']:.4g})"
            return f"divergent for every m <= {len(cex['per_m'])}" + (f", k={cex['k']}" if "k" in cex else "")
        return ", ".join(f"{k}={cex[k]}" for k in keys) or str(cex.get("reason", "counterexample attached"))
    if rec["outcome"] == INCONCLUSIVE:
        return str(rec.get("diagnostics", {}).get("reason", ""))
    vals = rec["values"]
    if isinstance(vals, dict) and "classification" in vals:
        return f"classification={vals['classification']}"
    return json.dumps(vals, sort_keys=True)[:60]


def emit(report: Report, fmt: str = "json", timing: bool = True) -> str:
    data = report.to_dict(timing)
    if fmt == "json":
        return json.dumps(jsonable(data), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS + (("timing_s",) if timing else ()),
                                lineterminator="\n", restval="")
        writer.writeheader()
        for rec in data["records"]:
            for row in _grade_rows(jsonable(rec)):
                if timing:
                    row["timing_s"] = rec["timing_s"]
                writer.writerow(row)
        return buf.getvalue()
    if fmt == "text":
        rows = [("check", "outcome", "summary") + (("time[s]",) if timing else ())]
        for rec in data["records"]:
            jr = jsonable(rec)
            name = jr["name"] + (f"[{jr['sweep']}]" if "sweep" in jr else "")
            row = (name, jr["outcome"], _summary(jr))
            rows.append(row + ((f"{rec['timing_s']:.3f}",) if timing else ()))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = [f"rhaly {report.version}"]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)
