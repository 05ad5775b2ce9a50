"""Assemble, serialize and validate analysis and campaign reports.

Reports are plain dicts.  Everything except the ``timings`` key is a pure
function of the chain-spec bytes, the flags and the seed, and
:func:`dumps_report` writes them with sorted keys, so reruns are
byte-identical apart from ``timings``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from importlib import resources

import numpy as np

from . import __version__
from .chain import ChainModel, classify, parse_chain_spec
from .config import DEFAULT_CAPS, DEFAULT_TOLERANCES
from .diagnostics import condition_report, conditional_norms
from .lemmas import check_implications, run_campaigns
from .operators import build_table, exact_range_member
from .simulate import CENTERED, RAW, clt_test, empirical_bridge_check, simulate
from .variance import variance_profile

SCHEMA_VERSION = "1.0"
SCHEMA_FILES = {
    "analyze": "analysis-report.schema.json",
    "lemmas": "campaign-report.schema.json",
    "chain-spec": "chain-spec.schema.json",
}


class Stopwatch:
    """Collects wall-clock seconds per named stage."""

    def __init__(self):
        self.times = {}

    def __call__(self, name):
        watch = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                watch.times[name] = watch.times.get(name, 0.0) + time.perf_counter() - self.t0

        return _Stage()


def fingerprint(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _num(x):
    """JSON-safe float: non-finite values become ``None``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _nums(a):
    return [_num(v) for v in np.asarray(a, dtype=float).ravel()]


def _variance_section(profile, horizon):
    dy = profile.dyadic
    rows = []
    for r in dy.r:
        rows.append(
            {
                "r": int(r),
                "n": int(2**r),
                "second_moment": _num(dy.second_moment[r]),
                "normalized": _num(dy.normalized[r]),
                "delta": _num(dy.delta_curve[r]),
                "diatic_bound": _num(dy.diatic_bound[r]),
                "diatic_holds": bool(dy.diatic_holds[r]),
            }
        )
    return {
        "sigma2": _num(profile.sigma2),
        "sigma2_closed": _num(profile.sigma2_closed),
        "sigma2_dyadic": _num(profile.sigma2_dyadic),
        "var_at_horizon": _num(profile.var_seq[horizon - 1]),
        "eta2": _num(profile.eta2),
        "theta2": _num(profile.theta2),
        "eta2_spread": _num(profile.eta2_spread),
        "theta2_spread": _num(profile.theta2_spread),
        "cross_limit_L": _num(dy.L),
        "provenance": dict(profile.provenance),
        "dyadic": rows,
    }


def _clt_section(chain, cls, profile, horizon, n_paths, seed, workers, caps, tol, watch):
    if not cls.totally_ergodic:
        return {"skipped": "chain is not totally ergodic", "n_steps": horizon, "n_paths": n_paths, "tests": []}
    if n_paths < 2:
        return {"skipped": "fewer than two paths requested", "n_steps": horizon, "n_paths": n_paths, "tests": []}
    with watch("simulation"):
        batch = simulate(chain, horizon, n_paths, seed=seed, workers=workers, caps=caps)
    with watch("clt_tests"):
        tests = [clt_test(batch, RAW, profile.sigma2, tol).as_dict()]
        theta2 = profile.theta2 if profile.theta2 is not None else profile.theta2_curve[horizon - 1]
        tests.append(clt_test(batch, CENTERED, max(float(theta2), 0.0), tol).as_dict())
        bridge = empirical_bridge_check(chain, batch)
    for t in tests:
        for k in ("ks_distance", "sample_mean", "sample_var", "max_abs", "target_variance"):
            t[k] = _num(t[k])
    return {
        "skipped": None,
        "n_steps": horizon,
        "n_paths": n_paths,
        "tests": tests,
        "bridge_check": {"n_groups": int(bridge.counts.size), "max_abs_z": _num(bridge.max_abs_z)},
    }


def analyze_chain(
    chain: ChainModel,
    chain_fingerprint: str,
    horizon: int = 4096,
    seed: int = 0,
    n_paths: int = 20_000,
    workers: int = 1,
    lemma_cases: int = 0,
    tol=DEFAULT_TOLERANCES,
    caps=DEFAULT_CAPS,
):
    """Run every analysis on ``chain`` and return ``(report, profile)``.

    Stages: classification, operator table, conditional norms and condition
    verdicts, exact finite-state range membership, variance profile,
    finite-horizon implications, and (totally ergodic chains only) a raw and
    a bridge-centered CLT simulation.  ``lemma_cases > 0`` appends lemma
    campaigns of that size.
    """
    watch = Stopwatch()
    with watch("classify"):
        cls = classify(chain, tol)
    with watch("operator_table"):
        table = build_table(chain, horizon)
    with watch("conditional_norms"):
        norms = conditional_norms(chain, horizon, table, caps)
    with watch("conditions"):
        rows = condition_report(chain, horizon, table, norms, tol, caps)
        exact = {}
        for cid, which in (("SQRT_P", "Q"), ("SQRT_F", "Q*")):
            member, resid = exact_range_member(chain, which)
            exact[cid] = {"exact_member": bool(member), "residual": _num(resid)}
    with watch("variance"):
        profile = variance_profile(chain, horizon, table, norms.bridge)
    with watch("implications"):
        implications = [i.as_dict() for i in check_implications(chain, horizon, norms, table)]
    for imp in implications:
        imp["lhs"], imp["rhs"] = _num(imp["lhs"]), _num(imp["rhs"])
    clt = _clt_section(chain, cls, profile, horizon, n_paths, seed, workers, caps, tol, watch)
    campaigns = []
    if lemma_cases > 0:
        with watch("lemma_campaigns"):
            campaigns = [c.as_dict() for c in run_campaigns(lemma_cases, seed)]

    cdict = cls.as_dict()
    cdict["normality_defect"] = _num(cdict["normality_defect"])
    cdict["reversibility_defect"] = _num(cdict["reversibility_defect"])
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "analyze",
        "chain_fingerprint": chain_fingerprint,
        "master_seed": int(seed),
        "chain": {
            "n_states": chain.n_states,
            "stationary": _nums(chain.stationary),
            "recentered_by": _num(chain.metadata.get("recentered_by", 0.0)),
        },
        "settings": {
            "horizon": int(horizon),
            "n_paths": int(n_paths),
            "tolerances": tol.as_dict(),
            "caps": caps.as_dict(),
        },
        "classification": cdict,
        "conditions": [r.as_dict() for r in rows],
        "sqrt_exact": exact,
        "variance": _variance_section(profile, horizon),
        "implications": implications,
        "clt": clt,
        "lemma_campaigns": campaigns,
        "timings": {k: round(v, 6) for k, v in sorted(watch.times.items())},
    }
    for r in report["conditions"]:
        r["partial_sum"] = _num(r["partial_sum"])
    return report, profile


def analyze_spec_bytes(data: bytes, **kwargs):
    """Parse chain-spec bytes and analyze; the fingerprint hashes the raw bytes."""
    chain = parse_chain_spec(data.decode("utf-8"), kwargs.get("tol", DEFAULT_TOLERANCES))
    return analyze_chain(chain, fingerprint(data), **kwargs)


def campaign_report(n_cases=None, seed: int = 0, M: int = 4096):
    watch = Stopwatch()
    with watch("campaigns"):
        summaries = run_campaigns(n_cases, seed, M)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "lemmas",
        "master_seed": int(seed),
        "settings": {"M": int(M), "n_cases": n_cases},
        "campaigns": [s.as_dict() for s in summaries],
        "all_pass": all(s.all_pass for s in summaries),
        "timings": {k: round(v, 6) for k, v in watch.times.items()},
    }


# ---------------------------------------------------------------------------
# serialization


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings"}


def flatten(obj, prefix=""):
    """``(dotted.path, value)`` rows; list items are keyed by index, or by id."""
    rows = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows.extend(flatten(obj[k], f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            key = str(i)
            if isinstance(item, dict):
                key = str(item.get("condition_id") or item.get("lemma_id") or item.get("name") or i)
                if "statistic_kind" in item:
                    key = item["statistic_kind"]
            rows.extend(flatten(item, f"{prefix}.{key}"))
    else:
        rows.append((prefix, obj))
    return rows


def dumps_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, value in flatten(report):
        if isinstance(value, float):
            value = repr(value)
        elif value is None:
            value = ""
        w.writerow([key, value])
    return buf.getvalue()


def load_schema(kind: str) -> dict:
    text = resources.files("markovclt").joinpath("schemas", SCHEMA_FILES[kind]).read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: dict, kind: str | None = None):
    """Raise ``jsonschema.ValidationError`` when ``report`` breaks its schema."""
    import jsonschema

    kind = kind or report.get("command", "analyze")
    jsonschema.validate(report, load_schema(kind))
