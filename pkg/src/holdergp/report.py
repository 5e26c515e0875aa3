"""Run the analyses of a configuration and collect them into a report.

Each analysis yields a JSON-ready dict.  Capability and parameter errors are
recorded in the report and the run moves on to the next analysis.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import pathstats as ps
from . import regularity as rg
from .config import RunConfig
from .covariance import ou_spectral_measure
from .errors import CapabilityError, HolderGPError, InsufficientDataError, ParameterError
from .quadrature import QuadratureError
from .simulate import SimulationPlan, sample_paths, write_paths_csv

REPORT_VERSION = 1
# errors recorded in the report instead of aborting the run
RECORDED_ERRORS = (HolderGPError, QuadratureError, ValueError, ArithmeticError)


@dataclass
class AnalysisResult:
    name: str
    status: str  # "ok" or "error"
    wall_time: float
    result: dict = field(default_factory=dict)
    error: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"name": self.name, "status": self.status, "wall_time": self.wall_time}
        if self.status == "ok":
            out["result"] = self.result
        else:
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisResult":
        return cls(d["name"], d["status"], d["wall_time"], d.get("result", {}), d.get("error", {}))

    def verdicts(self):
        """Every ``{"holds": ..., "margin": ...}`` record inside the result."""
        stack = [self.result]
        while stack:
            obj = stack.pop()
            if isinstance(obj, dict):
                if "holds" in obj and "margin" in obj:
                    yield obj
                stack.extend(obj.values())
            elif isinstance(obj, list):
                stack.extend(obj)


@dataclass
class RegularityReport:
    config: dict
    analyses: list = field(default_factory=list)
    tool_version: str = __version__
    report_version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        return {
            "report_version": self.report_version,
            "tool_version": self.tool_version,
            "config": self.config,
            "analyses": [a.to_dict() for a in self.analyses],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RegularityReport":
        return cls(
            config=d["config"],
            analyses=[AnalysisResult.from_dict(a) for a in d["analyses"]],
            tool_version=d["tool_version"],
            report_version=d["report_version"],
        )

    @classmethod
    def from_json(cls, text: str) -> "RegularityReport":
        return cls.from_dict(json.loads(text))

    def violated(self) -> list:
        """Names of analyses with at least one verdict that does not hold."""
        return [a.name for a in self.analyses if any(not v["holds"] for v in a.verdicts())]

    def without_timings(self) -> dict:
        d = self.to_dict()
        for a in d["analyses"]:
            a.pop("wall_time")
        return d


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def _clean(obj):
    """JSON-ready copy: arrays to lists, numpy scalars to Python, non-finite floats to strings."""
    return _finite(json.loads(json.dumps(rg._jsonable(obj))))


# ---------------------------------------------------------------------------
# individual analyses
# ---------------------------------------------------------------------------


class _Context:
    def __init__(self, cfg: RunConfig, out_dir, threads: int):
        self.cfg = cfg
        self.out_dir = out_dir
        self.threads = threads
        self.model = cfg.build_model()
        self.grid = cfg.grid_points()
        self.paths = None

    def need_hurst(self) -> float:
        H = self.cfg.hurst
        if H is None:
            raise ParameterError("this analysis needs a candidate H; set 'H' in the config")
        return H

    def lags(self, key="lags"):
        s = self.cfg.settings[key]
        return rg.dyadic_lags(self.model.horizon, s["k_min"], s["k_max"])

    def check_grid(self):
        return rg.uniform_grid(self.model.horizon, self.cfg.settings["check_points"])

    def kernel(self):
        k = self.model.volterra_kernel
        if k is None:
            raise CapabilityError(f"model kind {self.model.kind!r} has no Volterra kernel")
        return k

    def measure(self):
        if self.model.kind == "spectral":
            return self.model.measure
        if self.model.kind == "ou":
            return ou_spectral_measure(self.model.params["sigma"], self.model.params["theta"])
        raise CapabilityError(f"model kind {self.model.kind!r} has no spectral measure")

    def simulated(self):
        if self.paths is None:
            cfg = self.cfg
            plan = SimulationPlan(self.model, self.grid, cfg.n_paths, cfg.seed, cfg.method)
            self.paths = sample_paths(plan, threads=self.threads)
        return self.paths


# kinds whose metric needs quadrature; they get the shorter lag ladder
_QUAD_KINDS = ("volterra", "selfsimilar")


def _metric_fit(ctx):
    key = "quad_lags" if ctx.model.kind in _QUAD_KINDS else "lags"
    h, d = rg.metric_decay(ctx.model, ctx.grid, ctx.lags(key))
    fit = rg.fit_holder_exponent(h, d)
    out = {"fit": fit.to_dict(), "holder_index": fit.exponent}
    H = ctx.cfg.hurst
    if H is not None:
        out["H"] = H
        out["deviation"] = fit.exponent - H
    return out


def _kc(ctx):
    H = ctx.need_hurst()
    return {"verdicts": [rg.kc_check(ctx.model, H, e, ctx.grid).to_dict() for e in ctx.cfg.epsilons]}


def _divergence(ctx):
    H = ctx.need_hurst()
    s = ctx.cfg.settings["divergence"]
    ks = list(range(s["k_min"], s["k_max"] + 1))
    grids = [rg.dyadic_grid(ctx.model.horizon, k) for k in ks]
    scans = []
    for e in [0.0] + list(ctx.cfg.epsilons):
        c = rg.divergence_scan(ctx.model, H, e, grids)
        scans.append(
            {
                "eps": e,
                "constants": c,
                "nondecreasing": bool(np.all(np.diff(c) >= 0)),
                "total_growth": float(c[-1] / c[0] - 1.0),
                "last_relative_change": rg.relative_change(c),
                "stable": rg.is_stable(c),
            }
        )
    return {"H": H, "grid_levels": ks, "scans": scans}


def _pair(fits):
    f1, f2 = fits
    idx = [f.exponent / 2 for f in (f1, f2) if not f.vacuous]
    return {
        "near_diagonal": f1.to_dict(),
        "kernel_increment": f2.to_dict(),
        "holder_index": min(idx) if idx else math.inf,
    }


def _volterra(ctx):
    return _pair(rg.volterra_conditions_check(ctx.kernel(), ctx.check_grid(), ctx.lags("quad_lags"), ctx.model.quad))


def _selfsimilar(ctx):
    if ctx.model.kind != "selfsimilar":
        raise CapabilityError(f"model kind {ctx.model.kind!r} is not self-similar")
    return _pair(
        rg.selfsimilar_conditions_check(ctx.model.profile, ctx.check_grid(), ctx.lags("quad_lags"), ctx.model.quad)
    )


def _alos(ctx):
    H = ctx.need_hurst()
    return {"verdict": rg.alos_check(ctx.kernel(), H, ctx.check_grid(), ctx.model.quad).to_dict()}


def _selfsimilar_sufficient(ctx):
    if ctx.model.kind != "selfsimilar":
        raise CapabilityError(f"model kind {ctx.model.kind!r} is not self-similar")
    H = ctx.need_hurst()
    pts = np.linspace(0.0, 1.0, ctx.cfg.settings["check_points"] + 2)[1:-1]
    return {"verdict": rg.selfsimilar_sufficient_check(ctx.model.profile, H, pts).to_dict()}


def _fredholm(ctx):
    H = ctx.need_hurst()
    kernel = ctx.kernel()
    s = ctx.cfg.settings["fredholm"]
    T = ctx.model.horizon
    u = np.linspace(0.0, T, s["u_points"] + 1)[1:]
    f = s["scale"] * u ** s["exponent"]
    grid = ctx.check_grid()
    vs = [rg.fredholm_dominating_check(kernel.K, f, u, H, e, grid).to_dict() for e in ctx.cfg.epsilons]
    return {"dominating": {"scale": s["scale"], "exponent": s["exponent"]}, "verdicts": vs}


def _stationary(ctx):
    fit = rg.stationary_increment_check(ctx.model, ctx.lags(), ctx.cfg.epsilons[0])
    return {"fit": fit.to_dict(), "holder_index": fit.exponent / 2}


def _spectral(ctx):
    fit = rg.spectral_condition_check(ctx.measure(), ctx.lags("quad_lags"), ctx.model.quad)
    return {"fit": fit.to_dict(), "holder_index": fit.exponent / 2}


def _simulate(ctx):
    paths = ctx.simulated()
    dest = os.path.join(ctx.out_dir, "paths.csv")
    write_paths_csv(paths, dest)
    meta = {k: v for k, v in paths[0].meta.items() if k != "path_index"}
    return {"n_paths": len(paths), "n_points": int(ctx.grid.size), "file": "paths.csv", "meta": meta}


def _pathstats(ctx):
    paths = ctx.simulated()
    grid = ctx.grid
    X = np.stack([p.values for p in paths])
    out = {"n_paths": len(paths)}
    H = ctx.cfg.hurst
    try:
        exps = np.array([ps.path_holder_exponent(p).exponent for p in paths])
        out["exponent"] = {"mean": float(exps.mean()), "std": float(exps.std()), "values": exps}
    except (CapabilityError, InsufficientDataError) as exc:
        out["exponent"] = {"error": str(exc)}
    if H is None:
        return out
    eps = ctx.cfg.epsilons[0]
    C, _, restricted = ps.holder_constants(grid, X, H - eps)
    ps.write_constants_csv(C, os.path.join(ctx.out_dir, "constants.csv"))
    out["constants"] = {
        "order": H - eps,
        "restricted": restricted,
        "max": float(C.max()),
        "median": float(np.median(C)),
        "file": "constants.csv",
    }
    s = ctx.cfg.settings["pathstats"]
    if len(paths) >= 100:
        c_fit = ps.moment_bound_constant(C)
        series = ps.exp_moment_series(s["a"], c_fit, s["kappa"])
        out["exp_moment"] = {"moment_constant": c_fit, "series": series.to_dict()}
        try:
            est = ps.exp_moment_estimate(C, s["a"], s["kappa"], c_fit=c_fit, seed=ctx.cfg.seed)
            out["exp_moment"]["estimate"] = est.to_dict()
        except ParameterError as exc:
            out["exp_moment"]["estimate"] = {"error": str(exc)}
    if len(paths) >= 2 and 0 < eps < 2 * H:
        try:
            grr = ps.grr_constant_estimate(paths, H, eps, seed=ctx.cfg.seed)
            out["grr"] = grr.to_dict()
        except RECORDED_ERRORS as exc:
            out["grr"] = {"error": str(exc)}
    return out


HANDLERS = {
    "metric-fit": _metric_fit,
    "kc": _kc,
    "divergence": _divergence,
    "volterra": _volterra,
    "alos": _alos,
    "selfsimilar": _selfsimilar,
    "selfsimilar-sufficient": _selfsimilar_sufficient,
    "fredholm": _fredholm,
    "stationary-increment": _stationary,
    "spectral": _spectral,
    "simulate": _simulate,
    "pathstats": _pathstats,
}


def run(cfg: RunConfig, out_dir=None, threads: int = 1, analyses=None) -> RegularityReport:
    """Execute the configured analyses in order and write ``report.json``.

    ``analyses`` overrides the configured list.  Returns the report.
    """
    out_dir = cfg.out if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    ctx = _Context(cfg, out_dir, threads)
    report = RegularityReport(config=_clean(cfg.to_dict()))
    for name in cfg.analyses if analyses is None else analyses:
        start = time.perf_counter()
        try:
            res = AnalysisResult(name, "ok", 0.0, result=_clean(HANDLERS[name](ctx)))
        except RECORDED_ERRORS as exc:
            res = AnalysisResult(name, "error", 0.0, error={"type": type(exc).__name__, "message": str(exc)})
        res.wall_time = time.perf_counter() - start
        report.analyses.append(res)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    return report


def _fmt(x, spec):
    return format(x, spec) if isinstance(x, (int, float)) else str(x)


def summary(report: RegularityReport) -> str:
    """One line per analysis for terminal output."""
    lines = [f"holdergp {report.tool_version}  model {report.config['model']}"]
    for a in report.analyses:
        if a.status == "error":
            lines.append(f"  {a.name:<24} error  {a.error['type']}: {a.error['message']}")
            continue
        r = a.result
        bits = []
        if "holder_index" in r:
            bits.append(f"index={_fmt(r['holder_index'], '.6g')}")
        verdicts = list(a.verdicts())
        if verdicts:
            bits.append(f"verdicts {sum(v['holds'] for v in verdicts)}/{len(verdicts)} hold")
        if "scans" in r:
            bits += [f"eps={s['eps']:g}: growth={_fmt(s['total_growth'], '.3g')}" for s in r["scans"]]
        if "exponent" in r and "mean" in r.get("exponent", {}):
            bits.append(f"path exponent={_fmt(r['exponent']['mean'], '.4g')}")
        lines.append(f"  {a.name:<24} ok     {'  '.join(bits)}  ({a.wall_time:.2f}s)")
    return "\n".join(lines)
