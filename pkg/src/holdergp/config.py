"""Run configuration: a YAML document parsed strictly.

Unknown keys, wrong types and missing required fields are rejected with the
offending key and its line number.  A minimal configuration names only the
model::

    model:
      kind: fbm
      H: 0.7
    analyses: [metric-fit, kc]

Defaults: ``grid.n = 1024`` uniform points on ``[0, horizon]`` (horizon 1
unless the model sets it), ``seed = 42``, ``epsilons = [0.1]``,
``n_paths = 1``, ``method = cholesky``, ``out = "out"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .covariance import (
    CovarianceModel,
    brownian_kernel,
    constant_profile,
    fractional_kernel,
    ou_spectral_measure,
    power_profile,
    read_kernel_table,
)

ANALYSES = (
    "metric-fit",
    "kc",
    "divergence",
    "volterra",
    "alos",
    "selfsimilar",
    "selfsimilar-sufficient",
    "fredholm",
    "stationary-increment",
    "spectral",
    "simulate",
    "pathstats",
)

# allowed model keys per kind, beyond ``kind`` and ``horizon``
MODEL_KEYS = {
    "fbm": {"H"},
    "bm": set(),
    "ou": {"sigma", "theta"},
    "modulated-fbm": {"H", "power"},
    "spectral": {"density", "sigma", "theta", "truncation"},
    "volterra": {"kernel", "H", "table"},
    "selfsimilar": {"profile", "beta", "c", "H"},
}
REQUIRED_MODEL_KEYS = {
    "fbm": {"H"},
    "ou": {"sigma", "theta"},
    "modulated-fbm": {"H"},
    "spectral": {"density"},
    "volterra": {"kernel"},
    "selfsimilar": {"profile"},
}

DEFAULT_SETTINGS = {
    "lags": {"k_min": 4, "k_max": 16},
    "divergence": {"k_min": 6, "k_max": 16},
    "check_points": 9,
    "quad_lags": {"k_min": 4, "k_max": 10},
    "pathstats": {"a": 0.1, "kappa": 1.5},
    "fredholm": {"scale": 1.0, "exponent": 0.0, "u_points": 64},
}


class ConfigError(ValueError):
    """Configuration rejected; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    horizon: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out


@dataclass
class GridSpec:
    n: Optional[int] = 1024
    points: Optional[list] = None

    def to_dict(self) -> dict:
        return {"points": list(self.points)} if self.points is not None else {"n": self.n}


@dataclass
class RunConfig:
    model: ModelSpec
    grid: GridSpec = field(default_factory=GridSpec)
    analyses: list = field(default_factory=list)
    epsilons: list = field(default_factory=lambda: [0.1])
    H: Optional[float] = None
    seed: int = 42
    n_paths: int = 1
    method: str = "cholesky"
    out: str = "out"
    settings: dict = field(default_factory=lambda: _merge(DEFAULT_SETTINGS, {}))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": self.grid.to_dict(),
            "analyses": list(self.analyses),
            "epsilons": list(self.epsilons),
            "H": self.H,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "method": self.method,
            "out": self.out,
            "settings": self.settings,
        }

    @property
    def hurst(self) -> Optional[float]:
        """Explicit ``H``, else the one implied by the model, else ``None``."""
        if self.H is not None:
            return self.H
        if self.model.kind in ("fbm", "modulated-fbm"):
            return self.model.params["H"]
        if self.model.kind == "bm" or (self.model.kind == "volterra" and self.model.params.get("kernel") == "brownian"):
            return 0.5
        if self.model.kind == "volterra" and self.model.params.get("kernel") == "fractional":
            return self.model.params["H"]
        return None

    def build_model(self) -> CovarianceModel:
        return build_model(self.model)

    def grid_points(self) -> np.ndarray:
        if self.grid.points is not None:
            return np.asarray(self.grid.points, dtype=float)
        return np.linspace(0.0, self.horizon, self.grid.n)

    @property
    def horizon(self) -> float:
        if self.model.horizon is not None:
            return self.model.horizon
        return 0.3 if self.model.kind == "modulated-fbm" else 1.0


def _merge(base: dict, over: dict) -> dict:
    out = {}
    for k, v in base.items():
        out[k] = _merge(v, over.get(k, {})) if isinstance(v, dict) else over.get(k, v)
    return out


def build_model(spec: ModelSpec) -> CovarianceModel:
    p = spec.params
    horizon = spec.horizon
    kw = {} if horizon is None else {"horizon": horizon}
    if spec.kind == "fbm":
        return CovarianceModel.fbm(p["H"], **kw)
    if spec.kind == "bm":
        return CovarianceModel.bm(**kw)
    if spec.kind == "ou":
        return CovarianceModel.ou(p["sigma"], p["theta"], **kw)
    if spec.kind == "modulated-fbm":
        return CovarianceModel.modulated_fbm(p["H"], horizon if horizon is not None else 0.3, p.get("power", 0.5))
    if spec.kind == "spectral":
        return CovarianceModel.spectral(
            ou_spectral_measure(p.get("sigma", 1.0), p.get("theta", 1.0), p.get("truncation", math.inf)), **kw
        )
    if spec.kind == "volterra":
        name = p["kernel"]
        if name == "brownian":
            kernel = brownian_kernel()
        elif name == "fractional":
            kernel = fractional_kernel(p["H"])
        else:
            kernel = read_kernel_table(p["table"])
        return CovarianceModel.volterra(kernel, **kw)
    if spec.kind == "selfsimilar":
        if p["profile"] == "constant":
            prof = constant_profile(p.get("c", 1.0), p.get("beta", 0.5))
        else:
            prof = power_profile(p["beta"], p["H"], p.get("c", 1.0))
        return CovarianceModel.selfsimilar(prof, **kw)
    raise ConfigError(f"unknown model kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


class _Doc:
    """Parsed YAML plus the line of every mapping key."""

    def __init__(self, text: str):
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None)
        self.lines: dict = {}
        self.data = self._convert(node, ()) if node is not None else {}

    def _convert(self, node, path):
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = k.value
                if key in out:
                    raise ConfigError(f"duplicate key {'.'.join(path + (key,))!r}", k.start_mark.line + 1)
                self.lines[path + (key,)] = k.start_mark.line + 1
                out[key] = self._convert(v, path + (key,))
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, path) for v in node.value]
        return yaml.SafeLoader("").construct_object(node)

    def line(self, path) -> Optional[int]:
        path = tuple(path)
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return None


def _type_name(t):
    return {float: "a number", int: "an integer", str: "a string", list: "a list", dict: "a mapping", bool: "a boolean"}[t]


def _get(doc, mapping, path, key, typ, default=None, required=False):
    full = path + (key,)
    name = ".".join(full)
    if key not in mapping:
        if required:
            raise ConfigError(f"missing required key {name!r}", doc.line(path))
        return default
    val = mapping[key]
    ok = isinstance(val, typ) and not (typ in (int, float) and isinstance(val, bool))
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val, ok = float(val), True
    if typ is float and isinstance(val, str) and val.strip().lower() in ("inf", ".inf", "infinity"):
        val, ok = math.inf, True
    if not ok:
        raise ConfigError(f"key {name!r} must be {_type_name(typ)}, got {type(val).__name__}", doc.line(full))
    return val


def _reject_unknown(doc, mapping, path, allowed):
    for key in mapping:
        if key not in allowed:
            name = ".".join(path + (key,))
            raise ConfigError(f"unknown key {name!r}", doc.line(path + (key,)))


def _parse_model(doc, data) -> ModelSpec:
    m = _get(doc, data, (), "model", dict, required=True)
    path = ("model",)
    kind = _get(doc, m, path, "kind", str, required=True)
    if kind not in MODEL_KEYS:
        raise ConfigError(f"key 'model.kind' must be one of {sorted(MODEL_KEYS)}, got {kind!r}", doc.line(path + ("kind",)))
    _reject_unknown(doc, m, path, MODEL_KEYS[kind] | {"kind", "horizon"})
    for key in REQUIRED_MODEL_KEYS.get(kind, ()):
        _get(doc, m, path, key, object, required=True)
    params = {}
    for key in MODEL_KEYS[kind]:
        if key not in m:
            continue
        typ = str if key in ("density", "kernel", "profile", "table") else float
        params[key] = _get(doc, m, path, key, typ)
    horizon = _get(doc, m, path, "horizon", float)
    choices = {"density": ("ou",), "kernel": ("brownian", "fractional", "table"), "profile": ("constant", "power")}
    for key, allowed in choices.items():
        if key in params and params[key] not in allowed:
            raise ConfigError(f"key 'model.{key}' must be one of {list(allowed)}", doc.line(path + (key,)))
    needs = {("kernel", "fractional"): "H", ("kernel", "table"): "table", ("profile", "power"): "H"}
    for (key, val), extra in needs.items():
        if params.get(key) == val and extra not in params:
            raise ConfigError(f"missing required key 'model.{extra}' for {key} {val!r}", doc.line(path + (key,)))
    if params.get("profile") == "power" and "beta" not in params:
        raise ConfigError("missing required key 'model.beta' for profile 'power'", doc.line(path + ("profile",)))
    if horizon is not None and not horizon > 0:
        raise ConfigError("key 'model.horizon' must be positive", doc.line(path + ("horizon",)))
    return ModelSpec(kind, params, horizon)


def _parse_grid(doc, data) -> GridSpec:
    g = _get(doc, data, (), "grid", dict, default={})
    _reject_unknown(doc, g, ("grid",), {"n", "points"})
    if "n" in g and "points" in g:
        raise ConfigError("give either 'grid.n' or 'grid.points', not both", doc.line(("grid",)))
    if "points" in g:
        pts = _get(doc, g, ("grid",), "points", list)
        if len(pts) < 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pts):
            raise ConfigError("key 'grid.points' must list at least two numbers", doc.line(("grid", "points")))
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ConfigError("key 'grid.points' must be strictly increasing", doc.line(("grid", "points")))
        return GridSpec(n=None, points=[float(x) for x in pts])
    n = _get(doc, g, ("grid",), "n", int, default=1024)
    if n < 2:
        raise ConfigError("key 'grid.n' must be at least 2", doc.line(("grid", "n")))
    return GridSpec(n=n)


def _parse_settings(doc, data) -> dict:
    s = _get(doc, data, (), "settings", dict, default={})
    _check_settings(doc, s, ("settings",), DEFAULT_SETTINGS)
    return _merge(DEFAULT_SETTINGS, s)


def _check_settings(doc, given, path, template):
    _reject_unknown(doc, given, path, set(template))
    for key, default in template.items():
        if key not in given:
            continue
        if isinstance(default, dict):
            sub = _get(doc, given, path, key, dict)
            _check_settings(doc, sub, path + (key,), default)
        else:
            given[key] = _get(doc, given, path, key, type(default))


TOP_KEYS = {"model", "grid", "analyses", "epsilons", "H", "seed", "n_paths", "method", "out", "settings"}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    doc = _Doc(text)
    data = doc.data
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", 1)
    _reject_unknown(doc, data, (), TOP_KEYS)
    model = _parse_model(doc, data)
    grid = _parse_grid(doc, data)
    analyses = _get(doc, data, (), "analyses", list, default=[])
    for name in analyses:
        if name not in ANALYSES:
            raise ConfigError(f"unknown analysis {name!r} in 'analyses'; expected one of {list(ANALYSES)}", doc.line(("analyses",)))
    if len(set(analyses)) != len(analyses):
        raise ConfigError("'analyses' lists an analysis twice", doc.line(("analyses",)))
    eps = _get(doc, data, (), "epsilons", list, default=[0.1])
    if not eps or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps):
        raise ConfigError("key 'epsilons' must be a nonempty list of numbers", doc.line(("epsilons",)))
    eps = [float(e) for e in eps]
    H = _get(doc, data, (), "H", float)
    seed = _get(doc, data, (), "seed", int, default=42)
    if not 0 <= seed < 2**64:
        raise ConfigError("key 'seed' must be an unsigned 64-bit integer", doc.line(("seed",)))
    n_paths = _get(doc, data, (), "n_paths", int, default=1)
    if n_paths < 1:
        raise ConfigError("key 'n_paths' must be at least 1", doc.line(("n_paths",)))
    method = _get(doc, data, (), "method", str, default="cholesky")
    if method not in ("cholesky", "circulant"):
        raise ConfigError("key 'method' must be 'cholesky' or 'circulant'", doc.line(("method",)))
    out = _get(doc, data, (), "out", str, default="out")
    cfg = RunConfig(
        model=model,
        grid=grid,
        analyses=list(analyses),
        epsilons=eps,
        H=H,
        seed=seed,
        n_paths=n_paths,
        method=method,
        out=out,
        settings=_parse_settings(doc, data),
    )
    if H is not None and not 0 < H <= 1:
        raise ConfigError("key 'H' must lie in (0, 1]", doc.line(("H",)))
    hurst = cfg.hurst
    if hurst is not None:
        for e in eps:
            if not 0 < e < hurst:
                where = ("H",) if H is not None else ("model",)
                raise ConfigError(
                    f"every epsilon must lie in (0, H={hurst:g}); got {e:g}", doc.line(("epsilons",)) or doc.line(where)
                )
    else:
        for e in eps:
            if not e > 0:
                raise ConfigError(f"every epsilon must be positive; got {e:g}", doc.line(("epsilons",)))
    if cfg.grid.points is not None and (cfg.grid.points[0] < 0 or cfg.grid.points[-1] > cfg.horizon * (1 + 1e-12)):
        raise ConfigError(f"grid points must lie in [0, {cfg.horizon:g}]", doc.line(("grid", "points")))
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def config_from_dict(data: dict) -> RunConfig:
    """Rebuild a configuration from :meth:`RunConfig.to_dict` output."""
    clean = {k: v for k, v in data.items() if v is not None}
    return parse_config(yaml.safe_dump(clean, sort_keys=False))

