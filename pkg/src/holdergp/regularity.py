"""Hölder exponents and constants read off the increment metric, plus the
condition checkers for stationary-increment, stationary, Fredholm, Volterra
and self-similar processes.

Exponent conventions: :func:`metric_decay` fits ``d`` itself, so its
exponent is the Hölder index.  Every integral condition (Volterra,
self-similar, spectral, variance) is fitted on the squared scale and reports
``2H``; halve it to get the index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .covariance import (
    _modulated_increment_var,
    STATIONARY_INCREMENT_KINDS,
    CovarianceModel,
    SelfSimilarProfile,
    SpectralMeasure,
    VolterraKernel,
    cov_eval,
    increment_stddev,
    selfsimilar_kernel,
    spectral_increment_integral,
    volterra_increment_integrals,
    volterra_near_integral,
)
from .errors import CapabilityError, InsufficientDataError, ParameterError
from .quadrature import DEFAULT_QUAD, QuadSettings, integrate_interval

# relative change below which a refining sequence of constants counts as stable
STABILITY_TOL = 0.05
# pair scans above this many grid points switch to a lag-restricted scan
MAX_FULL_SCAN = 4096
# a sufficient-condition margin this far below zero is still round-off
MARGIN_TOL = 1e-12

_LAG_KINDS = ("fbm", "bm", "ou", "spectral")  # d(s, t) depends on |t - s| only


@dataclass
class ExponentFit:
    """Least-squares line through ``(log h, log D(h))``."""

    exponent: float
    log_constant: float
    max_residual: float
    lag_range: tuple
    n_lags: int
    dropped: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def constant(self) -> float:
        return math.exp(self.log_constant)

    @property
    def vacuous(self) -> bool:
        """True when every value vanished, so no power law bounds it from below."""
        return self.n_lags == 0

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "log_constant": self.log_constant,
            "max_residual": self.max_residual,
            "lag_range": list(self.lag_range),
            "n_lags": self.n_lags,
            "dropped": [float(x) for x in self.dropped],
            "details": _jsonable(self.details),
        }


@dataclass
class ConditionVerdict:
    """Outcome of one condition check; ``holds`` iff ``margin >= 0``."""

    name: str
    holds: bool
    margin: float
    witness: Optional[tuple] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.holds != (self.margin >= 0):
            raise ValueError(f"verdict {self.name}: holds={self.holds} but margin={self.margin}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "holds": self.holds,
            "margin": self.margin,
            "witness": None if self.witness is None else [float(x) for x in self.witness],
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


# ---------------------------------------------------------------------------
# grids and lags
# ---------------------------------------------------------------------------


def dyadic_lags(horizon: float = 1.0, k_min: int = 4, k_max: int = 16) -> np.ndarray:
    """Lags ``horizon * 2**-k`` for ``k = k_min..k_max``, increasing."""
    ks = np.arange(k_max, k_min - 1, -1)
    return horizon * np.ldexp(1.0, -ks)


def dyadic_grid(horizon: float, k: int) -> np.ndarray:
    """Points ``j * 2**-k`` in ``[0, horizon]``."""
    step = math.ldexp(1.0, -k)
    n = int(math.floor(horizon / step * (1 + 1e-12))) + 1
    return np.arange(n) * step


def uniform_grid(horizon: float = 1.0, n: int = 1024) -> np.ndarray:
    return np.linspace(0.0, horizon, n)


# ---------------------------------------------------------------------------
# exponent fitting
# ---------------------------------------------------------------------------


def fit_holder_exponent(lags, values) -> ExponentFit:
    """Ordinary least squares of ``log D(h)`` on ``log h``.

    Zero values are dropped (listed in ``dropped``); at least three positive
    points must remain.
    """
    h = np.asarray(lags, dtype=float).ravel()
    D = np.asarray(values, dtype=float).ravel()
    if h.shape != D.shape:
        raise ParameterError("lags and values differ in length")
    if np.any(h <= 0) or np.any(~np.isfinite(h)):
        raise ParameterError("lags must be positive and finite")
    if np.any(D < 0) or np.any(np.isnan(D)):
        raise ParameterError("values must be nonnegative")
    keep = D > 0
    dropped = h[~keep].tolist()
    if dropped:
        warnings.warn(f"dropping {len(dropped)} lag(s) with zero value from the fit", stacklevel=2)
    h, D = h[keep], D[keep]
    if np.unique(h).size < 3:
        raise InsufficientDataError(f"need at least 3 distinct positive points, got {np.unique(h).size}")
    x = np.log(h)
    y = np.log(D)
    slope, intercept = np.polyfit(x, y, 1)
    resid = np.abs(y - (slope * x + intercept))
    return ExponentFit(
        exponent=float(slope),
        log_constant=float(intercept),
        max_residual=float(resid.max()),
        lag_range=(float(h.min()), float(h.max())),
        n_lags=int(h.size),
        dropped=dropped,
    )


def _fit_or_vacuous(lags, values) -> ExponentFit:
    values = np.asarray(values, dtype=float)
    if np.all(values == 0):
        lags = np.asarray(lags, dtype=float)
        return ExponentFit(
            exponent=math.inf,
            log_constant=-math.inf,
            max_residual=0.0,
            lag_range=(float(lags.min()), float(lags.max())),
            n_lags=0,
            dropped=lags.tolist(),
            details={"vacuous": True},
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return fit_holder_exponent(lags, values)


# ---------------------------------------------------------------------------
# the metric side of the main criterion
# ---------------------------------------------------------------------------


def metric_decay(model: CovarianceModel, grid, lags):
    """Uniform modulus ``D(h) = max_t d(t, t + h)`` over base points ``t`` in ``grid``.

    Returns ``(lags, values)`` restricted to lags with at least one admissible
    base point.
    """
    grid = np.asarray(grid, dtype=float)
    lags = np.asarray(lags, dtype=float)
    top = model.horizon * (1 + 1e-12)
    out_h, out_d = [], []
    for h in lags:
        base = grid[grid + h <= top]
        if base.size == 0:
            warnings.warn(f"lag {h:g} has no admissible base point; dropped", stacklevel=2)
            continue
        if model.kind in _LAG_KINDS:
            base = base[:1]  # stationary increments: any base point will do
        ends = np.minimum(base + h, model.horizon)
        d = np.atleast_1d(increment_stddev(model, base, ends))
        out_h.append(h)
        out_d.append(float(d.max()))
    return np.array(out_h), np.array(out_d)


def _pair_ratio_max(model: CovarianceModel, a: float, grid: np.ndarray, max_full: int = MAX_FULL_SCAN):
    """``max d(t_i, t_j) / |t_i - t_j|^a`` over grid pairs, with its argmax.

    Stationary-increment families on uniform grids need one evaluation per
    offset.  Otherwise every pair is visited up to ``max_full`` points, and
    above that only the offsets ``1..32`` plus a geometric ladder.
    """
    n = grid.size
    if n < 2:
        raise ParameterError("need at least two grid points")
    steps = np.diff(grid)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0)
    restricted = False
    if model.kind in _LAG_KINDS and uniform:
        offsets = np.arange(1, n)
        lag = offsets * steps[0]
        d = np.atleast_1d(increment_stddev(model, np.zeros_like(lag), lag))
        ratio = d / lag**a
        k = int(np.argmax(ratio))
        return float(ratio[k]), (float(grid[0]), float(grid[k + 1])), n * (n - 1) // 2, False
    if n <= max_full:
        offsets = np.arange(1, n)
    else:
        restricted = True
        ladder = np.unique(np.round(np.geomspace(1, n - 1, 48)).astype(int))
        offsets = np.unique(np.concatenate([np.arange(1, min(33, n)), ladder, [n - 1]]))
    best = -math.inf
    witness = None
    n_pairs = 0
    if model.kind == "modulated-fbm":
        model.check_domain(grid)
        fmod = model.modulation(grid)
    for k in offsets:
        lo, hi = grid[:-k], grid[k:]
        if model.kind == "modulated-fbm":
            var = _modulated_increment_var(model, lo, hi, fmod[:-k], fmod[k:])
            d = np.sqrt(var) * abs(model.amplitude)
        else:
            d = np.atleast_1d(increment_stddev(model, lo, hi))
        ratio = d / (hi - lo) ** a
        j = int(np.argmax(ratio))
        n_pairs += ratio.size
        if ratio[j] > best:
            best = float(ratio[j])
            witness = (float(lo[j]), float(hi[j]))
    return best, witness, n_pairs, restricted


def kc_check(
    model: CovarianceModel, H: float, eps: float, grid, max_full: int = MAX_FULL_SCAN
) -> ConditionVerdict:
    """Smallest ``c`` with ``d(t, s) <= c |t - s|^(H - eps)`` on the grid.

    On a finite grid the constant is always finite; what carries information
    is how it behaves under refinement (see :func:`divergence_scan`).
    """
    if not 0 < eps < H:
        raise ParameterError(f"need 0 < eps < H, got eps={eps}, H={H}")
    grid = np.asarray(grid, dtype=float)
    c, witness, n_pairs, restricted = _pair_ratio_max(model, H - eps, grid, max_full)
    finite = math.isfinite(c)
    return ConditionVerdict(
        name="increment-power-bound",
        holds=finite,
        margin=0.0 if finite else -math.inf,
        witness=witness,
        details={
            "constant": c,
            "order": H - eps,
            "H": H,
            "eps": eps,
            "n_points": int(grid.size),
            "n_pairs": int(n_pairs),
            "restricted": restricted,
        },
    )


def divergence_scan(
    model: CovarianceModel, H: float, eps: float, grids: Sequence, max_full: int = MAX_FULL_SCAN
) -> np.ndarray:
    """Grid constants of :func:`kc_check` along refining grids; ``eps = 0`` allowed."""
    if eps < 0 or eps >= H:
        raise ParameterError(f"need 0 <= eps < H, got eps={eps}, H={H}")
    out = []
    for g in grids:
        c, _, _, _ = _pair_ratio_max(model, H - eps, np.asarray(g, dtype=float), max_full)
        out.append(c)
    return np.array(out)


def relative_change(seq) -> float:
    """Relative change between the last two entries of a sequence."""
    seq = np.asarray(seq, dtype=float)
    if seq.size < 2:
        raise InsufficientDataError("need at least two values")
    a, b = seq[-2], seq[-1]
    if a == b:
        return 0.0
    return float(abs(b - a) / max(abs(a), abs(b)))


def is_stable(seq, tol: float = STABILITY_TOL) -> bool:
    return relative_change(seq) < tol


# ---------------------------------------------------------------------------
# corollaries
# ---------------------------------------------------------------------------


def stationary_increment_check(model: CovarianceModel, lags, eps: Optional[float] = None) -> ExponentFit:
    """Exponent of the variance ``R(t, t)`` in ``t`` (squared scale).

    With ``eps`` the fit also records ``c_eps = max R(t,t) / t^(exponent - eps)``.
    """
    if model.kind not in STATIONARY_INCREMENT_KINDS:
        raise CapabilityError(
            f"model kind {model.kind!r} is not declared to have stationary increments"
        )
    lags = np.asarray(lags, dtype=float)
    var = np.atleast_1d(cov_eval(model, lags, lags))
    fit = fit_holder_exponent(lags, var)
    fit.details["quantity"] = "variance"
    if eps is not None:
        fit.details["eps"] = eps
        fit.details["c_eps"] = float(np.max(var / lags ** (fit.exponent - eps)))
    return fit


def spectral_condition_check(
    measure: SpectralMeasure, lags, quad: QuadSettings = DEFAULT_QUAD
) -> ExponentFit:
    """Exponent of ``int_0^L (1 - cos(lambda t)) density`` in ``t`` (squared scale)."""
    lags = np.asarray(lags, dtype=float)
    vals = np.array([spectral_increment_integral(measure, h, quad) for h in lags])
    fit = fit_holder_exponent(lags, vals)
    fit.details["quantity"] = "spectral-increment-integral"
    fit.details["tail_mass"] = measure.tail_mass()
    return fit


def _volterra_maxima(kernel, grid, lags, quad):
    grid = np.asarray(grid, dtype=float)
    top = grid[-1] * (1 + 1e-12)
    near_max, far_max, used = [], [], []
    for h in np.asarray(lags, dtype=float):
        base = grid[grid + h <= top]
        if base.size == 0:
            warnings.warn(f"lag {h:g} has no admissible base point; dropped", stacklevel=3)
            continue
        m1 = m2 = 0.0
        for s in base:
            i1, i2 = volterra_increment_integrals(kernel, float(s), float(s + h), quad)
            m1 = max(m1, i1)
            m2 = max(m2, i2)
        near_max.append(m1)
        far_max.append(m2)
        used.append(h)
    return np.array(used), np.array(near_max), np.array(far_max)


def volterra_conditions_check(
    kernel: VolterraKernel, grid, lags, quad: QuadSettings = DEFAULT_QUAD
) -> tuple[ExponentFit, ExponentFit]:
    """Fits of ``max_s int_s^t K(t,u)^2 du`` and ``max_s int_0^s (K(t,u)-K(s,u))^2 du``
    against ``t - s`` (squared scale).

    When the second integral vanishes at every lag the returned fit is vacuous
    (``n_lags == 0``, exponent ``inf``).
    """
    h, near, far = _volterra_maxima(kernel, grid, lags, quad)
    fit1 = _fit_or_vacuous(h, near)
    fit2 = _fit_or_vacuous(h, far)
    fit1.details["condition"] = "near-diagonal"
    fit2.details["condition"] = "kernel-increment"
    return fit1, fit2


def selfsimilar_conditions_check(
    profile: SelfSimilarProfile, grid, lags, quad: QuadSettings = DEFAULT_QUAD
) -> tuple[ExponentFit, ExponentFit]:
    """:func:`volterra_conditions_check` for ``K(t,u) = t^(beta-1/2) F(u/t)``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0):
        raise ParameterError("grid must be nonnegative")
    return volterra_conditions_check(selfsimilar_kernel(profile), grid, lags, quad)


def _alos_constants(kernel, H, grid, quad):
    c1 = c2 = 0.0
    w1 = w2 = None
    for i, s in enumerate(grid[:-1]):
        for t in grid[i + 1 :]:
            s_, t_ = float(s), float(t)
            i1 = volterra_near_integral(kernel, s_, t_, quad)
            r1 = i1 / (t_ - s_) ** (2 * H)
            r2 = abs(float(kernel.dK_dt(t_, s_))) * (t_ - s_) ** (1.5 - H)
            if r1 > c1 or w1 is None:
                c1, w1 = r1, (t_, s_)
            if r2 > c2 or w2 is None:
                c2, w2 = r2, (t_, s_)
    return c1, w1, c2, w2


def alos_check(
    kernel: VolterraKernel,
    H: float,
    grid,
    quad: QuadSettings = DEFAULT_QUAD,
    tol: float = STABILITY_TOL,
) -> ConditionVerdict:
    """Sufficient condition via the derivative of the kernel.

    Minimal constants for ``int_s^t K(t,u)^2 du <= c (t-s)^(2H)`` and
    ``|dK/dt (t, s)| <= c (t-s)^(H-3/2)`` over grid pairs, computed on the grid
    and on every other grid point.  ``margin = tol - worst relative change``.
    """
    if kernel.dK_dt is None:
        raise CapabilityError(f"kernel {kernel.name!r} provides no time derivative")
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        raise ParameterError("need at least three grid points")
    c1, w1, c2, w2 = _alos_constants(kernel, H, grid, quad)
    k1, _, k2, _ = _alos_constants(kernel, H, grid[::2], quad)
    changes = [
        0.0 if c == k else abs(c - k) / max(abs(c), abs(k)) for c, k in ((c1, k1), (c2, k2))
    ]
    finite = math.isfinite(c1) and math.isfinite(c2)
    margin = tol - max(changes) if finite else -math.inf
    return ConditionVerdict(
        name="derivative-sufficient",
        holds=margin >= 0,
        margin=float(margin),
        witness=w2 if changes[1] >= changes[0] else w1,
        details={
            "H": H,
            "near_diagonal_constant": c1,
            "near_diagonal_witness": w1,
            "derivative_constant": c2,
            "derivative_witness": w2,
            "coarse_constants": [k1, k2],
            "relative_changes": changes,
        },
    )


def selfsimilar_sufficient_check(profile: SelfSimilarProfile, H: float, points) -> ConditionVerdict:
    """Pointwise sufficient condition on the profile.

    (1) ``F(x) <= c x^(beta-H) (1-x)^(H-1/2)``: minimal ``c`` over ``points``;
    (2) ``|1 - F(x)/F(y)| <= |(y/x)^(H-beta) ((1-x)/(1-y))^(H-1/2) - 1|`` for all
    point pairs ``y < x``: ``margin`` is the smallest slack.
    """
    x = np.unique(np.asarray(points, dtype=float))
    if x.size < 2 or x[0] <= 0 or x[-1] >= 1:
        raise ParameterError("need at least two points inside (0, 1)")
    beta = profile.beta
    F = np.array([float(profile.F(float(v))) for v in x])
    envelope = x ** (beta - H) * (1.0 - x) ** (H - 0.5)
    ratios = F / envelope
    c = float(ratios.max())
    i, j = np.triu_indices(x.size, k=1)  # y = x[i] < x[j] = xx
    y, xx = x[i], x[j]
    lhs = np.abs(1.0 - F[j] / F[i])
    rhs = np.abs((y / xx) ** (H - beta) * ((1.0 - xx) / (1.0 - y)) ** (H - 0.5) - 1.0)
    slack = rhs - lhs
    k = int(np.argmin(slack))
    margin2 = float(slack[k])
    ok = math.isfinite(c) and margin2 >= -MARGIN_TOL
    margin = max(margin2, 0.0) if ok else (margin2 if math.isfinite(c) else -math.inf)
    return ConditionVerdict(
        name="selfsimilar-sufficient",
        holds=ok,
        margin=margin,
        witness=(float(xx[k]), float(y[k])),
        details={
            "H": H,
            "beta": beta,
            "envelope_constant": c,
            "envelope_witness": float(x[int(np.argmax(ratios))]),
            "ratio_margin": margin2,
        },
    )


def _kernel_matrix(kernel: Callable, t, u):
    out = kernel(t[:, None], u[None, :])
    out = np.asarray(out, dtype=float)
    if out.shape != (t.size, u.size):
        out = np.vectorize(lambda a, b: float(kernel(a, b)), otypes=[float])(t[:, None], u[None, :])
    return out


def fredholm_dominating_check(
    kernel: Callable,
    f,
    u_grid,
    H: float,
    eps: float,
    grid,
    quad: QuadSettings = DEFAULT_QUAD,
) -> ConditionVerdict:
    """Check ``|K(t,u) - K(s,u)| <= f(u) |t-s|^(H-eps)`` on grid pairs and ``u_grid``.

    ``f`` is a callable or its samples on ``u_grid``; it must be square
    integrable.  ``margin`` is the smallest ``f(u)|t-s|^(H-eps) - |K(t,u)-K(s,u)|``.
    """
    u = np.asarray(u_grid, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if callable(f):
        fu = np.array([float(f(v)) for v in u])
        norm2 = integrate_interval(lambda v: float(f(v)) ** 2, float(u.min()), float(u.max()), quad)
    else:
        fu = np.asarray(f, dtype=float)
        if fu.shape != u.shape:
            raise ParameterError("dominating samples must match u_grid")
        norm2 = float(np.trapezoid(fu**2, u)) if u.size > 1 else 0.0
    if not math.isfinite(norm2) or np.any(fu < 0):
        raise ParameterError("dominating function must be nonnegative and square integrable")
    Kmat = _kernel_matrix(kernel, grid, u)
    best = math.inf
    witness = None
    a = H - eps
    for i in range(grid.size - 1):
        diff = np.abs(Kmat[i + 1 :] - Kmat[i])
        bound = fu[None, :] * (np.abs(grid[i + 1 :] - grid[i]) ** a)[:, None]
        slack = bound - diff
        j, k = np.unravel_index(int(np.argmin(slack)), slack.shape)
        if slack[j, k] < best:
            best = float(slack[j, k])
            witness = (float(grid[i + 1 + j]), float(grid[i]), float(u[k]))
    holds = best >= -MARGIN_TOL
    return ConditionVerdict(
        name="fredholm-dominating",
        holds=holds,
        margin=max(best, 0.0) if holds else best,
        witness=witness,
        details={"H": H, "eps": eps, "raw_margin": best, "f_l2_norm_sq": norm2},
    )


def fredholm_liminf_proxy(kernel: Callable, t: float, H: float, eps: float, u_grid, lags) -> np.ndarray:
    """Diagnostic only: ``min_h |K(t,u) - K(t-h,u)|^2 / h^(2H-eps)`` over the given lags.

    A finite set of lags cannot converge to a liminf in general; this is a
    proxy for inspection, not a check.
    """
    u = np.asarray(u_grid, dtype=float)
    rows = []
    for h in np.asarray(lags, dtype=float):
        k_t = _kernel_matrix(kernel, np.array([t]), u)[0]
        k_s = _kernel_matrix(kernel, np.array([t - h]), u)[0]
        rows.append((k_t - k_s) ** 2 / h ** (2 * H - eps))
    return np.min(np.array(rows), axis=0)
