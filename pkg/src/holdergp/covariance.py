"""Covariance models of centered Gaussian processes on ``[0, T]``.

A :class:`CovarianceModel` is the single source of the covariance ``R(s, t)``,
the variance ``R(t, t)`` and the increment metric

    d(s, t) = sqrt(E[(X_t - X_s)^2]) = sqrt(R(t, t) - 2 R(s, t) + R(s, s)).

Closed-form families (fBm, Brownian motion, Ornstein-Uhlenbeck, the modulated
fBm) are evaluated vectorised.  Spectral, Volterra and self-similar models go
through adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, NumericalConsistencyError, ParameterError
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureError,
    QuadSettings,
    integrate_interval,
    integrate_pieces,
)

KINDS = ("fbm", "bm", "ou", "spectral", "volterra", "selfsimilar", "modulated-fbm")
STATIONARY_INCREMENT_KINDS = ("fbm", "bm")

# radicands in [-CLAMP_TOL * scale, 0) are round-off and clamp to zero
CLAMP_TOL = 1e-12
# relative slack on the horizon when checking the domain
_DOMAIN_SLACK = 1e-12


# ---------------------------------------------------------------------------
# kernels, profiles, spectral measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolterraKernel:
    """Kernel ``K(t, u)`` of ``X_t = int_0^t K(t, u) dW_u``.

    ``singularity_exponent`` is the ``gamma`` in ``K(t, u) ~ (t - u)^gamma``
    as ``u`` increases to ``t``; when it is negative, quadrature switches to a
    power-law substitution that removes the endpoint singularity.
    """

    K: Callable
    dK_dt: Optional[Callable] = None
    singularity_exponent: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        gamma = self.singularity_exponent
        if gamma is not None and not gamma > -0.5:
            raise ParameterError(
                f"singularity exponent must exceed -1/2 for square integrability, got {gamma}"
            )

    def __call__(self, t, u):
        return self.K(t, u)

    def check_causal(self, horizon: float = 1.0, n: int = 9) -> None:
        """Raise if ``K(t, s) != 0`` for some sampled ``s > t``."""
        pts = np.linspace(0.0, horizon, n)
        for i, t in enumerate(pts):
            for s in pts[i + 1 :]:
                if self.K(float(t), float(s)) != 0:
                    raise ParameterError(
                        f"kernel {self.name!r} is not of Volterra type: K({t:g}, {s:g}) != 0"
                    )


@dataclass(frozen=True)
class SelfSimilarProfile:
    """Positive profile ``F`` on (0, 1) with self-similarity index ``beta``.

    The process is ``X_t = int_0^t t^(beta - 1/2) F(u / t) dW_u``.
    ``singularity_exponent`` describes ``F(x) ~ (1 - x)^gamma`` near ``x = 1``.
    """

    F: Callable
    beta: float
    singularity_exponent: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError(f"self-similarity index must be positive, got {self.beta}")
        gamma = self.singularity_exponent
        if gamma is not None and not gamma > -0.5:
            raise ParameterError(f"singularity exponent must exceed -1/2, got {gamma}")
        xs = np.linspace(0.0, 1.0, 66)[1:-1]
        vals = np.array([self.F(float(x)) for x in xs])
        if not np.all(vals > 0):
            bad = float(xs[np.argmin(vals)])
            raise ParameterError(f"profile {self.name!r} is not positive at x={bad:g}")
        norm2 = integrate_interval(lambda x: float(self.F(x)) ** 2, 0.0, 1.0)
        if not math.isfinite(norm2):
            raise ParameterError(f"profile {self.name!r} is not square integrable")


@dataclass(frozen=True)
class SpectralMeasure:
    """Symmetric spectral measure stored as a half-line density plus an atom at 0.

    The covariance is ``r(h) = atom + 2 int_0^L cos(lambda h) density(lambda)``
    with ``L = truncation``.
    """

    density: Callable[[float], float]
    truncation: float = math.inf
    atom_at_zero: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.atom_at_zero < 0:
            raise ParameterError("atom at zero must be nonnegative")
        if not self.truncation > 0:
            raise ParameterError("truncation must be positive")
        top = self.truncation if math.isfinite(self.truncation) else 1e3
        lams = np.concatenate([[0.0], np.geomspace(1e-6, top, 200)])
        vals = np.array([self.density(float(x)) for x in lams])
        if np.any(vals < 0):
            raise ParameterError(f"spectral density {self.name!r} is negative somewhere")
        try:
            mass = self.half_line_mass()
        except QuadratureError:
            mass = math.inf
        if math.isfinite(mass) and math.isinf(self.truncation):
            # extrapolating quadrature can assign a finite value to a divergent
            # integral; the density is nonnegative, so no finite-range mass may exceed it
            pieces = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, 19)])
            partial = integrate_pieces(self.density, pieces, DEFAULT_QUAD)
            if mass < partial * (1 - 1e-8) - DEFAULT_QUAD.abs_tol:
                mass = math.inf
        if not math.isfinite(mass):
            raise ParameterError(f"spectral density {self.name!r} has infinite mass")

    def half_line_mass(self, settings: QuadSettings = DEFAULT_QUAD) -> float:
        return integrate_interval(self.density, 0.0, self.truncation, settings)

    def total_mass(self) -> float:
        return self.atom_at_zero + 2.0 * self.half_line_mass()

    def tail_mass(self, settings: QuadSettings = DEFAULT_QUAD) -> float:
        """Half-line mass beyond the truncation; bounds the truncation error of
        ``spectral_increment_integral`` (``1 - cos`` is at most 2 there)."""
        if not math.isfinite(self.truncation):
            return 0.0
        try:
            return integrate_interval(self.density, self.truncation, math.inf, settings)
        except Exception:  # density may be undefined past the truncation
            return math.nan


def brownian_kernel() -> VolterraKernel:
    """``K(t, u) = 1{u <= t}``: the Volterra kernel of Brownian motion."""

    def K(t, u):
        return np.where(np.asarray(u) <= np.asarray(t), 1.0, 0.0) * 1.0

    def dK(t, u):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(u)).shape)

    return VolterraKernel(K=_scalarize(K), dK_dt=_scalarize(dK), name="brownian")


def fractional_kernel(H: float) -> VolterraKernel:
    """Riemann-Liouville kernel ``K(t, u) = (t - u)^(H - 1/2)`` for ``u < t``."""
    if not 0 < H < 1:
        raise ParameterError(f"H must lie in (0, 1), got {H}")
    g = H - 0.5

    def K(t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        lag = t - u
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(lag > 0, np.abs(lag) ** g, 0.0)
        return out

    def dK(t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        lag = t - u
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(lag > 0, g * np.abs(lag) ** (g - 1.0), 0.0)
        return out

    return VolterraKernel(
        K=_scalarize(K),
        dK_dt=_scalarize(dK),
        singularity_exponent=g,
        name=f"fractional(H={H:g})",
    )


def constant_profile(c: float = 1.0, beta: float = 0.5) -> SelfSimilarProfile:
    if not c > 0:
        raise ParameterError("constant profile must be positive")
    return SelfSimilarProfile(F=lambda x: c, beta=beta, name=f"constant(c={c:g})")


def power_profile(beta: float, H: float, c: float = 1.0) -> SelfSimilarProfile:
    """``F(x) = c x^(beta - H) (1 - x)^(H - 1/2)``."""
    if not c > 0:
        raise ParameterError("profile scale must be positive")

    def F(x):
        return c * x ** (beta - H) * (1.0 - x) ** (H - 0.5)

    return SelfSimilarProfile(
        F=F,
        beta=beta,
        singularity_exponent=H - 0.5,
        name=f"power(beta={beta:g}, H={H:g}, c={c:g})",
    )


def ou_spectral_measure(sigma: float, theta: float, truncation: float = math.inf) -> SpectralMeasure:
    """Half-line density ``sigma^2 theta / (pi (theta^2 + lambda^2))`` of the OU process."""
    if not (sigma > 0 and theta > 0):
        raise ParameterError("OU parameters must be positive")
    s2 = sigma * sigma

    def density(lam):
        return s2 * theta / (math.pi * (theta * theta + lam * lam))

    return SpectralMeasure(density=density, truncation=truncation, name=f"ou(sigma={sigma:g}, theta={theta:g})")


def tabulated_kernel(t_values, s_values, table, name: str = "tabulated") -> VolterraKernel:
    """Kernel from samples ``table[i, j] = K(t_values[i], s_values[j])``.

    Bilinear interpolation inside the table; zero for ``s > t`` and outside.
    """
    t_values = np.asarray(t_values, dtype=float)
    s_values = np.asarray(s_values, dtype=float)
    table = np.asarray(table, dtype=float)
    if table.shape != (t_values.size, s_values.size):
        raise ParameterError(
            f"table shape {table.shape} does not match grid ({t_values.size}, {s_values.size})"
        )
    interp = RegularGridInterpolator((t_values, s_values), table, method="linear", bounds_error=False, fill_value=0.0)

    def K(t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        tb, ub = np.broadcast_arrays(t, u)
        vals = interp(np.stack([tb.ravel(), ub.ravel()], axis=-1)).reshape(tb.shape)
        return np.where(ub <= tb, vals, 0.0)

    return VolterraKernel(K=_scalarize(K), name=name)


def read_kernel_table(path) -> VolterraKernel:
    """Load a tabulated kernel from a CSV with header ``t,s,K``."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    missing = {"t", "s", "K"} - set(data.dtype.names or ())
    if missing:
        raise ParameterError(f"kernel table {path} lacks columns {sorted(missing)}")
    ts = np.unique(data["t"])
    ss = np.unique(data["s"])
    table = np.full((ts.size, ss.size), np.nan)
    table[np.searchsorted(ts, data["t"]), np.searchsorted(ss, data["s"])] = data["K"]
    if np.isnan(table).any():
        raise ParameterError(f"kernel table {path} is not a full (t, s) grid")
    return tabulated_kernel(ts, ss, table, name=f"table({path})")


def _scalarize(fn):
    """Return python floats for scalar inputs so quadrature callbacks stay cheap."""

    def wrapped(t, u):
        out = fn(t, u)
        if np.ndim(out) == 0:
            return float(out)
        return out

    return wrapped


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceModel:
    """A covariance family with its parameters.

    Use the classmethod constructors rather than the raw initializer.
    ``amplitude`` multiplies the process, so every covariance is scaled by
    ``amplitude**2``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    horizon: float = 1.0
    kernel: Optional[VolterraKernel] = None
    profile: Optional[SelfSimilarProfile] = None
    measure: Optional[SpectralMeasure] = None
    amplitude: float = 1.0
    quad: QuadSettings = DEFAULT_QUAD

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not self.horizon > 0:
            raise ParameterError("horizon must be positive")
        if self.kind in ("fbm", "modulated-fbm"):
            H = self.params.get("H")
            if H is None or not 0 < H < 1:
                raise ParameterError(f"{self.kind} needs a Hurst index in (0, 1), got {H}")
        if self.kind == "ou":
            if not (self.params.get("sigma", 0) > 0 and self.params.get("theta", 0) > 0):
                raise ParameterError("ou needs sigma > 0 and theta > 0")
        if self.kind == "modulated-fbm":
            if not 0 < self.horizon < math.exp(-1):
                raise ParameterError(f"modulated-fbm needs t_max < 1/e, got {self.horizon}")
        if self.kind == "volterra" and self.kernel is None:
            raise ParameterError("volterra model needs a kernel")
        if self.kind == "selfsimilar" and self.profile is None:
            raise ParameterError("selfsimilar model needs a profile")
        if self.kind == "spectral" and self.measure is None:
            raise ParameterError("spectral model needs a spectral measure")

    # constructors -------------------------------------------------------

    @classmethod
    def fbm(cls, H: float, horizon: float = 1.0) -> "CovarianceModel":
        return cls("fbm", {"H": float(H)}, horizon)

    @classmethod
    def bm(cls, horizon: float = 1.0) -> "CovarianceModel":
        return cls("bm", {}, horizon)

    @classmethod
    def ou(cls, sigma: float, theta: float, horizon: float = 1.0) -> "CovarianceModel":
        return cls("ou", {"sigma": float(sigma), "theta": float(theta)}, horizon)

    @classmethod
    def spectral(cls, measure: SpectralMeasure, horizon: float = 1.0) -> "CovarianceModel":
        return cls("spectral", {}, horizon, measure=measure)

    @classmethod
    def volterra(cls, kernel: VolterraKernel, horizon: float = 1.0) -> "CovarianceModel":
        kernel.check_causal(horizon)
        return cls("volterra", {}, horizon, kernel=kernel)

    @classmethod
    def selfsimilar(cls, profile: SelfSimilarProfile, horizon: float = 1.0) -> "CovarianceModel":
        return cls("selfsimilar", {"beta": profile.beta}, horizon, profile=profile)

    @classmethod
    def modulated_fbm(cls, H: float, t_max: float = 0.3, power: float = 0.5) -> "CovarianceModel":
        """``X_t = f(t) B_t`` with ``f(t) = (log log(1/t))^power`` and ``B`` an fBm.

        ``power=0.5`` makes the increment condition fail at exponent ``H``
        while every smaller exponent is fine; ``X_0 = 0`` by continuity.
        """
        return cls("modulated-fbm", {"H": float(H), "power": float(power)}, float(t_max))

    def scaled(self, lam: float) -> "CovarianceModel":
        """The same model for the process ``lam * X``."""
        return replace(self, amplitude=self.amplitude * lam)

    @property
    def model_id(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        for part in (self.kernel, self.profile, self.measure):
            if part is not None:
                inner = ", ".join(x for x in (inner, part.name) if x)
        label = f"{self.kind}({inner})"
        if self.amplitude != 1.0:
            label = f"{self.amplitude:g}*{label}"
        return label

    @property
    def volterra_kernel(self) -> Optional[VolterraKernel]:
        if self.kind == "volterra":
            return self.kernel
        if self.kind == "selfsimilar":
            return selfsimilar_kernel(self.profile)
        if self.kind == "bm":
            return brownian_kernel()
        return None

    def modulation(self, t):
        """The deterministic factor ``f(t)`` of the modulated fBm (``f(0) := 0``)."""
        t = np.asarray(t, dtype=float)
        p = self.params["power"]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.log(np.log(1.0 / t)) ** p
        return np.where(t > 0, f, 0.0)

    def check_domain(self, *times) -> None:
        lim = self.horizon * (1 + _DOMAIN_SLACK)
        for x in times:
            x = np.asarray(x, dtype=float)
            if x.size and (np.nanmin(x) < 0 or np.nanmax(x) > lim or np.isnan(x).any()):
                raise DomainError(
                    f"time outside [0, {self.horizon:g}] for model {self.model_id}"
                )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def cov_eval(model: CovarianceModel, s, t):
    """Covariance ``R(s, t)``; broadcasts over array arguments."""
    model.check_domain(s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    kind = model.kind
    if kind == "bm":
        out = np.minimum(s, t)
    elif kind == "fbm":
        out = _fbm_cov(model.params["H"], s, t)
    elif kind == "ou":
        sig, th = model.params["sigma"], model.params["theta"]
        out = sig * sig * np.exp(-th * np.abs(t - s))
    elif kind == "modulated-fbm":
        out = model.modulation(s) * model.modulation(t) * _fbm_cov(model.params["H"], s, t)
    elif kind == "spectral":
        out = np.vectorize(lambda a, b: spectral_cov(model.measure, abs(b - a), model.quad))(s, t)
    else:
        kern = model.volterra_kernel
        out = np.vectorize(lambda a, b: volterra_cov(kern, a, b, model.quad))(s, t)
    out = out * model.amplitude**2
    return float(out) if np.ndim(out) == 0 else out


def _fbm_cov(H, s, t):
    h2 = 2.0 * H
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)


def increment_stddev(model: CovarianceModel, s, t):
    """Increment metric ``d(s, t)``; broadcasts over array arguments.

    Families with a closed form use it directly (no cancellation).  Otherwise
    the radicand ``R(t,t) - 2R(s,t) + R(s,s)`` is clamped to zero when it is
    negative only by round-off.
    """
    model.check_domain(s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    h = hi - lo
    kind = model.kind
    if kind == "bm":
        d = np.sqrt(h)
    elif kind == "fbm":
        d = h ** model.params["H"]
    elif kind == "ou":
        sig, th = model.params["sigma"], model.params["theta"]
        d = np.sqrt(-2.0 * sig * sig * np.expm1(-th * h))
    elif kind == "modulated-fbm":
        d = np.sqrt(_modulated_increment_var(model, lo, hi))
    elif kind == "spectral":
        d = np.sqrt(4.0 * np.vectorize(lambda x: spectral_increment_integral(model.measure, x, model.quad))(h))
    elif kind in ("volterra", "selfsimilar"):
        kern = model.volterra_kernel

        def one(a, b):
            if a == b:
                return 0.0
            i1, i2 = volterra_increment_integrals(kern, a, b, model.quad)
            return i1 + i2

        d = np.sqrt(np.vectorize(one)(lo, hi))
    else:  # pragma: no cover - every kind is handled above
        d = _clamped_metric(model, lo, hi)
    d = d * abs(model.amplitude)
    return float(d) if np.ndim(d) == 0 else d


def metric_from_covariance(model: CovarianceModel, s, t):
    """Increment metric computed literally from three covariance evaluations."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = _clamped_metric(model, s, t) * abs(model.amplitude)
    return float(out) if np.ndim(out) == 0 else out


def _clamped_metric(model, s, t):
    base = replace(model, amplitude=1.0)
    rss = np.asarray(cov_eval(base, s, s))
    rtt = np.asarray(cov_eval(base, t, t))
    rst = np.asarray(cov_eval(base, s, t))
    scale = np.maximum(np.maximum(np.abs(rss), np.abs(rtt)), 1.0)
    return np.sqrt(clamp_radicand(rtt - 2.0 * rst + rss, scale, model.model_id))


def clamp_radicand(rad, scale, label: str = "model"):
    """Zero out radicands in ``[-CLAMP_TOL * scale, 0)``; reject anything lower."""
    rad = np.asarray(rad, dtype=float)
    if np.any(rad < -CLAMP_TOL * np.asarray(scale)):
        worst = float(np.min(rad / scale))
        raise NumericalConsistencyError(f"negative increment variance {worst:.3g} (relative) for {label}")
    return np.maximum(rad, 0.0)


def _modulated_increment_var(model, lo, hi, f_lo=None, f_hi=None):
    # X_t - X_s = f(t)(B_t - B_s) + (f(t) - f(s)) B_s, expanded without cancellation
    H = model.params["H"]
    h2 = 2.0 * H
    f_hi = model.modulation(hi) if f_hi is None else f_hi
    f_lo = model.modulation(lo) if f_lo is None else f_lo
    gap = hi - lo
    df = np.where(lo > 0, f_hi - f_lo, 0.0)
    cross = 0.5 * (hi**h2 - lo**h2 - gap**h2)
    var = f_hi**2 * gap**h2 + df**2 * lo**h2 + 2.0 * f_hi * df * cross
    return np.maximum(var, 0.0)


def gram_matrix(model: CovarianceModel, grid) -> np.ndarray:
    """Matrix of ``cov_eval(model, grid[i], grid[j])``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ParameterError("grid must be a strictly increasing 1-D sequence")
    model.check_domain(grid)
    if model.kind in ("bm", "fbm", "ou", "modulated-fbm"):
        G = cov_eval(model, grid[:, None], grid[None, :])
        G = np.atleast_2d(G)
        return 0.5 * (G + G.T)
    n = grid.size
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = cov_eval(model, grid[i], grid[j])
    return G


# --- Volterra quadrature ---------------------------------------------------


def _distance_breakpoints(span, layer, inner=12, ratio=4.0):
    """Distances from the singular end: ``layer * ratio^k`` for ``k >= -inner``."""
    pts = {0.0, span}
    d = layer
    for _ in range(inner):
        d /= ratio
        pts.add(d)
    d = layer
    while d < span:
        pts.add(d)
        d *= ratio
    return np.array(sorted(p for p in pts if 0.0 <= p <= span))


def _integrate_to_singular_end(g, a, m, gamma, layer, settings):
    """``int_a^m g(u) du`` where ``g(u) ~ (m - u)^gamma`` as ``u -> m``.

    Works in the distance ``v = m - u`` on pieces graded geometrically around
    ``layer``.  For ``gamma < 0`` each piece is integrated in
    ``w = v^(gamma + 1)``, which makes the integrand bounded.
    """
    if m <= a:
        return 0.0
    span = m - a
    layer = min(layer, span)
    v_pts = _distance_breakpoints(span, layer)
    epsabs = settings.abs_tol * min(1.0, layer)
    if gamma is None or gamma >= 0:
        return integrate_pieces(lambda v: g(m - v), v_pts, settings, epsabs)
    e = gamma + 1.0
    inv_e = 1.0 / e

    def h(w):
        # Jacobian from the lag the kernel actually sees (m - u is exact here)
        u = m - w**inv_e
        v = m - u
        if v <= 0.0:
            u = math.nextafter(m, -math.inf)
            v = m - u
        return g(u) * inv_e * v ** (1.0 - e)

    return integrate_pieces(h, v_pts**e, settings, epsabs)


def volterra_cov(kernel: VolterraKernel, s: float, t: float, quad: QuadSettings = DEFAULT_QUAD) -> float:
    """``R(s, t) = int_0^min(s,t) K(t, u) K(s, u) du`` by adaptive quadrature."""
    s = float(s)
    t = float(t)
    if s < 0 or t < 0:
        raise DomainError("Volterra covariance needs nonnegative times")
    lo, hi = min(s, t), max(s, t)
    if lo == 0.0:
        return 0.0
    gamma = kernel.singularity_exponent
    if lo == hi:
        g_eff = None if gamma is None else 2.0 * gamma
        return _integrate_to_singular_end(lambda u: kernel.K(hi, u) ** 2, 0.0, lo, g_eff, lo, quad)
    return _integrate_to_singular_end(
        lambda u: kernel.K(hi, u) * kernel.K(lo, u), 0.0, lo, gamma, hi - lo, quad
    )


def volterra_near_integral(kernel: VolterraKernel, s: float, t: float, quad: QuadSettings = DEFAULT_QUAD) -> float:
    """``int_s^t K(t, u)^2 du`` for ``s < t``."""
    gamma = kernel.singularity_exponent
    g_eff = None if gamma is None else 2.0 * gamma
    return _integrate_to_singular_end(lambda u: kernel.K(t, u) ** 2, s, t, g_eff, t - s, quad)


def volterra_increment_integrals(
    kernel: VolterraKernel, s: float, t: float, quad: QuadSettings = DEFAULT_QUAD
) -> tuple[float, float]:
    """The two pieces of ``d(s, t)^2`` for a Volterra process, ``s < t``:

    ``int_s^t K(t,u)^2 du`` and ``int_0^s (K(t,u) - K(s,u))^2 du``.
    """
    s = float(s)
    t = float(t)
    if not s < t:
        raise ParameterError(f"need s < t, got s={s}, t={t}")
    near = volterra_near_integral(kernel, s, t, quad)
    if s <= 0:
        return near, 0.0
    gamma = kernel.singularity_exponent
    g_eff = None if gamma is None else 2.0 * gamma
    far = _integrate_to_singular_end(
        lambda u: (kernel.K(t, u) - kernel.K(s, u)) ** 2, 0.0, s, g_eff, t - s, quad
    )
    return near, far


# --- spectral quadrature ---------------------------------------------------

# oscillations of cos(lambda t) integrated directly before switching to QAWO/QAWF
_HEAD_PERIODS = 10


def spectral_cov(measure: SpectralMeasure, h: float, quad: QuadSettings = DEFAULT_QUAD) -> float:
    """``r(h) = atom + 2 int_0^L cos(lambda h) density(lambda) d lambda``."""
    h = abs(float(h))
    if h == 0.0:
        return measure.atom_at_zero + 2.0 * measure.half_line_mass(quad)
    mass = measure.half_line_mass(quad)
    return measure.atom_at_zero + 2.0 * (mass - spectral_increment_integral(measure, h, quad))


def spectral_increment_integral(measure: SpectralMeasure, t: float, quad: QuadSettings = DEFAULT_QUAD) -> float:
    """``I(t) = int_0^L (1 - cos(lambda t)) density(lambda) d lambda``.

    For an atomless symmetric measure the increment variance of the stationary
    process is ``4 I(|t - s|)``.  The first few oscillations are integrated
    as ``2 sin^2(lambda t / 2)`` on pieces graded towards zero; the remaining
    tail is ``int density - int cos * density`` with a Fourier-weighted rule.
    """
    t = abs(float(t))
    if t == 0.0:
        return 0.0
    L = measure.truncation
    head_end = min(L, 2.0 * math.pi * _HEAD_PERIODS / t)
    dens = measure.density

    def head(lam):
        sn = math.sin(0.5 * lam * t)
        return 2.0 * sn * sn * dens(lam)

    pts = [head_end]
    x = head_end
    while x > head_end * 1e-12:
        x /= 4.0
        pts.append(x)
    pts.append(0.0)
    epsabs = quad.abs_tol * min(1.0, t) ** 2
    total = integrate_pieces(head, pts[::-1], quad, epsabs)
    if head_end < L:
        tail_mass = _tail_mass(dens, head_end, L, quad)
        tail_cos = integrate_interval(dens, head_end, L, quad, abs_tol=epsabs, weight="cos", wvar=t)
        total += tail_mass - tail_cos
    return total


def _tail_mass(dens, a, b, quad):
    # lambda = a / x maps [a, b] onto [a / b, 1]; relative accuracy only
    def g(x):
        return dens(a / x) * a / (x * x) if x > 0 else 0.0

    return integrate_interval(g, a / b, 1.0, quad, abs_tol=0.0)


def selfsimilar_kernel(profile: SelfSimilarProfile) -> VolterraKernel:
    """``K(t, u) = t^(beta - 1/2) F(u / t)`` for ``0 <= u < t``, else 0."""
    beta = profile.beta
    F = profile.F

    def K(t, u):
        t = float(t)
        u = float(u)
        if t <= 0.0 or u >= t or u < 0.0:
            return 0.0
        return t ** (beta - 0.5) * float(F(u / t))

    def vec(t, u):
        if np.ndim(t) == 0 and np.ndim(u) == 0:
            return K(t, u)
        return np.vectorize(K, otypes=[float])(t, u)

    return VolterraKernel(
        K=vec,
        singularity_exponent=profile.singularity_exponent,
        name=f"selfsimilar[{profile.name}, beta={beta:g}]",
    )
