"""Pathwise Hölder statistics and the moment bounds that go with them.

Covers empirical Hölder constants and exponents of sampled paths, the
Garsia-Rodemich-Rumsey double integral, exponential-moment estimates of the
Hölder constants, the series bound for those moments, the Gaussian absolute
moments, and the variance bound for bounded Gaussian families.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import CapabilityError, InsufficientDataError, NumericalConsistencyError, ParameterError
from .regularity import ExponentFit, fit_holder_exponent
from .simulate import SamplePath

# full pair scans up to this many points, dyadic offsets above
MAX_FULL_PAIRS = 2048
# default exponent lags: the finest dyadic index offsets.  The largest
# increment carries a sqrt(log(windows)) factor whose drift across lags biases
# the slope low; it drifts least at the finest lags.
DEFAULT_OFFSETS = (1, 2, 4, 8)
N_BOOTSTRAP = 1000
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass
class HolderStat:
    order: float
    constant: float
    argmax_pair: Optional[tuple]
    restricted: bool = False


@dataclass
class MomentEstimate:
    value: float
    half_width: float
    n_samples: int
    stability: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "half_width": self.half_width,
            "n_samples": self.n_samples,
            "stability": self.stability,
        }
        out["details"] = {k: v for k, v in self.details.items() if not isinstance(v, np.ndarray)}
        return out


def _as_matrix(paths):
    """Stack a path or a list of paths into ``(grid, values[P, n])``."""
    if isinstance(paths, SamplePath):
        paths = [paths]
    grid = paths[0].grid
    values = np.stack([p.values for p in paths])
    return grid, values


def _uniform_step(grid) -> float:
    steps = np.diff(grid)
    step = float(steps.mean())
    if not np.allclose(steps, step, rtol=1e-9, atol=0):
        raise CapabilityError("operation needs a uniform grid")
    return step


def _scan_offsets(n: int, max_full: int):
    if n <= max_full:
        return np.arange(1, n), False
    k = 1 << np.arange(int(math.log2(n - 1)) + 1)
    return k[k < n], True


def holder_constants(grid, values, a: float, max_full: int = MAX_FULL_PAIRS):
    """Vectorised :func:`path_holder_constant` over the rows of ``values``.

    Returns ``(constants, argmax_pairs, restricted)``.
    """
    grid = np.asarray(grid, dtype=float)
    X = np.atleast_2d(np.asarray(values, dtype=float))
    offsets, restricted = _scan_offsets(grid.size, max_full)
    best = np.zeros(X.shape[0])
    arg = np.zeros((X.shape[0], 2), dtype=int)
    for k in offsets:
        ratio = np.abs(X[:, k:] - X[:, :-k]) / (grid[k:] - grid[:-k]) ** a
        j = np.argmax(ratio, axis=1)
        r = ratio[np.arange(X.shape[0]), j]
        upd = r > best
        best = np.where(upd, r, best)
        arg[upd, 0] = j[upd]
        arg[upd, 1] = j[upd] + k
    return best, arg, restricted


def path_holder_constant(path: SamplePath, a: float, max_full: int = MAX_FULL_PAIRS) -> HolderStat:
    """``max |X_t - X_s| / |t - s|^a`` over grid pairs.

    Above ``max_full`` points only dyadic index offsets are scanned, which
    gives a lower bound; ``restricted`` is then set.
    """
    if not 0 < a <= 1:
        raise ParameterError(f"order must lie in (0, 1], got {a}")
    if path.grid.size < 2:
        raise ParameterError("path needs at least two points")
    c, arg, restricted = holder_constants(path.grid, path.values, a, max_full)
    pair = None
    if c[0] > 0:
        pair = (float(path.grid[arg[0, 1]]), float(path.grid[arg[0, 0]]))
    return HolderStat(order=a, constant=float(c[0]), argmax_pair=pair, restricted=restricted)


def _offsets_for_lags(grid, lags):
    step = _uniform_step(grid)
    if lags is None:
        offs = np.array([k for k in DEFAULT_OFFSETS if k < grid.size], dtype=int)
        return offs
    lags = np.asarray(lags, dtype=float)
    offs = np.rint(lags / step).astype(int)
    if np.any(offs < 1) or np.any(np.abs(offs * step - lags) > 1e-9 * np.maximum(lags, step)):
        raise ParameterError("lags must be positive multiples of the grid step")
    if np.any(offs >= grid.size):
        raise ParameterError("lag exceeds the path length")
    return offs


def increment_maxima(grid, values, lags=None):
    """``M(h) = max_t |X(t+h) - X(t)|`` for each lag, per row of ``values``.

    Returns ``(lags, M[P, n_lags])``.
    """
    grid = np.asarray(grid, dtype=float)
    X = np.atleast_2d(np.asarray(values, dtype=float))
    offs = _offsets_for_lags(grid, lags)
    M = np.stack([np.abs(X[:, k:] - X[:, :-k]).max(axis=1) for k in offs], axis=1)
    return offs * _uniform_step(grid), M


def path_holder_exponent(path: SamplePath, lags=None) -> ExponentFit:
    """Log-log slope of the largest increment ``M(h)`` against the lag ``h``.

    ``lags`` are time lags on the (uniform) grid; the default is 1, 2, 4
    and 8 grid steps.  Wider lag ranges bias the slope low by up to
    ``1 / (2 log(T / h))`` through the growth of the maximum with the number
    of windows.
    """
    h, M = increment_maxima(path.grid, path.values, lags)
    M = M[0]
    if np.all(M == 0):
        raise InsufficientDataError("path is constant")
    fit = fit_holder_exponent(h, M)
    fit.details["quantity"] = "max-increment"
    return fit


# ---------------------------------------------------------------------------
# Garsia-Rodemich-Rumsey
# ---------------------------------------------------------------------------


def _log_grr_sum(grid, values, H, eps):
    """``log`` of the off-diagonal Riemann sum of ``|X_u-X_v|^p / |u-v|^(2H/eps)``."""
    if not 0 < eps < 2 * H:
        raise ParameterError(f"need 0 < eps < 2H, got eps={eps}, H={H}")
    step = _uniform_step(grid)
    p = 2.0 / eps
    q = 2.0 * H / eps
    X = np.atleast_2d(values)
    n = grid.size
    terms = []
    for k in range(1, n):
        with np.errstate(divide="ignore"):
            la = p * np.log(np.abs(X[:, k:] - X[:, :-k])) - q * math.log(k * step)
        terms.append(logsumexp(la, axis=1))
    # each unordered pair appears twice in the double integral
    total = logsumexp(np.stack(terms, axis=1), axis=1) + math.log(2.0) + 2.0 * math.log(step)
    return total


def grr_xi(path: SamplePath, H: float, eps: float) -> float:
    """``(int int |X_u - X_v|^(2/eps) / |u - v|^(2H/eps) du dv)^(eps/2)``.

    Riemann sum with node values on a uniform grid; cells on the diagonal
    contribute nothing.  Evaluated in log space since ``2/eps`` is large.
    """
    return float(grr_xi_batch(path.grid, path.values, H, eps)[0])


def grr_xi_batch(grid, values, H, eps) -> np.ndarray:
    log_total = _log_grr_sum(np.asarray(grid, dtype=float), np.asarray(values, dtype=float), H, eps)
    with np.errstate(under="ignore"):
        return np.exp(0.5 * eps * log_total)


def grr_constant_estimate(paths: Sequence[SamplePath], H: float, eps: float, seed: int = 0) -> MomentEstimate:
    """Empirical ratio ``rho = C / (T^(H-eps) xi)`` across paths.

    ``C`` is the grid Hölder constant of order ``H - eps``.  ``value`` is
    the largest ratio; ``half_width`` comes from bootstrapping that maximum;
    ``stability`` compares the maximum over the first half of the paths
    with the maximum over all of them.
    """
    if len(paths) < 2:
        raise ParameterError("need at least two paths")
    grid, X = _as_matrix(list(paths))
    T = float(grid[-1] - grid[0])
    C, _, _ = holder_constants(grid, X, H - eps)
    xi = grr_xi_batch(grid, X, H, eps)
    if np.any(C == 0):
        raise ParameterError("every path must be non-constant")
    if np.any(xi == 0):
        raise NumericalConsistencyError("GRR functional vanished on a non-constant path")
    rho = C / (T ** (H - eps) * xi)
    rng = np.random.default_rng(seed)
    boot = rng.choice(rho, size=(N_BOOTSTRAP, rho.size), replace=True).max(axis=1)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    rmax = float(rho.max())
    first = float(rho[: max(1, rho.size // 2)].max())
    return MomentEstimate(
        value=rmax,
        half_width=float(0.5 * (hi - lo)),
        n_samples=int(rho.size),
        stability=abs(rmax - first) / rmax,
        details={
            "rho": rho,
            "median": float(np.median(rho)),
            "q05": float(np.quantile(rho, 0.05)),
            "q95": float(np.quantile(rho, 0.95)),
        },
    )


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def gaussian_abs_moment(sigma: float, q: float) -> float:
    """``E|Z|^q`` for ``Z ~ N(0, sigma^2)``."""
    if sigma < 0 or not q > 0:
        raise ParameterError("need sigma >= 0 and q > 0")
    if sigma == 0:
        return 0.0
    log_c = 0.5 * q * math.log(2.0) + gammaln(0.5 * (q + 1)) - 0.5 * math.log(math.pi)
    return float(math.exp(q * math.log(sigma) + log_c))


def moment_bound_constant(samples, orders=range(1, 9)) -> float:
    """Smallest ``c`` with ``mean(C^p) <= c^p Gamma((p+1)/2)`` for every order ``p``."""
    C = np.abs(np.asarray(samples, dtype=float))
    best = 0.0
    for p in orders:
        log_m = logsumexp(p * np.log(C[C > 0])) - math.log(C.size) if np.any(C > 0) else -math.inf
        best = max(best, math.exp((log_m - gammaln(0.5 * (p + 1))) / p))
    return best


@dataclass
class SeriesResult:
    partial_sums: np.ndarray
    log_terms: np.ndarray
    ratios: np.ndarray
    verdict: str

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "last_partial_sum": float(self.partial_sums[-1]),
            "last_ratio": float(self.ratios[-1]) if self.ratios.size else None,
            "n_terms": int(self.log_terms.size),
        }


def exp_moment_series(a: float, c: float, kappa: float, J: int = 200, window: int = 10) -> SeriesResult:
    """Partial sums of ``1 + sum_{j>=1} a^j c^(kappa j) Gamma((kappa j + 1)/2) / Gamma(j + 1)``.

    Term 0 is 1 (the zeroth moment is exact); later terms use the
    Gamma-function moment bound.  Terms live in log space.  Verdict from the
    last ``window`` term ratios: ``converged`` if they are below 1 and either
    nonincreasing or extrapolating (linearly in ``1/j``) to a limit below 1;
    ``diverged`` if above 1 and nondecreasing; otherwise ``undetermined``.
    """
    if J < 2:
        raise ParameterError("need J >= 2")
    if not 0 < kappa <= 2:
        raise ParameterError("kappa must lie in (0, 2]")
    if c < 0:
        raise ParameterError("c must be nonnegative")
    j = np.arange(J + 1, dtype=float)
    if a == 0 or c == 0:
        log_terms = np.full(J + 1, -math.inf)
        log_terms[0] = 0.0
        return SeriesResult(np.ones(J + 1), log_terms, np.zeros(J), "converged")
    log_terms = j * math.log(abs(a)) + kappa * j * math.log(c) + gammaln(0.5 * (kappa * j + 1)) - gammaln(j + 1)
    log_terms[0] = 0.0
    signs = np.where((j % 2 == 1) & (a < 0), -1.0, 1.0)
    with np.errstate(over="ignore"):
        terms = signs * np.exp(log_terms)
        partial = np.cumsum(terms)
    ratios = np.exp(np.diff(log_terms))
    tail = ratios[-window:]
    steps = np.diff(tail)
    jj = j[-window:]
    verdict = "undetermined"
    if np.all(tail < 1):
        if np.all(steps <= 0):
            verdict = "converged"
        else:
            # ratio ~ L - b / j; extrapolate L from the last step
            limit = tail[-1] + steps[-1] * jj[-1]
            if limit < 1:
                verdict = "converged"
    elif np.all(tail > 1) and np.all(steps >= 0):
        verdict = "diverged"
    return SeriesResult(partial, log_terms, ratios, verdict)


def exp_moment_estimate(
    samples,
    a: float,
    kappa: float,
    c_fit: Optional[float] = None,
    n_boot: int = N_BOOTSTRAP,
    seed: int = 0,
) -> MomentEstimate:
    """Sample mean of ``exp(a C^kappa)`` with a bootstrap 95% half-width.

    ``stability`` is the relative change of the mean between the first half
    of the samples and all of them.  For ``kappa = 2`` and a known moment
    constant ``c_fit`` the estimate refuses ``a >= 1 / c_fit^2``, the point
    where the series bound stops converging.
    """
    C = np.abs(np.asarray(samples, dtype=float))
    if C.size < 100:
        raise ParameterError(f"need at least 100 samples, got {C.size}")
    if not 0 < kappa <= 2:
        raise ParameterError("kappa must lie in (0, 2]")
    if kappa == 2 and c_fit is not None and c_fit > 0:
        a_max = 1.0 / c_fit**2
        if a >= a_max:
            raise ParameterError(f"a={a:g} is at or beyond the admissible limit {a_max:g} for kappa=2")
    if a == 0:
        return MomentEstimate(1.0, 0.0, int(C.size), 0.0, {"overflow_count": 0})
    expo = a * C**kappa
    overflow = int(np.count_nonzero(expo > _LOG_MAX))
    if overflow:
        return MomentEstimate(math.inf, math.inf, int(C.size), math.inf, {"overflow_count": overflow, "unstable": True})
    vals = np.exp(expo)
    mean = float(vals.mean())
    first = float(vals[: C.size // 2].mean())
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, C.size, size=(n_boot, C.size))
    boot = vals[idx].mean(axis=1)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return MomentEstimate(
        value=mean,
        half_width=float(0.5 * (hi - lo)),
        n_samples=int(C.size),
        stability=abs(mean - first) / abs(mean),
        details={"overflow_count": 0, "a": a, "kappa": kappa},
    )


def lemma1_bound(x: float, p: float) -> float:
    """Variance bound ``2 x^2 / (pi p^2)`` for a Gaussian family with ``P[sup |xi| < x] = p``."""
    if not x > 0:
        raise ParameterError("x must be positive")
    if not 0 < p <= 1:
        raise ParameterError(f"p must lie in (0, 1]; the bound is vacuous at p={p}")
    return 2.0 * x * x / (math.pi * p * p)


@dataclass
class Lemma1Row:
    x: float
    p_hat: float
    p_se: float
    max_var: float
    var_se: float
    bound: float
    holds: bool


def normalized_increments(grid, values, H: float, eps: float) -> np.ndarray:
    """``(X_t - X_s) / |t - s|^(H - eps)`` for all grid pairs ``s < t``; shape ``(P, n_pairs)``."""
    X = np.atleast_2d(values)
    i, j = np.triu_indices(grid.size, k=1)
    return (X[:, j] - X[:, i]) / (grid[j] - grid[i]) ** (H - eps)


def lemma1_check(grid, values, H: float, eps: float, xs=(1.0, 2.0, 4.0), n_se: float = 3.0) -> list[Lemma1Row]:
    """Monte Carlo check of the variance bound on the normalized increment family.

    For each level ``x``: ``max var + n_se * se <= bound(x, p_hat + n_se * se_p)``.
    A level that no sample stays below gives a vacuous (trivially true) row.
    """
    xi = normalized_increments(np.asarray(grid, dtype=float), values, H, eps)
    N = xi.shape[0]
    sq = xi**2
    var = sq.mean(axis=0)
    k = int(np.argmax(var))
    max_var = float(var[k])
    var_se = float(sq[:, k].std(ddof=1) / math.sqrt(N))
    sup = np.abs(xi).max(axis=1)
    rows = []
    for x in xs:
        p_hat = float(np.mean(sup < x))
        p_se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / N) / N)
        p_up = min(1.0, p_hat + n_se * p_se)
        bound = lemma1_bound(x, p_up) if p_up > 0 else math.inf
        rows.append(Lemma1Row(x, p_hat, p_se, max_var, var_se, bound, max_var + n_se * var_se <= bound))
    return rows


def write_constants_csv(constants, dest) -> None:
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_index", "C"])
        for i, c in enumerate(constants):
            w.writerow([i, format(float(c), ".17g")])
