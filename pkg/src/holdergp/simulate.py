"""Exact sampling of Gaussian paths on a grid.

Two routes: dense Cholesky factorization of the gram matrix (any model), and
circulant embedding of the increment autocovariance (fBm and Brownian motion
on uniform grids).  Path ``i`` of a plan always draws from the stream keyed by
``(seed, i)``, so results do not depend on batching or thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .covariance import CovarianceModel, gram_matrix
from .errors import CapabilityError, EmbeddingError, NotPositiveDefiniteError, ParameterError

METHODS = ("cholesky", "circulant")
# circulant eigenvalues above -CLIP_TOL * max are clipped to zero
CLIP_TOL = 1e-8
# paths per batch; fixed so a batch's arithmetic never depends on scheduling
_CHUNK = 256
_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal jitter ladder, relative to the largest diagonal entry."""

    start: float = 1e-12
    growth: float = 10.0
    max: float = 1e-6

    def ladder(self):
        yield 0.0
        level = self.start
        while level <= self.max * (1 + 1e-9):
            yield level
            level *= self.growth


@dataclass
class SamplePath:
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ParameterError("grid and values must be 1-D arrays of equal length")

    def scaled(self, lam: float) -> "SamplePath":
        return SamplePath(self.grid, lam * self.values, dict(self.meta))


@dataclass(frozen=True)
class SimulationPlan:
    model: CovarianceModel
    grid: np.ndarray
    n_paths: int = 1
    seed: int = 42
    method: str = "cholesky"
    jitter: JitterPolicy = JitterPolicy()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if int(self.n_paths) < 1:
            raise ParameterError(f"n_paths must be at least 1, got {self.n_paths}")
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ParameterError("grid must be a strictly increasing 1-D sequence")
        if not 0 <= int(self.seed) <= _UINT64_MAX:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Philox generator for stream ``index`` under ``seed``.

    The key is derived with :class:`numpy.random.SeedSequence` using
    ``index`` as the spawn key, so streams are independent of each other and
    of the order in which they are created.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def standard_normals(seed: int, n: int, index: int = 0) -> np.ndarray:
    """``n`` independent N(0, 1) variates from stream ``(seed, index)``."""
    if n < 0:
        raise ParameterError("n must be nonnegative")
    return stream(seed, index).standard_normal(n)


def _normals_block(seed, start, count, n):
    return np.stack([standard_normals(seed, n, start + i) for i in range(count)]) if count else np.empty((0, n))


# ---------------------------------------------------------------------------
# Cholesky
# ---------------------------------------------------------------------------


def cholesky_factor(gram, jitter: JitterPolicy = JitterPolicy()):
    """Lower-triangular ``L`` with ``L @ L.T = gram + delta * I``.

    ``delta`` is the first rung of the jitter ladder (scaled by the largest
    diagonal entry) at which the factorization succeeds.  Returns ``(L, delta)``.
    """
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ParameterError("gram must be a square matrix")
    if not np.allclose(G, G.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(G).max(initial=0.0))):
        raise ParameterError("gram must be symmetric")
    scale = float(np.max(np.abs(np.diag(G)), initial=0.0)) or 1.0
    eye = np.eye(G.shape[0])
    for level in jitter.ladder():
        delta = level * scale
        try:
            L = np.linalg.cholesky(G + delta * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, delta
    raise NotPositiveDefiniteError(
        f"factorization failed up to jitter {jitter.max:g} (relative to {scale:g})"
    )


def _map_chunks(fn, n_paths, threads):
    starts = list(range(0, n_paths, _CHUNK))
    counts = [min(_CHUNK, n_paths - s) for s in starts]
    if threads and threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(fn, starts, counts))
    else:
        blocks = [fn(s, c) for s, c in zip(starts, counts)]
    return np.concatenate(blocks, axis=0)


def _cholesky_values(model, grid, n_paths, seed, jitter, threads):
    L, delta = cholesky_factor(gram_matrix(model, grid), jitter)
    n = grid.size

    def block(start, count):
        Z = _normals_block(seed, start, count, n)
        return Z @ L.T

    return _map_chunks(block, n_paths, threads), {"jitter": delta}


# ---------------------------------------------------------------------------
# circulant embedding
# ---------------------------------------------------------------------------


def fgn_autocovariance(H: float, m: int, step: float) -> np.ndarray:
    """Autocovariance of fBm increments of width ``step`` at lags ``0..m``."""
    k = np.arange(m + 1, dtype=float)
    h2 = 2.0 * H
    return 0.5 * step**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(H: float, m: int, step: float):
    """Eigenvalues of the ``2m``-circulant embedding of ``m`` increments.

    Returns ``(eigenvalues, clipped_mass)`` after clipping round-off negatives.
    """
    gam = fgn_autocovariance(H, m, step)
    row = np.concatenate([gam, gam[-2:0:-1]])  # length 2m
    lam = np.fft.fft(row).real
    top = float(lam.max())
    neg = lam < 0
    if np.any(lam < -CLIP_TOL * top):
        raise EmbeddingError(
            f"circulant embedding has eigenvalue {lam.min():.3g} below -{CLIP_TOL:g} * {top:.3g}"
        )
    clipped = float(np.abs(lam[neg]).sum())
    lam = np.where(neg, 0.0, lam)
    return lam, clipped


def _uniform_anchor(grid):
    """Step and index offset of a uniform grid laid on ``{0, step, 2 step, ...}``."""
    if grid.size < 2:
        raise CapabilityError("circulant embedding needs at least two grid points")
    steps = np.diff(grid)
    step = float(steps.mean())
    if not np.allclose(steps, step, rtol=1e-9, atol=0):
        raise CapabilityError("circulant embedding needs a uniform grid")
    k0 = grid[0] / step
    if abs(k0 - round(k0)) > 1e-6:
        raise CapabilityError("uniform grid must start at a multiple of its step")
    return step, int(round(k0))


def _circulant_values(H, grid, n_paths, seed, threads):
    step, k0 = _uniform_anchor(grid)
    m = k0 + grid.size - 1  # increments from t = 0 up to the last grid point
    lam, clipped = circulant_eigenvalues(H, m, step)
    N = 2 * m
    amp = np.sqrt(lam / N)

    def block(start, count):
        Z = _normals_block(seed, start, count, 2 * N)
        W = amp * (Z[:, :N] + 1j * Z[:, N:])
        incr = np.fft.fft(W, axis=1).real[:, :m]
        path = np.concatenate([np.zeros((count, 1)), np.cumsum(incr, axis=1)], axis=1)
        return path[:, k0:]

    return _map_chunks(block, n_paths, threads), {"clipped_mass": clipped, "min_eigenvalue": float(lam.min())}


def circulant_embed_sample(model: CovarianceModel, grid, n_paths: int, seed: int, threads: int = 1):
    """fBm or Brownian paths on a uniform grid by circulant embedding.

    The fractional Gaussian noise autocovariance is embedded in a circulant
    of size ``2m``, increments are synthesized with one FFT per path, and the
    path is their cumulative sum anchored at ``X_0 = 0``.
    """
    plan = SimulationPlan(model, grid, n_paths, seed, "circulant")
    return sample_paths(plan, threads=threads)


def _hurst_for_circulant(model):
    if model.kind == "bm":
        return 0.5
    if model.kind in ("fbm", "modulated-fbm"):
        return model.params["H"]
    raise CapabilityError(f"circulant embedding needs stationary increments; got {model.kind!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def sample_values(plan: SimulationPlan, threads: int = 1):
    """Paths as an ``(n_paths, n)`` array plus generation metadata."""
    model = plan.model
    grid = plan.grid
    model.check_domain(grid)
    if model.kind == "modulated-fbm":
        # f(t) times an fBm path; the gram of X itself is never factorized
        base = CovarianceModel.fbm(model.params["H"], horizon=model.horizon)
        inner = replace(plan, model=base)
        values, info = sample_values(inner, threads)
        return values * model.modulation(grid) * model.amplitude, info
    if plan.method == "circulant":
        H = _hurst_for_circulant(model)
        values, info = _circulant_values(H, grid, plan.n_paths, plan.seed, threads)
        return values * model.amplitude, info
    return _cholesky_values(model, grid, plan.n_paths, plan.seed, plan.jitter, threads)


def sample_paths(plan: SimulationPlan, threads: int = 1) -> list[SamplePath]:
    """Independent centered Gaussian paths with covariance ``gram_matrix(model, grid)``."""
    values, info = sample_values(plan, threads)
    base = {
        "model": plan.model.model_id,
        "seed": int(plan.seed),
        "method": plan.method,
        **info,
    }
    return [SamplePath(plan.grid, values[i], {**base, "path_index": i}) for i in range(plan.n_paths)]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_paths_csv(paths, dest) -> None:
    """Header ``t,p0,p1,...``; one row per grid point, 17 significant digits."""
    if not paths:
        raise ParameterError("no paths to write")
    grid = paths[0].grid
    for p in paths:
        if not np.array_equal(p.grid, grid):
            raise ParameterError("all paths must share one grid")
    cols = np.column_stack([grid] + [p.values for p in paths])
    header = ["t"] + [f"p{i}" for i in range(len(paths))]
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in cols:
            w.writerow([format(float(x), ".17g") for x in row])


def read_paths_csv(src) -> list[SamplePath]:
    with open(src, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if not header or header[0] != "t":
        raise ParameterError("paths CSV must start with a 't' column")
    grid = body[:, 0]
    return [SamplePath(grid, body[:, j], {"path_index": j - 1}) for j in range(1, len(header))]
