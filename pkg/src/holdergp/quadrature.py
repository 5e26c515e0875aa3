"""Adaptive quadrature helpers shared by the covariance and regularity code.

Everything goes through :func:`scipy.integrate.quad` (QUADPACK, adaptive
Gauss-Kronrod with interval bisection).  The wrappers add a settings record,
piecewise integration over caller-chosen breakpoints, and a hard error when
the estimated error of the whole integral is out of line with its value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not converge."""


@dataclass(frozen=True)
class QuadSettings:
    """Tolerances for adaptive quadrature.

    ``abs_tol``/``rel_tol`` are the targets handed to QUADPACK.  An integral
    counts as failed when its estimated error exceeds both
    ``slack * abs_tol`` and ``fail_rel * |value|``; near-singular integrands
    routinely miss the targets by round-off without being wrong.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-10
    max_depth: int = 40
    slack: float = 10.0
    fail_rel: float = 1e-6

    @property
    def limit(self) -> int:
        # subinterval budget for a depth-max_depth refinement of one hot spot
        return max(50, 2 * self.max_depth)


DEFAULT_QUAD = QuadSettings()


def quad_piece(func, a, b, settings: QuadSettings = DEFAULT_QUAD, abs_tol: float | None = None, **kw):
    """One QUADPACK call; returns ``(value, error_estimate)`` without judging them."""
    if a == b:
        return 0.0, 0.0
    epsabs = settings.abs_tol if abs_tol is None else abs_tol
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            func, a, b, epsabs=epsabs, epsrel=settings.rel_tol, limit=settings.limit, **kw
        )
    return float(value), float(err)


def _check(value, err, settings, abs_tol, where):
    bound = max(settings.slack * abs_tol, settings.fail_rel * abs(value))
    if not math.isfinite(value) or not math.isfinite(err) or err > bound:
        raise QuadratureError(
            f"quadrature on {where} did not converge: value={value:.6g}, "
            f"error estimate={err:.3g}, allowed={bound:.3g}"
        )


def integrate_interval(
    func: Callable[[float], float],
    a: float,
    b: float,
    settings: QuadSettings = DEFAULT_QUAD,
    abs_tol: float | None = None,
    **quad_kwargs,
) -> float:
    """Integrate ``func`` over ``[a, b]``; raise :class:`QuadratureError` on failure.

    ``abs_tol`` overrides the settings' absolute tolerance; callers pass a
    smaller one when the integral is known to be tiny.
    """
    epsabs = settings.abs_tol if abs_tol is None else abs_tol
    value, err = quad_piece(func, a, b, settings, epsabs, **quad_kwargs)
    _check(value, err, settings, epsabs, f"[{a:.6g}, {b:.6g}]")
    return value


def integrate_pieces(
    func: Callable[[float], float],
    breakpoints: Sequence[float],
    settings: QuadSettings = DEFAULT_QUAD,
    abs_tol: float | None = None,
) -> float:
    """Sum of integrals over consecutive breakpoints, judged as one integral."""
    epsabs = settings.abs_tol if abs_tol is None else abs_tol
    pts = np.asarray(breakpoints, dtype=float)
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = quad_piece(func, float(lo), float(hi), settings, epsabs)
        total += v
        total_err += e
    _check(total, total_err, settings, epsabs, f"[{pts[0]:.6g}, {pts[-1]:.6g}] ({pts.size - 1} pieces)")
    return total
