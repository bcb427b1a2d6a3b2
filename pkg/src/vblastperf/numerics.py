"""Adaptive quadrature used as the independent oracle for every closed form.

The driver bisects the worst interval first, estimating each interval with
a 21-point Gauss-Legendre rule and taking the difference against the
10-point rule as its error.  Gauss nodes are strictly interior, so
integrable endpoint singularities (the t -> 0 edge of the ordered-stage
CDF integral, the logarithmic K_0 edge of the cross-product density) are
never evaluated at the endpoint itself.

Semi-infinite integrals are mapped onto (0,1) with the fixed substitution
t = lo + u/(1-u), which suits the exponentially decaying integrands this
library produces.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .specfun import EvalResult

__all__ = [
    "QuadratureControl",
    "SeriesControl",
    "IntegrandError",
    "integrate_finite",
    "integrate_semi_infinite",
]


@dataclass(frozen=True)
class QuadratureControl:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the double-series evaluations: a series stops
    only after the relative contribution stays below rel_term_tol for two
    consecutive indices."""

    rel_term_tol: float = 1e-12
    max_outer_terms: int = 200
    max_inner_terms: int = 200

    def __post_init__(self):
        if self.rel_term_tol <= 0.0:
            raise ValueError("rel_term_tol must be strictly positive")
        if self.max_outer_terms < 1 or self.max_inner_terms < 1:
            raise ValueError("series term limits must be positive")


class IntegrandError(ValueError):
    """Integrand returned NaN; carries the offending abscissa."""

    def __init__(self, abscissa: float):
        super().__init__(f"integrand returned NaN at t = {abscissa!r}")
        self.abscissa = abscissa


@lru_cache(maxsize=4)
def _gauss_pair(n_low: int = 10, n_high: int = 21):
    xl, wl = np.polynomial.legendre.leggauss(n_low)
    xh, wh = np.polynomial.legendre.leggauss(n_high)
    return xl, wl, xh, wh


def _eval_interval(f, lo: float, hi: float):
    """Return (high-order estimate, error estimate) on [lo, hi]."""
    xl, wl, xh, wh = _gauss_pair()
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s_low = 0.0
    for x, w in zip(xl, wl):
        t = mid + half * x
        v = f(t)
        if math.isnan(v):
            raise IntegrandError(t)
        s_low += w * v
    s_high = 0.0
    for x, w in zip(xh, wh):
        t = mid + half * x
        v = f(t)
        if math.isnan(v):
            raise IntegrandError(t)
        s_high += w * v
    s_low *= half
    s_high *= half
    return s_high, abs(s_high - s_low)


def integrate_finite(f, lo: float, hi: float,
                     ctl: QuadratureControl = QuadratureControl()) -> EvalResult:
    """Adaptive integral of f over (lo, hi).

    The returned error estimate is the sum of per-interval estimates;
    ``converged`` means it is below max(abs_tol, rel_tol * |value|).
    Splitting any interval by hand and summing the pieces reproduces the
    single-interval result within the combined estimates.
    """
    if not lo < hi:
        raise ValueError(f"integrate_finite requires lo < hi, got [{lo}, {hi}]")
    val, err = _eval_interval(f, lo, hi)
    # heap of (-error, counter, lo, hi, value, error); counter breaks ties
    count = 0
    heap = [(-err, count, lo, hi, val, err)]
    total = val
    total_err = err
    used = 1
    while used < ctl.max_subdivisions:
        if total_err <= max(ctl.abs_tol, ctl.rel_tol * abs(total)):
            break
        neg_err, _, a, b, v, e = heapq.heappop(heap)
        if e <= 0.0 or b - a < 1e-15 * (abs(a) + abs(b) + 1.0):
            # cannot refine further; put it back and stop
            heapq.heappush(heap, (neg_err, count + 1, a, b, v, e))
            break
        mid = 0.5 * (a + b)
        v1, e1 = _eval_interval(f, a, mid)
        v2, e2 = _eval_interval(f, mid, b)
        total += (v1 + v2) - v
        total_err += (e1 + e2) - e
        count += 1
        heapq.heappush(heap, (-e1, count, a, mid, v1, e1))
        count += 1
        heapq.heappush(heap, (-e2, count, mid, b, v2, e2))
        used += 1
    converged = total_err <= max(ctl.abs_tol, ctl.rel_tol * abs(total))
    return EvalResult(total, total_err, used, converged)


def integrate_semi_infinite(f, lo: float = 0.0,
                            ctl: QuadratureControl = QuadratureControl()) -> EvalResult:
    """Integral of f over (lo, inf) for absolutely convergent integrands.

    Substitutes t = lo + u/(1-u), dt = du/(1-u)^2 and defers to
    integrate_finite on (0, 1); u = 1 is never evaluated.
    """
    def g(u: float) -> float:
        om = 1.0 - u
        t = lo + u / om
        return f(t) / (om * om)

    return integrate_finite(g, 0.0, 1.0, ctl)
