"""The function w satisfying w * exp(w) = x on x >= 0, by bisection.

A plain contraction iteration w <- x * exp(-w) is provided as an independent
route for x below e, where the iteration is a contraction.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, NoConvergence

__all__ = ["lambert_w", "lambert_w_contraction"]


def lambert_w(x, tol: float = 1e-12, max_iter: int = 200):
    """Principal branch on x >= 0; residual |w e^w - x| <= tol * (1 + x).

    Bisection on [0, max(1, log(1 + x)) + 1]. Accepts scalars or arrays.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("lambert_w requires finite x >= 0")
    lo = np.zeros_like(x)
    hi = np.maximum(1.0, np.log1p(x)) + 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = mid * np.exp(mid) - x
        hi = np.where(f > 0.0, mid, hi)
        lo = np.where(f > 0.0, lo, mid)
        if np.all(np.abs(f) <= tol * (1.0 + x)):
            break
    w = 0.5 * (lo + hi)
    # the midpoint may sit a hair outside tolerance; keep the better endpoint
    res_w = np.abs(w * np.exp(w) - x)
    res_lo = np.abs(lo * np.exp(lo) - x)
    w = np.where(res_lo < res_w, lo, w)
    return float(w[0]) if scalar else w


def lambert_w_contraction(x: float, tol: float = 1e-13, max_iter: int = 2_000_000) -> float:
    """Same function via the fixed-point iteration w <- x * exp(-w), x < e only."""
    if x < 0:
        raise DomainError("lambert_w_contraction requires x >= 0")
    if x >= np.e:
        raise DomainError("the iteration is a contraction only for x < e")
    w = 0.0
    for _ in range(max_iter):
        w_next = x * math.exp(-w)
        if abs(w_next - w) <= tol:
            return float(w_next)
        w = w_next
    raise NoConvergence(f"contraction did not settle within {max_iter} iterations")
