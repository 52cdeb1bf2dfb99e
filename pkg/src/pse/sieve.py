"""Cubic basis functions on a knot grid, and the linear/logistic sieves built on them.

The basis consists of K = n + 4 pieces on [lo, hi] with n interior knots:
one-sided cubics s_1..s_n anchored at consecutive knot triples, a right-edge
cubic s_{n+1}, a left-edge cubic s_{n+2}, the linear term s_{n+3}(x) = x - lo,
and the constant s_{n+4}(x) = 1. The affine tails a_{1k} x + a_{0k} make each
piece and its first derivative continuous across its knots.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DimensionMismatch, InvalidRange, OutOfSupport, SupportClampWarning

__all__ = [
    "KnotGrid",
    "SieveSpec",
    "build_knots",
    "eval_basis",
    "eval_basis_derivative",
    "basis_matrix",
    "basis_derivative_matrix",
    "eval_sieve",
]

_SUPPORT_SLACK = 1e-12
_EXP_CLIP = 700.0
_ONE_MINUS = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class KnotGrid:
    """Knot sequence lo = tau_0 < tau_1 < ... < tau_{n+1} = hi."""

    lo: float
    hi: float
    interior: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidRange(f"need lo < hi, got [{self.lo}, {self.hi}]")
        taus = np.asarray(self.interior, dtype=float)
        object.__setattr__(self, "interior", tuple(taus))
        if taus.size:
            if np.any(np.diff(taus) <= 0):
                raise InvalidRange("interior knots must be strictly increasing")
            if taus[0] <= self.lo or taus[-1] >= self.hi:
                raise InvalidRange("interior knots must lie strictly inside (lo, hi)")

    @property
    def knots(self) -> np.ndarray:
        return np.concatenate([[self.lo], self.interior, [self.hi]])

    def basis_count(self) -> int:
        return len(self.interior) + 4


@dataclass(frozen=True)
class SieveSpec:
    """A basis grid plus the link mapping the linear combination to outputs."""

    grid: KnotGrid
    link: Literal["identity", "logistic"] = "identity"
    K: int = field(init=False)

    def __post_init__(self):
        if self.link not in ("identity", "logistic"):
            raise ValueError(f"unknown link {self.link!r}")
        object.__setattr__(self, "K", self.grid.basis_count())


def build_knots(lo: float, hi: float, n_interior: int) -> KnotGrid:
    """Equally spaced interior knots: tau_i = lo + i (hi - lo) / (n + 1)."""
    if not lo < hi:
        raise InvalidRange(f"need lo < hi, got [{lo}, {hi}]")
    if n_interior < 0:
        raise ValueError("n_interior must be nonnegative")
    step = (hi - lo) / (n_interior + 1)
    interior = tuple(lo + i * step for i in range(1, n_interior + 1))
    return KnotGrid(lo=float(lo), hi=float(hi), interior=interior)


def _clamped(grid: KnotGrid, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < grid.lo - _SUPPORT_SLACK) or np.any(x > grid.hi + _SUPPORT_SLACK):
        bad = x[(x < grid.lo - _SUPPORT_SLACK) | (x > grid.hi + _SUPPORT_SLACK)]
        raise OutOfSupport(
            f"x = {bad.flat[0]!r} outside [{grid.lo}, {grid.hi}] by more than {_SUPPORT_SLACK}"
        )
    if np.any(x < grid.lo) or np.any(x > grid.hi):
        warnings.warn(
            "evaluation point clamped onto the knot support", SupportClampWarning
        )
        x = np.clip(x, grid.lo, grid.hi)
    return x


def _tail_coeffs(tau: np.ndarray, k: int) -> tuple[float, float]:
    # a_{1k}, a_{0k}: continuity constants of s_k's affine tail
    tkm, tk, tkp = tau[k - 1], tau[k], tau[k + 1]
    a1 = (tkp - tkm) / 2.0
    a0 = (tkm**2 - tkp**2 + tk * (tkm - tkp)) / 6.0
    return a1, a0


def basis_matrix(grid: KnotGrid, x) -> np.ndarray:
    """Evaluate all K basis functions at each point; rows index points."""
    x = _clamped(grid, np.atleast_1d(x))
    tau = grid.knots
    n = len(grid.interior)
    S = np.zeros((x.size, n + 4))
    for k in range(1, n + 1):
        tkm, tk, tkp = tau[k - 1], tau[k], tau[k + 1]
        a1, a0 = _tail_coeffs(tau, k)
        v = np.zeros_like(x)
        m = (x >= tkm) & (x < tk)
        v[m] = (x[m] - tkm) ** 3 / (6.0 * (tk - tkm))
        m = (x >= tk) & (x < tkp)
        v[m] = (x[m] - tkp) ** 3 / (6.0 * (tk - tkp)) + a1 * x[m] + a0
        m = x >= tkp
        v[m] = a1 * x[m] + a0
        S[:, k - 1] = v
    m = x >= tau[n]
    S[m, n] = (x[m] - tau[n]) ** 3
    t0, t1 = tau[0], tau[1]
    a1 = (t1 - t0) / 2.0
    a0 = (2.0 * t0**2 - t1**2 - t0 * t1) / 6.0
    S[:, n + 1] = np.where(x < t1, (t1 - x) ** 3 / (6.0 * (t1 - t0)), 0.0) + a1 * x + a0
    S[:, n + 2] = x - tau[0]
    S[:, n + 3] = 1.0
    return S


def basis_derivative_matrix(grid: KnotGrid, x) -> np.ndarray:
    """First derivatives of all K basis functions at each point."""
    x = _clamped(grid, np.atleast_1d(x))
    tau = grid.knots
    n = len(grid.interior)
    D = np.zeros((x.size, n + 4))
    for k in range(1, n + 1):
        tkm, tk, tkp = tau[k - 1], tau[k], tau[k + 1]
        a1, _ = _tail_coeffs(tau, k)
        v = np.zeros_like(x)
        m = (x >= tkm) & (x < tk)
        v[m] = (x[m] - tkm) ** 2 / (2.0 * (tk - tkm))
        m = (x >= tk) & (x < tkp)
        v[m] = (x[m] - tkp) ** 2 / (2.0 * (tk - tkp)) + a1
        m = x >= tkp
        v[m] = a1
        D[:, k - 1] = v
    m = x >= tau[n]
    D[m, n] = 3.0 * (x[m] - tau[n]) ** 2
    t0, t1 = tau[0], tau[1]
    a1 = (t1 - t0) / 2.0
    D[:, n + 1] = np.where(x < t1, -((t1 - x) ** 2) / (2.0 * (t1 - t0)), 0.0) + a1
    D[:, n + 2] = 1.0
    return D


def eval_basis(grid: KnotGrid, x: float) -> np.ndarray:
    """The vector (s_1(x), ..., s_K(x))."""
    return basis_matrix(grid, x)[0]


def eval_basis_derivative(grid: KnotGrid, x: float) -> np.ndarray:
    """The vector (s_1'(x), ..., s_K'(x))."""
    return basis_derivative_matrix(grid, x)[0]


def logistic_link(index) -> np.ndarray:
    """Map a sieve index eta to [1 + exp(eta)]^{-1}, guarded against overflow.

    Output is strictly inside (0, 1) for any finite index.
    """
    eta = np.clip(np.asarray(index, dtype=float), -_EXP_CLIP, _EXP_CLIP)
    p = 1.0 / (1.0 + np.exp(eta))
    return np.clip(p, 1e-300, _ONE_MINUS)


def eval_sieve(spec: SieveSpec, beta: np.ndarray, x) -> float | np.ndarray:
    """Evaluate the sieve sum_k beta_k s_k(x) under the spec's link."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec.K,):
        raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({spec.K},)")
    scalar = np.isscalar(x) or np.ndim(x) == 0
    index = basis_matrix(spec.grid, x) @ beta
    out = index if spec.link == "identity" else logistic_link(index)
    return float(out[0]) if scalar else out
