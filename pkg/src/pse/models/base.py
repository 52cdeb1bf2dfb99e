"""Shared model interfaces: derivative bundles, penalty grids, model protocol."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import InvalidRange

__all__ = ["ModelDerivatives", "PenaltyGrid", "StructuralModel", "uniform_grid"]


@dataclass
class ModelDerivatives:
    """Likelihood and penalty values with every derivative block the estimators use.

    Shapes: beta blocks are (Kt,) / (Kt, Kt) with Kt the total sieve dimension,
    theta blocks are (d,) / (d, d), and cross blocks are (Kt, d).
    """

    loglik: float
    loglik_grad_beta: np.ndarray
    loglik_hess_beta: np.ndarray
    penalty: float
    penalty_grad_beta: np.ndarray
    penalty_hess_beta: np.ndarray
    penalty_cross_beta_theta: np.ndarray
    loglik_grad_theta: np.ndarray
    penalty_grad_theta: np.ndarray
    loglik_hess_theta: np.ndarray
    penalty_hess_theta: np.ndarray
    loglik_cross_beta_theta: np.ndarray


@dataclass(frozen=True)
class PenaltyGrid:
    """Sorted abscissae at which the equilibrium-condition residual is summed."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("penalty grid must be a nonempty 1-d array")
        if np.any(np.diff(pts) < 0):
            pts = np.sort(pts)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


def uniform_grid(lo: float, hi: float, n_points: int = 1000) -> PenaltyGrid:
    """Equally spaced penalty grid on [lo, hi]."""
    if not lo < hi:
        raise InvalidRange(f"need lo < hi, got [{lo}, {hi}]")
    return PenaltyGrid(points=np.linspace(lo, hi, n_points))


@runtime_checkable
class StructuralModel(Protocol):
    """What the penalized estimators require of a concrete model."""

    dim_beta: int
    dim_theta: int
    param_names: Sequence[str]

    def evaluate(self, beta: np.ndarray, theta: np.ndarray) -> ModelDerivatives:
        """All likelihood/penalty blocks at (beta, theta)."""
        ...

    def initial_beta(self) -> np.ndarray:
        """Unpenalized sieve fit of the data, used as a starting value."""
        ...
