"""Dense linear solves, a damped Newton maximizer, and a finite-difference checker.

The maximizer consumes analytic gradients and Hessians supplied by the caller
and applies an eigenvalue-shift safeguard whenever the Hessian is not negative
definite, followed by an Armijo backtracking line search.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NonFiniteObjective, SingularMatrix

__all__ = [
    "ObjectiveEval",
    "MaximizerResult",
    "NewtonOptions",
    "solve_linear",
    "newton_maximize",
    "check_gradient",
]


@dataclass
class ObjectiveEval:
    """Value, gradient and (optional) Hessian of a scalar objective at a point.

    The Hessian is symmetrized on construction; analytic cross-derivatives may
    be asymmetric at round-off level.
    """

    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gradient = np.atleast_1d(np.asarray(self.gradient, dtype=float))
        if self.hessian is not None:
            h = np.asarray(self.hessian, dtype=float)
            self.hessian = 0.5 * (h + h.T)


@dataclass
class MaximizerResult:
    argmax: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    hessian_at_opt: Optional[np.ndarray]


@dataclass
class NewtonOptions:
    grad_tol: float = 1e-8
    step_tol: float = 1e-12
    max_iter: int = 200
    armijo: float = 1e-4
    max_halvings: int = 50


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b by pivoted LU factorization.

    Raises SingularMatrix when a pivot magnitude falls below 1e-13 * ||a||_inf.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs of length {b.shape[0]} does not conform to {a.shape}")
    scale = np.linalg.norm(a, np.inf)
    lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.any(pivots < 1e-13 * scale):
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below 1e-13 * ||A||_inf = {1e-13 * scale:.3e}"
        )
    return lu_solve((lu, piv), b, check_finite=False)


def _validated(ev: ObjectiveEval) -> ObjectiveEval:
    if not np.isfinite(ev.value) or not np.all(np.isfinite(ev.gradient)):
        raise NonFiniteObjective("objective value or gradient is NaN or infinite")
    return ev


def _damped_hessian(h: np.ndarray) -> np.ndarray:
    """Shift an indefinite Hessian so the Newton system is negative definite."""
    eigs = np.linalg.eigvalsh(h)
    lam_max = eigs[-1]
    if lam_max > -1e-12 * max(1.0, abs(eigs[0])):
        delta = 1e-6 * (1.0 + abs(lam_max))
        return h - (abs(lam_max) + delta) * np.eye(h.shape[0])
    return h


def newton_maximize(
    objective: Callable[[np.ndarray], ObjectiveEval],
    x0: np.ndarray,
    opts: Optional[NewtonOptions] = None,
    value_fn: Optional[Callable[[np.ndarray], float]] = None,
) -> MaximizerResult:
    """Maximize a twice-differentiable objective from x0.

    `objective` must return an ObjectiveEval with gradient (and normally a
    Hessian; with hessian=None a plain gradient step is used). `value_fn`, when
    given, is a cheaper value-only evaluator used inside the line search.

    Non-finite values at line-search trial points reject the step; a non-finite
    value at an accepted point raises NonFiniteObjective. When the iteration cap
    is reached, the best point seen is returned with converged=False.
    """
    opts = opts or NewtonOptions()
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def trial_value(z: np.ndarray) -> float:
        try:
            if value_fn is not None:
                return float(value_fn(z))
            return float(objective(z).value)
        except NonFiniteObjective:
            return -np.inf

    ev = _validated(objective(x))
    best_x, best_ev = x.copy(), ev
    iterations = 0

    for _ in range(opts.max_iter):
        gnorm = float(np.max(np.abs(ev.gradient)))
        if gnorm <= opts.grad_tol:
            break
        if ev.hessian is not None:
            step = solve_linear(_damped_hessian(ev.hessian), -ev.gradient)
        else:
            step = ev.gradient / max(1.0, gnorm)
        slope = float(ev.gradient @ step)
        if slope <= 0.0:  # safeguard: fall back to ascent direction
            step = ev.gradient / max(1.0, gnorm)
            slope = float(ev.gradient @ step)

        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            v = trial_value(x + t * step)
            if np.isfinite(v) and v >= ev.value + opts.armijo * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x = x + t * step
        ev = _validated(objective(x))
        iterations += 1
        if ev.value > best_ev.value:
            best_x, best_ev = x.copy(), ev
        if float(np.linalg.norm(t * step)) <= opts.step_tol:
            break

    if best_ev.value > ev.value:
        x, ev = best_x, best_ev
    gnorm = float(np.max(np.abs(ev.gradient)))
    return MaximizerResult(
        argmax=x,
        value=float(ev.value),
        gradient_norm=gnorm,
        iterations=iterations,
        converged=gnorm <= opts.grad_tol,
        hessian_at_opt=ev.hessian,
    )


def check_gradient(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    h: float = 1e-6,
) -> float:
    """Max relative error between `grad` and central differences of `f` at x.

    Relative error uses denominator max(1, |component|).
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.atleast_1d(np.asarray(grad(x), dtype=float))
    fd = np.empty_like(g)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteObjective("objective non-finite at a difference point")
        fd[i] = (fp - fm) / (2.0 * h)
    if not np.all(np.isfinite(g)):
        raise NonFiniteObjective("gradient is NaN or infinite")
    return float(np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))))
