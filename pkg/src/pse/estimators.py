"""Penalized sieve estimation: joint and nested algorithms, the omega tuning
loop, Schur-complement standard errors, the rho-only (approximate-MLE) limit,
and the equality-constrained (MPEC) limit with its own standard errors.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    InvalidInterval,
    MaxIterationsExceeded,
    NoConvergence,
    NotNegativeDefiniteWarning,
)
from .models.base import ModelDerivatives, StructuralModel
from .numopt import (
    MaximizerResult,
    NewtonOptions,
    ObjectiveEval,
    newton_maximize,
    solve_linear,
)

__all__ = [
    "HessianBlocks",
    "EstimateResult",
    "OmegaStep",
    "OmegaPath",
    "penalized_objective",
    "hessian_blocks",
    "inner_solve",
    "implicit_beta_gradient",
    "outer_gradient",
    "fisher_information",
    "std_errors_from_information",
    "joint_estimate",
    "nested_estimate",
    "amle_estimate",
    "mpec_estimate",
    "mpec_standard_errors",
    "interval_overlap_ratio",
    "select_omega",
]


@dataclass
class HessianBlocks:
    """Blocks of the penalized objective's Hessian at a point, split by (beta, theta)."""

    h_bb: np.ndarray
    h_bt: np.ndarray
    h_tt: np.ndarray

    def __post_init__(self):
        self.h_bb = 0.5 * (self.h_bb + self.h_bb.T)
        self.h_tt = 0.5 * (self.h_tt + self.h_tt.T)

    def stacked(self) -> np.ndarray:
        top = np.hstack([self.h_bb, self.h_bt])
        bottom = np.hstack([self.h_bt.T, self.h_tt])
        return np.vstack([top, bottom])


@dataclass
class EstimateResult:
    theta_hat: np.ndarray
    beta_hat: np.ndarray
    std_errors: np.ndarray
    conf_intervals: list[tuple[float, float]]
    loglik: float
    penalty_value: float
    omega: float
    converged: bool
    algorithm: str
    param_names: tuple[str, ...] = ()
    multipliers: Optional[np.ndarray] = None


@dataclass
class OmegaStep:
    omega: float
    result: EstimateResult
    overlap_ratio: Optional[float] = None


@dataclass
class OmegaPath:
    steps: list[OmegaStep] = field(default_factory=list)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([s.omega for s in self.steps])


def _assemble(md: ModelDerivatives, omega: float) -> ObjectiveEval:
    grad = np.concatenate([
        md.loglik_grad_beta - omega * md.penalty_grad_beta,
        md.loglik_grad_theta - omega * md.penalty_grad_theta,
    ])
    blocks = _blocks_from(md, omega)
    return ObjectiveEval(
        value=md.loglik - omega * md.penalty,
        gradient=grad,
        hessian=blocks.stacked(),
    )


def _blocks_from(md: ModelDerivatives, omega: float) -> HessianBlocks:
    return HessianBlocks(
        h_bb=md.loglik_hess_beta - omega * md.penalty_hess_beta,
        h_bt=md.loglik_cross_beta_theta - omega * md.penalty_cross_beta_theta,
        h_tt=md.loglik_hess_theta - omega * md.penalty_hess_theta,
    )


def penalized_objective(
    model: StructuralModel, beta: np.ndarray, theta: np.ndarray, omega: float
) -> ObjectiveEval:
    """Value, gradient and Hessian of loglik - omega * penalty over stacked (beta, theta)."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return _assemble(model.evaluate(beta, theta), omega)


def hessian_blocks(
    model: StructuralModel, beta: np.ndarray, theta: np.ndarray, omega: float
) -> HessianBlocks:
    """The (beta, theta) block partition of the penalized Hessian at a point."""
    return _blocks_from(model.evaluate(beta, theta), omega)


def inner_solve(
    model: StructuralModel,
    theta: np.ndarray,
    omega: float,
    beta_init: np.ndarray,
    opts: Optional[NewtonOptions] = None,
) -> tuple[np.ndarray, HessianBlocks]:
    """Maximize loglik - omega * penalty over beta at fixed theta.

    Returns the maximizer and the Hessian blocks there. Raises
    MaxIterationsExceeded if the beta stationarity tolerance is not met.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    opts = opts or NewtonOptions()

    def objective(beta: np.ndarray) -> ObjectiveEval:
        md = model.evaluate(beta, theta)
        return ObjectiveEval(
            value=md.loglik - omega * md.penalty,
            gradient=md.loglik_grad_beta - omega * md.penalty_grad_beta,
            hessian=md.loglik_hess_beta - omega * md.penalty_hess_beta,
        )

    res = newton_maximize(objective, beta_init, opts)
    if not res.converged:
        raise MaxIterationsExceeded(
            f"inner solve stalled with |grad|_inf = {res.gradient_norm:.3e} at omega={omega:g}"
        )
    return res.argmax, hessian_blocks(model, res.argmax, theta, omega)


def implicit_beta_gradient(blocks: HessianBlocks) -> np.ndarray:
    """d beta_hat / d theta from the inner first-order conditions: -H_bb^{-1} H_bt."""
    return -solve_linear(blocks.h_bb, blocks.h_bt)


def outer_gradient(
    model: StructuralModel,
    theta: np.ndarray,
    beta_hat: np.ndarray,
    blocks: HessianBlocks,
) -> np.ndarray:
    """Gradient of theta -> loglik(beta_hat(theta), theta) through the inner solution."""
    md = model.evaluate(beta_hat, np.atleast_1d(np.asarray(theta, dtype=float)))
    implicit = implicit_beta_gradient(blocks)
    return md.loglik_grad_theta + implicit.T @ md.loglik_grad_beta


def fisher_information(blocks: HessianBlocks) -> np.ndarray:
    """Information for theta: H_tt - H_bt' H_bb^{-1} H_bt (Schur complement).

    Warns when the negated result has a nonpositive eigenvalue.
    """
    x = solve_linear(blocks.h_bb, blocks.h_bt)
    info = blocks.h_tt - blocks.h_bt.T @ x
    info = 0.5 * (info + info.T)
    if np.min(np.linalg.eigvalsh(-info)) <= 0:
        warnings.warn(
            "information matrix is not negative definite at the reported optimum",
            NotNegativeDefiniteWarning,
        )
    return info


def std_errors_from_information(info: np.ndarray) -> np.ndarray:
    """sqrt of the diagonal of (-info)^{-1}, clipped at zero."""
    cov = np.linalg.inv(-info)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _confidence_intervals(theta: np.ndarray, se: np.ndarray, alpha: float):
    z_lo, z_hi = norm.ppf(alpha / 2.0), norm.ppf(1.0 - alpha / 2.0)
    return [(float(t + z_lo * s), float(t + z_hi * s)) for t, s in zip(theta, se)]


def _default_inits(model, theta_init, beta_init):
    theta = (
        np.zeros(model.dim_theta)
        if theta_init is None
        else np.atleast_1d(np.asarray(theta_init, dtype=float)).copy()
    )
    beta = (
        model.initial_beta()
        if beta_init is None
        else np.asarray(beta_init, dtype=float).copy()
    )
    return theta, beta


def joint_estimate(
    model: StructuralModel,
    omega: float,
    theta_init=None,
    beta_init=None,
    opts: Optional[NewtonOptions] = None,
    alpha: float = 0.05,
) -> EstimateResult:
    """Single-level maximization of loglik - omega * penalty over stacked (beta, theta)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    theta0, beta0 = _default_inits(model, theta_init, beta_init)
    kb = model.dim_beta

    def objective(z: np.ndarray) -> ObjectiveEval:
        return penalized_objective(model, z[:kb], z[kb:], omega)

    res = newton_maximize(objective, np.concatenate([beta0, theta0]), opts)
    beta_hat, theta_hat = res.argmax[:kb], res.argmax[kb:]
    return _finish(model, beta_hat, theta_hat, omega, "joint", res.converged, alpha)


def _finish(model, beta_hat, theta_hat, omega, algorithm, converged, alpha) -> EstimateResult:
    md = model.evaluate(beta_hat, theta_hat)
    blocks = _blocks_from(md, omega)
    info = fisher_information(blocks)
    se = std_errors_from_information(info)
    return EstimateResult(
        theta_hat=np.asarray(theta_hat, dtype=float),
        beta_hat=np.asarray(beta_hat, dtype=float),
        std_errors=se,
        conf_intervals=_confidence_intervals(theta_hat, se, alpha),
        loglik=md.loglik,
        penalty_value=md.penalty,
        omega=float(omega),
        converged=bool(converged),
        algorithm=algorithm,
        param_names=tuple(model.param_names),
    )


class _ProfiledObjective:
    """Inner solve plus outer value/gradient, with warm starts across calls.

    outer="penalized" profiles the full criterion loglik - omega * penalty, so
    its stationary points coincide with the joint algorithm's. outer="likelihood"
    profiles the data likelihood alone through the implicit-function gradient;
    with rho_only=True the inner step ignores the likelihood (the omega = infinity
    limit).
    """

    def __init__(self, model, omega, beta_start, outer="penalized", rho_only=False,
                 inner_opts=None):
        self.model = model
        self.omega = omega
        self.outer = outer
        self.rho_only = rho_only
        self.inner_opts = inner_opts or NewtonOptions()
        self.beta_warm = np.asarray(beta_start, dtype=float).copy()

    def _inner(self, theta) -> tuple[np.ndarray, ModelDerivatives, HessianBlocks]:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.rho_only:
            def objective(beta):
                md = self.model.evaluate(beta, theta)
                return ObjectiveEval(
                    value=-md.penalty,
                    gradient=-md.penalty_grad_beta,
                    hessian=-md.penalty_hess_beta,
                )
            res = newton_maximize(objective, self.beta_warm, self.inner_opts)
            if not res.converged:
                raise MaxIterationsExceeded("equilibrium-fit inner solve stalled")
            beta = res.argmax
            md = self.model.evaluate(beta, theta)
            blocks = HessianBlocks(
                h_bb=-md.penalty_hess_beta,
                h_bt=-md.penalty_cross_beta_theta,
                h_tt=-md.penalty_hess_theta,
            )
        else:
            beta, blocks = inner_solve(
                self.model, theta, self.omega, self.beta_warm, self.inner_opts
            )
            md = self.model.evaluate(beta, theta)
        self.beta_warm = beta.copy()
        return beta, md, blocks

    def value(self, theta) -> float:
        _, md, _ = self._inner(theta)
        if self.outer == "penalized":
            return md.loglik - self.omega * md.penalty
        return md.loglik

    def gradient(self, theta) -> np.ndarray:
        _, md, blocks = self._inner(theta)
        if self.outer == "penalized":
            return md.loglik_grad_theta - self.omega * md.penalty_grad_theta
        implicit = implicit_beta_gradient(blocks)
        return md.loglik_grad_theta + implicit.T @ md.loglik_grad_beta

    def evaluation(self, theta) -> ObjectiveEval:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        _, md, blocks = self._inner(theta)
        if self.outer == "penalized":
            value = md.loglik - self.omega * md.penalty
            grad = md.loglik_grad_theta - self.omega * md.penalty_grad_theta
        else:
            value = md.loglik
            implicit = implicit_beta_gradient(blocks)
            grad = md.loglik_grad_theta + implicit.T @ md.loglik_grad_beta
        return ObjectiveEval(value=value, gradient=grad, hessian=self.fd_hessian(theta))

    def fd_hessian(self, theta) -> np.ndarray:
        """Central differences of the analytic outer gradient."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        d = theta.size
        h = 1e-5 * (1.0 + np.abs(theta))
        hess = np.empty((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = h[i]
            gp = self.gradient(theta + e)
            gm = self.gradient(theta - e)
            hess[:, i] = (gp - gm) / (2.0 * h[i])
        return 0.5 * (hess + hess.T)


def nested_estimate(
    model: StructuralModel,
    omega: float,
    theta_init=None,
    beta_init=None,
    opts: Optional[NewtonOptions] = None,
    alpha: float = 0.05,
    outer: str = "penalized",
) -> EstimateResult:
    """Two-level estimation: inner sieve fit at each theta, outer search over theta.

    The default outer criterion profiles the penalized objective, which makes
    the nested solution coincide with the joint one at the same omega. Pass
    outer="likelihood" to maximize the profiled data likelihood instead (the
    implicit-gradient formulation); the two differ by the theta-sensitivity of
    the profiled penalty, which vanishes as omega grows.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if outer not in ("penalized", "likelihood"):
        raise ValueError(f"unknown outer criterion {outer!r}")
    theta0, beta0 = _default_inits(model, theta_init, beta_init)
    opts = opts or NewtonOptions()
    prof = _ProfiledObjective(model, omega, beta0, outer=outer, inner_opts=opts)
    res = newton_maximize(prof.evaluation, theta0, opts, value_fn=prof.value)
    theta_hat = res.argmax
    beta_hat, _, _ = prof._inner(theta_hat)
    return _finish(model, beta_hat, theta_hat, omega, "nested", res.converged, alpha)


def amle_estimate(
    model: StructuralModel,
    theta_init=None,
    beta_init=None,
    opts: Optional[NewtonOptions] = None,
    alpha: float = 0.05,
) -> EstimateResult:
    """The omega -> infinity nested limit: inner step fits the equilibrium alone.

    The inner problem minimizes the penalty (no data), the outer maximizes the
    resulting profiled likelihood; standard errors come from a finite-difference
    Hessian of that profile.
    """
    theta0, beta0 = _default_inits(model, theta_init, beta_init)
    opts = opts or NewtonOptions()
    prof = _ProfiledObjective(
        model, omega=np.inf, beta_start=beta0, outer="likelihood", rho_only=True,
        inner_opts=opts,
    )
    res = newton_maximize(prof.evaluation, theta0, opts, value_fn=prof.value)
    theta_hat = res.argmax
    beta_hat, md, _ = prof._inner(theta_hat)
    info = prof.fd_hessian(theta_hat)
    se = std_errors_from_information(info)
    return EstimateResult(
        theta_hat=theta_hat,
        beta_hat=beta_hat,
        std_errors=se,
        conf_intervals=_confidence_intervals(theta_hat, se, alpha),
        loglik=md.loglik,
        penalty_value=md.penalty,
        omega=np.inf,
        converged=res.converged,
        algorithm="amle",
        param_names=tuple(model.param_names),
    )


def mpec_standard_errors(
    blocks: HessianBlocks, grad_g_beta: np.ndarray, grad_g_theta: np.ndarray
) -> np.ndarray:
    """Information for theta at a constrained optimum, from Lagrangian blocks.

    With db = -[grad_g_beta]^{-1} grad_g_theta, returns
    H_tt + db' H_bb db + db' H_bt + H_bt' db.
    """
    db = -solve_linear(grad_g_beta, grad_g_theta)
    info = blocks.h_tt + db.T @ blocks.h_bb @ db + db.T @ blocks.h_bt + blocks.h_bt.T @ db
    return 0.5 * (info + info.T)


def mpec_estimate(
    model,
    theta_init=None,
    alpha: float = 0.05,
    constraint_tol: float = 1e-10,
    max_outer: int = 60,
    opts: Optional[NewtonOptions] = None,
) -> EstimateResult:
    """Likelihood maximization under hard equilibrium constraints.

    Solves max loglik(p, theta) s.t. g(p, theta) = 0 by an augmented-Lagrangian
    scheme built on the Newton maximizer (initial penalty 10, growth 10,
    first-order multiplier updates). Standard errors follow the constrained
    information formula; the multipliers are reported on the result.
    """
    p, theta = model.initial_point()
    if theta_init is not None:
        theta = np.atleast_1d(np.asarray(theta_init, dtype=float)).copy()
    kb = model.dim_beta
    lam = np.zeros(model.dim_constraints)
    mu = 10.0
    opts = opts or NewtonOptions(grad_tol=1e-9)
    g_prev_norm = np.inf
    converged = False

    def al_objective(z: np.ndarray) -> ObjectiveEval:
        pz, tz = z[:kb], z[kb:]
        g = model.constraints(pz, tz)
        jp = model.constraints_jac_p(pz, tz)
        jt = model.constraints_jac_theta(pz, tz)
        lam_eff = lam - mu * g
        value = model.loglik(pz, tz) + lam @ g - 0.5 * mu * (g @ g)
        grad = np.concatenate([
            model.loglik_grad_p(pz, tz) + jp.T @ lam_eff,
            model.loglik_grad_theta(pz, tz) + jt.T @ lam_eff,
        ])
        hpp_c, hpt_c, htt_c = model.constraints_hess_contract(pz, tz, lam_eff)
        j_full = np.hstack([jp, jt])
        hess = np.block([
            [model.loglik_hess_pp(pz, tz) + hpp_c,
             model.loglik_cross_pt(pz, tz) + hpt_c],
            [(model.loglik_cross_pt(pz, tz) + hpt_c).T,
             model.loglik_hess_tt(pz, tz) + htt_c],
        ])
        hess -= mu * j_full.T @ j_full
        return ObjectiveEval(value=value, gradient=grad, hessian=hess)

    z = np.concatenate([p, theta])
    for _ in range(max_outer):
        res = newton_maximize(al_objective, z, opts)
        z = res.argmax
        g = model.constraints(z[:kb], z[kb:])
        gnorm = float(np.max(np.abs(g)))
        lam = lam - mu * g
        if gnorm <= constraint_tol and res.converged:
            converged = True
            break
        if gnorm > 0.25 * g_prev_norm:
            mu *= 10.0
        g_prev_norm = gnorm
    if not converged:
        raise NoConvergence(
            f"augmented-Lagrangian loop left |g|_inf = {gnorm:.3e} > {constraint_tol:g}"
        )

    p_hat, theta_hat = z[:kb], z[kb:]
    hpp_c, hpt_c, htt_c = model.constraints_hess_contract(p_hat, theta_hat, lam)
    blocks = HessianBlocks(
        h_bb=model.loglik_hess_pp(p_hat, theta_hat) + hpp_c,
        h_bt=model.loglik_cross_pt(p_hat, theta_hat) + hpt_c,
        h_tt=model.loglik_hess_tt(p_hat, theta_hat) + htt_c,
    )
    info = mpec_standard_errors(
        blocks,
        model.constraints_jac_p(p_hat, theta_hat),
        model.constraints_jac_theta(p_hat, theta_hat),
    )
    se = std_errors_from_information(info)
    g = model.constraints(p_hat, theta_hat)
    return EstimateResult(
        theta_hat=theta_hat,
        beta_hat=p_hat,
        std_errors=se,
        conf_intervals=_confidence_intervals(theta_hat, se, alpha),
        loglik=model.loglik(p_hat, theta_hat),
        penalty_value=float(g @ g),
        omega=np.inf,
        converged=True,
        algorithm="mpec",
        param_names=tuple(model.param_names),
        multipliers=lam,
    )


def interval_overlap_ratio(a: Sequence[float], b: Sequence[float]) -> float:
    """min(|a ∩ b| / |a|, |a ∩ b| / |b|); point intervals match only exactly."""
    (a_lo, a_hi), (b_lo, b_hi) = a, b
    if a_lo > a_hi or b_lo > b_hi:
        raise InvalidInterval("interval endpoints must satisfy lo <= hi")
    len_a, len_b = a_hi - a_lo, b_hi - b_lo
    if len_a == 0.0 or len_b == 0.0:
        return 1.0 if (len_a == len_b == 0.0 and a_lo == b_lo) else 0.0
    inter = min(a_hi, b_hi) - max(a_lo, b_lo)
    if inter <= 0.0:
        return 0.0
    return min(inter / len_a, inter / len_b)


def select_omega(
    model: StructuralModel,
    omega_1: float = 10.0,
    T: float = 10.0,
    alpha: float = 0.05,
    c: float = 0.95,
    algorithm: str = "joint",
    theta_init=None,
    beta_init=None,
    max_steps: int = 15,
    opts: Optional[NewtonOptions] = None,
) -> tuple[OmegaPath, EstimateResult]:
    """Grow omega by factor T until consecutive confidence intervals stabilize.

    Stops at the first step whose elementwise CI overlap with the previous step
    is at least c for every component. Each step warm-starts from the previous
    solution. Hits the step cap -> the final result carries converged=False.
    """
    if omega_1 <= 0 or T <= 1 or not (0 < c <= 1):
        raise ValueError("need omega_1 > 0, T > 1 and c in (0, 1]")
    estimate = {"joint": joint_estimate, "nested": nested_estimate}[algorithm]
    theta_warm, beta_warm = theta_init, beta_init
    path = OmegaPath()
    omega = float(omega_1)
    prev: Optional[EstimateResult] = None
    for _ in range(max_steps):
        res = estimate(
            model, omega, theta_init=theta_warm, beta_init=beta_warm,
            opts=opts, alpha=alpha,
        )
        overlap = None
        if prev is not None:
            overlap = min(
                interval_overlap_ratio(ci_prev, ci_now)
                for ci_prev, ci_now in zip(prev.conf_intervals, res.conf_intervals)
            )
        path.steps.append(OmegaStep(omega=omega, result=res, overlap_ratio=overlap))
        if overlap is not None and overlap >= c:
            return path, res
        prev = res
        theta_warm, beta_warm = res.theta_hat, res.beta_hat
        omega *= T
    return path, replace(path.steps[-1].result, converged=False)
