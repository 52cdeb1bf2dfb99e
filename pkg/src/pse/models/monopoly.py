"""Monopoly pricing with logit demand: normalized prices solve p e^p = theta * x.

Observed prices are the solution plus standard-normal noise, so the data
log-likelihood is Gaussian in the sieve residuals, and the equilibrium penalty
sums squared violations of p e^p - theta * x over a grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, DomainError, NonFiniteObjective
from ..sieve import SieveSpec, basis_matrix
from .base import ModelDerivatives, PenaltyGrid, uniform_grid
from .lambertw import lambert_w

__all__ = [
    "MonopolyDataset",
    "MonopolyModel",
    "MonopolyScalarModel",
    "MonopolyMpecModel",
    "monopoly_solve",
    "monopoly_eval",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class MonopolyDataset:
    """Covariates x > 0 and observed normalized prices y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.size == 0:
            raise ValueError("dataset must be nonempty")
        if x.shape != y.shape or x.ndim != 1:
            raise DimensionMismatch("x and y must be 1-d arrays of equal length")
        if np.any(x <= 0):
            raise DomainError("covariates must be strictly positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.size


def monopoly_solve(x, theta: float):
    """Exact normalized price: the w >= 0 with w e^w = theta * x."""
    if np.any(np.asarray(theta) <= 0) or np.any(np.asarray(x) <= 0):
        raise DomainError("monopoly_solve requires x > 0 and theta > 0")
    return lambert_w(np.multiply(theta, x))


def _price_derivative(w):
    # d/dz of the solution w(z): 1 / (e^w (1 + w)), stable down to z = 0
    return 1.0 / (np.exp(w) * (1.0 + w))


class MonopolyModel:
    """Sieve likelihood/penalty bundle for the pricing model.

    Uses an identity-link sieve for the price function. Basis matrices over the
    data and the penalty grid are precomputed once.
    """

    dim_theta = 1
    param_names = ("theta",)

    def __init__(self, spec: SieveSpec, data: MonopolyDataset, grid: PenaltyGrid | None = None):
        if spec.link != "identity":
            raise ValueError("the pricing model uses an identity-link sieve")
        self.spec = spec
        self.data = data
        self.grid = grid if grid is not None else uniform_grid(spec.grid.lo, spec.grid.hi)
        self.dim_beta = spec.K
        self._s_data = basis_matrix(spec.grid, data.x)
        self._s_grid = basis_matrix(spec.grid, self.grid.points)
        self._ll_hess = -self._s_data.T @ self._s_data
        self._xg = self.grid.points

    def initial_beta(self) -> np.ndarray:
        beta, *_ = np.linalg.lstsq(self._s_data, self.data.y, rcond=None)
        return beta

    def initial_theta(self) -> np.ndarray:
        # crude first-order-condition inversion on positive prices
        y = np.clip(self.data.y, 0.05, None)
        return np.array([float(np.median(y * np.exp(y) / self.data.x))])

    def evaluate(self, beta: np.ndarray, theta) -> ModelDerivatives:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.dim_beta,):
            raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({self.dim_beta},)")
        th = float(np.atleast_1d(theta)[0])
        if not np.all(np.isfinite(beta)) or not np.isfinite(th):
            raise NonFiniteObjective("non-finite parameters")

        resid = self.data.y - self._s_data @ beta
        n = resid.size
        loglik = -n * _LOG_SQRT_2PI - 0.5 * float(resid @ resid)
        ll_grad = self._s_data.T @ resid

        pb = np.clip(self._s_grid @ beta, -_EXP_CLIP, _EXP_CLIP)
        e = np.exp(pb)
        fit = pb * e - th * self._xg
        a = e * (1.0 + pb)
        penalty = float(fit @ fit)
        pen_grad = 2.0 * self._s_grid.T @ (fit * a)
        pen_hess = 2.0 * self._s_grid.T @ (
            (a * a + fit * e * (2.0 + pb))[:, None] * self._s_grid
        )
        pen_cross = (-2.0 * self._s_grid.T @ (self._xg * a))[:, None]
        pen_grad_theta = np.array([-2.0 * float(fit @ self._xg)])
        pen_hess_theta = np.array([[2.0 * float(self._xg @ self._xg)]])
        out = ModelDerivatives(
            loglik=loglik,
            loglik_grad_beta=ll_grad,
            loglik_hess_beta=self._ll_hess,
            penalty=penalty,
            penalty_grad_beta=pen_grad,
            penalty_hess_beta=pen_hess,
            penalty_cross_beta_theta=pen_cross,
            loglik_grad_theta=np.zeros(1),
            penalty_grad_theta=pen_grad_theta,
            loglik_hess_theta=np.zeros((1, 1)),
            penalty_hess_theta=pen_hess_theta,
            loglik_cross_beta_theta=np.zeros((self.dim_beta, 1)),
        )
        if not (np.isfinite(penalty) and np.all(np.isfinite(pen_grad))):
            raise NonFiniteObjective("penalty overflowed despite the exponent guard")
        return out

    # exact-solution likelihood, used by the MLE baseline
    def exact_loglik(self, theta) -> float:
        th = float(np.atleast_1d(theta)[0])
        if th <= 0:
            return -np.inf
        resid = self.data.y - lambert_w(th * self.data.x)
        return -len(self.data) * _LOG_SQRT_2PI - 0.5 * float(resid @ resid)

    def exact_loglik_grad(self, theta) -> np.ndarray:
        th = float(np.atleast_1d(theta)[0])
        w = lambert_w(th * self.data.x)
        dw = self.data.x * _price_derivative(w)
        return np.array([float((self.data.y - w) @ dw)])

    def sieve_values(self, beta: np.ndarray, x) -> np.ndarray:
        return basis_matrix(self.spec.grid, x) @ np.asarray(beta, dtype=float)


def monopoly_eval(
    spec: SieveSpec,
    beta: np.ndarray,
    theta: float,
    data: MonopolyDataset,
    grid: PenaltyGrid,
) -> ModelDerivatives:
    """One-shot evaluation of every likelihood/penalty block at (beta, theta)."""
    return MonopolyModel(spec, data, grid).evaluate(beta, theta)


class MonopolyScalarModel:
    """Degenerate single-covariate case: the sieve is the scalar price itself.

    All observations share one covariate value, the approximation coefficient
    equals the price there, and the penalty is the squared equilibrium residual
    at that single point.
    """

    dim_beta = 1
    dim_theta = 1
    param_names = ("theta",)

    def __init__(self, data: MonopolyDataset):
        x = np.unique(data.x)
        if x.size != 1:
            raise ValueError("scalar model requires a single covariate value")
        self.data = data
        self.x0 = float(x[0])

    def initial_beta(self) -> np.ndarray:
        return np.array([max(float(np.mean(self.data.y)), 0.0)])

    def initial_theta(self) -> np.ndarray:
        y = max(float(np.mean(self.data.y)), 0.05)
        return np.array([y * np.exp(y) / self.x0])

    def evaluate(self, beta: np.ndarray, theta) -> ModelDerivatives:
        b = float(np.atleast_1d(beta)[0])
        th = float(np.atleast_1d(theta)[0])
        resid = self.data.y - b
        n = resid.size
        loglik = -n * _LOG_SQRT_2PI - 0.5 * float(resid @ resid)
        pb = min(max(b, -_EXP_CLIP), _EXP_CLIP)
        e = np.exp(pb)
        fit = pb * e - th * self.x0
        a = e * (1.0 + pb)
        return ModelDerivatives(
            loglik=loglik,
            loglik_grad_beta=np.array([float(np.sum(resid))]),
            loglik_hess_beta=np.array([[-float(n)]]),
            penalty=fit * fit,
            penalty_grad_beta=np.array([2.0 * fit * a]),
            penalty_hess_beta=np.array([[2.0 * (a * a + fit * e * (2.0 + pb))]]),
            penalty_cross_beta_theta=np.array([[-2.0 * self.x0 * a]]),
            loglik_grad_theta=np.zeros(1),
            penalty_grad_theta=np.array([-2.0 * fit * self.x0]),
            loglik_hess_theta=np.zeros((1, 1)),
            penalty_hess_theta=np.array([[2.0 * self.x0 * self.x0]]),
            loglik_cross_beta_theta=np.zeros((1, 1)),
        )

    def exact_loglik(self, theta) -> float:
        th = float(np.atleast_1d(theta)[0])
        if th <= 0:
            return -np.inf
        resid = self.data.y - lambert_w(th * self.x0)
        return -len(self.data) * _LOG_SQRT_2PI - 0.5 * float(resid @ resid)

    def exact_loglik_grad(self, theta) -> np.ndarray:
        th = float(np.atleast_1d(theta)[0])
        w = lambert_w(th * self.x0)
        dw = self.x0 * _price_derivative(w)
        return np.array([float(np.sum(self.data.y - w)) * dw])


class MonopolyMpecModel:
    """Constrained formulation over the distinct covariate values.

    The unknown p holds one price per distinct covariate; the equality
    constraints are g_j(p, theta) = p_j e^{p_j} - theta x_j = 0.
    """

    dim_theta = 1
    param_names = ("theta",)

    def __init__(self, data: MonopolyDataset):
        self.data = data
        self.sites, self._site_index = np.unique(data.x, return_inverse=True)
        self.dim_beta = self.sites.size
        self.dim_constraints = self.sites.size
        self._counts = np.bincount(self._site_index, minlength=self.dim_beta).astype(float)

    def initial_point(self) -> tuple[np.ndarray, np.ndarray]:
        sums = np.bincount(self._site_index, weights=self.data.y, minlength=self.dim_beta)
        p0 = np.maximum(sums / self._counts, 1e-3)
        theta0 = float(np.median(p0 * np.exp(p0) / self.sites))
        return p0, np.array([theta0])

    def loglik(self, p: np.ndarray, theta) -> float:
        resid = self.data.y - p[self._site_index]
        return -len(self.data) * _LOG_SQRT_2PI - 0.5 * float(resid @ resid)

    def loglik_grad_p(self, p: np.ndarray, theta) -> np.ndarray:
        resid = self.data.y - p[self._site_index]
        return np.bincount(self._site_index, weights=resid, minlength=self.dim_beta)

    def loglik_hess_pp(self, p: np.ndarray, theta) -> np.ndarray:
        return np.diag(-self._counts)

    def loglik_grad_theta(self, p, theta) -> np.ndarray:
        return np.zeros(1)

    def loglik_hess_tt(self, p, theta) -> np.ndarray:
        return np.zeros((1, 1))

    def loglik_cross_pt(self, p, theta) -> np.ndarray:
        return np.zeros((self.dim_beta, 1))

    def constraints(self, p: np.ndarray, theta) -> np.ndarray:
        th = float(np.atleast_1d(theta)[0])
        return p * np.exp(p) - th * self.sites

    def constraints_jac_p(self, p: np.ndarray, theta) -> np.ndarray:
        return np.diag(np.exp(p) * (1.0 + p))

    def constraints_jac_theta(self, p: np.ndarray, theta) -> np.ndarray:
        return -self.sites[:, None]

    def constraints_hess_contract(self, p: np.ndarray, theta, lam: np.ndarray):
        """(sum_j lam_j g^j_pp, sum_j lam_j g^j_pt, sum_j lam_j g^j_tt)."""
        hpp = np.diag(lam * np.exp(p) * (2.0 + p))
        hpt = np.zeros((self.dim_beta, 1))
        htt = np.zeros((1, 1))
        return hpp, hpt, htt
