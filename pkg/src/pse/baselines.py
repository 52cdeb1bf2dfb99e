"""Comparison estimators: exact-solution MLE, nested pseudo-likelihood
iteration, and the two-step plug-in with a local-linear kernel first stage.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoConvergence, TooFewPoints
from .estimators import EstimateResult, _confidence_intervals, std_errors_from_information
from .models.entry import EntryGameModel, entry_best_response, entry_pseudo_loglik, EntryTheta
from .models.monopoly import MonopolyDataset, MonopolyModel, MonopolyScalarModel
from .numopt import NewtonOptions, ObjectiveEval, newton_maximize

__all__ = [
    "NplState",
    "KernelFit",
    "mle_estimate",
    "npl_estimate",
    "local_linear_fit",
    "two_step_estimate",
]


@dataclass
class NplState:
    p_hat: np.ndarray
    theta_hat: np.ndarray
    iteration: int


@dataclass
class KernelFit:
    bandwidth: float
    fitted: Callable[[np.ndarray], np.ndarray]


def _fd_gradient(f, theta, rel_step=1e-6):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    g = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * (1.0 + abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def _fd_hessian_of_grad(grad_fn, theta, rel_step=1e-5):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    d = theta.size
    hess = np.empty((d, d))
    for i in range(d):
        h = rel_step * (1.0 + abs(theta[i]))
        e = np.zeros(d)
        e[i] = h
        hess[:, i] = (grad_fn(theta + e) - grad_fn(theta - e)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def mle_estimate(model, theta_init=None, opts: Optional[NewtonOptions] = None,
                 alpha: float = 0.05) -> EstimateResult:
    """Maximum likelihood with the model solved exactly at every evaluation.

    Standard errors come from the finite-difference Hessian of the exact
    log-likelihood at the optimum.
    """
    loglik = model.exact_loglik
    grad_fn = getattr(model, "exact_loglik_grad", None)
    if grad_fn is None:
        grad_fn = lambda th: _fd_gradient(loglik, th)  # noqa: E731

    def objective(theta):
        return ObjectiveEval(
            value=loglik(theta),
            gradient=grad_fn(theta),
            hessian=_fd_hessian_of_grad(grad_fn, theta),
        )

    theta0 = model.initial_theta() if theta_init is None else np.atleast_1d(
        np.asarray(theta_init, dtype=float)
    )
    res = newton_maximize(objective, theta0, opts, value_fn=loglik)
    info = _fd_hessian_of_grad(grad_fn, res.argmax)
    se = std_errors_from_information(info)
    return EstimateResult(
        theta_hat=res.argmax,
        beta_hat=np.empty(0),
        std_errors=se,
        conf_intervals=_confidence_intervals(res.argmax, se, alpha),
        loglik=res.value,
        penalty_value=0.0,
        omega=np.inf,
        converged=res.converged,
        algorithm="mle",
        param_names=tuple(model.param_names),
    )


def npl_estimate(model, p_init=None, max_iter: int = 100, tol: float = 1e-9,
                 alpha: float = 0.05) -> EstimateResult:
    """Alternate pseudo-likelihood steps in theta with best-response updates of p.

    Stops when consecutive theta iterates move by at most tol in the sup norm;
    raises NoConvergence after max_iter iterations.
    """
    if isinstance(model, (MonopolyModel, MonopolyScalarModel)):
        return _npl_monopoly(model, p_init, max_iter, tol, alpha)
    if isinstance(model, EntryGameModel):
        return _npl_entry(model, p_init, max_iter, tol, alpha)
    raise TypeError(f"no pseudo-likelihood iteration for {type(model).__name__}")


def _npl_monopoly(model, p_init, max_iter, tol, alpha) -> EstimateResult:
    data = model.data
    x = data.x if hasattr(data, "x") else None
    if isinstance(model, MonopolyScalarModel):
        x = np.full(len(data), model.x0)
    y = data.y
    p_hat = np.clip(y, 0.0, None) if p_init is None else np.asarray(p_init, dtype=float).copy()
    theta_prev = None
    state = NplState(p_hat=p_hat, theta_hat=np.array([np.nan]), iteration=0)
    for it in range(1, max_iter + 1):
        z = x * np.exp(-state.p_hat)

        def objective(theta):
            resid = y - theta[0] * z
            return ObjectiveEval(
                value=-0.5 * float(resid @ resid),
                gradient=np.array([float(resid @ z)]),
                hessian=np.array([[-float(z @ z)]]),
            )

        start = state.theta_hat if np.isfinite(state.theta_hat[0]) else np.array([1.0])
        res = newton_maximize(objective, start)
        state = NplState(p_hat=res.argmax[0] * z, theta_hat=res.argmax, iteration=it)
        if theta_prev is not None and abs(res.argmax[0] - theta_prev) <= tol:
            break
        theta_prev = res.argmax[0]
    else:
        raise NoConvergence(f"pseudo-likelihood loop still moving after {max_iter} iterations")

    z = x * np.exp(-state.p_hat)
    se = std_errors_from_information(np.array([[-float(z @ z)]]))
    resid = y - state.theta_hat[0] * z
    loglik = -len(y) * 0.5 * np.log(2 * np.pi) - 0.5 * float(resid @ resid)
    return EstimateResult(
        theta_hat=state.theta_hat,
        beta_hat=state.p_hat,
        std_errors=se,
        conf_intervals=_confidence_intervals(state.theta_hat, se, alpha),
        loglik=loglik,
        penalty_value=0.0,
        omega=np.inf,
        converged=True,
        algorithm="npl",
        param_names=tuple(model.param_names),
    )


def _npl_entry(model: EntryGameModel, p_init, max_iter, tol, alpha) -> EstimateResult:
    data = model.data
    if p_init is None:
        p_w, p_k = model.ccp_values(model.initial_beta(), data.x)
    else:
        p_w, p_k = (np.asarray(v, dtype=float).copy() for v in p_init)
    theta = np.zeros(5)
    theta_prev = None
    hess = None
    for it in range(1, max_iter + 1):
        for _ in range(100):
            _, grad, hess = entry_pseudo_loglik(data, p_w, p_k, theta)
            step = np.linalg.solve(hess - 1e-12 * np.eye(5), -grad)
            theta = theta + step
            if np.max(np.abs(grad)) < 1e-10:
                break
        th = EntryTheta.from_array(theta)
        p_w, p_k = (
            np.asarray(entry_best_response(p_k, data.x, th, "W")),
            np.asarray(entry_best_response(p_w, data.x, th, "K")),
        )
        if theta_prev is not None and np.max(np.abs(theta - theta_prev)) <= tol:
            break
        theta_prev = theta.copy()
    else:
        raise NoConvergence(f"pseudo-likelihood loop still moving after {max_iter} iterations")

    value, _, hess = entry_pseudo_loglik(data, p_w, p_k, theta)
    se = std_errors_from_information(hess)
    return EstimateResult(
        theta_hat=theta,
        beta_hat=np.concatenate([p_w, p_k]),
        std_errors=se,
        conf_intervals=_confidence_intervals(theta, se, alpha),
        loglik=value,
        penalty_value=0.0,
        omega=np.inf,
        converged=True,
        algorithm="npl",
        param_names=tuple(model.param_names),
    )


def _local_linear_predict(x_train, y_train, x_eval, bandwidth, loo=False):
    """Closed-form local-linear fits with a Gaussian kernel.

    With loo=True, x_eval must be x_train and each point's own weight is
    removed (leave-one-out). Degenerate local designs fall back to the local
    constant fit.
    """
    d = x_eval[:, None] - x_train[None, :]
    w = np.exp(-0.5 * (d / bandwidth) ** 2)
    if loo:
        np.fill_diagonal(w, 0.0)
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d * d).sum(axis=1)
    t0 = w @ y_train
    t1 = (w * d) @ y_train
    denom = s0 * s2 - s1 * s1
    scale = np.maximum(s0 * s2, 1e-300)
    good = denom > 1e-12 * scale
    out = np.empty_like(x_eval)
    out[good] = (s2[good] * t0[good] - s1[good] * t1[good]) / denom[good]
    out[~good] = t0[~good] / np.maximum(s0[~good], 1e-300)
    return out


def local_linear_fit(data: MonopolyDataset, bandwidth: Optional[float] = None) -> KernelFit:
    """Gaussian-kernel local linear regression of y on x.

    With bandwidth=None, picks the minimizer of leave-one-out squared error
    over a 20-point logarithmic grid spanning [0.05, 2] times the sample
    standard deviation of x.
    """
    x, y = data.x, data.y
    if x.size < 5:
        raise TooFewPoints("local linear regression needs at least 5 observations")
    if bandwidth is None:
        sd = float(np.std(x))
        grid = sd * np.logspace(np.log10(0.05), np.log10(2.0), 20)
        losses = []
        for h in grid:
            pred = _local_linear_predict(x, y, x, h, loo=True)
            losses.append(float(np.sum((y - pred) ** 2)))
        bandwidth = float(grid[int(np.argmin(losses))])
    elif bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    def fitted(x_eval):
        scalar = np.isscalar(x_eval) or np.ndim(x_eval) == 0
        xe = np.atleast_1d(np.asarray(x_eval, dtype=float))
        out = _local_linear_predict(x, y, xe, bandwidth)
        return float(out[0]) if scalar else out

    return KernelFit(bandwidth=float(bandwidth), fitted=fitted)


def two_step_estimate(
    data: MonopolyDataset,
    bandwidth: Optional[float] = None,
    n_boot: int = 199,
    seed: int = 0,
    use_mean: bool = False,
    compute_se: bool = True,
    alpha: float = 0.05,
) -> EstimateResult:
    """Plug-in estimator: nonparametric price fit, then first-order-condition inversion.

    The point estimate is the median (optionally the mean) of
    yhat * exp(yhat) / x over the sample. Standard errors, when requested, come
    from a seeded nonparametric bootstrap over records at the fitted bandwidth.
    """
    fit = local_linear_fit(data, bandwidth)
    agg = np.mean if use_mean else np.median

    def point(x, y, h):
        yhat = _local_linear_predict(x, y, x, h)
        return float(agg(yhat * np.exp(yhat) / x))

    theta_hat = point(data.x, data.y, fit.bandwidth)

    se = np.array([np.nan])
    if compute_se:
        rng = np.random.Generator(np.random.Philox(key=[seed, 0x765]))
        n = len(data)
        boots = np.empty(n_boot)
        for b in range(n_boot):
            idx = rng.integers(0, n, size=n)
            boots[b] = point(data.x[idx], data.y[idx], fit.bandwidth)
        se = np.array([float(np.std(boots, ddof=1))])

    theta = np.array([theta_hat])
    yhat = fit.fitted(data.x)
    resid = data.y - yhat
    loglik = -len(data) * 0.5 * np.log(2 * np.pi) - 0.5 * float(resid @ resid)
    cis = _confidence_intervals(theta, se, alpha) if compute_se else [(np.nan, np.nan)]
    return EstimateResult(
        theta_hat=theta,
        beta_hat=np.empty(0),
        std_errors=se,
        conf_intervals=cis,
        loglik=loglik,
        penalty_value=float(np.sum((yhat * np.exp(yhat) - theta_hat * data.x) ** 2)),
        omega=np.inf,
        converged=True,
        algorithm="twostep",
        param_names=("theta",),
    )
