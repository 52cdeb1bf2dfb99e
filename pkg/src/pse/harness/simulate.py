"""Seeded simulators for both models and the Monte Carlo comparison engine.

All randomness comes from counter-based Philox streams keyed by
(seed, stream index), so replication r is reproducible on any platform and
independent of execution order or parallelism. The PSE_THREADS environment
variable caps the number of worker processes (default: machine parallelism).
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..baselines import mle_estimate, npl_estimate, two_step_estimate
from ..errors import DomainError
from ..estimators import joint_estimate, select_omega
from ..models.base import uniform_grid
from ..models.entry import EntryDataset, EntryGameModel, EntryTheta, equilibrium_ccps
from ..models.lambertw import lambert_w
from ..models.monopoly import MonopolyDataset, MonopolyModel
from ..sieve import SieveSpec, build_knots

__all__ = [
    "philox_stream",
    "simulate_monopoly",
    "simulate_entry",
    "McConfig",
    "McSummary",
    "run_monte_carlo",
    "monopoly_model_for",
    "entry_model_for",
]

# Table-3-style defaults for the synthetic entry experiments
ENTRY_THETA_DEFAULT = (-20.65, 0.50, -23.55, -1.95, 2.51)
ENTRY_X_RANGE = (7.25, 10.66)


def philox_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for substream `stream` of a master seed."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream]))


def simulate_monopoly(
    n: int, theta_0: float = 1.0, x_max: float = 1.0, seed: int = 0,
    noiseless: bool = False, stream: int = 0,
) -> MonopolyDataset:
    """Covariates uniform on (0, x_max], prices = exact solution + N(0, 1) noise."""
    if n <= 0:
        raise ValueError("n must be positive")
    if theta_0 <= 0 or x_max <= 0:
        raise DomainError("theta_0 and x_max must be positive")
    rng = philox_stream(seed, stream)
    x = x_max * (1.0 - rng.random(n))  # excludes exactly 0
    y = lambert_w(theta_0 * x)
    if not noiseless:
        y = y + rng.standard_normal(n)
    return MonopolyDataset(x=x, y=y)


def simulate_entry(
    m: int,
    theta_0: EntryTheta | tuple = ENTRY_THETA_DEFAULT,
    x_lo: float = ENTRY_X_RANGE[0],
    x_hi: float = ENTRY_X_RANGE[1],
    seed: int = 0,
    stream: int = 0,
) -> EntryDataset:
    """Markets with uniform covariates; entries are Bernoulli at equilibrium CCPs."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not x_lo < x_hi:
        raise DomainError("need x_lo < x_hi")
    theta = theta_0 if isinstance(theta_0, EntryTheta) else EntryTheta(*theta_0)
    rng = philox_stream(seed, stream)
    x = rng.uniform(x_lo, x_hi, m)
    p_w, p_k = equilibrium_ccps(x, theta)
    d_w = (rng.random(m) < p_w).astype(float)
    d_k = (rng.random(m) < p_k).astype(float)
    return EntryDataset(d_w=d_w, d_k=d_k, x=x)


def monopoly_model_for(data: MonopolyDataset, k: int = 6, n_grid: int = 1000) -> MonopolyModel:
    """Model over the observed covariate range with K basis functions."""
    lo, hi = float(np.min(data.x)), float(np.max(data.x))
    spec = SieveSpec(grid=build_knots(lo, hi, k - 4), link="identity")
    return MonopolyModel(spec, data, uniform_grid(lo, hi, n_grid))


def entry_model_for(data: EntryDataset, k: int = 8, n_grid: Optional[int] = None) -> EntryGameModel:
    """Entry model; the penalty grid is the observed covariates unless n_grid is given."""
    lo, hi = float(np.min(data.x)), float(np.max(data.x))
    spec = SieveSpec(grid=build_knots(lo, hi, k - 4), link="logistic")
    grid = uniform_grid(lo, hi, n_grid) if n_grid else None
    return EntryGameModel(spec, data, grid)


@dataclass(frozen=True)
class McConfig:
    """One Monte Carlo experiment: model, sample sizes, estimators, seeding."""

    model: str = "monopoly"
    n_obs: int = 1000
    n_reps: int = 200
    theta_0: tuple = (1.0,)
    x_max: float = 1.0
    x_range: tuple = ENTRY_X_RANGE
    seed: int = 20240801
    estimators: tuple = ("pse", "mle", "npl", "twostep")
    sieve_k: int = 6
    omega: Optional[float] = None  # None -> tuning loop with the defaults below
    omega_1: float = 10.0
    growth: float = 10.0
    alpha: float = 0.05
    overlap_c: float = 0.95
    noiseless: bool = False

    def __post_init__(self):
        if self.n_obs < 10:
            raise ValueError("n_obs must be at least 10")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if self.model not in ("monopoly", "entry"):
            raise ValueError(f"unknown model {self.model!r}")


@dataclass
class McSummary:
    """Cross-replication means and dispersions, with per-replication estimates kept."""

    config: McConfig
    estimates: dict[str, np.ndarray]  # name -> (n_reps, dim_theta), NaN rows = failures
    param_names: tuple[str, ...] = ()

    def mean(self, estimator: str) -> np.ndarray:
        vals = self.estimates[estimator]
        return np.nanmean(vals, axis=0)

    def se(self, estimator: str) -> np.ndarray:
        vals = self.estimates[estimator]
        ok = ~np.isnan(vals[:, 0])
        return np.std(vals[ok], axis=0, ddof=1)

    def failures(self, estimator: str) -> int:
        return int(np.isnan(self.estimates[estimator][:, 0]).sum())


def _estimate_monopoly(name: str, model: MonopolyModel, data: MonopolyDataset,
                       config: McConfig) -> np.ndarray:
    if name == "pse":
        theta0 = model.initial_theta()
        if config.omega is not None:
            res = joint_estimate(model, config.omega, theta_init=theta0)
        else:
            _, res = select_omega(
                model, omega_1=config.omega_1, T=config.growth,
                alpha=config.alpha, c=config.overlap_c, algorithm="joint",
                theta_init=theta0,
            )
        return res.theta_hat
    if name == "mle":
        return mle_estimate(model).theta_hat
    if name == "npl":
        return npl_estimate(model).theta_hat
    if name == "twostep":
        return two_step_estimate(data, compute_se=False).theta_hat
    raise ValueError(f"unknown estimator {name!r}")


def _estimate_entry(name: str, model: EntryGameModel, data: EntryDataset,
                    config: McConfig) -> np.ndarray:
    if name == "pse":
        theta0 = model.initial_theta()
        if config.omega is not None:
            res = joint_estimate(model, config.omega, theta_init=theta0)
        else:
            _, res = select_omega(
                model, omega_1=config.omega_1, T=config.growth,
                alpha=config.alpha, c=config.overlap_c, algorithm="joint",
                theta_init=theta0,
            )
        return res.theta_hat
    if name == "mle":
        return mle_estimate(model).theta_hat
    if name == "npl":
        return npl_estimate(model).theta_hat
    raise ValueError(f"estimator {name!r} is not available for the entry game")


def _replicate(config: McConfig, r: int) -> dict[str, np.ndarray]:
    dim = len(config.theta_0)
    out: dict[str, np.ndarray] = {}
    if config.model == "monopoly":
        data = simulate_monopoly(
            config.n_obs, config.theta_0[0], config.x_max,
            seed=config.seed, noiseless=config.noiseless, stream=r,
        )
        model = monopoly_model_for(data, config.sieve_k)
        for name in config.estimators:
            try:
                out[name] = _estimate_monopoly(name, model, data, config)
            except Exception:
                out[name] = np.full(dim, np.nan)
    else:
        data = simulate_entry(
            config.n_obs, config.theta_0, *config.x_range,
            seed=config.seed, stream=r,
        )
        model = entry_model_for(data, config.sieve_k)
        for name in config.estimators:
            try:
                out[name] = _estimate_entry(name, model, data, config)
            except Exception:
                out[name] = np.full(dim, np.nan)
    return out


def _thread_cap() -> int:
    env = os.environ.get("PSE_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def run_monte_carlo(config: McConfig) -> McSummary:
    """Simulate, estimate, and aggregate across seeded replications.

    Failed replications are kept as NaN rows; moments skip them. Results are
    identical for any worker count.
    """
    dim = len(config.theta_0)
    estimates = {name: np.full((config.n_reps, dim), np.nan) for name in config.estimators}
    workers = min(_thread_cap(), config.n_reps)
    if workers <= 1:
        results = (
            (r, _replicate(config, r)) for r in range(config.n_reps)
        )
        for r, rep in results:
            for name, value in rep.items():
                estimates[name][r] = value
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r, rep in zip(
                range(config.n_reps),
                pool.map(_replicate, [config] * config.n_reps, range(config.n_reps)),
            ):
                for name, value in rep.items():
                    estimates[name][r] = value
    if config.model == "monopoly":
        names: tuple[str, ...] = ("theta",)
    else:
        names = ("pi_w", "delta_w", "pi_k", "delta_k", "gamma")
    return McSummary(config=config, estimates=estimates, param_names=names)
