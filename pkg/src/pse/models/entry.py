"""Static two-firm entry game with incomplete information (firms W and K).

Each firm enters with a logit probability of its monopoly profit, the
business-stealing effect scaled by the rival's entry probability, and a
market covariate. Equilibrium choice probabilities solve p = Psi(p, theta).
The sieve approximates each firm's CCP with a logistic-link spline index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatch, NoConvergence, NonFiniteObjective
from ..sieve import SieveSpec, basis_matrix, logistic_link
from .base import ModelDerivatives, PenaltyGrid

__all__ = [
    "EntryTheta",
    "EntryDataset",
    "EntryGameModel",
    "EntryMpecModel",
    "entry_best_response",
    "entry_solve_equilibrium",
    "entry_eval",
    "entry_pseudo_loglik",
]

_PCLIP = 1e-12
_FIRMS = ("W", "K")


@dataclass(frozen=True)
class EntryTheta:
    """Payoff parameters (pi_W, Delta_W, pi_K, Delta_K, gamma)."""

    pi_w: float
    delta_w: float
    pi_k: float
    delta_k: float
    gamma: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("entry-game parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.pi_w, self.delta_w, self.pi_k, self.delta_k, self.gamma])

    @staticmethod
    def from_array(v) -> "EntryTheta":
        v = np.asarray(v, dtype=float)
        return EntryTheta(*(float(c) for c in v))


@dataclass(frozen=True)
class EntryDataset:
    """Entry indicators for both firms and the market covariate."""

    d_w: np.ndarray
    d_k: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        d_w = np.asarray(self.d_w, dtype=float)
        d_k = np.asarray(self.d_k, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.size == 0:
            raise ValueError("dataset must be nonempty")
        if not (d_w.shape == d_k.shape == x.shape) or x.ndim != 1:
            raise DimensionMismatch("d_w, d_k, x must be 1-d arrays of equal length")
        for d in (d_w, d_k):
            if np.any((d != 0) & (d != 1)):
                raise ValueError("entry indicators must be 0 or 1")
        object.__setattr__(self, "d_w", d_w)
        object.__setattr__(self, "d_k", d_k)
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return self.x.size


def _firm_params(theta: EntryTheta, firm: str) -> tuple[float, float]:
    if firm not in _FIRMS:
        raise ValueError(f"firm must be one of {_FIRMS}, got {firm!r}")
    if firm == "W":
        return theta.pi_w, theta.delta_w
    return theta.pi_k, theta.delta_k


def entry_best_response(p_opponent, x, theta: EntryTheta, firm: str):
    """Probability of entry given the rival's entry probability."""
    pi, delta = _firm_params(theta, firm)
    return expit(pi + theta.gamma * np.asarray(x, dtype=float) - np.asarray(p_opponent) * delta)


def _equilibrium_paths(x, theta: EntryTheta, tol: float, max_iter: int = 10_000):
    """Damped fixed-point iteration for (p_W, p_K), vectorized over markets."""
    x = np.asarray(x, dtype=float)
    p_w = np.full(x.shape, 0.5)
    p_k = np.full(x.shape, 0.5)
    for _ in range(max_iter):
        n_w = entry_best_response(p_k, x, theta, "W")
        n_k = entry_best_response(p_w, x, theta, "K")
        err = max(np.max(np.abs(n_w - p_w)), np.max(np.abs(n_k - p_k)))
        p_w = 0.5 * p_w + 0.5 * n_w
        p_k = 0.5 * p_k + 0.5 * n_k
        if err <= tol:
            return p_w, p_k
    raise NoConvergence(
        f"fixed-point iteration still moving after {max_iter} steps; "
        "the equilibrium may not be unique"
    )


def entry_solve_equilibrium(x: float, theta: EntryTheta, tol: float = 1e-10):
    """Solve p = Psi(p, theta) for one market; residual polished below 1e-12."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p_w, p_k = (float(v) for v in _equilibrium_paths(np.array([x]), theta, tol))
    # Newton polish on the 2-equation system p - Psi(p) = 0
    for _ in range(50):
        bw = float(entry_best_response(p_k, x, theta, "W"))
        bk = float(entry_best_response(p_w, x, theta, "K"))
        f = np.array([p_w - bw, p_k - bk])
        if np.max(np.abs(f)) <= 1e-13:
            break
        dpsi_w = -bw * (1.0 - bw) * theta.delta_w  # dPsi_W/dp_K
        dpsi_k = -bk * (1.0 - bk) * theta.delta_k  # dPsi_K/dp_W
        jac = np.array([[1.0, -dpsi_w], [-dpsi_k, 1.0]])
        step = np.linalg.solve(jac, -f)
        p_w, p_k = p_w + step[0], p_k + step[1]
    return p_w, p_k


def equilibrium_ccps(x, theta: EntryTheta, tol: float = 1e-13):
    """Vectorized equilibrium CCPs over an array of markets."""
    return _equilibrium_paths(x, theta, tol)


def entry_pseudo_loglik(data: EntryDataset, p_w_hat, p_k_hat, theta_vec: np.ndarray):
    """Binary log-likelihood with best responses at fixed rival CCP estimates.

    Returns (value, gradient, hessian) in theta; concave in theta.
    """
    th = EntryTheta.from_array(theta_vec)
    x = data.x
    value = 0.0
    grad = np.zeros(5)
    hess = np.zeros((5, 5))
    for firm, d, p_opp in (("W", data.d_w, p_k_hat), ("K", data.d_k, p_w_hat)):
        pi, delta = _firm_params(th, firm)
        u = pi + th.gamma * x - np.asarray(p_opp) * delta
        mu = expit(u)
        mu_c = np.clip(mu, _PCLIP, 1.0 - _PCLIP)
        value += float(d @ np.log(mu_c) + (1.0 - d) @ np.log1p(-mu_c))
        v = _index_jacobian(firm, p_opp, x)
        grad += v.T @ (d - mu)
        sp = mu * (1.0 - mu)
        hess -= v.T @ (sp[:, None] * v)
    return value, grad, hess


def _index_jacobian(firm: str, p_opp, x) -> np.ndarray:
    """d/dtheta of the latent index pi_j + gamma x - p_opp Delta_j, shape (m, 5)."""
    x = np.asarray(x, dtype=float)
    p_opp = np.broadcast_to(np.asarray(p_opp, dtype=float), x.shape)
    v = np.zeros((x.size, 5))
    if firm == "W":
        v[:, 0] = 1.0
        v[:, 1] = -p_opp
    else:
        v[:, 2] = 1.0
        v[:, 3] = -p_opp
    v[:, 4] = x
    return v


class EntryGameModel:
    """Sieve likelihood/penalty bundle for the entry game.

    The stacked coefficient vector is (beta_W, beta_K), each of length K, and
    each firm's CCP is the logistic-link sieve. The penalty sums squared
    fixed-point violations over the grid (the observed covariates by default).
    """

    dim_theta = 5
    param_names = ("pi_w", "delta_w", "pi_k", "delta_k", "gamma")

    def __init__(self, spec: SieveSpec, data: EntryDataset, grid: PenaltyGrid | None = None):
        if spec.link != "logistic":
            raise ValueError("the entry game uses a logistic-link sieve")
        self.spec = spec
        self.data = data
        self.grid = grid if grid is not None else PenaltyGrid(points=np.sort(data.x))
        self.dim_beta = 2 * spec.K
        self._k = spec.K
        self._s_data = basis_matrix(spec.grid, data.x)
        self._s_grid = basis_matrix(spec.grid, self.grid.points)
        self._xg = self.grid.points

    def split(self, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.dim_beta,):
            raise DimensionMismatch(
                f"stacked beta has shape {beta.shape}, expected ({self.dim_beta},)"
            )
        return beta[: self._k], beta[self._k:]

    def ccp_values(self, beta: np.ndarray, x) -> tuple[np.ndarray, np.ndarray]:
        b_w, b_k = self.split(beta)
        s = basis_matrix(self.spec.grid, x)
        return logistic_link(s @ b_w), logistic_link(s @ b_k)

    def initial_beta(self) -> np.ndarray:
        """Per-firm unpenalized logit fit of the entry indicators on the basis."""
        out = []
        for d in (self.data.d_w, self.data.d_k):
            beta = np.zeros(self._k)
            for _ in range(100):
                p = logistic_link(self._s_data @ beta)
                w = -p * (1.0 - p)
                grad = self._s_data.T @ ((d / np.clip(p, _PCLIP, None)
                                          - (1.0 - d) / np.clip(1.0 - p, _PCLIP, None)) * w)
                curv = p * (1.0 - p)
                hess = -self._s_data.T @ (curv[:, None] * self._s_data)
                hess -= 1e-8 * np.eye(self._k)
                step = np.linalg.solve(hess, -grad)
                beta = beta + step
                if np.max(np.abs(grad)) < 1e-9:
                    break
            out.append(beta)
        return np.concatenate(out)

    def initial_theta(self, beta: np.ndarray | None = None) -> np.ndarray:
        """Pseudo-likelihood fit of theta at the sieve CCPs (concave logit problem)."""
        if beta is None:
            beta = self.initial_beta()
        p_w, p_k = self.ccp_values(beta, self.data.x)
        theta = np.zeros(5)
        for _ in range(100):
            _, grad, hess = entry_pseudo_loglik(self.data, p_w, p_k, theta)
            theta = theta + np.linalg.solve(hess - 1e-10 * np.eye(5), -grad)
            if np.max(np.abs(grad)) < 1e-8:
                break
        return theta

    def evaluate(self, beta: np.ndarray, theta) -> ModelDerivatives:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (5,):
            raise DimensionMismatch(f"theta has shape {theta.shape}, expected (5,)")
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(np.asarray(beta))):
            raise NonFiniteObjective("non-finite parameters")
        th = EntryTheta.from_array(theta)
        b_w, b_k = self.split(beta)
        k = self._k

        # --- data likelihood, firm by firm (no cross-firm likelihood terms) ---
        loglik = 0.0
        ll_grad = np.zeros(2 * k)
        ll_hess = np.zeros((2 * k, 2 * k))
        for i, (b, d) in enumerate(((b_w, self.data.d_w), (b_k, self.data.d_k))):
            p = logistic_link(self._s_data @ b)
            pc = np.clip(p, _PCLIP, 1.0 - _PCLIP)
            w = -p * (1.0 - p)            # dp/d(index)
            ddp = -(1.0 - 2.0 * p) * w    # d2p/d(index)2
            d1 = d / pc - (1.0 - d) / (1.0 - pc)
            d2 = -d / pc**2 - (1.0 - d) / (1.0 - pc) ** 2
            loglik += float(d @ np.log(pc) + (1.0 - d) @ np.log1p(-pc))
            sl = slice(i * k, (i + 1) * k)
            ll_grad[sl] = self._s_data.T @ (d1 * w)
            ll_hess[sl, sl] = self._s_data.T @ ((d2 * w * w + d1 * ddp)[:, None] * self._s_data)

        # --- equilibrium penalty over the grid ---
        p_w = logistic_link(self._s_grid @ b_w)
        p_k = logistic_link(self._s_grid @ b_k)
        p_of = {"W": p_w, "K": p_k}
        x = self._xg
        psi, sp, spp, psi_p, v_of = {}, {}, {}, {}, {}
        for firm, p_opp in (("W", p_k), ("K", p_w)):
            pi, delta = _firm_params(th, firm)
            u = pi + th.gamma * x - p_opp * delta
            mu = expit(u)
            psi[firm] = mu
            sp[firm] = mu * (1.0 - mu)
            spp[firm] = sp[firm] * (1.0 - 2.0 * mu)
            psi_p[firm] = -sp[firm] * delta  # dPsi_firm / dp_opponent
            v_of[firm] = _index_jacobian(firm, p_opp, x)

        r = {f: p_of[f] - psi[f] for f in _FIRMS}
        penalty = float(r["W"] @ r["W"] + r["K"] @ r["K"])

        pen_grad = np.zeros(2 * k)
        pen_hess = np.zeros((2 * k, 2 * k))
        pen_cross = np.zeros((2 * k, 5))
        pen_grad_theta = np.zeros(5)
        pen_hess_theta = np.zeros((5, 5))
        delta_of = {"W": th.delta_w, "K": th.delta_k}
        delta_col = {"W": 1, "K": 3}

        for i, firm in enumerate(_FIRMS):
            other = _FIRMS[1 - i]
            sl = slice(i * k, (i + 1) * k)
            so = slice((1 - i) * k, (2 - i) * k)
            p = p_of[firm]
            w = -p * (1.0 - p)
            ddp = -(1.0 - 2.0 * p) * w
            m1 = r[firm] - r[other] * psi_p[other]
            pen_grad[sl] = 2.0 * self._s_grid.T @ (m1 * w)
            m2 = 1.0 + psi_p[other] ** 2 - r[other] * (
                psi_p[other] * delta_of[other] + 2.0 * psi_p[other] ** 2 / psi[other]
            )
            pen_hess[sl, sl] = 2.0 * self._s_grid.T @ (
                (m2 * w * w + m1 * ddp)[:, None] * self._s_grid
            )
            w_other = -p_of[other] * (1.0 - p_of[other])
            cross = (-psi_p[firm] - psi_p[other]) * w * w_other
            pen_hess[sl, so] = 2.0 * self._s_grid.T @ (cross[:, None] * self._s_grid)

            # d/dtheta of the rival's slope Psi'_other = -sigma' * Delta_other
            d_psi = sp[firm][:, None] * v_of[firm]
            d_psi_other = sp[other][:, None] * v_of[other]
            d_slope_other = (
                -delta_of[other] * (spp[other][:, None] * v_of[other])
            )
            d_slope_other[:, delta_col[other]] -= sp[other]
            t = -d_psi - r[other][:, None] * d_slope_other + d_psi_other * psi_p[other][:, None]
            pen_cross[sl] = 2.0 * self._s_grid.T @ (w[:, None] * t)

            pen_grad_theta += -2.0 * d_psi.T @ r[firm]
            scale = sp[firm] ** 2 - r[firm] * spp[firm]
            pen_hess_theta += 2.0 * v_of[firm].T @ (scale[:, None] * v_of[firm])

        return ModelDerivatives(
            loglik=loglik,
            loglik_grad_beta=ll_grad,
            loglik_hess_beta=ll_hess,
            penalty=penalty,
            penalty_grad_beta=pen_grad,
            penalty_hess_beta=pen_hess,
            penalty_cross_beta_theta=pen_cross,
            loglik_grad_theta=np.zeros(5),
            penalty_grad_theta=pen_grad_theta,
            loglik_hess_theta=np.zeros((5, 5)),
            penalty_hess_theta=pen_hess_theta,
            loglik_cross_beta_theta=np.zeros((2 * k, 5)),
        )

    def exact_loglik(self, theta) -> float:
        """Likelihood with the equilibrium solved per market (MLE baseline)."""
        th = EntryTheta.from_array(theta)
        p_w, p_k = equilibrium_ccps(self.data.x, th)
        p_w = np.clip(p_w, _PCLIP, 1.0 - _PCLIP)
        p_k = np.clip(p_k, _PCLIP, 1.0 - _PCLIP)
        return float(
            self.data.d_w @ np.log(p_w) + (1.0 - self.data.d_w) @ np.log1p(-p_w)
            + self.data.d_k @ np.log(p_k) + (1.0 - self.data.d_k) @ np.log1p(-p_k)
        )


def entry_eval(
    spec: SieveSpec,
    beta: np.ndarray,
    theta,
    data: EntryDataset,
    grid: PenaltyGrid,
) -> ModelDerivatives:
    """One-shot evaluation of every likelihood/penalty block at (beta, theta)."""
    theta_vec = theta.as_array() if isinstance(theta, EntryTheta) else theta
    return EntryGameModel(spec, data, grid).evaluate(beta, theta_vec)


class EntryMpecModel:
    """Constrained formulation with one CCP per firm per distinct covariate.

    The unknown p stacks (p_W at each site, p_K at each site) and the equality
    constraints are g = p - Psi(p, theta) = 0 site by site.
    """

    dim_theta = 5
    param_names = ("pi_w", "delta_w", "pi_k", "delta_k", "gamma")

    def __init__(self, data: EntryDataset):
        self.data = data
        self.sites, idx = np.unique(data.x, return_inverse=True)
        self._j = self.sites.size
        self.dim_beta = 2 * self._j
        self.dim_constraints = 2 * self._j
        self._n1 = np.stack([
            np.bincount(idx, weights=data.d_w, minlength=self._j),
            np.bincount(idx, weights=data.d_k, minlength=self._j),
        ])
        counts = np.bincount(idx, minlength=self._j).astype(float)
        self._n0 = counts[None, :] - self._n1

    def initial_point(self) -> tuple[np.ndarray, np.ndarray]:
        freq = np.clip(self._n1 / (self._n1 + self._n0), 0.05, 0.95)
        p0 = np.concatenate([freq[0], freq[1]])
        data = self.data
        p_w_hat = freq[0][np.searchsorted(self.sites, data.x)]
        p_k_hat = freq[1][np.searchsorted(self.sites, data.x)]
        theta = np.zeros(5)
        for _ in range(60):
            _, g, h = entry_pseudo_loglik(data, p_w_hat, p_k_hat, theta)
            step = np.linalg.solve(h - 1e-10 * np.eye(5), -g)
            theta = theta + step
            if np.max(np.abs(g)) < 1e-8:
                break
        return p0, theta

    def _split(self, p: np.ndarray) -> dict[str, np.ndarray]:
        return {"W": p[: self._j], "K": p[self._j:]}

    def loglik(self, p: np.ndarray, theta) -> float:
        q = self._split(p)
        total = 0.0
        for i, firm in enumerate(_FIRMS):
            pc = np.clip(q[firm], _PCLIP, 1.0 - _PCLIP)
            total += float(self._n1[i] @ np.log(pc) + self._n0[i] @ np.log1p(-pc))
        return total

    def loglik_grad_p(self, p: np.ndarray, theta) -> np.ndarray:
        q = self._split(p)
        parts = []
        for i, firm in enumerate(_FIRMS):
            pc = np.clip(q[firm], _PCLIP, 1.0 - _PCLIP)
            parts.append(self._n1[i] / pc - self._n0[i] / (1.0 - pc))
        return np.concatenate(parts)

    def loglik_hess_pp(self, p: np.ndarray, theta) -> np.ndarray:
        q = self._split(p)
        diags = []
        for i, firm in enumerate(_FIRMS):
            pc = np.clip(q[firm], _PCLIP, 1.0 - _PCLIP)
            diags.append(-self._n1[i] / pc**2 - self._n0[i] / (1.0 - pc) ** 2)
        return np.diag(np.concatenate(diags))

    def loglik_grad_theta(self, p, theta) -> np.ndarray:
        return np.zeros(5)

    def loglik_hess_tt(self, p, theta) -> np.ndarray:
        return np.zeros((5, 5))

    def loglik_cross_pt(self, p, theta) -> np.ndarray:
        return np.zeros((self.dim_beta, 5))

    def _responses(self, p: np.ndarray, theta):
        th = EntryTheta.from_array(theta)
        q = self._split(p)
        out = {}
        for firm, opp in (("W", "K"), ("K", "W")):
            pi, delta = _firm_params(th, firm)
            u = pi + th.gamma * self.sites - q[opp] * delta
            mu = expit(u)
            out[firm] = {
                "mu": mu,
                "sp": mu * (1.0 - mu),
                "spp": mu * (1.0 - mu) * (1.0 - 2.0 * mu),
                "v": _index_jacobian(firm, q[opp], self.sites),
                "delta": delta,
            }
        return out

    def constraints(self, p: np.ndarray, theta) -> np.ndarray:
        resp = self._responses(p, theta)
        return np.concatenate([
            self._split(p)["W"] - resp["W"]["mu"],
            self._split(p)["K"] - resp["K"]["mu"],
        ])

    def constraints_jac_p(self, p: np.ndarray, theta) -> np.ndarray:
        resp = self._responses(p, theta)
        j = self._j
        jac = np.eye(2 * j)
        # -dPsi_W/dp_K sits in the (W rows, K cols) block, and vice versa
        jac[:j, j:] = np.diag(resp["W"]["sp"] * resp["W"]["delta"])
        jac[j:, :j] = np.diag(resp["K"]["sp"] * resp["K"]["delta"])
        return jac

    def constraints_jac_theta(self, p: np.ndarray, theta) -> np.ndarray:
        resp = self._responses(p, theta)
        return np.vstack([
            -resp["W"]["sp"][:, None] * resp["W"]["v"],
            -resp["K"]["sp"][:, None] * resp["K"]["v"],
        ])

    def constraints_hess_contract(self, p: np.ndarray, theta, lam: np.ndarray):
        resp = self._responses(p, theta)
        j = self._j
        lam_of = {"W": lam[:j], "K": lam[j:]}
        hpp = np.zeros((2 * j, 2 * j))
        hpt = np.zeros((2 * j, 5))
        # opponent CCP slots: Psi_W varies in p_K (cols j:), Psi_K in p_W (cols :j)
        opp_slice = {"W": slice(j, 2 * j), "K": slice(0, j)}
        for firm in _FIRMS:
            rr = resp[firm]
            lamf = lam_of[firm]
            sl = opp_slice[firm]
            hpp[sl, sl] += np.diag(-lamf * rr["spp"] * rr["delta"] ** 2)
            hpt_block = (lamf * rr["spp"] * rr["delta"])[:, None] * rr["v"]
            hpt_block[:, 1 if firm == "W" else 3] += lamf * rr["sp"]
            hpt[sl] += hpt_block
        htt = np.zeros((5, 5))
        for firm in _FIRMS:
            rr = resp[firm]
            scale = lam_of[firm] * rr["spp"]
            htt -= rr["v"].T @ (scale[:, None] * rr["v"])
        return hpp, hpt, htt
