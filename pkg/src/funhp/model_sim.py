"""Ground-truth simulation of the functional mixed model and exact risk computations.

Per basis component ``j`` the model is::

    Y^j = Z gamma_j + P'(PP')^{-1} V^j,   V^j ~ N(0, tau_j I_{n-2})
    X^j = Y^j + U^j,                      U^j ~ N(0, mu_j I_n)

with components independent of each other. Normal draws for component ``j``
of replicate ``rep`` come from a Philox stream keyed by ``seed`` whose counter
starts at ``(0, 0, j, rep)``; ``V`` is drawn first, then ``U``. Any replicate
can therefore be regenerated in isolation, on any thread.

Dense ``n x n`` matrices appear only in the verification helpers
(:func:`component_covariances`, :func:`risk_curve`) and are meant for
``n <= 2000``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solveh_banded

from .diffop import (
    apply_P,
    apply_Pt,
    gram_PPt,
    gram_PtP,
    kernel_Z,
    min_norm_right_inverse_apply,
    solve_PPt,
)
from .functional_hp import DEFAULT_ALPHA_MAX, estimate_B
from .scalar_hp import mu_estimator_variance

_DENSE_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Simulation parameters.

    ``gamma`` has shape ``(2, J)``: column ``j`` holds the coordinates of the
    deterministic trend of component ``j`` in the kernel basis ``Z``.
    """

    n: int
    mu: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray | None = None
    seed: int = 0
    J: int = field(init=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if mu.ndim != 1 or mu.shape != tau.shape:
            raise ValueError(f"mu and tau must be 1-D of equal length, got {mu.shape} and {tau.shape}")
        J = mu.size
        gamma = np.zeros((2, J)) if self.gamma is None else np.asarray(self.gamma, dtype=float)
        if gamma.shape != (2, J):
            raise ValueError(f"gamma must have shape (2, {J}), got {gamma.shape}")
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"series length n must be an integer >= 5, got {self.n}")
        if not (np.all(np.isfinite(mu)) and np.all(mu > 0)):
            raise ValueError("noise eigenvalues mu must be finite and positive")
        if not (np.all(np.isfinite(tau)) and np.all(tau > 0)):
            raise ValueError("signal eigenvalues tau must be finite and positive")
        if not np.all(np.isfinite(gamma)):
            raise ValueError("gamma must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name, arr in (("mu", mu), ("tau", tau), ("gamma", gamma)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "J", J)

    @property
    def alpha(self) -> np.ndarray:
        return self.mu / self.tau

    def with_n(self, n: int) -> "ModelParams":
        return replace(self, n=n)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "J": self.J,
            "mu": self.mu.tolist(),
            "tau": self.tau.tolist(),
            "gamma": self.gamma.tolist(),
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class Simulation:
    """Coefficient matrices of one replicate; ``V`` has ``n - 2`` rows."""

    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    V: np.ndarray


@dataclass(frozen=True, eq=False)
class ComponentCovariances:
    Sigma_X: np.ndarray
    Sigma_Y: np.ndarray
    Sigma_XY: np.ndarray
    M: np.ndarray


def normal_stream(seed: int, component: int, rep: int) -> np.random.Generator:
    """Counter-based generator for one (component, replicate) pair."""
    counter = np.array([0, 0, component, rep], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def simulate(params: ModelParams, rep: int = 0) -> Simulation:
    n, J = params.n, params.J
    Z = kernel_Z(n)
    Y0 = Z @ params.gamma
    V = np.empty((n - 2, J))
    U = np.empty((n, J))
    for j in range(J):
        rng = normal_stream(params.seed, j, rep)
        V[:, j] = np.sqrt(params.tau[j]) * rng.standard_normal(n - 2)
        U[:, j] = np.sqrt(params.mu[j]) * rng.standard_normal(n)
    Y = Y0 + min_norm_right_inverse_apply(V)
    return Simulation(Y + U, Y, U, V)


def _check_variances(mu_j, tau_j):
    if not (mu_j > 0 and tau_j > 0):
        raise ValueError("component variances mu_j and tau_j must be positive")


def _check_dense(n):
    if n < 3:
        raise ValueError("n must be >= 3")
    if n > _DENSE_LIMIT:
        raise ValueError(f"dense verification helpers are limited to n <= {_DENSE_LIMIT}")


def trend_covariance_matrix(n: int) -> np.ndarray:
    """``M = P'(PP')^{-2} P``, the covariance of ``P'(PP')^{-1} V`` for unit-variance ``V``."""
    _check_dense(n)
    P = apply_P(np.eye(n))  # (n-2, n)
    W = solve_PPt(solve_PPt(P))
    M = apply_Pt(W)
    return 0.5 * (M + M.T)


def component_covariances(mu_j: float, tau_j: float, n: int) -> ComponentCovariances:
    _check_variances(mu_j, tau_j)
    M = trend_covariance_matrix(n)
    Sigma_Y = tau_j * M
    return ComponentCovariances(mu_j * np.eye(n) + Sigma_Y, Sigma_Y, Sigma_Y.copy(), M)


def conditional_expectation(xbar, mu_j: float, tau_j: float, y0) -> np.ndarray:
    """``E[Y^j | X^j] = y0 + Sigma_XY Sigma_X^{-1} (xbar - y0)``.

    With ``G = PP'`` the gain ``tau M (mu I + tau M)^{-1}`` equals
    ``tau P' (G (mu G + tau I))^{-1} P``, evaluated here as two pentadiagonal
    SPD solves. This avoids inverting ``Sigma_X``, whose smallest eigenvalue
    is ``mu`` on ``ker P``.
    """
    _check_variances(mu_j, tau_j)
    xbar = np.asarray(xbar, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if xbar.shape != y0.shape or xbar.ndim not in (1, 2):
        raise ValueError(f"shape mismatch: {xbar.shape} vs {y0.shape}")
    w = solve_PPt(apply_P(xbar - y0))
    ab = mu_j * gram_PPt(w.shape[0])
    ab[2] += tau_j
    w = solveh_banded(ab, w, check_finite=False)
    return y0 + tau_j * apply_Pt(w)


def smoother_matrix(alpha: float, n: int) -> np.ndarray:
    """Dense ``F_alpha = (I + alpha P'P)^{-1}``."""
    _check_dense(n)
    ab = alpha * gram_PtP(n)[:3]
    ab[2] += 1.0
    return solveh_banded(ab, np.eye(n), check_finite=False)


def risk_curve(mu_j: float, tau_j: float, n: int, alphas) -> np.ndarray:
    """Exact mean-square distance between ``E[Y^j | X^j]`` and the HP trend.

    ``J_j(alpha) = tr((L - F_alpha) Sigma_X (L - F_alpha)')`` with ``L`` the
    conditional-expectation gain. The mean term vanishes because the trend
    offset lies in ``ker P``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    if np.any(~np.isfinite(alphas)) or np.any(alphas <= 0):
        raise ValueError("alpha grid values must be positive and finite")
    cov = component_covariances(mu_j, tau_j, n)
    L = conditional_expectation(np.eye(n), mu_j, tau_j, np.zeros((n, n)))
    out = np.empty(alphas.size)
    for k, alpha in enumerate(alphas):
        D = L - smoother_matrix(alpha, n)
        out[k] = np.sum((D @ cov.Sigma_X) * D)
    return out


def log_grid(lo: float, hi: float, size: int) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), size)


def grid_gap(grid, argmin_index: int, target: float) -> float:
    """Distance from ``grid[argmin_index]`` to ``target`` in units of the local log step."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 1:
        return 0.0 if np.isclose(grid[0], target) else float("inf")
    steps = np.diff(np.log(grid))
    k = min(argmin_index, steps.size - 1)
    return float(abs(np.log(grid[argmin_index]) - np.log(target)) / steps[k])


def verify_optimality(params: ModelParams, grid) -> dict:
    """Check that each component's risk curve bottoms out at ``mu_j / tau_j``."""
    grid = np.asarray(grid, dtype=float)
    components = []
    curves = []
    for j in range(params.J):
        risk = risk_curve(params.mu[j], params.tau[j], params.n, grid)
        k = int(np.argmin(risk))
        target = float(params.alpha[j])
        gap = grid_gap(grid, k, target)
        components.append(
            {
                "j": j + 1,
                "alpha_star": target,
                "argmin": float(grid[k]),
                "gap_steps": gap,
                "min_risk": float(risk[k]),
                "passed": gap <= 1.0,
            }
        )
        curves.append(risk)
    return {
        "n": params.n,
        "grid": {"lo": float(grid.min()), "hi": float(grid.max()), "size": int(grid.size)},
        "components": components,
        "passed": all(c["passed"] for c in components),
        "curves": np.column_stack(curves),
        "alphas": grid,
    }


def _replicate_estimates(params: ModelParams, rep: int, alpha_max: float):
    sim = simulate(params, rep)
    B, ests = estimate_B(sim.X, alpha_max=alpha_max)
    mu_hat = np.array([e.mu_hat for e in ests])
    tau_hat = np.array([e.tau_hat for e in ests])
    degenerate = np.array([e.status != "ok" for e in ests])
    return mu_hat, tau_hat, B.eigenvalues, degenerate


def run_replicates(params: ModelParams, reps: int, alpha_max: float = DEFAULT_ALPHA_MAX, max_workers=None):
    """Estimates for replicates ``0..reps-1``: arrays of shape ``(reps, J)``.

    Returns ``(mu_hat, tau_hat, alpha_hat, degenerate)``. Row order follows the
    replicate index, so results do not depend on ``max_workers``.
    """

    def one(rep):
        return _replicate_estimates(params, rep, alpha_max)

    if max_workers is None or max_workers <= 1:
        rows = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one, range(reps)))
    return tuple(np.array([row[k] for row in rows]) for k in range(4))


def mc_consistency(
    params: ModelParams,
    n_list,
    reps: int,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    max_workers: int | None = None,
) -> dict:
    """Monte Carlo bias and RMSE of the estimators along increasing ``n``.

    Passes when the RMSE of ``mu_hat`` and ``tau_hat`` is non-increasing in
    ``n`` for every component and the median of ``max_j |alpha_hat_j - alpha_j|``
    is non-increasing as well.
    """
    n_list = [int(n) for n in n_list]
    if reps < 2:
        raise ValueError("need at least two replicates")
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be non-empty and strictly increasing")
    rows = []
    for n in n_list:
        p = params.with_n(n)
        mu_hat, tau_hat, alpha_hat, degenerate = run_replicates(p, reps, alpha_max, max_workers)
        alpha_err = np.max(np.abs(alpha_hat - p.alpha), axis=1)
        comps = []
        for j in range(p.J):
            var_mu = float(np.var(mu_hat[:, j], ddof=1))
            theory = mu_estimator_variance(p.mu[j], p.tau[j], n) if n >= 6 else float("nan")
            comps.append(
                {
                    "j": j + 1,
                    "mu_bias": float(np.mean(mu_hat[:, j]) - p.mu[j]),
                    "mu_se": float(np.sqrt(var_mu / reps)),
                    "mu_rmse": float(np.sqrt(np.mean((mu_hat[:, j] - p.mu[j]) ** 2))),
                    "tau_bias": float(np.mean(tau_hat[:, j]) - p.tau[j]),
                    "tau_se": float(np.std(tau_hat[:, j], ddof=1) / np.sqrt(reps)),
                    "tau_rmse": float(np.sqrt(np.mean((tau_hat[:, j] - p.tau[j]) ** 2))),
                    "alpha_median_abs_err": float(np.median(np.abs(alpha_hat[:, j] - p.alpha[j]))),
                    "degenerate_fraction": float(np.mean(degenerate[:, j])),
                    "mu_var_empirical": var_mu,
                    "mu_var_theory": theory,
                }
            )
        rows.append({"n": n, "reps": reps, "median_max_alpha_err": float(np.median(alpha_err)), "components": comps})

    def non_increasing(values):
        return all(b <= a for a, b in zip(values, values[1:]))

    checks = {}
    for j in range(params.J):
        checks[f"mu_rmse_{j + 1}"] = non_increasing([r["components"][j]["mu_rmse"] for r in rows])
        checks[f"tau_rmse_{j + 1}"] = non_increasing([r["components"][j]["tau_rmse"] for r in rows])
    checks["median_max_alpha_err"] = non_increasing([r["median_max_alpha_err"] for r in rows])
    return {"params": params.to_dict(), "rows": rows, "checks": checks, "passed": all(checks.values())}
