"""Scalar Hodrick-Prescott filter and moment estimators of its optimal parameter.

Under ``x = y + u``, ``Py = v`` with ``u ~ N(0, mu I)`` and ``v ~ N(0, tau I)``
the differenced series ``Px = v + Pu`` is stationary with autocovariances
``tau + 6 mu`` (lag 0), ``-4 mu`` (lag 1), ``mu`` (lag 2) and zero beyond.
The estimators below invert the first two::

    mu_hat  = -S1 / (4 (n - 3))
    tau_hat =  S0 / (n - 2) + 3 S1 / (2 (n - 3))      (= S0/(n-2) - 6 mu_hat)

with ``S0 = sum Px(i)^2`` and ``S1 = sum Px(i) Px(i+1)``. The optimal smoothing
parameter is the noise-to-signal ratio ``mu / tau``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .diffop import apply_P, solve_smoother

Status = Literal["ok", "mu_clamped", "tau_degenerate"]

MIN_DIFFERENCED_LENGTH = 3  # n >= 5
_COMPENSATED_ABOVE = 100_000


def _sum(values: np.ndarray) -> float:
    if values.size > _COMPENSATED_ABOVE:
        return math.fsum(values.tolist())
    return float(np.sum(values))


def lag_sums(px) -> tuple[float, float]:
    """``(S0, S1)``: sum of squares and lag-one cross products of ``px``."""
    px = np.asarray(px, dtype=float)
    if px.ndim != 1 or px.size < MIN_DIFFERENCED_LENGTH:
        raise ValueError(
            f"estimators need a differenced series of length >= {MIN_DIFFERENCED_LENGTH} "
            f"(series length n >= 5), got {px.size}"
        )
    if not np.all(np.isfinite(px)):
        raise ValueError("differenced series contains non-finite values")
    return _sum(px * px), _sum(px[:-1] * px[1:])


@dataclass(frozen=True)
class ScalarEstimate:
    """Variance and smoothing-parameter estimates for one series.

    ``mu_hat`` is clamped at zero; ``tau_hat`` is reported raw. ``alpha_hat``
    is ``None`` when ``status == "tau_degenerate"``.
    """

    mu_hat: float
    tau_hat: float
    alpha_hat: float | None
    s0: float
    s1: float
    n: int
    status: Status

    def to_dict(self) -> dict:
        return asdict(self)


def hp_objective(x, y, alpha: float) -> float:
    """Residual sum of squares plus ``alpha`` times the squared second differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    py = apply_P(y)
    return float(np.sum((x - y) ** 2) + alpha * np.sum(py**2))


def hp_filter(x, alpha: float) -> np.ndarray:
    """HP trend of ``x``: the minimizer of :func:`hp_objective`."""
    return solve_smoother(x, alpha)


def _mu_from_sums(s1, n):
    return -s1 / (4.0 * (n - 3))


def _tau_from_sums(s0, s1, n):
    return s0 / (n - 2) + 3.0 * s1 / (2.0 * (n - 3))


def estimate_mu(px) -> float:
    """Raw noise-variance estimate from the differenced series ``px = P x``.

    May be negative in finite samples.
    """
    _, s1 = lag_sums(px)
    return _mu_from_sums(s1, len(px) + 2)


def estimate_tau(px) -> float:
    """Raw signal-variance estimate from the differenced series ``px = P x``."""
    s0, s1 = lag_sums(px)
    return _tau_from_sums(s0, s1, len(px) + 2)


def alpha_closed_form(px) -> float:
    """``-(1/4) (3/2 + (n-3) S0 / ((n-2) S1))^{-1}``, undefined for ``S1 == 0``."""
    s0, s1 = lag_sums(px)
    n = len(px) + 2
    if s1 == 0.0:
        raise ZeroDivisionError("closed form is undefined when the lag-one sum is zero")
    return -0.25 / (1.5 + (n - 3) * s0 / ((n - 2) * s1))


def estimate_alpha(px) -> ScalarEstimate:
    """Estimate ``mu``, ``tau`` and the noise-to-signal ratio from ``px = P x``.

    Degenerate samples are resolved as follows:

    * raw ``mu_hat <= 0``: ``mu_hat`` is clamped to 0, ``alpha_hat = 0`` and the
      status is ``"mu_clamped"`` (no detectable noise, no smoothing);
    * otherwise raw ``tau_hat <= 0``: ``alpha_hat`` is ``None`` and the status is
      ``"tau_degenerate"`` (no detectable signal curvature). Callers that need a
      number substitute a large cap.
    """
    s0, s1 = lag_sums(px)
    n = len(px) + 2
    mu = _mu_from_sums(s1, n)
    tau = _tau_from_sums(s0, s1, n)
    if mu <= 0.0:
        return ScalarEstimate(0.0, tau, 0.0, s0, s1, n, "mu_clamped")
    if tau <= 0.0:
        return ScalarEstimate(mu, tau, None, s0, s1, n, "tau_degenerate")
    return ScalarEstimate(mu, tau, mu / tau, s0, s1, n, "ok")


def mu_estimator_variance(mu: float, tau: float, n: int) -> float:
    """Exact variance of the ``mu`` estimator for a Gaussian series of length ``n``."""
    if mu <= 0 or tau <= 0:
        raise ValueError("mu and tau must be positive")
    if n < 6:
        raise ValueError("variance formula needs n >= 6")
    bracket = (
        (n - 3) * (tau**2 + 12 * tau * mu + 52 * mu**2)
        + 2 * (n - 4) * (tau * mu + 22 * mu**2)
        + 2 * (n - 5) * mu**2
    )
    return bracket / (16.0 * (n - 3) ** 2)
