"""Functional HP filter on basis coefficients.

A series of curves is represented by its ``(n, J)`` coefficient matrix. Every
operator here is diagonal in the basis, so filtering and estimation split into
``J`` independent scalar problems, one per column.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .diffop import apply_P, solve_smoother
from .scalar_hp import ScalarEstimate, estimate_alpha

Label = Literal["Sigma_u", "Sigma_v", "B", "generic"]

DEFAULT_ALPHA_MAX = 1e6
_ROUNDING_ZERO = 64 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Operator ``h -> sum_j eigenvalues[j] <h, e_j> e_j`` on the truncated basis."""

    eigenvalues: np.ndarray
    label: Label = "generic"

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(ev)):
            raise ValueError("eigenvalues must be finite")
        if self.label == "B" and np.any(ev < 0):
            j = int(np.argmax(ev < 0)) + 1
            raise ValueError(
                f"smoothing operator violates the positivity condition <h, Bh> >= 0 "
                f"(eigenvalue {j} is {ev[j - 1]})"
            )
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def J(self) -> int:
        return self.eigenvalues.size

    def trace_diagnostic(self) -> dict:
        """Partial trace and tail ratio ``eigenvalues[-1] / eigenvalues[0]``."""
        ev = self.eigenvalues
        return {
            "partial_trace": float(np.sum(ev)),
            "tail_ratio": float(ev[-1] / ev[0]) if ev[0] != 0 else float("nan"),
        }


@dataclass(frozen=True, eq=False)
class FilterResult:
    trend: np.ndarray
    residual: np.ndarray
    per_component_alpha: np.ndarray
    component_status: tuple[str, ...]


def _as_coefficients(X, min_rows=3) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"coefficient matrix must be 2-D (n, J), got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} curves, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        i, j = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"non-finite coefficient at row {i}, column {j}")
    return X


def _map_columns(func, columns, max_workers):
    # executor.map preserves input order, so results do not depend on scheduling
    if max_workers is None or max_workers <= 1:
        return [func(c) for c in columns]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(func, columns))


def apply_operator(op: DiagonalOperator, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != op.J:
        raise ValueError(f"operator has {op.J} components, coefficients have {coeffs.shape[-1]}")
    return op.eigenvalues * coeffs


def filter_trend(X, B: DiagonalOperator, status=None, max_workers: int | None = None) -> FilterResult:
    """Smooth every component: ``trend[:, j] = (I + alpha_j P'P)^{-1} X[:, j]``.

    Parameters
    ----------
    X : array_like, shape (n, J)
        Coefficient matrix of the observed curves.
    B : DiagonalOperator
        Smoothing operator with nonnegative eigenvalues ``alpha_j``.
    status : sequence of str, optional
        Per-component estimation status to carry into the result; defaults to
        ``"ok"`` for every component.
    max_workers : int, optional
        Solve components on a thread pool. Output is identical for any value.

    Returns
    -------
    FilterResult
    """
    X = _as_coefficients(X)
    alpha = B.eigenvalues
    if alpha.size != X.shape[1]:
        raise ValueError(f"operator has {alpha.size} components, data has {X.shape[1]}")
    if np.any(alpha < 0):
        raise ValueError("smoothing operator violates the positivity condition <h, Bh> >= 0")
    cols = _map_columns(lambda j: solve_smoother(X[:, j], alpha[j]), range(X.shape[1]), max_workers)
    trend = np.column_stack(cols)
    status = tuple(status) if status is not None else ("ok",) * X.shape[1]
    return FilterResult(trend, X - trend, alpha.copy(), status)


def functional_objective(X, Y, B: DiagonalOperator) -> float:
    """Fit plus penalty ``sum ||X_i - Y_i||^2 + sum <(PY)_i, B (PY)_i>`` in coefficients."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 2:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    if B.J != X.shape[1]:
        raise ValueError(f"operator has {B.J} components, data has {X.shape[1]}")
    PY = apply_P(Y)
    return float(np.sum((X - Y) ** 2) + np.sum(B.eigenvalues * np.sum(PY**2, axis=0)))


def optimal_B(sigma_u: DiagonalOperator, sigma_v: DiagonalOperator) -> DiagonalOperator:
    """Noise-to-signal operator with eigenvalues ``mu_j / tau_j``."""
    if sigma_u.J != sigma_v.J:
        raise ValueError("covariance operators have different truncation levels")
    if np.any(sigma_v.eigenvalues <= 0):
        raise ValueError("signal covariance eigenvalues must be positive")
    if np.any(sigma_u.eigenvalues <= 0):
        raise ValueError("noise covariance eigenvalues must be positive")
    return DiagonalOperator(sigma_u.eigenvalues / sigma_v.eigenvalues, "B")


def estimate_components(X, max_workers: int | None = None) -> list[ScalarEstimate]:
    """Per-component scalar estimates from the differenced columns of ``X``."""
    X = _as_coefficients(X, min_rows=5)
    PX = apply_P(X)
    # projection rounding is relative to the whole matrix, so an affine column
    # leaves second differences near eps * max|X|; treat those as exact zeros
    PX[:, np.abs(PX).max(axis=0) <= _ROUNDING_ZERO * np.abs(X).max()] = 0.0
    return _map_columns(lambda j: estimate_alpha(PX[:, j]), range(X.shape[1]), max_workers)


def estimate_Sigma_u(X) -> DiagonalOperator:
    """Noise covariance estimate; negative raw values are clamped to zero."""
    return DiagonalOperator([e.mu_hat for e in estimate_components(X)], "Sigma_u")


def estimate_Sigma_v(X) -> DiagonalOperator:
    """Signal covariance estimate; nonpositive raw values are clamped to zero."""
    return DiagonalOperator([max(e.tau_hat, 0.0) for e in estimate_components(X)], "Sigma_v")


def estimate_B(
    X, alpha_max: float = DEFAULT_ALPHA_MAX, max_workers: int | None = None
) -> tuple[DiagonalOperator, list[ScalarEstimate]]:
    """Data-driven smoothing operator with eigenvalues ``mu_hat_j / tau_hat_j``.

    Components flagged ``tau_degenerate`` get ``alpha_max`` so the result can be
    passed straight to :func:`filter_trend`; ``mu_clamped`` components get 0.
    """
    if not alpha_max >= 0:
        raise ValueError("alpha_max must be nonnegative")
    ests = estimate_components(X, max_workers=max_workers)
    alpha = [alpha_max if e.status == "tau_degenerate" else e.alpha_hat for e in ests]
    return DiagonalOperator(alpha, "B"), ests


def estimation_report(estimates: list[ScalarEstimate], basis: dict | None = None) -> dict:
    """JSON-ready report of per-component estimates."""
    n = estimates[0].n if estimates else 0
    return {
        "metadata": {"n": n, "J": len(estimates), "basis": basis or {}},
        "components": [{"j": j, **e.to_dict()} for j, e in enumerate(estimates, start=1)],
        "summary": {
            "ok": sum(e.status == "ok" for e in estimates),
            "mu_clamped": sum(e.status == "mu_clamped" for e in estimates),
            "tau_degenerate": sum(e.status == "tau_degenerate" for e in estimates),
        },
    }
