"""Orthonormal bases on [0, 1] and the maps between sampled curves and coefficients.

Projection uses the trapezoidal rule on a uniform grid. For the sine basis
``e_j(t) = sqrt(2) sin(j pi t)`` the discrete Gram matrix under that rule is the
identity up to rounding whenever ``j + k < 2 (m - 1)``, so band-limited curves
round-trip exactly.

The sine basis vanishes at both endpoints: a curve with nonzero boundary
values loses that information on projection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

logger = logging.getLogger(__name__)

GRAM_TOL = 1e-6
_UNIFORM_TOL = 1e-9


def uniform_grid(m: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _check_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-D array with at least two points")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite values")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError("grid must lie in [0, 1]")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise ValueError("grid must be strictly increasing")
    if np.ptp(steps) > _UNIFORM_TOL * max(steps.mean(), 1.0):
        raise ValueError("only uniform grids are supported")


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """A truncated orthonormal basis sampled on a uniform grid.

    Use :meth:`sine` or :meth:`from_matrix` rather than the constructor.

    Attributes
    ----------
    kind : {"sine", "matrix"}
        ``"sine"`` is ``sqrt(2) sin(j pi t)``; ``"matrix"`` is a user-supplied
        ``m x J`` table of basis values on the grid.
    J : int
        Number of retained basis functions.
    grid : numpy.ndarray
        Uniform sample points in [0, 1], shape ``(m,)``.
    """

    kind: Literal["sine", "matrix"]
    J: int
    grid: np.ndarray
    values: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def sine(cls, J: int, grid: int | Sequence[float] | np.ndarray) -> "BasisSpec":
        grid = uniform_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
        j = np.arange(1, J + 1)
        values = np.sqrt(2.0) * np.sin(np.pi * np.outer(grid, j))
        return cls._build("sine", J, grid, values)

    @classmethod
    def from_matrix(cls, values, grid) -> "BasisSpec":
        values = np.asarray(values, dtype=float)
        grid = np.asarray(grid, dtype=float)
        if values.ndim != 2 or values.shape[0] != grid.size:
            raise ValueError(
                f"basis matrix must have shape (m, J) with m={grid.size}, got {values.shape}"
            )
        return cls._build("matrix", values.shape[1], grid, values)

    @classmethod
    def _build(cls, kind, J, grid, values):
        J = int(J)
        if J < 1:
            raise ValueError(f"truncation level J must be >= 1, got {J}")
        _check_grid(grid)
        if grid.size < 2 * J:
            raise ValueError(f"grid of {grid.size} points is too coarse for J={J} (need m >= 2J)")
        if not np.all(np.isfinite(values)):
            raise ValueError("basis values must be finite")
        grid = grid.copy()
        values = values.copy()
        grid.flags.writeable = False
        values.flags.writeable = False
        weights = trapezoid_weights(grid)
        weights.flags.writeable = False
        spec = cls(kind, J, grid, values, weights)
        err = np.abs(spec.gram() - np.eye(J)).max()
        if err > GRAM_TOL:
            raise ValueError(f"basis is not orthonormal under trapezoid quadrature (max error {err:.3g})")
        return spec

    @property
    def m(self) -> int:
        return self.grid.size

    def gram(self) -> np.ndarray:
        """Discrete Gram matrix ``E' W E`` under the projection quadrature."""
        return self.values.T @ (self.weights[:, None] * self.values)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "J": self.J, "m": self.m}


def eval_basis(spec: BasisSpec, j: int, t: float) -> float:
    """Value of the ``j``-th basis function (1-based) at ``t``.

    Matrix bases are linearly interpolated between grid points.
    """
    if not 1 <= j <= spec.J:
        raise IndexError(f"basis index {j} out of range 1..{spec.J}")
    if spec.kind == "sine":
        return float(np.sqrt(2.0) * np.sin(j * np.pi * t))
    return float(np.interp(t, spec.grid, spec.values[:, j - 1]))


def _curve_values(curve, spec: BasisSpec) -> np.ndarray:
    if isinstance(curve, SampledCurve):
        if curve.grid.shape != spec.grid.shape or not np.allclose(curve.grid, spec.grid, rtol=0, atol=1e-12):
            raise ValueError("curve grid does not match the basis grid")
        values = curve.values
    else:
        values = np.asarray(curve, dtype=float)
    if values.shape[-1] != spec.m:
        raise ValueError(f"curve has {values.shape[-1]} samples, basis grid has {spec.m}")
    return values


@dataclass(frozen=True, eq=False)
class SampledCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.grid) != np.shape(self.values):
            raise ValueError("grid and values must have the same length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")


def project(curve, spec: BasisSpec) -> np.ndarray:
    """Trapezoid-rule coefficients ``int curve(t) e_j(t) dt`` for ``j = 1..J``.

    ``curve`` may be a :class:`SampledCurve` or a plain array of samples on
    ``spec.grid``.
    """
    values = _curve_values(curve, spec)
    return (values * spec.weights) @ spec.values


def reconstruct(coeffs, spec: BasisSpec) -> SampledCurve:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.J,):
        raise ValueError(f"expected {spec.J} coefficients, got shape {coeffs.shape}")
    return SampledCurve(spec.grid, spec.values @ coeffs)


def project_series(curves, spec: BasisSpec) -> np.ndarray:
    """Coefficient matrix of a series of curves.

    Parameters
    ----------
    curves : sequence of SampledCurve, or array_like of shape (n, m)
        The observed curves, all sampled on ``spec.grid``.
    spec : BasisSpec

    Returns
    -------
    numpy.ndarray, shape (n, J)
        Row ``i`` holds the coefficients of curve ``i``; column ``j`` is the
        scalar series of the ``j``-th component.
    """
    if isinstance(curves, np.ndarray):
        rows = curves
    else:
        curves = list(curves)
        if not curves:
            raise ValueError("cannot project an empty series")
        rows = np.stack([_curve_values(c, spec) for c in curves])
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("cannot project an empty series")
    if rows.shape[1] != spec.m:
        raise ValueError(f"curves have {rows.shape[1]} samples, basis grid has {spec.m}")
    if not np.all(np.isfinite(rows)):
        bad = np.argwhere(~np.isfinite(rows))[0]
        raise ValueError(f"non-finite value in curve {bad[0]} at sample {bad[1]}")
    return (rows * spec.weights) @ spec.values


def reconstruct_series(coeffs, spec: BasisSpec) -> np.ndarray:
    """Curves ``(n, m)`` from a coefficient matrix ``(n, J)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[1] != spec.J:
        raise ValueError(f"expected an (n, {spec.J}) coefficient matrix, got {coeffs.shape}")
    return coeffs @ spec.values.T


def choose_truncation(curves, grid, energy: float = 0.995, max_J: int | None = None) -> int:
    """Smallest sine truncation capturing ``energy`` of the mean curve energy.

    Falls back to ``max_J`` (default ``m // 2``) with a warning when the
    target is not reached, which happens when curves carry boundary values the
    sine basis cannot represent.
    """
    rows = np.asarray(curves, dtype=float)
    grid = np.asarray(grid, dtype=float)
    max_J = grid.size // 2 if max_J is None else max_J
    spec = BasisSpec.sine(max_J, grid)
    total = np.mean(rows**2 @ spec.weights)
    if total == 0.0:
        return 1
    captured = np.cumsum(np.mean(project_series(rows, spec) ** 2, axis=0))
    hits = np.nonzero(captured >= energy * total)[0]
    if hits.size == 0:
        logger.warning(
            "sine basis captures only %.4f of curve energy at J=%d", captured[-1] / total, max_J
        )
        return max_J
    return int(hits[0]) + 1
