"""Second-order differencing operator and the banded linear algebra built on it.

``P`` is the ``(n-2) x n`` matrix with rows ``[1, -2, 1]`` shifted one column
per row. Nothing in this module builds ``P`` densely except :func:`dense_P`,
which exists for oracles and verification code.
"""

import numpy as np
from scipy.linalg import solveh_banded

__all__ = [
    "apply_P",
    "apply_Pt",
    "band_to_dense",
    "dense_P",
    "gram_PPt",
    "gram_PtP",
    "kernel_Z",
    "min_norm_right_inverse_apply",
    "solve_PPt",
    "solve_smoother",
]


def _check_length(n):
    if n < 3:
        raise ValueError(f"second differences need at least 3 points, got n={n}")


def apply_P(y):
    """Second differences ``y[m+2] - 2*y[m+1] + y[m]`` along the first axis."""
    y = np.asarray(y, dtype=float)
    _check_length(y.shape[0])
    return y[2:] - 2.0 * y[1:-1] + y[:-2]


def apply_Pt(v):
    """Adjoint of :func:`apply_P`; maps length ``n-2`` to length ``n``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] < 1:
        raise ValueError("apply_Pt needs a vector of length n-2 >= 1")
    out = np.zeros((v.shape[0] + 2,) + v.shape[1:])
    out[:-2] += v
    out[1:-1] -= 2.0 * v
    out[2:] += v
    return out


def dense_P(n):
    """Dense ``(n-2) x n`` second-difference matrix (oracles only)."""
    _check_length(n)
    P = np.zeros((n - 2, n))
    idx = np.arange(n - 2)
    P[idx, idx] = 1.0
    P[idx, idx + 1] = -2.0
    P[idx, idx + 2] = 1.0
    return P


def gram_PtP(n):
    """Band storage of ``P'P``.

    Returns a ``(5, n)`` array in the general band layout used by
    :func:`scipy.linalg.solve_banded` with ``(l, u) = (2, 2)``:
    ``ab[2 + i - j, j] == (P'P)[i, j]``. Rows ``0..2`` are the upper storage
    accepted by :func:`scipy.linalg.solveh_banded`. Unused corners are zero.
    """
    _check_length(n)
    ab = np.zeros((5, n))
    diag = np.zeros(n)
    diag[:-2] += 1.0
    diag[1:-1] += 4.0
    diag[2:] += 1.0
    off1 = np.zeros(n - 1)
    off1[: n - 2] -= 2.0
    off1[1:] -= 2.0
    off2 = np.ones(n - 2)
    ab[2] = diag
    ab[1, 1:] = off1
    ab[3, :-1] = off1
    ab[0, 2:] = off2
    ab[4, :-2] = off2
    return ab


def gram_PPt(k):
    """Upper band storage ``(3, k)`` of ``PP'`` for ``k = n - 2`` rows of ``P``.

    ``PP'`` is Toeplitz with stencil ``(1, -4, 6, -4, 1)``.
    """
    if k < 1:
        raise ValueError("PP' needs at least one row")
    ab = np.zeros((3, k))
    ab[2] = 6.0
    ab[1, 1:] = -4.0
    ab[0, 2:] = 1.0
    return ab


def band_to_dense(ab):
    """Expand a ``(5, n)`` band array from :func:`gram_PtP` to a dense matrix."""
    n = ab.shape[1]
    out = np.zeros((n, n))
    for row in range(5):
        offset = 2 - row  # column minus row index
        for j in range(n):
            i = j - offset
            if 0 <= i < n:
                out[i, j] = ab[row, j]
    return out


def kernel_Z(n):
    """Orthonormal ``n x 2`` basis of ``ker P`` (the affine sequences).

    Gram-Schmidt on ``(1, ..., 1)`` and ``(1, 2, ..., n)``, so the result is
    the same on every platform.
    """
    _check_length(n)
    ones = np.ones(n)
    ramp = np.arange(1, n + 1, dtype=float)
    z1 = ones / np.sqrt(n)
    z2 = ramp - (z1 @ ramp) * z1
    z2 /= np.linalg.norm(z2)
    return np.column_stack([z1, z2])


def solve_smoother(x, alpha):
    """Solve ``(I + alpha P'P) y = x`` by banded Cholesky.

    Parameters
    ----------
    x : array_like, shape (n,) or (n, k)
        Series to smooth. Columns of a 2-D input share the same ``alpha``.
    alpha : float
        Smoothing parameter, ``alpha >= 0``. Large values are solved as given;
        accuracy degrades roughly with ``1 + 16 * alpha``.

    Returns
    -------
    numpy.ndarray
        The smoothed series, same shape as ``x``.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"smoothing parameter must be finite and >= 0, got {alpha}")
    x = np.asarray(x, dtype=float)
    _check_length(x.shape[0])
    if not np.all(np.isfinite(x)):
        raise ValueError("input series contains non-finite values")
    if alpha == 0.0:
        return x.copy()
    ab = alpha * gram_PtP(x.shape[0])[:3]
    ab[2] += 1.0
    return solveh_banded(ab, x, check_finite=False)


def solve_PPt(v):
    """Solve ``(PP') z = v`` with a pentadiagonal Cholesky factorization."""
    v = np.asarray(v, dtype=float)
    return solveh_banded(gram_PPt(v.shape[0]), v, check_finite=False)


def min_norm_right_inverse_apply(v):
    """Apply ``P'(PP')^{-1}`` to ``v`` (length ``n-2``).

    The result ``w`` satisfies ``P w = v`` and is orthogonal to ``ker P``.
    """
    return apply_Pt(solve_PPt(v))
