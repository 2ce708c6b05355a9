"""Gaussian kernel, pairwise squared distances and small SPD solves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericalError, UsageError

DEFAULT_RIDGE = 1e-10
RIDGE_CAP = 1e-6
RESIDUAL_TOL = 1e-8


def as_matrix(data, name: str = "data") -> np.ndarray:
    """Coerce ``data`` to a 2-D float array, treating 1-D input as one column."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise UsageError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise UsageError(f"{name} needs at least one column")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} contains non-finite values")
    return arr


def _check_bandwidth(s: float) -> float:
    s = float(s)
    if not (s > 0 and np.isfinite(s)):
        raise UsageError(f"bandwidth must be positive and finite, got {s}")
    return s


def kernel_value(x, y, s: float) -> float:
    """Gaussian kernel ``exp(-|x - y|^2 / (2 s^2))`` between two points."""
    s = _check_bandwidth(s)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise UsageError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * s * s)))


def squared_distances(a, b) -> np.ndarray:
    """All pairwise squared Euclidean distances between rows of ``a`` and ``b``.

    Uses the expanded form ``|a|^2 + |b|^2 - 2 a.b`` clamped at zero. When
    ``b`` is ``a`` the result is symmetrized and its diagonal zeroed exactly.
    """
    same = b is a
    a = as_matrix(a, "a")
    b = a if same else as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise UsageError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    aa = np.einsum("ij,ij->i", a, a)
    bb = aa if same else np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    if same:
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    return d2


def gaussian_gram(d2: np.ndarray, s: float) -> np.ndarray:
    """Kernel matrix from a precomputed squared-distance matrix."""
    s = _check_bandwidth(s)
    return np.exp(-np.asarray(d2) / (2.0 * s * s))


@dataclass(frozen=True)
class SpdSolution:
    x: np.ndarray
    ridge_applied: float
    factor: tuple  # cho_factor output, reusable for further solves


def spd_solve(m, rhs, ridge: float = DEFAULT_RIDGE, ridge_cap: float = RIDGE_CAP) -> SpdSolution:
    """Solve ``(M + ridge I) X = rhs`` by Cholesky with ridge escalation.

    The ridge starts at ``ridge`` and grows tenfold whenever the factorization
    fails or the relative residual exceeds 1e-8, up to ``ridge_cap``.

    Raises:
        NumericalError: if no ridge up to the cap gives an acceptable solve.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise UsageError(f"matrix must be square, got {m.shape}")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > 1e-12 * scale:
        raise UsageError("matrix is not symmetric")
    if ridge < 0:
        raise UsageError("ridge must be nonnegative")
    b = np.asarray(rhs, dtype=float)
    eye = np.eye(m.shape[0])
    rhs_norm = np.linalg.norm(b)

    eps = float(ridge)
    residual = np.inf
    while True:
        shifted = m + eps * eye
        try:
            factor = linalg.cho_factor(shifted, lower=True, check_finite=False)
            x = linalg.cho_solve(factor, b, check_finite=False)
            residual = np.linalg.norm(shifted @ x - b) / rhs_norm if rhs_norm > 0 else 0.0
            if np.all(np.isfinite(x)) and residual <= RESIDUAL_TOL:
                return SpdSolution(x, eps, factor)
        except linalg.LinAlgError:
            pass
        if eps >= ridge_cap * (1 - 1e-9):
            break
        eps = min(eps * 10.0, ridge_cap) if eps > 0 else min(DEFAULT_RIDGE, ridge_cap)
    try:
        cond = float(np.linalg.cond(m))
    except np.linalg.LinAlgError:
        cond = float("inf")
    raise NumericalError(
        "SPD solve failed at the ridge cap",
        ridge=eps,
        condition=cond,
        residual=float(residual),
        order=m.shape[0],
    )
