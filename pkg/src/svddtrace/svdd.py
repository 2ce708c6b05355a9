"""Support vector data description with a Gaussian kernel.

The dual problem

    max  sum_i a_i K(x_i, x_i) - sum_ij a_i a_j K(x_i, x_j)
    s.t. sum_i a_i = 1,  0 <= a_i <= C = 1 / (N f)

is solved by pairwise coordinate ascent (SMO) on the maximally violating
pair. The center of the description is implicit in the multipliers; distances
to it are computed through the kernel.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, UsageError
from .kernel import as_matrix, gaussian_gram, squared_distances

logger = logging.getLogger(__name__)

FULL_CACHE_LIMIT = 4096
DEFAULT_F = 0.01
SCORE_BLOCK_ELEMENTS = 1 << 22


class Position(str, enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass
class TrainConfig:
    f: float = DEFAULT_F
    kkt_tol: float = 1e-6
    max_passes: int | None = None  # default 1000 * N pair updates
    seed: int | None = None  # recorded in metadata only; training is deterministic

    def validate(self) -> None:
        if not 0 < self.f <= 1:
            raise UsageError(f"outlier fraction f must lie in (0, 1], got {self.f}")
        if not self.kkt_tol > 0:
            raise UsageError(f"kkt_tol must be positive, got {self.kkt_tol}")


@dataclass
class Standardizer:
    """Per-column z-scoring stored alongside a model."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = as_matrix(x)
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean=x.mean(axis=0), scale=scale)

    def apply(self, x) -> np.ndarray:
        return (as_matrix(x) - self.mean) / self.scale


@dataclass
class SvddModel:
    s: float
    C: float
    f: float
    support_vectors: np.ndarray
    alpha: np.ndarray
    offset_w: float
    r_squared: float
    r_squared_spread: float = 0.0
    kkt_tol: float = 1e-6
    metadata: dict = field(default_factory=dict)
    standardizer: Standardizer | None = None

    @property
    def p(self) -> int:
        return self.support_vectors.shape[1]

    def _prepare(self, z) -> np.ndarray:
        z = as_matrix(z, "points")
        if z.shape[1] != self.p:
            raise UsageError(f"dimension mismatch: model p={self.p}, data p={z.shape[1]}")
        if self.standardizer is not None:
            z = self.standardizer.apply(z)
        return z

    def _dist2_prepared(self, z: np.ndarray) -> np.ndarray:
        # Direct differences and last-axis sums keep each row's result independent
        # of how many rows are scored together (BLAS blocking is not).
        sv = self.support_vectors
        m = max(sv.shape[0] * sv.shape[1], 1)
        block = max(1, SCORE_BLOCK_ELEMENTS // m)
        out = np.empty(z.shape[0])
        for start in range(0, z.shape[0], block):
            diff = z[start : start + block, None, :] - sv[None, :, :]
            k = gaussian_gram(np.square(diff).sum(axis=2), self.s)
            out[start : start + block] = 1.0 - 2.0 * (k * self.alpha).sum(axis=1) + self.offset_w
        return out

    def decision_distances(self, z) -> np.ndarray:
        return self._dist2_prepared(self._prepare(z))


@dataclass
class SolverTrace:
    """Bookkeeping from an SMO run."""

    n_iter: int
    violation: float
    objective_history: list[float] = field(default_factory=list)


class _KernelColumns:
    """Kernel columns, fully cached for small N and computed on demand otherwise."""

    def __init__(self, x: np.ndarray, s: float, max_cached: int = 256):
        self.x, self.s = x, s
        self.n = x.shape[0]
        self.full = None
        if self.n <= FULL_CACHE_LIMIT:
            self.full = gaussian_gram(squared_distances(x, x), s)
        self._cache: dict[int, np.ndarray] = {}
        self._max_cached = max_cached

    def column(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[:, i]
        col = self._cache.get(i)
        if col is None:
            if len(self._cache) >= self._max_cached:
                self._cache.pop(next(iter(self._cache)))
            col = gaussian_gram(squared_distances(self.x, self.x[i : i + 1])[:, 0], self.s)
            self._cache[i] = col
        return col

    def matvec(self, v: np.ndarray, block: int = 2048) -> np.ndarray:
        if self.full is not None:
            return self.full @ v
        out = np.empty(self.n)
        for start in range(0, self.n, block):
            rows = self.x[start : start + block]
            out[start : start + block] = gaussian_gram(squared_distances(rows, self.x), self.s) @ v
        return out


def smo_solve(
    kcols: _KernelColumns,
    C: float,
    kkt_tol: float,
    max_iter: int,
    diag: np.ndarray | None = None,
    record_objective: bool = False,
) -> tuple[np.ndarray, SolverTrace]:
    """Maximize ``sum a_i d_i - a'Ka`` over the capped simplex.

    ``d`` is the kernel diagonal (all ones for the Gaussian kernel). The
    gradient of the objective is ``d - 2Ka``; at the optimum it is at most
    ``kkt_tol`` larger on any coordinate that can still grow than on any
    coordinate that can still shrink.
    """
    n = kcols.n
    diag = np.ones(n) if diag is None else diag
    alpha = np.full(n, 1.0 / n)
    ka = kcols.matvec(alpha)
    grad = diag - 2.0 * ka
    history: list[float] = []
    if record_objective:
        history.append(float(alpha @ diag - alpha @ ka))
    violation = np.inf
    n_iter = 0
    while n_iter < max_iter:
        up = np.where(alpha < C, grad, -np.inf)
        down = np.where(alpha > 0, grad, np.inf)
        i = int(np.argmax(up))
        j = int(np.argmin(down))
        violation = up[i] - down[j]
        if violation < kkt_tol:
            break
        ki, kj = kcols.column(i), kcols.column(j)
        eta = diag[i] + diag[j] - 2.0 * ki[j]
        limit = min(C - alpha[i], alpha[j])
        t = violation / (2.0 * eta) if eta > 1e-15 else limit
        if t >= limit:
            t = limit
            # land exactly on the bound to avoid residue
            if C - alpha[i] <= alpha[j]:
                alpha[j] -= C - alpha[i]
                alpha[i] = C
            else:
                alpha[i] += alpha[j]
                alpha[j] = 0.0
        else:
            alpha[i] += t
            alpha[j] -= t
        grad -= 2.0 * t * (ki - kj)
        n_iter += 1
        if record_objective:
            ka = kcols.matvec(alpha)
            history.append(float(alpha @ diag - alpha @ ka))
    return alpha, SolverTrace(n_iter=n_iter, violation=float(violation), objective_history=history)


def _distances_to_center(kcols: _KernelColumns, alpha: np.ndarray) -> tuple[np.ndarray, float]:
    ka = kcols.matvec(alpha)
    w = float(alpha @ ka)
    return 1.0 - 2.0 * ka + w, w


def _radius_from(dist2: np.ndarray, alpha: np.ndarray, C: float) -> tuple[float, float]:
    tiny = 1e-14
    free = (alpha > tiny) & (alpha < C - tiny)
    if free.any():
        vals = dist2[free]
        return float(vals.mean()), float(vals.max() - vals.min())
    capped = alpha >= C - tiny
    logger.debug("no unbounded support vectors; using the capped-point fallback")
    return float(dist2[capped].max()), 0.0


def train_svdd(data, s: float, cfg: TrainConfig | None = None, standardize: bool = False) -> SvddModel:
    """Fit an SVDD description of ``data`` at bandwidth ``s``.

    Raises:
        NonConvergence: the KKT violation is still above ``cfg.kkt_tol`` after
            ``cfg.max_passes`` pair updates.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    x = as_matrix(data)
    s = float(s)
    if not s > 0:
        raise UsageError(f"bandwidth must be positive, got {s}")
    standardizer = None
    if standardize:
        standardizer = Standardizer.fit(x)
        x = standardizer.apply(x)
    n = x.shape[0]
    C = 1.0 / (n * cfg.f)
    max_iter = cfg.max_passes if cfg.max_passes is not None else 1000 * n

    kcols = _KernelColumns(x, s)
    alpha, trace = smo_solve(kcols, C, cfg.kkt_tol, max_iter)
    if trace.violation >= cfg.kkt_tol:
        raise NonConvergence(
            f"SMO stopped at violation {trace.violation:.3e} after {trace.n_iter} updates",
            violation=trace.violation,
            passes=trace.n_iter,
        )
    dist2, w = _distances_to_center(kcols, alpha)
    r2, spread = _radius_from(dist2, alpha, C)
    sv = alpha > 0
    return SvddModel(
        s=s,
        C=C,
        f=cfg.f,
        support_vectors=x[sv].copy(),
        alpha=alpha[sv].copy(),
        offset_w=w,
        r_squared=r2,
        r_squared_spread=spread,
        kkt_tol=cfg.kkt_tol,
        metadata={"N": n, "seed": cfg.seed, "n_iter": trace.n_iter, "violation": trace.violation},
        standardizer=standardizer,
    )


def full_alpha(model: SvddModel, data) -> np.ndarray:
    """Multipliers aligned with the rows of the training data (zeros off the support)."""
    x = as_matrix(data)
    if model.standardizer is not None:
        x = model.standardizer.apply(x)
    alpha = np.zeros(x.shape[0])
    if model.alpha.size == 0:
        return alpha
    # each support vector claims one matching training row
    rows: dict[bytes, list[int]] = {}
    for i in range(x.shape[0] - 1, -1, -1):
        rows.setdefault(x[i].tobytes(), []).append(i)
    for k in range(model.alpha.size):
        candidates = rows.get(model.support_vectors[k].tobytes())
        if not candidates:
            raise UsageError("model support vectors do not come from this data")
        alpha[candidates.pop()] = model.alpha[k]
    return alpha


def radius_squared(model: SvddModel, data) -> tuple[float, np.ndarray]:
    """Threshold averaged over unbounded support vectors, and the per-point values."""
    x = as_matrix(data)
    alpha = full_alpha(model, x)
    dist2 = model.decision_distances(x)
    tiny = 1e-14
    free = (alpha > tiny) & (alpha < model.C - tiny)
    r2, _ = _radius_from(dist2, alpha, model.C)
    return r2, dist2[free]


def classify_training_points(model: SvddModel, data) -> list[Position]:
    alpha = full_alpha(model, data)
    tol = model.kkt_tol
    out = []
    for a in alpha:
        if a < tol:
            out.append(Position.INSIDE)
        elif a > model.C - tol:
            out.append(Position.OUTSIDE)
        else:
            out.append(Position.BOUNDARY)
    return out


def score(model: SvddModel, z) -> tuple[float, bool]:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.ndim != 1:
        raise UsageError("score takes a single point; use score_batch for many")
    d2 = float(model.decision_distances(z[None, :])[0])
    return d2, d2 > model.r_squared


def score_batch(model: SvddModel, data) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances and outlier flags for every row, in input order."""
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        return np.empty(0), np.empty(0, dtype=bool)
    d2 = model.decision_distances(arr)
    return d2, d2 > model.r_squared
