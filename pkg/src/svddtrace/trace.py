"""Trace criterion for Gaussian bandwidth selection.

For landmarks ``z_1..z_r`` and bandwidth ``s`` let ``U`` be the landmark
kernel matrix and ``W_i`` the kernel vector between training point ``x_i`` and
the landmarks. ``psi_i = W_i' U^-1 W_i`` is the squared norm of the projection
of the feature image of ``x_i`` onto the span of the landmark images, ``g`` is
the mean of ``psi`` and ``h = dg/ds`` has the closed form

    h = (2 sum_i B_i . W'_i - sum_i B_i' U' B_i) / N,    B_i = U^-1 W_i,

where primes on ``U`` and ``W`` denote elementwise derivatives in ``s``. The
selected bandwidth is the maximizer of ``h``, found on a log grid and refined
by golden-section search.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BracketError, InsufficientDataError, NumericalError, UsageError
from .kernel import DEFAULT_RIDGE, RIDGE_CAP, as_matrix, spd_solve, squared_distances
from .landmarks import DEFAULT_R, LandmarkSet, select_landmarks
from .search import golden_section_max

logger = logging.getLogger(__name__)

BRACKET_SUBSAMPLE = 1000


@dataclass(frozen=True)
class TraceContext:
    dist2_xz: np.ndarray
    dist2_zz: np.ndarray

    @property
    def n(self) -> int:
        return self.dist2_xz.shape[0]

    @property
    def r(self) -> int:
        return self.dist2_zz.shape[0]


@dataclass(frozen=True)
class TraceEvaluation:
    s: float
    U: np.ndarray
    U_prime: np.ndarray
    W: np.ndarray  # N x r, row i is W_i
    W_prime: np.ndarray
    B: np.ndarray  # N x r, row i is U^-1 W_i
    psi_values: np.ndarray
    g: float
    h: float
    ridge_applied: float

    @property
    def rho_values(self) -> np.ndarray:
        """Squared projection residuals ``1 - psi``."""
        return 1.0 - self.psi_values


@dataclass
class BandwidthSearchConfig:
    r: int = DEFAULT_R
    s_min: float | None = None
    s_max: float | None = None
    grid_size: int = 50
    refine_tol: float = 1e-4
    ridge: float = DEFAULT_RIDGE
    seed: int = 0

    def validate(self) -> None:
        if self.r < 1:
            raise UsageError(f"r must be >= 1, got {self.r}")
        if self.grid_size < 8:
            raise UsageError(f"grid_size must be >= 8, got {self.grid_size}")
        if not 0 < self.refine_tol < 1:
            raise UsageError(f"refine_tol must be in (0, 1), got {self.refine_tol}")
        for name in ("s_min", "s_max"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"{name} must be positive, got {v}")
        if self.s_min is not None and self.s_max is not None and not self.s_min < self.s_max:
            raise UsageError("s_min must be smaller than s_max")


@dataclass
class TraceProfile:
    s: np.ndarray
    g: np.ndarray
    h: np.ndarray
    s_star: float
    landmarks: LandmarkSet | None = None
    bracket: tuple[float, float] = (np.nan, np.nan)
    notes: list[str] = field(default_factory=list)
    g_star: float = np.nan
    h_star: float = np.nan

    def write_csv(self, path) -> None:
        """Write ``s,g,h,selected`` rows; the refined optimum is appended and flagged."""
        rows = [(float(s), float(g), float(h), 0) for s, g, h in zip(self.s, self.g, self.h)]
        rows.append((self.s_star, self.g_star, self.h_star, 1))
        rows.sort(key=lambda t: t[0])
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "g", "h", "selected"])
            for s, g, h, sel in rows:
                w.writerow([repr(s), repr(g), repr(h), sel])


def build_context(data, landmarks) -> TraceContext:
    x = as_matrix(data)
    z = landmarks.points if isinstance(landmarks, LandmarkSet) else as_matrix(landmarks, "landmarks")
    if x.shape[1] != z.shape[1]:
        raise UsageError(f"dimension mismatch: data p={x.shape[1]}, landmarks p={z.shape[1]}")
    return TraceContext(dist2_xz=squared_distances(x, z), dist2_zz=squared_distances(z, z))


def evaluate(ctx: TraceContext, s: float, ridge: float = DEFAULT_RIDGE) -> TraceEvaluation:
    """All trace quantities at bandwidth ``s`` in one O(N r^2) pass."""
    s = float(s)
    if not s > 0:
        raise UsageError(f"bandwidth must be positive, got {s}")
    two_s2 = 2.0 * s * s
    s3 = s**3
    U = np.exp(-ctx.dist2_zz / two_s2)
    U_prime = ctx.dist2_zz * U / s3
    W = np.exp(-ctx.dist2_xz / two_s2)
    W_prime = ctx.dist2_xz * W / s3

    sol = spd_solve(U, W.T, ridge=ridge)
    B = sol.x.T
    psi_values = np.einsum("ik,ik->i", B, W)
    g = float(psi_values.mean())
    first = np.einsum("ik,ik->i", B, W_prime)
    second = np.einsum("ik,ik->i", B @ U_prime, B)
    h = float((2.0 * first - second).mean())
    return TraceEvaluation(
        s=s, U=U, U_prime=U_prime, W=W, W_prime=W_prime, B=B,
        psi_values=psi_values, g=g, h=h, ridge_applied=sol.ridge_applied,
    )


def psi(ctx: TraceContext, i: int, s: float, ridge: float = DEFAULT_RIDGE) -> float:
    s = float(s)
    if not s > 0:
        raise UsageError(f"bandwidth must be positive, got {s}")
    U = np.exp(-ctx.dist2_zz / (2.0 * s * s))
    w = np.exp(-ctx.dist2_xz[i] / (2.0 * s * s))
    return float(w @ spd_solve(U, w, ridge=ridge).x)


def g(ctx: TraceContext, s: float, ridge: float = DEFAULT_RIDGE) -> float:
    return evaluate(ctx, s, ridge).g


def h(ctx: TraceContext, s: float, ridge: float = DEFAULT_RIDGE) -> float:
    return evaluate(ctx, s, ridge).h


def auto_bracket(data, seed: int = 0) -> tuple[float, float]:
    """Search range from median and maximum pairwise distances of a subsample."""
    x = as_matrix(data)
    if x.shape[0] > BRACKET_SUBSAMPLE:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(x.shape[0], BRACKET_SUBSAMPLE, replace=False))
        x = x[idx]
    d2 = squared_distances(x, x)
    iu = np.triu_indices(x.shape[0], k=1)
    d = np.sqrt(d2[iu])
    d = d[d > 0]
    if d.size == 0:
        raise InsufficientDataError("all rows are identical")
    return 0.05 * float(np.median(d)), 10.0 * float(d.max())


def _profile_on(ctx: TraceContext, grid: np.ndarray, ridge: float):
    gs = np.full(grid.shape, np.nan)
    hs = np.full(grid.shape, np.nan)
    for k, s in enumerate(grid):
        try:
            ev = evaluate(ctx, s, ridge)
        except NumericalError:
            continue
        if ev.ridge_applied >= RIDGE_CAP:
            continue
        gs[k], hs[k] = ev.g, ev.h
    return gs, hs


def _interior_argmax(hs: np.ndarray) -> tuple[int, str | None]:
    """Index of the grid max and which side it sits on if it is not interior."""
    valid = np.flatnonzero(np.isfinite(hs))
    if valid.size == 0:
        raise NumericalError("h could not be evaluated anywhere on the grid")
    k = int(valid[np.argmax(hs[valid])])
    if k == valid[0]:
        return k, "low"
    if k == valid[-1]:
        return k, "high"
    if not (np.isfinite(hs[k - 1]) and np.isfinite(hs[k + 1])):
        return k, "gap"
    return k, None


def select_bandwidth_trace(data, cfg: BandwidthSearchConfig | None = None) -> tuple[float, TraceProfile]:
    """Trace-criterion bandwidth: argmax of ``h`` over a log grid, then refined.

    Raises:
        InsufficientDataError: fewer than ``r + 1`` distinct rows.
        BracketError: ``h`` still peaks at an edge of the range after one
            tenfold expansion.
    """
    cfg = cfg or BandwidthSearchConfig()
    cfg.validate()
    x = as_matrix(data)
    n_distinct = np.unique(x, axis=0).shape[0]
    if n_distinct < cfg.r + 1:
        raise InsufficientDataError(f"need at least r + 1 = {cfg.r + 1} distinct rows, found {n_distinct}")

    landmarks = select_landmarks(x, cfg.r, cfg.seed)
    ctx = build_context(x, landmarks)

    if cfg.s_min is None or cfg.s_max is None:
        auto_lo, auto_hi = auto_bracket(x, cfg.seed)
        s_min = cfg.s_min if cfg.s_min is not None else auto_lo
        s_max = cfg.s_max if cfg.s_max is not None else auto_hi
        if not s_min < s_max:
            raise UsageError(f"empty search range [{s_min}, {s_max}]")
    else:
        s_min, s_max = cfg.s_min, cfg.s_max

    grid = np.geomspace(s_min, s_max, cfg.grid_size)
    gs, hs = _profile_on(ctx, grid, cfg.ridge)
    notes: list[str] = []
    k, edge = _interior_argmax(hs)
    if edge in ("low", "high"):
        step = np.log(grid[1] / grid[0])
        n_extra = int(np.ceil(np.log(10.0) / step))
        if edge == "low":
            extra = s_min * np.exp(-step * np.arange(n_extra, 0, -1))
            eg, eh = _profile_on(ctx, extra, cfg.ridge)
            grid, gs, hs = np.r_[extra, grid], np.r_[eg, gs], np.r_[eh, hs]
        elif np.isfinite(hs[-1]):
            extra = s_max * np.exp(step * np.arange(1, n_extra + 1))
            eg, eh = _profile_on(ctx, extra, cfg.ridge)
            grid, gs, hs = np.r_[grid, extra], np.r_[gs, eg], np.r_[hs, eh]
        notes.append(f"bracket expanded toward {edge} end")
        logger.info("trace criterion peaked at the %s end; expanding the bracket", edge)
        k, edge = _interior_argmax(hs)
    if edge is not None:
        raise BracketError(
            f"h is maximal at the {edge} edge of the search range",
            s=float(grid[k]), s_min=float(grid[0]), s_max=float(grid[-1]),
        )

    def objective(s: float) -> float:
        try:
            ev = evaluate(ctx, s, cfg.ridge)
        except NumericalError:
            return -np.inf
        return ev.h if ev.ridge_applied < RIDGE_CAP else -np.inf

    res = golden_section_max(objective, float(grid[k - 1]), float(grid[k + 1]), rel_tol=cfg.refine_tol)
    s_star = res.x
    if res.fx < hs[k]:
        s_star = float(grid[k])
    best = evaluate(ctx, s_star, cfg.ridge)
    profile = TraceProfile(
        s=grid, g=gs, h=hs, s_star=s_star, landmarks=landmarks,
        bracket=(float(grid[0]), float(grid[-1])), notes=notes,
        g_star=best.g, h_star=best.h,
    )
    return s_star, profile
