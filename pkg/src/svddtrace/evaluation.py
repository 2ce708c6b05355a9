"""F1 scoring, 2-D grid scoring, cross-validated bandwidth and summaries."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NonConvergence, NumericalError, UsageError
from .svdd import SvddModel, TrainConfig, score_batch, train_svdd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class F1Report:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts


@dataclass(frozen=True)
class SummaryStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_dict(self) -> dict:
        return {"min": self.min, "q1": self.q1, "median": self.median, "q3": self.q3, "max": self.max}


def confusion(labels, predictions, positive_class: str = "inlier") -> ConfusionCounts:
    """Confusion counts from boolean *is-inlier* truth and predictions.

    ``positive_class="outlier"`` swaps the roles of the two classes.
    """
    y = np.asarray(labels, dtype=bool)
    yhat = np.asarray(predictions, dtype=bool)
    if y.shape != yhat.shape:
        raise UsageError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if positive_class == "outlier":
        y, yhat = ~y, ~yhat
    elif positive_class != "inlier":
        raise UsageError(f"positive_class must be 'inlier' or 'outlier', got {positive_class!r}")
    tp = int(np.sum(y & yhat))
    fp = int(np.sum(~y & yhat))
    fn = int(np.sum(y & ~yhat))
    tn = int(np.sum(~y & ~yhat))
    return ConfusionCounts(tp, fp, fn, tn)


def f1(counts: ConfusionCounts) -> F1Report:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    denom = precision + recall
    return F1Report(precision, recall, 2 * precision * recall / denom if denom > 0 else 0.0, counts)


def f1_score(model: SvddModel, x, inlier, positive_class: str = "inlier") -> F1Report:
    _, outlier = score_batch(model, x)
    return f1(confusion(inlier, ~outlier, positive_class))


@dataclass
class GridScore:
    x: np.ndarray
    y: np.ndarray
    dist2: np.ndarray
    is_outlier: np.ndarray
    truth: np.ndarray | None = None  # is-inlier per lattice point, when known

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["x", "y", "dist2", "is_outlier"]
            if self.truth is not None:
                header.append("label")
            w.writerow(header)
            for k in range(self.x.size):
                row = [repr(float(self.x[k])), repr(float(self.y[k])), repr(float(self.dist2[k])), int(self.is_outlier[k])]
                if self.truth is not None:
                    row.append("inlier" if self.truth[k] else "outlier")
                w.writerow(row)


def lattice(bbox, resolution: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """``resolution x resolution`` points spanning the box exactly, x varying fastest."""
    xmin, ymin, xmax, ymax = map(float, bbox)
    if resolution < 2:
        raise UsageError(f"resolution must be >= 2, got {resolution}")
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, resolution), np.linspace(ymin, ymax, resolution))
    return gx.ravel(), gy.ravel()


def bounding_box(points) -> tuple[float, float, float, float]:
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def grid_scoring_2d(
    model: SvddModel,
    bbox,
    resolution: int = 200,
    truth: Callable[[np.ndarray], np.ndarray] | None = None,
) -> GridScore:
    """Score every lattice point of the bounding rectangle (no padding)."""
    if model.p != 2:
        raise UsageError(f"grid scoring needs a 2-D model, got p={model.p}")
    gx, gy = lattice(bbox, resolution)
    pts = np.column_stack([gx, gy])
    d2, out = score_batch(model, pts)
    labels = None if truth is None else np.asarray(truth(pts), dtype=bool)
    return GridScore(gx, gy, d2, out, labels)


@dataclass
class CVResult:
    s_best: float
    f1_best: float
    table: list[dict] = field(default_factory=list)


def best_bandwidth_cv(
    train,
    eval_x,
    eval_inlier,
    s_grid,
    f: float = 0.01,
    positive_class: str = "inlier",
) -> CVResult:
    """Bandwidth on ``s_grid`` maximizing F1 on a labeled set; ties go to the smaller s.

    Grid points whose training fails are recorded in the table and skipped.
    """
    grid = np.unique(np.asarray(s_grid, dtype=float))
    if grid.size == 0:
        raise UsageError("bandwidth grid is empty")
    table: list[dict] = []
    best_s, best_f1 = np.nan, -np.inf
    for s in grid:
        try:
            model = train_svdd(train, s, TrainConfig(f=f))
        except (NonConvergence, NumericalError) as exc:
            logger.warning("training failed at s=%g: %s", s, exc)
            table.append({"s": float(s), "f1": np.nan, "status": type(exc).__name__})
            continue
        score = f1_score(model, eval_x, eval_inlier, positive_class).f1
        table.append({"s": float(s), "f1": score, "status": "ok"})
        if score > best_f1:
            best_s, best_f1 = float(s), score
    if not np.isfinite(best_f1):
        raise NonConvergence("training failed at every grid bandwidth")
    return CVResult(best_s, best_f1, table)


def f1_ratio(f1_trace: float, f1_best: float) -> float:
    """``f1_trace / f1_best``; NaN (missing) when ``f1_best`` is zero."""
    if not f1_best > 0:
        return float("nan")
    return f1_trace / f1_best


def summary_stats(values) -> SummaryStats:
    """Min, quartiles and max; quartiles interpolate linearly between order statistics."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise UsageError("summary_stats needs at least one value")
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return SummaryStats(*map(float, q))
