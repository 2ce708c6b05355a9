"""Replicated simulation studies: trace bandwidth, SVDD fit, F1 and F1 ratio.

A study is described by a mapping (usually loaded from YAML or JSON)::

    study: sphere | cube | polygon
    dims: [5, 10]          # ignored for polygons (always 2)
    shapes: [1, 5]         # shapes per data set; vertex counts for polygons
    replicates: 5
    seed: 0
    n_train: 1000          # single-shape training rows / polygon samples
    n_eval: 2000           # single-shape labeled rows
    n_per_shape: 500       # multi-shape training rows per shape
    eval_per_shape: 1000   # multi-shape labeled rows per shape
    f: 0.01
    w: 0.1
    r: 5
    cv_grid: 0             # bandwidths in the cross-validation grid, 0 = off
    resolution: 200        # polygon truth lattice

Each replicate is seeded from ``(seed, dim, shapes, replicate)`` alone, so
results do not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import datagen
from .errors import SvddError, UsageError
from .evaluation import best_bandwidth_cv, bounding_box, f1_ratio, f1_score, lattice, summary_stats
from .svdd import TrainConfig, train_svdd
from .trace import BandwidthSearchConfig, auto_bracket, select_bandwidth_trace

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["replicate", "dim", "shapes", "s_trace", "f1_trace", "s_best", "f1_best", "ratio"]
STUDY_KINDS = ("sphere", "cube", "polygon")


@dataclass
class StudySpec:
    study: str
    dims: list[int] = field(default_factory=lambda: [2])
    shapes: list[int] = field(default_factory=lambda: [1])
    replicates: int = 1
    seed: int = 0
    n_train: int | None = None
    n_eval: int = 2000
    n_per_shape: int = 500
    eval_per_shape: int = 1000
    f: float = 0.01
    w: float = datagen.DEFAULT_SHELL_WIDTH
    r: int = 5
    cv_grid: int | None = None
    resolution: int = 200
    positive_class: str = "inlier"

    @classmethod
    def from_mapping(cls, raw) -> "StudySpec":
        if not raw:
            raise UsageError("study spec is empty")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown study spec keys: {sorted(unknown)}")
        if "study" not in raw:
            raise UsageError("study spec needs a 'study' key")
        spec = cls(**raw)
        try:
            spec.validate()
        except TypeError as exc:
            raise UsageError(f"malformed study spec: {exc}") from None
        return spec

    def validate(self) -> None:
        if self.study not in STUDY_KINDS:
            raise UsageError(f"study must be one of {STUDY_KINDS}, got {self.study!r}")
        if self.study == "polygon":
            self.dims = [2]
            if self.n_train is None:
                self.n_train = 600
            if self.cv_grid is None:
                self.cv_grid = 30
        if self.n_train is None:
            self.n_train = 1000
        if self.cv_grid is None:
            self.cv_grid = 0
        if not self.dims or not self.shapes:
            raise UsageError("dims and shapes must be nonempty")
        if self.replicates < 1:
            raise UsageError("replicates must be >= 1")
        if self.study == "polygon" and min(self.shapes) < 3:
            raise UsageError("polygon vertex counts must be >= 3")
        if self.study != "polygon" and (min(self.dims) < 1 or min(self.shapes) < 1):
            raise UsageError("dims and shape counts must be >= 1")
        if self.n_eval % 2:
            raise UsageError("n_eval must be even")
        if not 0 < self.f <= 1:
            raise UsageError("f must lie in (0, 1]")
        if not 0 < self.w <= 1:
            raise UsageError("w must lie in (0, 1]")

    def cells(self) -> list[tuple[int, int, int]]:
        return [(d, m, k) for d in self.dims for m in self.shapes for k in range(self.replicates)]


def _generate(spec: StudySpec, dim: int, shapes: int, seed: int):
    """Training matrix plus (eval points, eval is-inlier)."""
    if spec.study == "polygon":
        s_poly, s_sample = np.random.SeedSequence(seed).spawn(2)
        poly_seed = int(s_poly.generate_state(1)[0])
        verts = datagen.random_polygon(datagen.PolygonSpec(k=shapes, seed=poly_seed))
        train = datagen.sample_polygon_interior(verts, spec.n_train, s_sample)
        gx, gy = lattice(bounding_box(verts), spec.resolution)
        pts = np.column_stack([gx, gy])
        return train, pts, datagen.point_in_polygon(verts, pts)
    if shapes == 1:
        shape = datagen.ShapeSpec(spec.study, dim, 1.0, None, spec.w)
        s_train, s_eval = np.random.SeedSequence(seed).spawn(2)
        train = datagen.sample_shape_interior(shape, spec.n_train, s_train)
        ev = datagen.make_labeled_eval_set(shape, spec.n_eval, s_eval)
        return train, ev.x, ev.inlier
    ms = datagen.multi_shape(
        spec.study, shapes, dim, seed,
        n_per_shape=spec.n_per_shape, eval_per_shape=spec.eval_per_shape, w=spec.w,
    )
    return ms.train, ms.eval.x, ms.eval.inlier


def run_replicate(spec: StudySpec, dim: int, shapes: int, replicate: int) -> dict:
    """One row of the report. Failures leave the numeric fields empty."""
    row: dict = {"replicate": replicate, "dim": dim, "shapes": shapes}
    seed = datagen.derive_seed(spec.seed, dim, shapes, replicate)
    try:
        train, ex, ey = _generate(spec, dim, shapes, seed)
        s_trace, _ = select_bandwidth_trace(train, BandwidthSearchConfig(r=spec.r, seed=seed))
        model = train_svdd(train, s_trace, TrainConfig(f=spec.f, seed=seed))
        row["s_trace"] = s_trace
        row["f1_trace"] = f1_score(model, ex, ey, spec.positive_class).f1
        if spec.cv_grid:
            lo, hi = auto_bracket(train, seed)
            grid = np.r_[np.geomspace(lo, hi, spec.cv_grid), s_trace]
            cv = best_bandwidth_cv(train, ex, ey, grid, f=spec.f, positive_class=spec.positive_class)
            row["s_best"] = cv.s_best
            row["f1_best"] = cv.f1_best
            row["ratio"] = f1_ratio(row["f1_trace"], cv.f1_best)
    except SvddError as exc:
        logger.warning("cell dim=%d shapes=%d replicate=%d failed: %s", dim, shapes, replicate, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_cell(args) -> dict:
    return run_replicate(*args)


@dataclass
class StudyReport:
    spec: StudySpec
    rows: list[dict]

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.rows if "error" in r]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def summary(self) -> dict:
        cells = []
        for dim in self.spec.dims:
            for shapes in self.spec.shapes:
                sel = [r for r in self.rows if r["dim"] == dim and r["shapes"] == shapes and "error" not in r]
                entry: dict = {"dim": dim, "shapes": shapes, "n_ok": len(sel)}
                for key in ("f1_trace", "ratio", "s_trace"):
                    vals = [r[key] for r in sel if key in r and np.isfinite(r[key])]
                    if vals:
                        entry[key] = summary_stats(vals).as_dict()
                cells.append(entry)
        return {
            "spec": asdict(self.spec),
            "cells": cells,
            "failures": [
                {k: r[k] for k in ("replicate", "dim", "shapes", "error")} for r in self.failures
            ],
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else repr(float(value))
    return str(value)


def run_study(spec: StudySpec, jobs: int = 1) -> StudyReport:
    cells = spec.cells()
    tasks = [(spec, d, m, k) for d, m, k in cells]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = [_run_cell(t) for t in tasks]
    return StudyReport(spec, rows)
