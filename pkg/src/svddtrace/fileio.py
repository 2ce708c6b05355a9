"""CSV ingestion/emission and versioned JSON model files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .svdd import Standardizer, SvddModel

FORMAT_VERSION = 1
LABEL_COLUMN = "label"
LABEL_VALUES = ("inlier", "outlier")


@dataclass
class CsvTable:
    x: np.ndarray
    header: list[str] | None
    rows: list[list[str]]  # raw cells, header excluded
    inlier: np.ndarray | None = None  # from a ``label`` column, if present

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv(path) -> CsvTable:
    """Numeric matrix from a comma-separated file.

    A first row with any non-numeric cell is taken as a header. A column named
    ``label`` holding ``inlier``/``outlier`` is split off as truth labels.

    Raises:
        DataError: ragged or non-numeric rows (with the 1-based line number).
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            raw = [row for row in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    numbered = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(raw) if any(c.strip() for c in row)]
    if not numbered:
        raise DataError(f"{path}: no data rows")

    header = None
    if not all(_is_number(c) for c in numbered[0][1]):
        header = numbered[0][1]
        numbered = numbered[1:]
    label_idx = None
    if header is not None and LABEL_COLUMN in header:
        label_idx = header.index(LABEL_COLUMN)
    width = len(header) if header is not None else len(numbered[0][1]) if numbered else 0

    values: list[list[float]] = []
    labels: list[bool] = []
    rows: list[list[str]] = []
    for line, row in numbered:
        if len(row) != width:
            raise DataError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        feats = []
        for j, cell in enumerate(row):
            if j == label_idx:
                if cell not in LABEL_VALUES:
                    raise DataError(f"{path}:{line}: label must be inlier or outlier, got {cell!r}")
                labels.append(cell == "inlier")
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{line}: non-finite value {cell!r}")
            feats.append(v)
        values.append(feats)
        rows.append(row)
    if not values:
        raise DataError(f"{path}: header but no data rows")
    x = np.array(values, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")
    return CsvTable(x=x, header=header, rows=rows, inlier=np.array(labels) if label_idx is not None else None)


def fmt_float(v: float) -> str:
    return repr(float(v))


def feature_header(p: int) -> list[str]:
    return [f"x{j + 1}" for j in range(p)]


def write_matrix_csv(path, x, inlier=None) -> None:
    """Write features as ``x1..xp`` plus an optional ``label`` column."""
    x = np.asarray(x, dtype=float)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = feature_header(x.shape[1])
        if inlier is not None:
            header.append(LABEL_COLUMN)
        w.writerow(header)
        for i, row in enumerate(x):
            cells = [fmt_float(v) for v in row]
            if inlier is not None:
                cells.append("inlier" if inlier[i] else "outlier")
            w.writerow(cells)


def model_to_dict(model: SvddModel) -> dict:
    meta = dict(model.metadata)
    meta.setdefault("created", None)
    doc = {
        "format_version": FORMAT_VERSION,
        "p": model.p,
        "s": float(model.s),
        "f": float(model.f),
        "C": float(model.C),
        "alpha": [float(a) for a in model.alpha],
        "support_vectors": [[float(v) for v in row] for row in model.support_vectors],
        "r_squared": float(model.r_squared),
        "offset_w": float(model.offset_w),
        "kkt_tol": float(model.kkt_tol),
        "metadata": {k: _jsonable(v) for k, v in meta.items()},
        "standardize": None,
    }
    if model.standardizer is not None:
        doc["standardize"] = {
            "mean": [float(v) for v in model.standardizer.mean],
            "scale": [float(v) for v in model.standardizer.scale],
        }
    return doc


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def model_from_dict(doc: dict) -> SvddModel:
    if not isinstance(doc, dict):
        raise DataError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        p = int(doc["p"])
        sv = np.array(doc["support_vectors"], dtype=float).reshape(-1, p)
        alpha = np.array(doc["alpha"], dtype=float)
        std = doc.get("standardize")
        model = SvddModel(
            s=float(doc["s"]),
            C=float(doc["C"]),
            f=float(doc["f"]),
            support_vectors=sv,
            alpha=alpha,
            offset_w=float(doc["offset_w"]),
            r_squared=float(doc["r_squared"]),
            kkt_tol=float(doc.get("kkt_tol", 1e-6)),
            metadata=dict(doc.get("metadata") or {}),
            standardizer=None if std is None else Standardizer(np.array(std["mean"], float), np.array(std["scale"], float)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc
    if alpha.shape[0] != sv.shape[0]:
        raise DataError("alpha and support_vectors lengths differ")
    return model


def save_model(model: SvddModel, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> SvddModel:
    try:
        with open(Path(path)) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(doc)
