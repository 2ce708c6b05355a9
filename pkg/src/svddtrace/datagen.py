"""Seeded geometry generators for the simulation studies.

Every generator takes a ``seed`` accepted by :func:`numpy.random.default_rng`
(an int, a :class:`~numpy.random.SeedSequence` or a ``Generator``) and is
deterministic in it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, UsageError

R_MIN = 3.0
R_MAX = 5.0
DEFAULT_SHELL_WIDTH = 0.1
PLACEMENT_MARGIN = 0.5


class ShapeKind(str, enum.Enum):
    SPHERE = "sphere"
    CUBE = "cube"


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for ``(seed, *keys)``, e.g. one per replicate."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PolygonSpec:
    k: int
    r_min: float = R_MIN
    r_max: float = R_MAX
    seed: int = 0

    def __post_init__(self):
        if self.k < 3:
            raise UsageError(f"a polygon needs k >= 3 vertices, got {self.k}")
        if not 0 < self.r_min <= self.r_max:
            raise UsageError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")


@dataclass(frozen=True)
class ShapeSpec:
    kind: ShapeKind
    p: int
    scale: float = 1.0
    center: np.ndarray | None = None
    w: float = DEFAULT_SHELL_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if self.p < 1:
            raise UsageError(f"dimension must be >= 1, got {self.p}")
        if not self.scale > 0:
            raise UsageError(f"scale must be positive, got {self.scale}")
        if not 0 < self.w <= 1:
            raise UsageError(f"shell width must lie in (0, 1], got {self.w}")
        c = np.zeros(self.p) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.p,):
            raise UsageError(f"center must have {self.p} coordinates")
        object.__setattr__(self, "center", c)

    def radius_of(self, x: np.ndarray) -> np.ndarray:
        """Euclidean norm for spheres, sup norm for cubes, relative to the center."""
        d = np.atleast_2d(x) - self.center
        if self.kind is ShapeKind.SPHERE:
            return np.linalg.norm(d, axis=1)
        return np.abs(d).max(axis=1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.radius_of(x) <= self.scale


@dataclass
class LabeledSet:
    x: np.ndarray
    inlier: np.ndarray  # bool per row

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def labels(self) -> list[str]:
        return ["inlier" if v else "outlier" for v in self.inlier]

    @classmethod
    def concat(cls, parts: list["LabeledSet"]) -> "LabeledSet":
        return cls(np.concatenate([q.x for q in parts]), np.concatenate([q.inlier for q in parts]))


# --- polygons ---------------------------------------------------------------


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(vertices: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect."""
    k = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % k]) for i in range(k)]
    for i in range(k):
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def random_polygon(spec: PolygonSpec, max_tries: int = 1000) -> np.ndarray:
    """Vertices ``r_i (cos t_i, sin t_i)`` in anticlockwise order.

    ``t_1 = 0`` and the remaining angles are sorted uniforms on (0, 2 pi);
    radii are uniform on ``[r_min, r_max]``. Self-intersecting draws are
    discarded and redrawn from the same stream.
    """
    rng = np.random.default_rng(spec.seed)
    for _ in range(max_tries):
        theta = np.r_[0.0, np.sort(rng.uniform(0.0, 2 * np.pi, spec.k - 1))]
        radii = rng.uniform(spec.r_min, spec.r_max, spec.k)
        if np.any(np.diff(theta) <= 0):
            continue
        verts = np.column_stack([radii * np.cos(theta), radii * np.sin(theta)])
        if signed_area(verts) > 0 and is_simple(verts):
            return verts
    raise DegenerateGeometryError(f"no simple polygon after {max_tries} draws")


def point_in_polygon(vertices, points) -> np.ndarray | bool:
    """Even-odd ray-crossing test; points on an edge count as inside.

    Accepts a single point or an ``(n, 2)`` array.
    """
    v = np.asarray(vertices, dtype=float)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    px, py = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
    x2, y2 = np.roll(v[:, 0], -1)[None, :], np.roll(v[:, 1], -1)[None, :]

    straddles = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    crossings = np.sum(straddles & (px < x_cross), axis=1)
    inside = crossings % 2 == 1

    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    scale = np.hypot(x2 - x1, y2 - y1)
    on_line = np.abs(cross) <= 1e-12 * np.maximum(scale, 1.0)
    within = (
        (px >= np.minimum(x1, x2) - 1e-12) & (px <= np.maximum(x1, x2) + 1e-12)
        & (py >= np.minimum(y1, y2) - 1e-12) & (py <= np.maximum(y1, y2) + 1e-12)
    )
    inside |= np.any(on_line & within, axis=1)
    return bool(inside[0]) if single else inside


def sample_polygon_interior(vertices, n: int, seed=0, batch: int = 4096) -> np.ndarray:
    """Uniform points inside the polygon by rejection from its bounding box."""
    v = np.asarray(vertices, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = v.min(axis=0), v.max(axis=0)
    kept: list[np.ndarray] = []
    n_kept = n_drawn = 0
    while n_kept < n:
        cand = rng.uniform(lo, hi, size=(batch, 2))
        ok = cand[point_in_polygon(v, cand)]
        kept.append(ok)
        n_kept += len(ok)
        n_drawn += batch
        if n_drawn >= 100_000 and n_kept / n_drawn < 1e-3:
            raise DegenerateGeometryError(f"acceptance rate {n_kept / n_drawn:.2e} is too low")
    return np.concatenate(kept)[:n]


# --- hyperspheres and hypercubes --------------------------------------------


def _directions(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    v = rng.standard_normal((n, p))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        v[bad] = rng.standard_normal((int(bad.sum()), p))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def sample_shape_interior(spec: ShapeSpec, n: int, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if spec.kind is ShapeKind.SPHERE:
        radius = spec.scale * rng.random(n) ** (1.0 / spec.p)
        return spec.center + _directions(rng, n, spec.p) * radius[:, None]
    return spec.center + rng.uniform(-spec.scale, spec.scale, size=(n, spec.p))


def shell_radius_inverse_cdf(u, scale: float, w: float, p: int) -> np.ndarray:
    """Radius with density proportional to ``r^(p-1)`` on ``[scale, scale (1 + w)]``."""
    lo, hi = scale**p, (scale * (1.0 + w)) ** p
    return (lo + np.asarray(u) * (hi - lo)) ** (1.0 / p)


def sample_shape_shell(spec: ShapeSpec, n: int, seed=0) -> np.ndarray:
    """Uniform points in the thin region just outside the shape."""
    rng = np.random.default_rng(seed)
    outer = spec.scale * (1.0 + spec.w)
    if spec.kind is ShapeKind.SPHERE:
        u = 1.0 - rng.random(n)  # (0, 1]; keeps radii strictly above scale
        radius = shell_radius_inverse_cdf(u, spec.scale, spec.w, spec.p)
        return spec.center + _directions(rng, n, spec.p) * radius[:, None]
    kept: list[np.ndarray] = []
    n_kept = 0
    batch = max(256, 2 * n)
    while n_kept < n:
        cand = rng.uniform(-outer, outer, size=(batch, spec.p))
        ok = cand[np.abs(cand).max(axis=1) > spec.scale]
        kept.append(ok)
        n_kept += len(ok)
    return spec.center + np.concatenate(kept)[:n]


def make_labeled_eval_set(spec: ShapeSpec, n_total: int, seed=0) -> LabeledSet:
    """Half interior points (inliers) and half shell points (outliers), shuffled."""
    if n_total % 2:
        raise UsageError(f"n_total must be even, got {n_total}")
    half = n_total // 2
    s_in, s_out, s_perm = _seed_sequence(seed).spawn(3)
    x = np.concatenate([sample_shape_interior(spec, half, s_in), sample_shape_shell(spec, half, s_out)])
    inlier = np.r_[np.ones(half, dtype=bool), np.zeros(half, dtype=bool)]
    perm = np.random.default_rng(s_perm).permutation(n_total)
    return LabeledSet(x[perm], inlier[perm])


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


@dataclass
class MultiShape:
    train: np.ndarray
    eval: LabeledSet
    specs: list[ShapeSpec] = field(default_factory=list)


def _separation(kind: ShapeKind, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    if kind is ShapeKind.SPHERE:
        return np.linalg.norm(d, axis=-1)
    return np.abs(d).max(axis=-1)


def multi_shape(
    kind,
    m: int,
    p: int,
    seed=0,
    n_per_shape: int = 200,
    eval_per_shape: int = 400,
    w: float = DEFAULT_SHELL_WIDTH,
    scale: float = 1.0,
    max_rejections: int = 10_000,
) -> MultiShape:
    """``m`` disjoint unit shapes with their labeled evaluation sets.

    Centers are placed one at a time, uniformly in a box of side
    ``10 m^(1/p)``, rejecting any that would bring two outer shells closer
    than ``PLACEMENT_MARGIN``.
    """
    kind = ShapeKind(kind)
    if m < 1:
        raise UsageError(f"need at least one shape, got {m}")
    if p < 2:
        raise UsageError(f"multi-shape data needs p >= 2, got {p}")
    s_place, s_data = _seed_sequence(seed).spawn(2)
    rng = np.random.default_rng(s_place)
    side = 10.0 * m ** (1.0 / p)
    min_sep = 2.0 * scale * (1.0 + w) + PLACEMENT_MARGIN
    centers: list[np.ndarray] = []
    rejections = 0
    while len(centers) < m:
        c = rng.uniform(0.0, side, size=p)
        if not centers or _separation(kind, np.array(centers), c).min() >= min_sep:
            centers.append(c)
            continue
        rejections += 1
        if rejections >= max_rejections:
            raise DegenerateGeometryError(f"placed only {len(centers)} of {m} shapes")

    specs = [ShapeSpec(kind, p, scale, c, w) for c in centers]
    streams = s_data.spawn(2 * m)
    train = np.concatenate([sample_shape_interior(sp, n_per_shape, streams[2 * i]) for i, sp in enumerate(specs)])
    evals = LabeledSet.concat(
        [make_labeled_eval_set(sp, 2 * (eval_per_shape // 2), streams[2 * i + 1]) for i, sp in enumerate(specs)]
    )
    return MultiShape(train=train, eval=evals, specs=specs)


# --- two donuts and a circle ------------------------------------------------

DONUT_CENTERS = ((-4.0, 0.0), (4.0, 0.0))
DONUT_RADII = (1.5, 2.5)
DISC_CENTER = (0.0, 4.0)
DISC_RADIUS = 1.0
REGION_COUNT = 1000


def _annulus(rng, n, center, r_in, r_out) -> np.ndarray:
    u = rng.random(n)
    radius = np.sqrt(r_in**2 + u * (r_out**2 - r_in**2))
    angle = rng.uniform(0.0, 2 * np.pi, n)
    return np.asarray(center) + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def two_donuts_circle(seed=0) -> tuple[np.ndarray, tuple[float, float, float, float]]:
    """Two annuli and one disc, 1000 uniform points each.

    Returns the training matrix and its bounding box ``(xmin, ymin, xmax, ymax)``.
    """
    rng = np.random.default_rng(seed)
    parts = [_annulus(rng, REGION_COUNT, c, *DONUT_RADII) for c in DONUT_CENTERS]
    parts.append(_annulus(rng, REGION_COUNT, DISC_CENTER, 0.0, DISC_RADIUS))
    x = np.concatenate(parts)
    lo, hi = x.min(axis=0), x.max(axis=0)
    return x, (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
