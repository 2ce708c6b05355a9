"""Landmark selection: seeded k-means++ followed by Lloyd iterations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, NumericalError, UsageError
from .kernel import as_matrix, squared_distances

logger = logging.getLogger(__name__)

DEFAULT_R = 5
DEFAULT_N_INIT = 10
MAX_SEED_RETRIES = 5


@dataclass(frozen=True)
class LandmarkSet:
    points: np.ndarray
    source_seed: int

    @property
    def r(self) -> int:
        return self.points.shape[0]


@dataclass
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    n_iter: int
    # objective after each center update, for monitoring convergence
    inertia_history: list[float] = field(default_factory=list)


def _kmeans_pp_init(x: np.ndarray, r: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = squared_distances(x, x[chosen])[:, 0]
    for _ in range(1, r):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a center
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        else:
            idx = int(rng.choice(n, p=closest / total))
        chosen.append(idx)
        np.minimum(closest, squared_distances(x, x[idx : idx + 1])[:, 0], out=closest)
    return x[chosen].copy()


def _repair_empty(d2: np.ndarray, assign: np.ndarray, r: int) -> np.ndarray:
    assign = assign.copy()
    while True:
        counts = np.bincount(assign, minlength=r)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return assign
        own = d2[np.arange(assign.size), assign]
        # only steal from clusters that keep at least one member
        own = np.where(counts[assign] > 1, own, -1.0)
        donor = int(np.argmax(own))
        assign[donor] = empty[0]


def _means(x: np.ndarray, assign: np.ndarray, r: int) -> np.ndarray:
    counts = np.bincount(assign, minlength=r).astype(float)
    sums = np.zeros((r, x.shape[1]))
    np.add.at(sums, assign, x)
    return sums / counts[:, None]


def kmeans(data, r: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops when the assignment no longer changes or after ``max_iter`` center
    updates. A cluster that empties is given the point lying farthest from
    its current center.
    """
    x = as_matrix(data)
    if r < 1:
        raise UsageError(f"r must be >= 1, got {r}")
    if max_iter < 1:
        raise UsageError(f"max_iter must be >= 1, got {max_iter}")
    n_distinct = np.unique(x, axis=0).shape[0]
    if n_distinct < r:
        raise InsufficientDataError(f"need {r} distinct rows, found {n_distinct}")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, r, rng)
    d2 = squared_distances(x, centers)
    assign = _repair_empty(d2, np.argmin(d2, axis=1), r)

    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centers = _means(x, assign, r)
        d2 = squared_distances(x, centers)
        history.append(float(d2[np.arange(x.shape[0]), assign].sum()))
        new_assign = _repair_empty(d2, np.argmin(d2, axis=1), r)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    else:
        centers = _means(x, assign, r)
    return KMeansResult(centers=centers, assignments=assign, n_iter=n_iter, inertia_history=history)


def _min_center_gap(centers: np.ndarray) -> float:
    if centers.shape[0] < 2:
        return np.inf
    d2 = squared_distances(centers, centers)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def best_of_kmeans(x: np.ndarray, r: int, seed: int, n_init: int = DEFAULT_N_INIT) -> KMeansResult:
    """Lowest-objective result among ``n_init`` seeded k-means runs."""
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        result = kmeans(x, r, seed=int(child.generate_state(1, np.uint64)[0]), max_iter=100)
        if best is None or result.inertia_history[-1] < best.inertia_history[-1]:
            best = result
    return best


def select_landmarks(data, r: int = DEFAULT_R, seed: int = 0, n_init: int = DEFAULT_N_INIT) -> LandmarkSet:
    """Pick ``r`` landmarks as k-means centers of the de-duplicated data.

    The best of ``n_init`` k-means++ starts is kept; a single start lands in
    poor local optima often enough to distort the trace profile.
    """
    x = np.unique(as_matrix(data), axis=0)
    if x.shape[0] < r:
        raise InsufficientDataError(f"need {r} distinct rows, found {x.shape[0]}")
    for attempt in range(MAX_SEED_RETRIES + 1):
        result = best_of_kmeans(x, r, seed + attempt, n_init)
        if _min_center_gap(result.centers) > 1e-12:
            return LandmarkSet(points=result.centers, source_seed=seed + attempt)
        logger.debug("coincident k-means centers with seed %d, retrying", seed + attempt)
    raise NumericalError("k-means kept producing coincident centers", r=r, seed=seed)
