"""Inducing-point selection: reservoir, systematic, cluster and weighted sampling.

Every sampler returns an :class:`~stochfd.sgpr.InducingSet` whose
``indices`` are distinct row numbers of the dataset, so inducing densities
are always real observations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import DensitySpeedDataset, compute_weights
from .sgpr import InducingSet

__all__ = [
    "SAMPLERS",
    "SamplerSpec",
    "reservoir_sample",
    "systematic_indices",
    "systematic_sample",
    "cluster_sample",
    "weighted_random_sample",
    "draw",
    "write_indices_csv",
    "read_indices_csv",
]


def _check_size(size, n):
    if int(size) != size or not 1 <= size <= n:
        raise ValueError(f"sample size must be an integer in [1, {n}], got {size}")
    return int(size)


def reservoir_sample(data: DensitySpeedDataset, size: int, seed: int) -> InducingSet:
    """Simple random sampling without replacement, one pass (Vitter's algorithm R).

    The first ``size`` rows fill the reservoir; row ``i`` (1-based) then
    replaces slot ``j ~ U{1..i}`` whenever ``j <= size``.
    """
    n = len(data)
    k = _check_size(size, n)
    rng = np.random.default_rng(seed)
    reservoir = list(range(k))
    for i in range(k + 1, n + 1):
        j = int(rng.integers(1, i, endpoint=True))
        if j <= k:
            reservoir[j - 1] = i - 1
    return InducingSet.from_dataset(data, reservoir, f"reservoir(seed={seed})")


def systematic_indices(N: int, n: int, start: int) -> list:
    """1-based indices ``ceil(start + k (i - 1))`` with stride ``k = N / n``.

    Exact rational arithmetic keeps the ceiling honest for fractional strides.
    """
    k = Fraction(N, n)
    return [math.ceil(start + k * (i - 1)) for i in range(1, n + 1)]


def systematic_sample(data: DensitySpeedDataset, size: int, seed: int) -> InducingSet:
    """Every ``N/size``-th row of the file order from a random start.

    The start is a random integer in ``[1, floor(N/size)]``, which keeps the
    last index within ``N`` for fractional strides as well.
    """
    N = len(data)
    n = _check_size(size, N)
    top = N // n
    start = int(np.random.default_rng(seed).integers(1, top, endpoint=True))
    idx = [i - 1 for i in systematic_indices(N, n, start)]
    return InducingSet.from_dataset(data, idx, f"systematic(seed={seed},start={start})")


def _standardize(data):
    pts = np.column_stack([data.density, data.speed])
    sd = pts.std(axis=0)
    sd[sd == 0] = 1.0
    return (pts - pts.mean(axis=0)) / sd


def kmeans(points, k, seed, max_iters=100):
    """Lloyd iterations from ``k`` distinct random observations.

    Returns ``(labels, centroids, iterations)``. Ties go to the lowest
    cluster index. An emptied cluster is re-seeded at the point farthest
    from its current centroid (taken from a cluster with more than one
    member).
    """
    rng = np.random.default_rng(seed)
    n = points.shape[0]
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    labels = None
    it = 0
    for it in range(1, max_iters + 1):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        new = _fill_empty(points, new, centroids, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centroids[c] = points[labels == c].mean(axis=0)
    return labels, centroids, it


def _fill_empty(points, labels, centroids, k):
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        dist = ((points - centroids[labels]) ** 2).sum(axis=1)
        dist[~movable] = -1.0
        far = int(np.argmax(dist))
        labels[far] = c
        centroids[c] = points[far]
    return labels


def cluster_sample(data: DensitySpeedDataset, size: int, seed: int,
                   max_iters: int = 100) -> InducingSet:
    """k-means on standardized (density, speed) pairs; one medoid-like pick per cluster.

    From each final cluster the member closest to its centroid is returned.
    """
    n = len(data)
    k = _check_size(size, n)
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if k == n:
        return InducingSet.from_dataset(data, np.arange(n), f"cluster(seed={seed})")
    pts = _standardize(data)
    labels, centroids, _ = kmeans(pts, k, seed, max_iters)
    picks = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        d2 = ((pts[members] - centroids[c]) ** 2).sum(axis=1)
        picks.append(int(members[np.argmin(d2)]))
    return InducingSet.from_dataset(data, picks, f"cluster(seed={seed})")


def weighted_random_sample(data: DensitySpeedDataset, size: int, seed: int,
                           weights=None) -> InducingSet:
    """Weighted sampling without replacement over density-sorted rows.

    Each draw picks a remaining row with probability ``w_i / sum(remaining w)``.
    Implemented with exponential keys (``-log(u) / w``, smallest ``size``
    win), which has exactly that sequential distribution. Weights default
    to the bin-inverse weights of :func:`~stochfd.dataset.compute_weights`.
    """
    n = len(data)
    k = _check_size(size, n)
    w = compute_weights(data) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or not np.all(w > 0):
        raise ValueError("weights must be positive with one entry per row")
    order = np.argsort(data.density, kind="stable")
    u = np.random.default_rng(seed).random(n)
    keys = -np.log1p(-u) / w[order]
    chosen = order[np.argsort(keys, kind="stable")[:k]]
    return InducingSet.from_dataset(data, chosen, f"weighted(seed={seed})")


SAMPLERS = {
    "rs": reservoir_sample,
    "ss": systematic_sample,
    "cs": cluster_sample,
    "wrs": weighted_random_sample,
}
_LONG = {"simple-random": "rs", "reservoir": "rs", "systematic": "ss",
         "cluster": "cs", "weighted-random": "wrs", "weighted": "wrs"}


@dataclass(frozen=True)
class SamplerSpec:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = _LONG.get(self.kind, self.kind)
        if kind not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.kind!r}; choose from {sorted(SAMPLERS)}")
        object.__setattr__(self, "kind", kind)


def draw(spec: SamplerSpec, data: DensitySpeedDataset, size: int) -> InducingSet:
    return SAMPLERS[spec.kind](data, size, spec.seed, **spec.params)


def write_indices_csv(inducing: InducingSet, path_or_file):
    own = not hasattr(path_or_file, "write")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        out = csv.writer(fh)
        out.writerow(["index", "density"])
        for i, x in zip(inducing.indices, inducing.inputs):
            out.writerow([int(i), repr(float(x))])
    finally:
        if own:
            fh.close()


def read_indices_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [int(row["index"]) for row in csv.DictReader(fh)]
