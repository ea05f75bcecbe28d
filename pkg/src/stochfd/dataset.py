"""Density-speed observation sets: loading, bin-inverse weighting, splitting."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataError",
    "as_arrays",
    "DensitySpeedDataset",
    "load_csv",
    "write_csv",
    "compute_weights",
    "write_weights_csv",
    "train_test_split",
    "DEFAULT_BINS",
]

DEFAULT_BINS = 50


class DataError(ValueError):
    """Raised for missing, malformed or empty observation files."""


@dataclass(frozen=True)
class DensitySpeedDataset:
    """Ordered (density, speed) observations in veh/mi and mph.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely between threads and processes.
    """

    density: np.ndarray
    speed: np.ndarray
    weights: np.ndarray | None = None
    source_label: str = ""

    def __post_init__(self):
        rho = np.array(self.density, dtype=float).ravel()
        v = np.array(self.speed, dtype=float).ravel()
        if rho.shape != v.shape:
            raise DataError(
                f"density and speed lengths differ ({rho.size} vs {v.size})")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(v))):
            raise DataError("density and speed must be finite")
        if np.any(rho < 0) or np.any(v < 0):
            raise DataError("density and speed must be non-negative")
        rho.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "density", rho)
        object.__setattr__(self, "speed", v)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float).ravel()
            if w.shape != rho.shape:
                raise DataError("weights must have one entry per pair")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise DataError("weights must be finite and strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.density.size

    @property
    def flow(self) -> np.ndarray:
        """Flow q = density * speed (veh/h)."""
        return self.density * self.speed

    def subset(self, indices) -> "DensitySpeedDataset":
        idx = np.asarray(indices, dtype=int)
        w = None if self.weights is None else self.weights[idx]
        return DensitySpeedDataset(self.density[idx], self.speed[idx], w,
                                   self.source_label)

    def with_weights(self, weights) -> "DensitySpeedDataset":
        return DensitySpeedDataset(self.density, self.speed, weights,
                                   self.source_label)

    def require_nonempty(self):
        if len(self) == 0:
            raise DataError("dataset is empty")


def as_arrays(train):
    """``(density, target)`` arrays from a dataset or a plain pair of arrays.

    The pair form accepts targets of any sign (for example residuals after
    subtracting a deterministic model).
    """
    if isinstance(train, DensitySpeedDataset):
        return train.density, train.speed
    x, y = train
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DataError("inputs and targets differ in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("inputs and targets must be finite")
    return x, y


def load_csv(path, density_column="density", speed_column="speed",
             weight_column=None) -> DensitySpeedDataset:
    """Read a headed UTF-8 CSV of density/speed observations.

    Row order is preserved. Any row whose selected fields are missing,
    unparsable, non-finite or negative aborts the load; the error message
    lists the offending file line numbers (header is line 1).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    rho, v, w, bad = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: missing header row")
        wanted = [density_column, speed_column]
        if weight_column:
            wanted.append(weight_column)
        missing = [c for c in wanted if c not in reader.fieldnames]
        if missing:
            raise DataError(
                f"{path}: missing column(s) {missing}; found {reader.fieldnames}")
        for row in reader:
            line = reader.line_num
            try:
                vals = [float(row[c]) for c in wanted]
            except (TypeError, ValueError):
                bad.append(line)
                continue
            if not all(math.isfinite(x) and x >= 0 for x in vals):
                bad.append(line)
                continue
            rho.append(vals[0])
            v.append(vals[1])
            if weight_column:
                w.append(vals[2])
    if bad:
        shown = ", ".join(str(b) for b in bad[:20])
        more = "" if len(bad) <= 20 else f" (+{len(bad) - 20} more)"
        raise DataError(f"{path}: malformed row(s) at line {shown}{more}")
    if not rho:
        raise DataError(f"{path}: no observations")
    return DensitySpeedDataset(np.array(rho), np.array(v),
                               np.array(w) if weight_column else None,
                               source_label=os.path.basename(path))


def write_csv(data: DensitySpeedDataset, path, density_column="density",
              speed_column="speed"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow([density_column, speed_column])
        for r, s in zip(data.density, data.speed):
            out.writerow([repr(float(r)), repr(float(s))])


def compute_weights(data: DensitySpeedDataset, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin-inverse weights with mean one.

    Densities are split into ``bins`` equal-width bins over
    ``[min(rho), max(rho)]``. Each point gets ``mean occupied-bin count /
    count of its own bin``, so sparsely populated density ranges (typically
    congestion) count as much as the crowded free-flow range.
    """
    if int(bins) != bins or bins < 1:
        raise ValueError("bins must be a positive integer")
    data.require_nonempty()
    idx = _bin_index(data.density, int(bins))
    counts = np.bincount(idx, minlength=int(bins))
    occupied = counts[counts > 0]
    w = occupied.mean() / counts[idx]
    return w / w.mean()


def _bin_index(x, bins):
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros(x.size, dtype=int)
    pos = (x - lo) / (hi - lo) * bins
    return np.clip(np.floor(pos).astype(int), 0, bins - 1)


def write_weights_csv(weights, path, column="weight"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow([column])
        for x in np.asarray(weights, dtype=float):
            out.writerow([repr(float(x))])


def train_test_split(data: DensitySpeedDataset, seed: int,
                     train_fraction: float = 0.8):
    """Random disjoint split; the train part holds ``floor(n * fraction)`` rows.

    Both parts keep the original row order.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in (0, 1]")
    data.require_nonempty()
    n = len(data)
    # tolerance absorbs binary error such as 100 * 0.29 = 28.999...
    n_train = int(math.floor(n * train_fraction + 1e-9))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return data.subset(train_idx), data.subset(test_idx)
