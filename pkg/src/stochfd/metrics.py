"""Accuracy and coverage metrics: RMSE, MAPE and interval coverage (PWCI)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dataset import DataError, DensitySpeedDataset
from .gpr import GPPosterior

__all__ = ["MetricReport", "rmse", "mape", "mape_with_count", "pwci", "evaluate", "z_value"]


def _pair(observed, estimated):
    o = np.asarray(observed, dtype=float).ravel()
    e = np.asarray(estimated, dtype=float).ravel()
    if o.shape != e.shape:
        raise ValueError(f"length mismatch: {o.size} observed vs {e.size} estimated")
    if o.size == 0:
        raise ValueError("need at least one pair")
    return o, e


def rmse(observed, estimated) -> float:
    """Root mean squared error in the units of the inputs."""
    o, e = _pair(observed, estimated)
    return float(np.sqrt(np.mean((o - e) ** 2)))


def mape_with_count(observed, estimated):
    """MAPE in percent over rows with nonzero observed value, and the excluded count."""
    o, e = _pair(observed, estimated)
    keep = o != 0
    if not keep.any():
        raise ValueError("every observed value is zero; MAPE is undefined")
    value = float(np.mean(np.abs((o[keep] - e[keep]) / o[keep]))) * 100.0
    return value, int(o.size - keep.sum())


def mape(observed, estimated) -> float:
    """Mean absolute percentage error, in percent; zero observations are skipped."""
    return mape_with_count(observed, estimated)[0]


def z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return float(norm.ppf(0.5 + level / 2.0))


def pwci(posterior: GPPosterior, observed, level: float = 0.95) -> float:
    """Fraction of observations inside the central ``level`` predictive interval.

    A point counts when ``|v_i - mean_i| <= z sqrt(predictive_variance_i)``.
    ``posterior`` must be evaluated at the observed densities, in order.
    """
    z = z_value(level)
    if isinstance(observed, DensitySpeedDataset):
        if observed.density.shape != posterior.query_densities.shape or not np.allclose(
                observed.density, posterior.query_densities, rtol=0, atol=1e-12):
            raise DataError("posterior was not evaluated at the observed densities")
        v = observed.speed
    else:
        v = np.asarray(observed, dtype=float).ravel()
        if v.shape != posterior.mean.shape:
            raise ValueError("observed speeds and posterior differ in length")
    inside = np.abs(v - posterior.mean) <= z * np.sqrt(posterior.predictive_variance)
    return float(np.mean(inside))


@dataclass(frozen=True)
class MetricReport:
    """Metrics of one fitted model; ``mape`` and ``pwci`` are fractions."""

    rmse: float
    mape: float
    pwci: float
    n_points: int
    mape_excluded: int = 0

    @property
    def mape_percent(self):
        return 100.0 * self.mape

    @property
    def pwci_percent(self):
        return 100.0 * self.pwci


def evaluate(posterior: GPPosterior, data: DensitySpeedDataset, level: float = 0.95) -> MetricReport:
    """RMSE and MAPE of the posterior mean plus coverage, all against ``data``."""
    pct, excluded = mape_with_count(data.speed, posterior.mean)
    return MetricReport(rmse(data.speed, posterior.mean), pct / 100.0,
                        pwci(posterior, data, level), len(data), excluded)
