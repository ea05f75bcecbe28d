"""Exact Gaussian-process regression of speed on density.

The optional mean function is a calibrated deterministic model; the GP then
models the deviations of observed speeds from that curve.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ._optim import maximize_multistart
from .dataset import DataError, DensitySpeedDataset, as_arrays
from .kernels import CholeskyFactor, KernelParams, cholesky, gram
from .models import FDModel

__all__ = [
    "GPConfig",
    "GPPosterior",
    "ExactGP",
    "fit_exact",
    "gp_fit_predict",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    "hyperparameter_vector",
    "config_from_vector",
    "HYPER_BOUNDS",
    "BAND_Z",
    "EXACT_GP_SOFT_LIMIT",
]

log = logging.getLogger(__name__)

# (lower, upper) in mph / veh/mi
HYPER_BOUNDS = {
    "signal_sigma": (1e-3, 1e3),
    "noise_sigma": (1e-3, 1e2),
    "length_scale": (1e-2, 1e3),
}

# z multipliers for the exported 90/95/99 % bands
BAND_Z = {90: 1.645, 95: 1.960, 99: 2.576}

EXACT_GP_SOFT_LIMIT = 3000

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GPConfig:
    kernel: KernelParams
    noise_variance: float
    mean_function: FDModel | None = None

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")

    @property
    def noise_sigma(self):
        return math.sqrt(self.noise_variance)

    def prior_mean(self, x):
        x = np.asarray(x, dtype=float)
        if self.mean_function is None:
            return np.zeros_like(x)
        return np.asarray(self.mean_function.speed(x), dtype=float)

    def with_mean(self, mean_function):
        return replace(self, mean_function=mean_function)


@dataclass(frozen=True)
class GPPosterior:
    """Marginal predictive distribution at a list of query densities.

    ``variance`` is the latent-function variance; ``predictive_variance``
    adds observation noise and is what observed speeds should be compared
    against.
    """

    query_densities: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    predictive_variance: np.ndarray

    def __len__(self):
        return self.query_densities.size

    def band(self, z):
        half = z * np.sqrt(self.predictive_variance)
        return self.mean - half, self.mean + half

    def interval(self, level):
        from scipy.stats import norm
        return self.band(norm.ppf(0.5 + level / 2.0))

    def rows(self):
        bands = {p: self.band(z) for p, z in BAND_Z.items()}
        for i in range(len(self)):
            row = [self.query_densities[i], self.mean[i], self.variance[i],
                   self.predictive_variance[i]]
            for p in BAND_Z:
                row += [bands[p][0][i], bands[p][1][i]]
            yield row

    header = ("query_density", "mean", "variance", "predictive_variance",
              "ci90_lo", "ci90_hi", "ci95_lo", "ci95_hi", "ci99_lo", "ci99_hi")

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            out = csv.writer(fh)
            out.writerow(self.header)
            for row in self.rows():
                out.writerow([repr(float(x)) for x in row])
        finally:
            if own:
                fh.close()


def _make_posterior(x, mean, var, noise_variance):
    var = np.maximum(var, 0.0)
    return GPPosterior(np.asarray(x, dtype=float), mean, var, var + noise_variance)


class ExactGP:
    """Fitted exact GP: caches the Cholesky factor of ``K_nn + s^2 I``."""

    def __init__(self, config: GPConfig, train: DensitySpeedDataset):
        x, y = as_arrays(train)
        if x.size == 0:
            raise DataError("cannot fit a GP to an empty dataset")
        if x.size > EXACT_GP_SOFT_LIMIT:
            log.warning("exact GP on %d points is O(n^3); consider the sparse fit",
                        x.size)
        self.config = config
        self.x = x
        self.residual = y - config.prior_mean(x)
        K = gram(config.kernel, self.x)
        K[np.diag_indices_from(K)] += config.noise_variance
        self.factor: CholeskyFactor = cholesky(K)
        self.alpha = self.factor.solve(self.residual)

    def predict(self, queries) -> GPPosterior:
        xq = np.atleast_1d(np.asarray(queries, dtype=float))
        Kqn = gram(self.config.kernel, xq, self.x)
        mean = self.config.prior_mean(xq) + Kqn @ self.alpha
        V = self.factor.solve_lower(Kqn.T)
        var = self.config.kernel.diag(xq) - np.sum(V * V, axis=0)
        return _make_posterior(xq, mean, var, self.config.noise_variance)

    def log_marginal_likelihood(self):
        r = self.residual
        n = r.size
        return float(-0.5 * r @ self.alpha - 0.5 * self.factor.logdet()
                     - 0.5 * n * _LOG2PI)


def fit_exact(config: GPConfig, train: DensitySpeedDataset) -> ExactGP:
    return ExactGP(config, train)


def gp_fit_predict(config: GPConfig, train: DensitySpeedDataset, queries) -> GPPosterior:
    """Exact posterior ``m(x*) + K*n (Knn + s^2 I)^{-1} (y - m(x))`` and its variance."""
    return ExactGP(config, train).predict(queries)


def log_marginal_likelihood(config: GPConfig, train: DensitySpeedDataset) -> float:
    """``log N(y | m(x), Knn + s^2 I)`` with the log-determinant from the factor."""
    return ExactGP(config, train).log_marginal_likelihood()


# --- hyperparameters ---------------------------------------------------------

def hyperparameter_vector(config: GPConfig) -> np.ndarray:
    """Log-space vector ``(log sigma, log noise_sigma[, log lambda])``."""
    v = [math.log(config.kernel.signal_sigma), math.log(config.noise_sigma)]
    if config.kernel.has_length_scale:
        v.append(math.log(config.kernel.length_scale))
    return np.array(v)


def config_from_vector(config: GPConfig, theta) -> GPConfig:
    theta = np.asarray(theta, dtype=float)
    kern = config.kernel.with_(signal_sigma=float(np.exp(theta[0])))
    if config.kernel.has_length_scale:
        kern = kern.with_(length_scale=float(np.exp(theta[2])))
    return replace(config, kernel=kern, noise_variance=float(np.exp(2 * theta[1])))


def log_bounds(config: GPConfig) -> np.ndarray:
    keys = ["signal_sigma", "noise_sigma"]
    if config.kernel.has_length_scale:
        keys.append("length_scale")
    return np.log(np.array([HYPER_BOUNDS[k] for k in keys]))


def start_box(config: GPConfig, train: DensitySpeedDataset) -> np.ndarray:
    """Data-scaled sub-box of the bounds used to draw random restarts."""
    x, y = as_arrays(train)
    r = y - config.prior_mean(x)
    scale = max(float(np.sqrt(np.mean(r * r))), 1e-2)
    spread = max(float(np.ptp(x)), 1.0)
    box = [(scale / 20, scale * 2), (scale / 50, scale)]
    if config.kernel.has_length_scale:
        box.append((spread / 200, spread))
    box = np.log(np.array(box))
    b = log_bounds(config)
    return np.column_stack([np.clip(box[:, 0], b[:, 0], b[:, 1]),
                            np.clip(box[:, 1], b[:, 0], b[:, 1])])


def tune(objective, config, train, budget, starts, seed):
    """Shared driver for exact and sparse hyperparameter searches."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    theta0 = hyperparameter_vector(config)
    b = log_bounds(config)
    if budget == 1:
        return config
    best, fbest = maximize_multistart(
        lambda th: objective(config_from_vector(config, th)),
        np.clip(theta0, b[:, 0], b[:, 1]), b, budget, starts=starts, seed=seed,
        start_box=start_box(config, train))
    try:
        f0 = objective(config)
    except np.linalg.LinAlgError:
        f0 = -np.inf
    if not fbest > f0:
        return config
    return config_from_vector(config, best)


def optimize_hyperparameters(config: GPConfig, train: DensitySpeedDataset,
                             budget: int = 300, starts: int = 5,
                             seed: int = 0) -> GPConfig:
    """Maximize the exact log marginal likelihood over log hyperparameters.

    Returns the input config unchanged when no evaluation beats it, so the
    output likelihood is never below the input one.
    """
    return tune(lambda c: log_marginal_likelihood(c, train), config, train,
                budget, starts, seed)
