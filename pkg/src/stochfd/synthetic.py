"""Synthetic loop-detector-like density/speed samples for demos and tests.

Densities are mostly free-flow with a thinner congested tail, the imbalance
that bin-inverse weighting is meant to correct.
"""

from __future__ import annotations

import numpy as np

from .dataset import DensitySpeedDataset
from .models import get_spec

__all__ = ["synthetic_dataset"]


def synthetic_dataset(n: int = 2000, seed: int = 0, model: str = "cheng",
                      params=(68.7, 20.02, 2.21), noise_sd: float = 3.0,
                      congested_share: float = 0.2, max_density: float = 120.0):
    """Draw ``n`` observations around a deterministic curve.

    Parameters
    ----------
    model, params
        Generating curve (registry name and parameter tuple).
    noise_sd : float
        Standard deviation (mph) of Gaussian speed noise at free flow. It
        shrinks linearly to a quarter of that at zero speed; speeds are
        clipped at zero afterwards.
    congested_share : float
        Fraction of densities drawn uniformly over ``[30, max_density]``;
        the rest are gamma-distributed around free-flow densities.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    n_cong = int(round(congested_share * n))
    free = rng.gamma(4.0, 3.5, size=n - n_cong)
    cong = rng.uniform(30.0, max_density, size=n_cong)
    rho = np.clip(np.concatenate([free, cong]), 0.5, max_density)
    rho = rho[rng.permutation(n)]
    spec = get_spec(model)
    mean = spec.speed(rho, spec.check(params))
    sd = noise_sd * (0.25 + 0.75 * mean / max(float(mean.max()), 1e-12))
    v = mean + sd * rng.standard_normal(n)
    return DensitySpeedDataset(rho, np.maximum(v, 0.0), source_label=f"synthetic-{model}")
