"""Wall time of the exact and the sparse fit as the dataset grows.

The exact fit factors an n x n matrix; the sparse fit with m inducing
points costs O(m^2 n), so its time roughly doubles with n.

    python3 demos/complexity_scaling.py
"""

import logging
import time

import numpy as np

from stochfd import GPConfig, InducingSet, KernelParams, fit_exact, sgpr_fit, synthetic_dataset

logging.disable(logging.WARNING)
cfg = GPConfig(KernelParams("exponential", 6.0, 12.0), 4.0)
z = InducingSet(np.linspace(1.0, 119.0, 64))


def median_seconds(fn, reps=3):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


print(f"{'n':>7}{'exact s':>10}{'sparse s':>10}")
for n in (500, 1000, 2000, 4000):
    d = synthetic_dataset(n, seed=1)
    print(f"{n:>7}{median_seconds(lambda: fit_exact(cfg, d)):10.3f}"
          f"{median_seconds(lambda: sgpr_fit(cfg, d, z)):10.4f}")
for n in (16_000, 64_000, 256_000):
    d = synthetic_dataset(n, seed=1)
    print(f"{n:>7}{'-':>10}{median_seconds(lambda: sgpr_fit(cfg, d, z)):10.4f}")
