"""Sparse GP with and without a calibrated mean function.

With few inducing points a zero-mean GP reverts to zero away from them, so a
calibrated curve as the prior mean matters most when ``m`` is small.

    python3 demos/prior_vs_pure_gp.py
"""

from stochfd import ExperimentConfig, SamplerSpec, run_sweep, synthetic_dataset

data = synthetic_dataset(1500, seed=3)
configs = [ExperimentConfig(prior, SamplerSpec("rs", 0), m, budget=80, holdout=0.8)
           for m in (4, 16, 64) for prior in ("none", "cheng", "greenshields")]

print(f"{'m':>4}  {'prior':<13}{'RMSE':>8}{'MAPE %':>8}{'PWCI %':>8}")
for res in run_sweep(configs, data):
    c = res.config
    if res.error:
        print(f"{c.inducing_size:>4}  {c.prior:<13}failed: {res.error}")
        continue
    print(f"{c.inducing_size:>4}  {c.prior:<13}{res.rmse:8.3f}{100 * res.mape:8.2f}"
          f"{100 * res.pwci:8.2f}")
