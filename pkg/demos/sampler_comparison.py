"""Inducing-point samplers side by side across inducing-set sizes.

Equivalent to ``stochfd sweep --prior none --sampler rs,ss,cs,wrs --m 8,32,128``
on a CSV of the same data.

    python3 demos/sampler_comparison.py
"""

from stochfd import ExperimentConfig, SamplerSpec, run_sweep, synthetic_dataset

data = synthetic_dataset(2000, seed=5)
configs = [ExperimentConfig("none", SamplerSpec(kind, 0), m, budget=80)
           for kind in ("rs", "ss", "cs", "wrs") for m in (8, 32, 128)]

print(f"{'sampler':<8}{'m':>5}{'RMSE':>8}{'PWCI %':>8}{'bound':>12}{'ms':>8}")
for res in run_sweep(configs, data):
    c = res.config
    print(f"{c.sampler.kind:<8}{c.inducing_size:>5}{res.rmse:8.3f}{100 * res.pwci:8.2f}"
          f"{res.bound:12.1f}{res.wall_ms:8.0f}")
