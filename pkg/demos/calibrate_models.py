"""Calibrate every deterministic speed-density family on synthetic detector data.

Compares ordinary and bin-weighted least squares for the Cheng family, then
lists the weighted fit of every registered family.

    python3 demos/calibrate_models.py
"""

import numpy as np

from stochfd import compute_weights, model_names, rmse, synthetic_dataset, wls_fit

data = synthetic_dataset(2000, seed=0)
print(f"{len(data)} observations, densities {data.density.min():.1f}..{data.density.max():.1f}")

# Free-flow rows dominate; bin weights restore the congested branch.
truth = (68.7, 20.02, 2.21)
ols = wls_fit("cheng", data, weights=np.ones(len(data)))
wls = wls_fit("cheng", data, weights=compute_weights(data))
print(f"\nCheng generator {truth}")
print(f"  OLS  {np.round(ols.params, 3)}")
print(f"  WLS  {np.round(wls.params, 3)}")

print(f"\n{'model':<14}{'RMSE':>8}{'objective':>14}  converged  parameters")
for name in model_names():
    res = wls_fit(name, data)
    err = rmse(data.speed, res.model.speed(data.density))
    print(f"{name:<14}{err:8.3f}{res.objective:14.2f}  {str(res.converged):<9}  "
          f"{np.round(res.params, 3)}")
