"""Stochastic speed-density fundamental diagrams.

Deterministic models are calibrated by weighted least squares and can serve
as the prior mean of exact or sparse variational Gaussian-process
regressions of speed on density.
"""

from .calibration import CalibrationResult, first_order_residual, wls_fit
from .dataset import (DataError, DensitySpeedDataset, compute_weights, load_csv,
                      train_test_split, write_csv)
from .experiment import ExperimentConfig, run_cell, run_sweep
from .gpr import (ExactGP, GPConfig, GPPosterior, fit_exact, gp_fit_predict,
                  log_marginal_likelihood, optimize_hyperparameters)
from .kernels import KernelParams, gram, kernel_eval
from .metrics import MetricReport, evaluate, mape, pwci, rmse
from .models import (FDModel, FDModelSpec, MULTI_REGIME, evaluate_flow, get_spec,
                     model_names, registry)
from .sampling import (SamplerSpec, cluster_sample, reservoir_sample, systematic_sample,
                       weighted_random_sample)
from .sgpr import (InducingSet, SparseFit, collapsed_bound, optimize_sgpr_hyperparameters,
                   sgpr_fit, sgpr_predict)
from .synthetic import synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "first_order_residual", "wls_fit",
    "DataError", "DensitySpeedDataset", "compute_weights", "load_csv",
    "train_test_split", "write_csv",
    "ExperimentConfig", "run_cell", "run_sweep",
    "ExactGP", "GPConfig", "GPPosterior", "fit_exact", "gp_fit_predict", "log_marginal_likelihood",
    "optimize_hyperparameters",
    "KernelParams", "gram", "kernel_eval",
    "MetricReport", "evaluate", "mape", "pwci", "rmse",
    "FDModel", "FDModelSpec", "MULTI_REGIME", "evaluate_flow", "get_spec",
    "model_names", "registry",
    "SamplerSpec", "cluster_sample", "reservoir_sample", "systematic_sample",
    "weighted_random_sample",
    "InducingSet", "SparseFit", "collapsed_bound", "optimize_sgpr_hyperparameters",
    "sgpr_fit", "sgpr_predict",
    "synthetic_dataset",
]
