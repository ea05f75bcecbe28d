"""Sweep harness: calibrate a prior, draw inducing points, fit, score.

One *cell* is a (prior, sampler, inducing size) combination. Cells are
independent; :func:`run_sweep` may run them in worker processes but always
yields rows in grid order, so output files do not depend on ``jobs``.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import wls_fit
from .dataset import DensitySpeedDataset, as_arrays, train_test_split
from .gpr import HYPER_BOUNDS, GPConfig
from .kernels import KernelParams
from .metrics import evaluate
from .models import FDModel, get_spec, model_names
from .sampling import SamplerSpec, draw
from .sgpr import optimize_sgpr_hyperparameters, sgpr_fit

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "SWEEP_COLUMNS",
    "initial_config",
    "calibrate_prior",
    "run_cell",
    "run_sweep",
    "write_sweep",
]

SWEEP_COLUMNS = ("prior", "sampler", "m", "seed", "rmse", "mape", "pwci",
                 "bound", "wall_ms", "error")
CURVE_COLUMNS = ("prior", "sampler", "m", "metric", "value")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep cell.

    ``holdout`` below one trains on that fraction of rows and scores on the
    rest; the default scores on the training data itself.
    """

    prior: str
    sampler: SamplerSpec
    inducing_size: int
    kernel_kind: str = "exponential"
    seed: int = 0
    budget: int = 300
    level: float = 0.95
    holdout: float = 1.0
    data_path: str = ""
    output_dir: str = ""

    def __post_init__(self):
        if self.prior != "none":
            object.__setattr__(self, "prior", get_spec(self.prior).name)
        if int(self.inducing_size) != self.inducing_size or self.inducing_size < 1:
            raise ValueError("inducing_size must be a positive integer")
        KernelParams(self.kernel_kind)


@dataclass(frozen=True)
class CellResult:
    config: ExperimentConfig
    rmse: float = math.nan
    mape: float = math.nan
    pwci: float = math.nan
    bound: float = math.nan
    wall_ms: float = math.nan
    error: str = ""
    fit: object = field(default=None, repr=False, compare=False)

    def row(self):
        c = self.config
        return [c.prior, c.sampler.kind, c.inducing_size, c.seed, self.rmse,
                self.mape, self.pwci, self.bound, self.wall_ms, self.error]


def initial_config(kernel_kind: str, train, mean_function: FDModel | None = None) -> GPConfig:
    """Data-scaled starting hyperparameters, clipped into the search bounds."""
    x, y = as_arrays(train)
    r = y - (mean_function.speed(x) if mean_function is not None else 0.0)
    spread = float(np.sqrt(np.mean(r * r))) if r.size else 1.0

    def clip(v, key):
        lo, hi = HYPER_BOUNDS[key]
        return min(max(v, lo), hi)

    sigma = clip(spread, "signal_sigma")
    noise = clip(0.5 * spread, "noise_sigma")
    ls = clip(max(float(np.ptp(x)), 1.0) / 10.0, "length_scale")
    kern = KernelParams(kernel_kind, signal_sigma=sigma, length_scale=ls)
    return GPConfig(kern, noise * noise, mean_function)


def calibrate_prior(prior: str, data: DensitySpeedDataset, seed: int = 0):
    """Bin-weighted WLS fit of ``prior``; ``None`` for ``"none"``."""
    if prior == "none":
        return None
    return wls_fit(get_spec(prior), data, seed=seed).model


def run_cell(config: ExperimentConfig, data: DensitySpeedDataset,
             prior_model: FDModel | None = None) -> CellResult:
    """Sample, tune, fit and score one cell; failures land in ``error``.

    ``prior_model`` is the calibrated mean function (calibrated here when
    omitted). Wall time covers sampling, tuning, fitting and prediction.
    """
    try:
        train, test = data, data
        if config.holdout < 1.0:
            train, test = train_test_split(data, config.seed, config.holdout)
        if prior_model is None and config.prior != "none":
            prior_model = calibrate_prior(config.prior, train, config.seed)
        t0 = time.perf_counter()
        inducing = draw(config.sampler, train, config.inducing_size)
        cfg = initial_config(config.kernel_kind, train, prior_model)
        cfg = optimize_sgpr_hyperparameters(cfg, train, inducing, budget=config.budget,
                                            seed=config.seed)
        fit = sgpr_fit(cfg, train, inducing)
        report = evaluate(fit.predict(test.density), test, config.level)
        wall = (time.perf_counter() - t0) * 1e3
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return CellResult(config, error=f"{type(exc).__name__}: {exc}".replace("\n", " "))
    return CellResult(config, report.rmse, report.mape, report.pwci, fit.bound, wall,
                      fit=fit)


def _cell_job(args):
    config, data, prior_model = args
    res = run_cell(config, data, prior_model)
    # fitted objects stay in the worker
    return CellResult(res.config, res.rmse, res.mape, res.pwci, res.bound,
                      res.wall_ms, res.error)


def run_sweep(configs, data: DensitySpeedDataset, jobs: int = 1):
    """Yield :class:`CellResult` for each config, in input order.

    Each prior is calibrated once on the full dataset (the training part
    under holdout) before the cells run.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("sweep grid is empty")
    priors = {}
    for c in configs:
        key = (c.prior, c.holdout, c.seed if c.holdout < 1.0 else 0)
        if c.prior == "none" or key in priors:
            continue
        train = data if c.holdout >= 1.0 else train_test_split(data, c.seed, c.holdout)[0]
        try:
            priors[key] = calibrate_prior(c.prior, train, c.seed)
        except (ValueError, ArithmeticError) as exc:
            priors[key] = exc
    tasks = []
    for c in configs:
        p = priors.get((c.prior, c.holdout, c.seed if c.holdout < 1.0 else 0))
        tasks.append((c, data, p))

    def prepared(task):
        c, _, p = task
        if isinstance(p, Exception):
            return CellResult(c, error=f"calibration failed: {p}")
        return None

    if jobs <= 1:
        for t in tasks:
            yield prepared(t) or _cell_job(t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        runnable = [t for t in tasks if prepared(t) is None]
        results = pool.map(_cell_job, runnable)
        for t in tasks:
            yield prepared(t) or next(results)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_sweep(results, sweep_path, curves_path=None):
    """Write the sweep CSV row by row and, optionally, the long-format curves CSV.

    Returns the list of results written.
    """
    done = []
    with open(sweep_path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(SWEEP_COLUMNS)
        for res in results:
            out.writerow([_fmt(v) for v in res.row()])
            fh.flush()
            done.append(res)
    if curves_path is not None:
        with open(curves_path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(CURVE_COLUMNS)
            for res in done:
                c = res.config
                for metric in ("rmse", "mape", "pwci", "bound"):
                    out.writerow([c.prior, c.sampler.kind, c.inducing_size, metric,
                                  _fmt(getattr(res, metric))])
    return done


def expand_priors(spec: str):
    """Comma list of prior names; ``all`` expands to every registered model."""
    out = []
    for tok in (t.strip() for t in spec.split(",")):
        if not tok:
            continue
        if tok == "all":
            out += list(model_names())
        elif tok == "none":
            out.append("none")
        else:
            out.append(get_spec(tok).name)
    return out
