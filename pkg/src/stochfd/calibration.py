"""Weighted least-squares calibration of single-regime speed-density models.

The fit minimizes ``S(theta) = sum_i w_i (v_i - f(rho_i, theta))^2`` inside
the parameter box of the model spec. Unit weights give ordinary least
squares; the default is the bin-inverse weighting of
:func:`~stochfd.dataset.compute_weights`, which keeps the crowded
free-flow range from swamping the congested one.

Each start runs a bounded Nelder-Mead search and is then polished by a
projected Levenberg-Marquardt iteration with finite-difference Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dataset import DataError, DensitySpeedDataset, compute_weights
from .models import FDModel, FDModelSpec, get_spec, model_to_document

__all__ = [
    "CalibrationResult",
    "IllPosedError",
    "wls_fit",
    "weighted_sse",
    "first_order_residual",
    "default_init",
    "result_to_document",
    "MAX_ITERATIONS",
]

MAX_ITERATIONS = 5000
GRAD_RTOL = 1e-6
STEP_TOL = 1e-10


class IllPosedError(DataError):
    """The data cannot identify the model's parameters."""


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of one weighted least-squares fit.

    ``gradient_norm`` is the projected first-order residual: gradient
    components that push against an active bound are dropped, so an
    optimum on the boundary of the box still counts as stationary.
    ``trace`` holds the objective after every optimizer iteration of the
    winning start and never increases.
    """

    model: FDModel
    objective: float
    gradient_norm: float
    iterations: int
    converged: bool
    trace: tuple = field(default=(), repr=False)

    @property
    def params(self):
        return self.model.params

    @property
    def tolerance(self):
        return GRAD_RTOL * (1.0 + abs(self.objective))


def _weights_for(data, weights):
    n = len(data)
    if weights is None:
        w = data.weights if data.weights is not None else compute_weights(data)
    else:
        w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or not np.all(w > 0):
        raise ValueError("weights must be positive and finite")
    return w


def weighted_sse(spec: FDModelSpec, data: DensitySpeedDataset, weights, params) -> float:
    """``sum w_i (v_i - f(rho_i, params))^2``; ``inf`` where the model is undefined."""
    r = data.speed - spec.speed(data.density, params)
    s = float(np.sum(np.asarray(weights) * r * r))
    return s if math.isfinite(s) else math.inf


def _fd_steps(theta):
    return np.maximum(1e-6, 1e-6 * np.abs(theta))


def _gradient(spec, data, w, theta):
    theta = np.asarray(theta, dtype=float)
    lo, hi = spec.lower, spec.upper
    h = _fd_steps(theta)
    g = np.empty(theta.size)
    for j in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        # keep the stencil inside the box at an active bound
        if dn[j] < lo[j]:
            g[j] = (weighted_sse(spec, data, w, up) - weighted_sse(spec, data, w, theta)) / h[j]
        elif up[j] > hi[j]:
            g[j] = (weighted_sse(spec, data, w, theta) - weighted_sse(spec, data, w, dn)) / h[j]
        else:
            g[j] = (weighted_sse(spec, data, w, up) - weighted_sse(spec, data, w, dn)) / (2 * h[j])
    return g


def first_order_residual(spec: FDModelSpec, data: DensitySpeedDataset, weights, params) -> float:
    """Norm of the central-difference gradient of the weighted SSE at ``params``.

    Step per coordinate is ``max(1e-6, 1e-6 |theta_j|)``. The value is
    linear in the weights.
    """
    theta = spec.check(params)
    return float(np.linalg.norm(_gradient(spec, data, _weights_for(data, weights), theta)))


def _projected(g, theta, lo, hi):
    g = g.copy()
    span = 1e-12 * np.maximum(1.0, np.abs(theta))
    g[(theta <= lo + span) & (g > 0)] = 0.0
    g[(theta >= hi - span) & (g < 0)] = 0.0
    return g


def default_init(spec: FDModelSpec, data: DensitySpeedDataset) -> np.ndarray:
    """Data-driven starting point, clipped into the parameter box."""
    rho, v = data.density, data.speed
    q = rho * v
    peak = int(np.argmax(q))
    guess = {
        "v_f": np.percentile(v, 99),
        "v_critical": v[peak],
        "v_min": np.percentile(v, 1),
        "v_j": 10.0,
        "rho_j": 1.5 * rho.max(),
        "rho_critical": rho[peak],
        "rho_min": 1.0,
        "lambda": q.max(),
    }
    lo, hi = spec.lower, spec.upper
    out = []
    for kind, a, b in zip(spec.kinds, lo, hi):
        if kind == "shape":
            x = 1.0 if a < 1.0 < b else 0.5 * (a + b)
        else:
            x = float(guess[kind])
        out.append(min(max(x, a), b))
    return np.array(out)


def _random_starts(spec, init, count, rng):
    """Log-uniform scatter within a factor of four of ``init``, clipped to the box."""
    lo, hi = spec.lower, spec.upper
    starts = []
    for _ in range(count):
        x = np.empty(init.size)
        for j, (c, a, b) in enumerate(zip(init, lo, hi)):
            if c > 0:
                x[j] = c * math.exp(rng.uniform(-math.log(4.0), math.log(4.0)))
            else:
                x[j] = rng.uniform(a, min(b, a + 1.0))
        starts.append(np.clip(x, lo, hi))
    return starts


def _levenberg_marquardt(spec, data, w, theta, f, budget, trace):
    """Projected LM on residuals ``sqrt(w) (v - f)``. Returns ``(theta, S, iters)``."""
    lo, hi = spec.lower, spec.upper
    sw = np.sqrt(w)
    mu = 1e-3
    it = 0
    while it < budget:
        it += 1
        r = sw * (data.speed - spec.speed(data.density, theta))
        h = _fd_steps(theta)
        J = np.empty((r.size, theta.size))
        for j in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[j] += h[j]
            dn[j] -= h[j]
            J[:, j] = -sw * (spec.speed(data.density, up) - spec.speed(data.density, dn)) / (2 * h[j])
        if not np.all(np.isfinite(J)):
            break
        scale = np.sqrt(np.maximum(np.sum(J * J, axis=0), 1e-300))
        accepted = False
        while mu < 1e16:
            A = np.vstack([J, np.diag(math.sqrt(mu) * scale)])
            b = np.concatenate([-r, np.zeros(theta.size)])
            delta = np.linalg.lstsq(A, b, rcond=None)[0]
            cand = np.clip(theta + delta, lo, hi)
            fc = weighted_sse(spec, data, w, cand)
            if fc < f:
                step = np.linalg.norm(cand - theta)
                theta, f = cand, fc
                trace.append(f)
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                break
            mu *= 4.0
        if not accepted or step <= STEP_TOL * (1.0 + np.linalg.norm(theta)):
            break
    return theta, f, it


def _fit_from(spec, data, w, x0):
    trace = []
    f0 = weighted_sse(spec, data, w, x0)
    trace.append(f0)
    nm_iters = min(200 * spec.n_params, MAX_ITERATIONS // 2)

    def record(xk):
        trace.append(weighted_sse(spec, data, w, xk))

    res = minimize(lambda th: weighted_sse(spec, data, w, th), x0, method="Nelder-Mead",
                   bounds=list(zip(spec.lower, spec.upper)), callback=record,
                   options={"maxiter": nm_iters, "xatol": 1e-10, "fatol": 1e-14})
    theta = np.clip(res.x, spec.lower, spec.upper)
    f = weighted_sse(spec, data, w, theta)
    if not f <= f0:
        theta, f = np.asarray(x0, dtype=float), f0
    trace[-1] = min(trace[-1], f)
    theta, f, lm_iters = _levenberg_marquardt(
        spec, data, w, theta, f, MAX_ITERATIONS - res.nit, trace)
    return theta, f, res.nit + lm_iters, trace


def wls_fit(spec, data: DensitySpeedDataset, weights=None, init=None,
            seed: int = 0, starts: int = 8) -> CalibrationResult:
    """Calibrate ``spec`` to ``data`` by weighted least squares.

    Parameters
    ----------
    spec : FDModelSpec or str
        Model family or its registry name.
    weights : array_like, optional
        Positive per-row weights. Defaults to ``data.weights`` when set,
        otherwise to the bin-inverse weights.
    init : array_like, optional
        First starting point; must lie inside the parameter box. Defaults
        to :func:`default_init`.
    seed, starts : int
        The remaining ``starts - 1`` starting points are seeded random
        scatters around the first.

    Returns
    -------
    CalibrationResult
        Best result over all starts. ``converged`` is false when the
        projected gradient test fails; the parameters are still the best
        found.
    """
    if isinstance(spec, str):
        spec = get_spec(spec)
    data.require_nonempty()
    w = _weights_for(data, weights)
    if spec.n_params > 1 and np.ptp(data.density) == 0:
        raise IllPosedError(
            f"{spec.name}: all densities are identical; "
            f"{spec.n_params} parameters cannot be identified")
    if starts < 1:
        raise ValueError("starts must be at least 1")
    x0 = default_init(spec, data) if init is None else spec.check(init)
    rng = np.random.default_rng(seed)
    candidates = [x0] + _random_starts(spec, x0, starts - 1, rng)

    best = None
    for x in candidates:
        theta, f, iters, trace = _fit_from(spec, data, w, x)
        if best is None or f < best[1]:
            best = (theta, f, iters, trace)
    theta, f, iters, trace = best
    if not math.isfinite(f):
        raise IllPosedError(f"{spec.name}: model is undefined on the data at every start")
    g = _projected(_gradient(spec, data, w, theta), theta, spec.lower, spec.upper)
    gnorm = float(np.linalg.norm(g))
    converged = gnorm <= GRAD_RTOL * (1.0 + abs(f))
    return CalibrationResult(spec(*theta), f, gnorm, iters, converged, tuple(trace))


def result_to_document(result: CalibrationResult) -> str:
    return model_to_document(result.model, extra=[
        ("objective", result.objective),
        ("gradient_norm", result.gradient_norm),
        ("iterations", result.iterations),
        ("converged", result.converged),
    ])
