"""Sparse variational GP regression with inducing densities.

Two fitting routes share one prediction routine:

* zero prior mean: the optimal variational distribution ``N(mu_m, A_m)`` with
  ``Sigma = (Kmm + s^-2 Kmn Knm)^-1``, ``mu_m = s^-2 Kmm Sigma Kmn y`` and
  ``A_m = Kmm Sigma Kmm``, evaluated through the whitened matrix
  ``B = I + s^-2 Lm^-1 Kmn Knm Lm^-T``;
* empirical prior mean ``g``: ``Sigma_* = Kmm P^-1 Kmm`` with
  ``P = Kmm + s^-2 Kmn Knm`` factored directly, and
  ``mu_* = g(x_m) + s^-2 Sigma_* Kmm^-1 Kmn (y - g(x))``.

Prediction uses ``m(x*) + K*m Kmm^-1 (mu - m(x_m))`` and the three-term
variance ``K** - K*m Kmm^-1 Km* + K*m Kmm^-1 S Kmm^-1 Km*``.
Everything is O(m^2 n); no n x n matrix is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataError, DensitySpeedDataset, as_arrays
from .gpr import GPConfig, GPPosterior, _make_posterior, tune
from .kernels import CholeskyFactor, KernelParams, cholesky, gram
from .kvdoc import DocumentError, format_kv, get_array, get_float, parse_kv
from .models import get_spec

__all__ = [
    "InducingSet",
    "VariationalPosterior",
    "SparseFit",
    "sgpr_fit",
    "sgpr_predict",
    "collapsed_bound",
    "optimize_sgpr_hyperparameters",
    "fit_to_document",
    "fit_from_document",
    "nystrom_trace",
    "DEFAULT_INDUCING",
]

DEFAULT_INDUCING = 288

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class InducingSet:
    """Inducing densities, the dataset rows they came from, and how they were drawn."""

    inputs: np.ndarray
    indices: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float).ravel()
        if x.size < 1:
            raise ValueError("need at least one inducing input")
        x.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        if self.indices is not None:
            idx = np.array(self.indices, dtype=int).ravel()
            idx.setflags(write=False)
            object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.inputs.size

    @classmethod
    def from_dataset(cls, data: DensitySpeedDataset, indices, provenance=""):
        idx = np.asarray(indices, dtype=int)
        return cls(data.density[idx], idx, provenance)


@dataclass(frozen=True)
class VariationalPosterior:
    """``phi(f_m) = N(mu, Sigma)`` over the inducing values."""

    mu: np.ndarray
    Sigma: np.ndarray


@dataclass(frozen=True)
class SparseFit:
    config: GPConfig
    inducing: InducingSet
    variational: VariationalPosterior
    bound: float
    n_train: int
    _kmm: CholeskyFactor = field(repr=False, compare=False, default=None)
    _inner: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._kmm is None:
            kmm = _kmm_factor(self.config.kernel, self.inducing.inputs)
            object.__setattr__(self, "_kmm", kmm)
        if self._inner is None:
            # Lm^-1 S Lm^-T, so the third variance term is a quadratic form in Lm^-1 Km*
            T = self._kmm.solve_lower(self.variational.Sigma)
            inner = self._kmm.solve_lower(T.T)
            object.__setattr__(self, "_inner", 0.5 * (inner + inner.T))

    def predict(self, queries) -> GPPosterior:
        return sgpr_predict(self, queries)

    def predict_raw(self, queries):
        """Mean and unclamped latent variance (for PSD diagnostics)."""
        xq = np.atleast_1d(np.asarray(queries, dtype=float))
        cfg = self.config
        W = self._kmm.solve_lower(gram(cfg.kernel, self.inducing.inputs, xq))
        shift = self.variational.mu - cfg.prior_mean(self.inducing.inputs)
        mean = cfg.prior_mean(xq) + W.T @ self._kmm.solve_lower(shift)
        var = (cfg.kernel.diag(xq) - np.sum(W * W, axis=0)
               + np.sum(W * (self._inner @ W), axis=0))
        return mean, var


def _kmm_factor(kernel: KernelParams, z) -> CholeskyFactor:
    return cholesky(gram(kernel, z))


def _check_inputs(x, inducing):
    if x.size == 0:
        raise DataError("cannot fit a GP to an empty dataset")
    m, n = len(inducing), x.size
    if m > n:
        raise ValueError(f"more inducing points ({m}) than training points ({n})")
    lo, hi = x.min(), x.max()
    z = inducing.inputs
    if z.min() < lo - 1e-9 * max(1.0, abs(lo)) or z.max() > hi + 1e-9 * max(1.0, abs(hi)):
        raise ValueError("inducing inputs must lie within the training density range")


class _Terms:
    """Whitened quantities shared by the bound and the zero-mean posterior."""

    def __init__(self, config: GPConfig, train: DensitySpeedDataset, inducing: InducingSet):
        x, y = as_arrays(train)
        _check_inputs(x, inducing)
        self.config = config
        self.x = x
        self.r = y - config.prior_mean(x)
        self.s2 = config.noise_variance
        s = math.sqrt(self.s2)
        self.Kmn = gram(config.kernel, inducing.inputs, self.x)
        self.Kmm = gram(config.kernel, inducing.inputs)
        self.Lm = cholesky(self.Kmm)
        self.Kmm[np.diag_indices_from(self.Kmm)] += self.Lm.jitter
        self.A = self.Lm.solve_lower(self.Kmn) / s
        AAT = self.A @ self.A.T
        self.trace_AAT = float(np.trace(AAT))
        B = AAT
        B[np.diag_indices_from(B)] += 1.0
        self.LB = cholesky(B)
        self.c = self.LB.solve_lower(self.A @ self.r) / s

    def bound(self):
        n = self.r.size
        kdiag = self.config.kernel.diag(self.x)
        quad = float(self.r @ self.r) / self.s2 - float(self.c @ self.c)
        trace_gap = float(np.sum(kdiag)) / self.s2 - self.trace_AAT
        return float(-0.5 * n * _LOG2PI - 0.5 * n * math.log(self.s2)
                     - 0.5 * self.LB.logdet() - 0.5 * quad - 0.5 * trace_gap)

    def trace_gap(self):
        """``Tr(Knn - Qnn)``; non-negative up to rounding."""
        kdiag = self.config.kernel.diag(self.x)
        return float(np.sum(kdiag)) - self.s2 * self.trace_AAT

    def zero_mean_posterior(self):
        # Lm LB^-T: the square root of A_m = Kmm Sigma Kmm
        R = self.LB.solve_lower(self.Lm.L.T).T
        mu = R @ self.c
        return VariationalPosterior(mu, R @ R.T)


def _prior_mean_posterior(config: GPConfig, terms: _Terms, z) -> VariationalPosterior:
    Kmm = terms.Kmm
    P = Kmm + (terms.Kmn @ terms.Kmn.T) / terms.s2
    LP = cholesky(P)
    G = LP.solve_lower(Kmm)
    Sigma_star = G.T @ G
    # Sigma_* Kmm^-1 = Kmm P^-1, applied without forming either inverse
    mu_star = config.prior_mean(z) + Kmm @ LP.solve(terms.Kmn @ terms.r) / terms.s2
    return VariationalPosterior(mu_star, 0.5 * (Sigma_star + Sigma_star.T))


def sgpr_fit(config: GPConfig, train: DensitySpeedDataset, inducing: InducingSet) -> SparseFit:
    """Optimal variational posterior and collapsed bound for fixed hyperparameters."""
    terms = _Terms(config, train, inducing)
    if config.mean_function is None:
        post = terms.zero_mean_posterior()
    else:
        post = _prior_mean_posterior(config, terms, inducing.inputs)
    return SparseFit(config, inducing, post, terms.bound(), terms.x.size, _kmm=terms.Lm)


def sgpr_predict(fit: SparseFit, queries) -> GPPosterior:
    xq = np.atleast_1d(np.asarray(queries, dtype=float))
    mean, var = fit.predict_raw(xq)
    return _make_posterior(xq, mean, var, fit.config.noise_variance)


def collapsed_bound(config: GPConfig, train: DensitySpeedDataset, inducing: InducingSet) -> float:
    """``log N(y - m(x) | 0, s^2 I + Qnn) - Tr(Knn - Qnn) / (2 s^2)`` via m x m algebra."""
    return _Terms(config, train, inducing).bound()


def nystrom_trace(config: GPConfig, train: DensitySpeedDataset, inducing: InducingSet) -> float:
    return _Terms(config, train, inducing).trace_gap()


def optimize_sgpr_hyperparameters(config: GPConfig, train: DensitySpeedDataset,
                                  inducing: InducingSet, budget: int = 300,
                                  starts: int = 5, seed: int = 0) -> GPConfig:
    """Maximize the collapsed bound over kernel and noise scales, inducing inputs fixed."""
    return tune(lambda c: collapsed_bound(c, train, inducing), config, train,
                budget, starts, seed)


# --- serialization -----------------------------------------------------------

def fit_to_document(fit: SparseFit) -> str:
    cfg = fit.config
    k = cfg.kernel
    items = [
        ("kind", "sgpr"),
        ("kernel", k.kind),
        ("signal_sigma", k.signal_sigma),
        ("length_scale", k.length_scale),
        ("rq_alpha", k.rq_alpha),
        ("noise_variance", cfg.noise_variance),
        ("bound", fit.bound),
        ("n_train", fit.n_train),
        ("inducing_provenance", fit.inducing.provenance or "unknown"),
    ]
    mf = cfg.mean_function
    items.append(("mean_model", mf.name if mf is not None else "none"))
    if mf is not None:
        items += [(f"mean.{p}", v) for p, v in mf.as_dict().items()]
    items.append(("inducing_inputs", np.asarray(fit.inducing.inputs)))
    if fit.inducing.indices is not None:
        items.append(("inducing_indices", np.asarray(fit.inducing.indices, dtype=float)))
    items.append(("mu", np.asarray(fit.variational.mu)))
    items.append(("Sigma", np.asarray(fit.variational.Sigma)))
    return format_kv(items)


def fit_from_document(text: str) -> SparseFit:
    doc = parse_kv(text)
    if doc.get("kind") != "sgpr":
        raise DocumentError("not a sparse GP fit document")
    try:
        kernel = KernelParams(doc["kernel"], get_float(doc, "signal_sigma"),
                              get_float(doc, "length_scale"), get_float(doc, "rq_alpha"))
    except KeyError as exc:
        raise DocumentError(f"missing key {exc.args[0]!r}") from None
    mean = None
    name = doc.get("mean_model", "none")
    if name != "none":
        spec = get_spec(name)
        mean = spec(*[get_float(doc, f"mean.{p}") for p in spec.param_names])
    config = GPConfig(kernel, get_float(doc, "noise_variance"), mean)
    idx = get_array(doc, "inducing_indices").astype(int) if "inducing_indices" in doc else None
    inducing = InducingSet(get_array(doc, "inducing_inputs"), idx,
                           doc.get("inducing_provenance", ""))
    mu = get_array(doc, "mu")
    Sigma = get_array(doc, "Sigma")
    m = len(inducing)
    if mu.shape != (m,) or Sigma.shape != (m, m):
        raise DocumentError("variational parameters do not match the inducing set")
    return SparseFit(config, inducing, VariationalPosterior(mu, Sigma),
                     get_float(doc, "bound"), int(get_float(doc, "n_train")))

