"""Stationary covariance functions on scalar densities and Cholesky plumbing.

Every linear solve against a kernel matrix in this package goes through
:func:`cholesky` / :class:`CholeskyFactor`; no explicit inverse is formed.
The module keeps call counters so tests can audit that.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg import cholesky as scipy_cholesky

__all__ = [
    "KERNEL_KINDS",
    "KernelParams",
    "FactorizationError",
    "CholeskyFactor",
    "kernel_eval",
    "gram",
    "cholesky",
    "chol_solve",
    "solve_counts",
    "reset_solve_counts",
]

KERNEL_KINDS = ("exponential", "rbf", "matern32", "matern52", "rational_quadratic")
_ALIASES = {"exp": "exponential", "se": "rbf", "squared_exponential": "rbf",
            "rq": "rational_quadratic", "rational-quadratic": "rational_quadratic"}

JITTER_START = 1e-8
JITTER_STOP = 1e-2

_COUNTS = Counter()


def solve_counts():
    """Snapshot of factorization / solve counters."""
    return dict(_COUNTS)


def reset_solve_counts():
    _COUNTS.clear()


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even at the largest jitter (ill-conditioned kernel)."""


@dataclass(frozen=True)
class KernelParams:
    """Kernel hyperparameters.

    The exponential kernel ``sigma^2 exp(-|x - x'| / 2)`` has no length
    scale; ``length_scale`` is ignored for it. ``rq_alpha`` is the fixed
    shape of the rational-quadratic kernel.
    """

    kind: str = "exponential"
    signal_sigma: float = 1.0
    length_scale: float = 1.0
    rq_alpha: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.lower(), self.kind.lower())
        if kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KERNEL_KINDS}")
        object.__setattr__(self, "kind", kind)
        if not self.signal_sigma > 0:
            raise ValueError("signal_sigma must be positive")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if not self.rq_alpha > 0:
            raise ValueError("rq_alpha must be positive")

    @property
    def has_length_scale(self):
        return self.kind != "exponential"

    @property
    def variance(self):
        return self.signal_sigma ** 2

    def with_(self, **changes):
        return replace(self, **changes)

    def from_distance(self, d, out=None):
        """Kernel value at distance ``d``; ``out=d`` evaluates in place."""
        s2 = self.signal_sigma ** 2
        if self.kind in ("exponential", "rbf"):
            if out is None:
                out = np.empty(np.shape(d))
            if self.kind == "exponential":
                out = np.multiply(d, -0.5, out=out)
            else:
                out = np.divide(d, self.length_scale, out=out)
                np.square(out, out=out)
                out *= -0.5
            np.exp(out, out=out)
            out *= s2
            return out
        r = d / self.length_scale
        if self.kind == "matern32":
            a = np.sqrt(3.0) * r
            val = s2 * (1.0 + a) * np.exp(-a)
        elif self.kind == "matern52":
            a = np.sqrt(5.0) * r
            val = s2 * (1.0 + a + a * a / 3.0) * np.exp(-a)
        else:
            val = s2 * (1.0 + r * r / (2.0 * self.rq_alpha)) ** (-self.rq_alpha)
        if out is None:
            return val
        out[...] = val
        return out

    def diag(self, x):
        return np.full(np.size(x), self.signal_sigma ** 2)


def kernel_eval(params: KernelParams, x, x2) -> float:
    return float(params.from_distance(abs(float(x) - float(x2))))


def gram(params: KernelParams, xs, ys=None) -> np.ndarray:
    """Matrix with entries ``k(xs[i], ys[j])``; ``ys`` defaults to ``xs``."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = xs if ys is None else np.asarray(ys, dtype=float).ravel()
    d = np.subtract.outer(xs, ys)
    np.abs(d, out=d)
    return params.from_distance(d, out=d)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of ``K + jitter * I``."""

    L: np.ndarray
    jitter: float

    @property
    def n(self):
        return self.L.shape[0]

    def solve(self, rhs):
        """``(K + jitter I)^{-1} rhs``."""
        _COUNTS["solve"] += 1
        return cho_solve((self.L, True), rhs, check_finite=False)

    def solve_lower(self, rhs):
        """``L^{-1} rhs``."""
        _COUNTS["triangular"] += 1
        return solve_triangular(self.L, rhs, lower=True, check_finite=False)

    def solve_upper(self, rhs):
        """``L^{-T} rhs``."""
        _COUNTS["triangular"] += 1
        return solve_triangular(self.L, rhs, lower=True, trans="T",
                                check_finite=False)

    def logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self.L)))


def cholesky(K) -> CholeskyFactor:
    """Factor a symmetric PSD matrix, adding diagonal jitter only when needed.

    The plain factorization is kept when it succeeds and every pivot
    ``L_ii^2`` is at least ``1e-8 * mean(diag K)``. Otherwise jitter starts
    at ``1e-8 * mean(diag K)`` and grows tenfold up to ``1e-2 * mean(diag K)``
    before giving up.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("cholesky needs a square matrix")
    _COUNTS["cholesky"] += 1
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    if not scale > 0:
        scale = 1.0
    floor = JITTER_START * scale
    levels = [0.0]
    j = JITTER_START
    while j <= JITTER_STOP * (1 + 1e-12):
        levels.append(j * scale)
        j *= 10.0
    for jit in levels:
        try:
            L = scipy_cholesky(K + jit * np.eye(K.shape[0]) if jit else K, lower=True,
                               check_finite=False)
        except np.linalg.LinAlgError:
            continue
        # a non-finite entry of K propagates into a later pivot
        if not np.all(np.isfinite(np.diag(L))):
            continue
        # a near-zero pivot means the matrix is singular up to rounding
        if jit == 0.0 and K.size and np.min(np.diag(L)) ** 2 < floor:
            continue
        return CholeskyFactor(L, jit)
    raise FactorizationError(
        f"Cholesky failed up to jitter {levels[-1]:.3g}; "
        "kernel hyperparameters or inputs are ill-conditioned")


def chol_solve(K, rhs):
    """``K^{-1} rhs`` through a (jittered if necessary) Cholesky factorization."""
    return cholesky(K).solve(rhs)
