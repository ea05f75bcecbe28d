"""Deterministic speed-density models.

Single-regime families carry free parameters and can be calibrated; the
multi-regime models are fixed historical curves used for reference only.
All speeds are in mph and densities in veh/mi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kvdoc import DocumentError, format_kv, get_float, parse_kv

__all__ = [
    "GUARD_FLOOR",
    "ModelError",
    "FDModelSpec",
    "FDModel",
    "MultiRegimeModel",
    "registry",
    "get_spec",
    "model_names",
    "evaluate",
    "evaluate_flow",
    "multi_regime_evaluate",
    "MULTI_REGIME",
    "model_to_document",
    "model_from_document",
]

# Densities are clamped here before formulas containing log(rho) or 1/rho.
GUARD_FLOOR = 1e-6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FDModelSpec:
    """A named parametric family ``v = f(rho, theta)``.

    ``kinds`` gives each parameter's physical role (``v_f``, ``rho_j``,
    ``shape``, ...); calibration derives data-driven starting points from it.
    """

    name: str
    label: str
    param_names: tuple
    bounds: tuple
    kinds: tuple
    formula: Callable
    guarded: bool = False
    note: str = ""

    def __post_init__(self):
        n = len(self.param_names)
        if len(set(self.param_names)) != n:
            raise ModelError(f"{self.name}: duplicate parameter names")
        if len(self.bounds) != n or len(self.kinds) != n:
            raise ModelError(f"{self.name}: bounds/kinds length mismatch")

    @property
    def n_params(self):
        return len(self.param_names)

    @property
    def lower(self):
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def upper(self):
        return np.array([b[1] for b in self.bounds], dtype=float)

    def check(self, params):
        p = np.asarray(params, dtype=float)
        if p.shape != (self.n_params,):
            raise ModelError(
                f"{self.name} expects {self.n_params} parameters "
                f"{self.param_names}, got {p.size}")
        if not np.all(np.isfinite(p)):
            raise ModelError(f"{self.name}: parameters must be finite")
        bad = [f"{k}={x!r} not in [{lo}, {hi}]"
               for k, x, (lo, hi) in zip(self.param_names, p, self.bounds)
               if not lo <= x <= hi]
        if bad:
            raise ModelError(f"{self.name}: " + "; ".join(bad))
        return p

    def speed(self, density, params):
        """Evaluate without bounds checking (used inside the optimizer)."""
        rho = np.asarray(density, dtype=float)
        if self.guarded:
            rho = np.maximum(rho, GUARD_FLOOR)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return self.formula(rho, *params)

    def __call__(self, *params, **named) -> "FDModel":
        if named:
            if params:
                raise TypeError("pass parameters positionally or by name, not both")
            try:
                params = [named.pop(k) for k in self.param_names]
            except KeyError as exc:
                raise ModelError(f"{self.name}: missing parameter {exc.args[0]}") from None
            if named:
                raise ModelError(f"{self.name}: unknown parameter(s) {sorted(named)}")
        elif len(params) == 1 and np.ndim(params[0]) == 1:
            params = params[0]
        return FDModel(self, tuple(float(x) for x in params))


@dataclass(frozen=True)
class FDModel:
    spec: FDModelSpec
    params: tuple

    def __post_init__(self):
        p = self.spec.check(self.params)
        object.__setattr__(self, "params", tuple(float(x) for x in p))

    @property
    def name(self):
        return self.spec.name

    def as_dict(self):
        return dict(zip(self.spec.param_names, self.params))

    def speed(self, density):
        return self.spec.speed(density, self.params)

    __call__ = speed

    def flow(self, density):
        rho = np.asarray(density, dtype=float)
        return rho * self.speed(rho)


def evaluate(model: FDModel, density):
    """Speed at ``density`` (scalar or array)."""
    rho = np.asarray(density, dtype=float)
    if np.any(rho < 0):
        raise ModelError("density must be non-negative")
    out = model.speed(rho)
    return float(out) if np.ndim(out) == 0 else out


def evaluate_flow(model: FDModel, density):
    """Flow ``q = rho * v`` in veh/h."""
    rho = np.asarray(density, dtype=float)
    out = rho * evaluate(model, rho)
    return float(out) if np.ndim(out) == 0 else out


# --- single-regime formulas ------------------------------------------------

def _greenshields(rho, v_f, rho_j):
    return v_f * (1.0 - rho / rho_j)


def _greenberg(rho, v_critical, rho_j):
    return v_critical * np.log(rho_j / rho)


def _underwood(rho, v_f, rho_critical):
    return v_f * np.exp(-rho / rho_critical)


def _newell(rho, v_f, rho_j, lam):
    return v_f * (1.0 - np.exp(-lam / v_f * (1.0 / rho - 1.0 / rho_j)))


def _drake(rho, v_f, rho_critical):
    return v_f * np.exp(-((rho / rho_critical) ** 2))


def _pipes(rho, v_f, rho_j, n):
    # beyond jam density the fractional power is undefined; speed is 0 there
    return v_f * np.maximum(1.0 - rho / rho_j, 0.0) ** n


def _drew(rho, v_f, rho_j, m1, m2):
    return v_f * np.maximum(1.0 - (rho / rho_j) ** m1, 0.0) ** m2


def _papageorgiou(rho, v_f, rho_j, alpha):
    return v_f * np.exp(-(1.0 / alpha) * (rho / rho_j) ** alpha)


def _kerner(rho, v_f, rho_critical):
    # the 372e-8 offset sits inside the denominator, as published
    return v_f * (1.0 / (1.0 + np.exp((rho / rho_critical - 0.25) / 0.06) - 372e-8))


def _del_castillo(rho, v_f, rho_j, v_j):
    return v_f * (1.0 - np.exp(v_j / v_f * (1.0 - rho_j / rho)))


def _jayakrishnan(rho, v_f, v_min, rho_j):
    return v_min + (v_f - v_min) * (1.0 - rho / rho_j)


def _ardekani(rho, v_critical, rho_j, rho_min):
    return v_critical * np.log((rho_j + rho_min) / (rho + rho_min))


def _macnicholas(rho, v_f, rho_j, n, m):
    a = rho_j ** n
    b = rho ** n
    return v_f * (a - b) / (a + m * b)


def _wang(rho, v_f, v_critical, rho_critical, theta1, theta2):
    return v_critical + (v_f - v_critical) / (
        1.0 + np.exp((rho - rho_critical) / theta1)) ** theta2


def _cheng(rho, v_f, rho_critical, m):
    return v_f / (1.0 + (rho / rho_critical) ** m) ** (2.0 / m)


_SPEED = (0.1, 200.0)
_DENSITY = (0.1, 1.0e4)
_SHAPE = (0.01, 50.0)

_REGISTRY = (
    FDModelSpec("greenshields", "Greenshields", ("v_f", "rho_j"),
                (_SPEED, _DENSITY), ("v_f", "rho_j"), _greenshields),
    FDModelSpec("greenberg", "Greenberg", ("v_critical", "rho_j"),
                (_SPEED, _DENSITY), ("v_critical", "rho_j"), _greenberg,
                guarded=True),
    FDModelSpec("underwood", "Underwood", ("v_f", "rho_critical"),
                (_SPEED, _DENSITY), ("v_f", "rho_critical"), _underwood),
    FDModelSpec("newell", "Newell", ("v_f", "rho_j", "lambda"),
                (_SPEED, _DENSITY, (1e-3, 1e6)), ("v_f", "rho_j", "lambda"),
                _newell, guarded=True),
    FDModelSpec("drake", "Drake", ("v_f", "rho_critical"),
                (_SPEED, _DENSITY), ("v_f", "rho_critical"), _drake),
    FDModelSpec("pipes", "Pipes", ("v_f", "rho_j", "n"),
                (_SPEED, _DENSITY, _SHAPE), ("v_f", "rho_j", "shape"), _pipes),
    FDModelSpec("drew", "Drew", ("v_f", "rho_j", "m1", "m2"),
                (_SPEED, _DENSITY, _SHAPE, _SHAPE),
                ("v_f", "rho_j", "shape", "shape"), _drew),
    FDModelSpec("papageorgiou", "Papageorgiou", ("v_f", "rho_j", "alpha"),
                (_SPEED, _DENSITY, _SHAPE), ("v_f", "rho_j", "shape"),
                _papageorgiou),
    FDModelSpec("kerner", "Kerner-Konhauser", ("v_f", "rho_critical"),
                (_SPEED, _DENSITY), ("v_f", "rho_critical"), _kerner),
    FDModelSpec("del_castillo", "Del Castillo-Benitez", ("v_f", "rho_j", "v_j"),
                (_SPEED, _DENSITY, (0.01, 1.0e3)), ("v_f", "rho_j", "v_j"),
                _del_castillo, guarded=True),
    FDModelSpec("jayakrishnan", "Jayakrishnan", ("v_f", "v_min", "rho_j"),
                (_SPEED, (0.0, 200.0), _DENSITY), ("v_f", "v_min", "rho_j"),
                _jayakrishnan),
    FDModelSpec("ardekani", "Ardekani-Ghandehari", ("v_critical", "rho_j", "rho_min"),
                (_SPEED, _DENSITY, (0.0, 100.0)),
                ("v_critical", "rho_j", "rho_min"), _ardekani, guarded=True),
    FDModelSpec("macnicholas", "MacNicholas", ("v_f", "rho_j", "n", "m"),
                (_SPEED, (0.1, 1.0e5), _SHAPE, (0.0, 1.0e6)),
                ("v_f", "rho_j", "shape", "shape"), _macnicholas,
                note="non-physical calibration possible (jam density may "
                     "run far beyond observed densities)"),
    FDModelSpec("wang", "Wang", ("v_f", "v_critical", "rho_critical", "theta1", "theta2"),
                (_SPEED, (0.0, 200.0), _DENSITY, (0.01, 100.0), (0.01, 100.0)),
                ("v_f", "v_critical", "rho_critical", "shape", "shape"), _wang),
    FDModelSpec("cheng", "Cheng", ("v_f", "rho_critical", "m"),
                (_SPEED, _DENSITY, (1.0, 8.53)), ("v_f", "rho_critical", "shape"),
                _cheng),
)

_BY_NAME = {s.name: s for s in _REGISTRY}
_ALIASES = {
    "kerner-konhauser": "kerner", "kerner_konhauser": "kerner",
    "del-castillo": "del_castillo", "delcastillo": "del_castillo",
    "ardekani-ghandehari": "ardekani",
}


def registry():
    """All single-regime families, in their conventional published order."""
    return list(_REGISTRY)


def model_names():
    return [s.name for s in _REGISTRY]


def get_spec(name: str) -> FDModelSpec:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    try:
        return _BY_NAME[key]
    except KeyError:
        raise ModelError(
            f"unknown model {name!r}; known models: {', '.join(model_names())}"
        ) from None


# --- multi-regime ----------------------------------------------------------

@dataclass(frozen=True)
class MultiRegimeModel:
    """Piecewise speed-density curve with fixed constants.

    Piece ``i`` covers ``(breakpoints[i-1], breakpoints[i]]``; the first
    piece starts at 0 (inclusive) and the last runs to infinity.
    """

    name: str
    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ModelError("need one more piece than breakpoints")
        if list(self.breakpoints) != sorted(self.breakpoints):
            raise ModelError("breakpoints must be increasing")

    def speed(self, density):
        rho = np.asarray(density, dtype=float)
        which = np.searchsorted(np.asarray(self.breakpoints), rho, side="left")
        out = np.empty_like(rho)
        with np.errstate(divide="ignore"):
            for i, piece in enumerate(self.pieces):
                sel = which == i
                if np.any(sel):
                    out[sel] = piece(rho[sel])
        return out

    __call__ = speed


def multi_regime_evaluate(model: MultiRegimeModel, density):
    rho = np.asarray(density, dtype=float)
    if np.any(rho < 0):
        raise ModelError("density must be non-negative")
    out = model.speed(rho)
    return float(out) if np.ndim(out) == 0 else out


MULTI_REGIME = {
    "edie": MultiRegimeModel(
        "edie", (50.0,),
        (lambda r: 54.9 * np.exp(-r / 163.9),
         lambda r: 26.8 * np.log(162.5 / np.maximum(r, GUARD_FLOOR)))),
    "two_regime": MultiRegimeModel(
        "two_regime", (65.0,),
        (lambda r: 60.9 - 0.515 * r,
         lambda r: 40.0 - 0.265 * r)),
    "modified_greenberg": MultiRegimeModel(
        "modified_greenberg", (35.0,),
        (lambda r: np.full_like(r, 48.0),
         lambda r: 32.0 * np.log(145.5 / np.maximum(r, GUARD_FLOOR)))),
    "three_regime": MultiRegimeModel(
        "three_regime", (40.0, 65.0),
        (lambda r: 50.0 - 0.098 * r,
         lambda r: 81.4 - 0.913 * r,
         lambda r: 40.0 - 0.265 * r)),
}


# --- serialization ---------------------------------------------------------

def model_to_document(model: FDModel, extra=()) -> str:
    return format_kv([("model", model.name), *model.as_dict().items(), *extra])


def model_from_document(text: str) -> FDModel:
    doc = parse_kv(text)
    if "model" not in doc:
        raise DocumentError("missing key 'model'")
    spec = get_spec(doc["model"])
    return spec(*[get_float(doc, k) for k in spec.param_names])
