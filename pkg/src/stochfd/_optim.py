"""Multi-start bounded Nelder-Mead shared by the GP hyperparameter searches."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


class _Budget(Exception):
    pass


def maximize_multistart(objective, x0, bounds, budget, starts=5, seed=0,
                        start_box=None):
    """Maximize ``objective`` over a box with restarted simplex searches.

    ``budget`` caps the total number of objective evaluations, the one spent
    on ``x0`` included. Start 0 is ``x0``; the others are uniform draws from
    ``start_box`` (defaults to ``bounds``). Returns ``(x_best, f_best)``
    where ``f_best >= objective(x0)`` by construction.
    """
    x0 = np.asarray(x0, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    box = bounds if start_box is None else np.asarray(start_box, dtype=float)
    state = {"n": 0, "best_x": x0.copy(), "best_f": -np.inf}

    def neg(x):
        if state["n"] >= budget:
            raise _Budget
        state["n"] += 1
        try:
            f = float(objective(x))
        except np.linalg.LinAlgError:
            f = -np.inf
        if not np.isfinite(f):
            return 1e300
        if f > state["best_f"]:
            state["best_f"] = f
            state["best_x"] = np.array(x, dtype=float)
        return -f

    neg(np.clip(x0, bounds[:, 0], bounds[:, 1]))
    if budget <= 1:
        return x0, state["best_f"]

    rng = np.random.default_rng(seed)
    inits = [np.clip(x0, bounds[:, 0], bounds[:, 1])]
    for _ in range(max(starts, 1) - 1):
        inits.append(rng.uniform(box[:, 0], box[:, 1]))
    per_start = max((budget - 1) // len(inits), 1)
    for x_init in inits:
        if state["n"] >= budget:
            break
        try:
            minimize(neg, x_init, method="Nelder-Mead", bounds=bounds,
                     options={"maxfev": per_start, "xatol": 1e-6, "fatol": 1e-9})
        except _Budget:
            break
    return state["best_x"], state["best_f"]
