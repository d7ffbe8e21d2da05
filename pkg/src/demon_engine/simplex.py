"""Deterministic Nelder-Mead minimizer with an evaluation budget.

Stops when the simplex diameter drops below ``xtol`` *or* the spread of
objective values drops below ``ftol`` (either suffices), or when the
evaluation budget is spent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool
    # best objective value seen after each evaluation
    history: list[float] = field(default_factory=list)


def nelder_mead(func: Callable[[np.ndarray], float], x0, step: float = 0.1,
                budget: int = 1000, xtol: float = 1e-6, ftol: float = 1e-9,
                alpha: float = 1.0, gamma: float = 2.0, rho: float = 0.5,
                sigma: float = 0.5) -> SimplexResult:
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    history: list[float] = []
    best = [np.inf, x0.copy()]

    def f(x):
        val = float(func(x))
        if val < best[0]:
            best[0], best[1] = val, x.copy()
        history.append(best[0])
        return val

    def done():
        return len(history) >= budget

    simplex = [x0.copy()]
    values = [f(x0)]
    for i in range(n):
        if done():
            break
        x = x0.copy()
        x[i] += step
        simplex.append(x)
        values.append(f(x))

    converged = False
    if len(simplex) == n + 1:
        simplex = np.array(simplex)
        values = np.array(values)
        while True:
            order = np.argsort(values, kind="stable")
            simplex, values = simplex[order], values[order]
            diameter = np.max(np.abs(simplex[1:] - simplex[0]), initial=0.0)
            if diameter < xtol or values[-1] - values[0] < ftol:
                converged = True
                break
            if done():
                break

            centroid = simplex[:-1].mean(axis=0)
            xr = centroid + alpha * (centroid - simplex[-1])
            fr = f(xr)
            if values[0] <= fr < values[-2]:
                simplex[-1], values[-1] = xr, fr
                continue
            if fr < values[0]:
                if done():
                    simplex[-1], values[-1] = xr, fr
                    continue
                xe = centroid + gamma * (xr - centroid)
                fe = f(xe)
                if fe < fr:
                    simplex[-1], values[-1] = xe, fe
                else:
                    simplex[-1], values[-1] = xr, fr
                continue
            if done():
                continue
            if fr < values[-1]:
                xc = centroid + rho * (xr - centroid)
                fc = f(xc)
                if fc <= fr:
                    simplex[-1], values[-1] = xc, fc
                    continue
            else:
                xc = centroid + rho * (simplex[-1] - centroid)
                fc = f(xc)
                if fc < values[-1]:
                    simplex[-1], values[-1] = xc, fc
                    continue
            for i in range(1, n + 1):
                if done():
                    break
                simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                values[i] = f(simplex[i])

    return SimplexResult(x=best[1], fun=best[0], evaluations=len(history),
                         converged=converged, history=history)
