"""Deterministic full-batch L-BFGS with a backtracking Armijo line search."""

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class SolverResult:
    x: np.ndarray
    fun: float
    grad_norm: float  # sup-norm of the final gradient
    iterations: int
    converged: bool
    reason: str


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs(fun, x0, grad_tol=1e-4, tol=1e-6, max_iter=1000, memory=10,
          c1=1e-4, max_backtracks=60):
    """Minimize ``fun`` (returning ``(value, gradient)``) from ``x0``.

    Stops as soon as the gradient sup-norm is <= ``grad_tol`` or one
    iteration lowers the objective by a relative amount <= ``tol``.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    pairs = deque(maxlen=memory)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0

    for it in range(max_iter):
        if gnorm <= grad_tol:
            return SolverResult(x, f, gnorm, it, True, "gradient")

        d = _two_loop(g, pairs)
        slope = g @ d
        if not slope < 0:
            pairs.clear()
            d = -g
            slope = -(g @ g)
        step = 1.0 if pairs else min(1.0, 1.0 / gnorm)

        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
                break
            if np.isfinite(f_new):
                # minimizer of the quadratic through f, slope and f_new, kept in [0.1, 0.5] * step
                denom = 2.0 * (f_new - f - slope * step)
                trial = -slope * step * step / denom if denom > 0 else 0.5 * step
                step = min(max(trial, 0.1 * step), 0.5 * step)
            else:
                step *= 0.5
        else:
            return SolverResult(x, f, gnorm, it, gnorm <= grad_tol, "line_search")

        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.sqrt((s @ s) * (y @ y)):
            pairs.append((s, y, 1.0 / sy))

        decrease = (f - f_new) / max(abs(f), np.finfo(float).tiny)
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= grad_tol:
            return SolverResult(x, f, gnorm, it + 1, True, "gradient")
        if decrease <= tol:
            return SolverResult(x, f, gnorm, it + 1, True, "objective")

    return SolverResult(x, f, gnorm, max_iter, gnorm <= grad_tol, "max_iter")
