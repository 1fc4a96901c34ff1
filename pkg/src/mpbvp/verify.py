"""Residual measurement and an independent finite-difference oracle.

``measure_residuals`` checks a candidate solution directly against the ODE
and the boundary functional.  ``collocation_solve`` discretises the linear
BVP on a uniform grid as one global dense linear system.  It shares no
integration code with the fundamental-matrix solver, so agreement between
the two is evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnchorOffGrid
from .numkernel import lu_solve
from .problem import QUASILINEAR, BvpProblem

SAMPLES = 101
FD_STEP = 1e-5


@dataclass(frozen=True)
class ResidualSummary:
    ode_residual_max: float
    bc_residual: float
    samples: int

    def within(self, ode_tol, bc_tol):
        return self.ode_residual_max <= ode_tol and self.bc_residual <= bc_tol

    def as_dict(self):
        return {"ode_residual_max": self.ode_residual_max, "bc_residual": self.bc_residual,
                "samples": self.samples}


def _evaluate(x, ts):
    try:
        X = np.asarray(x(ts), dtype=float)
        if X.shape[0] == len(ts):
            return X.reshape(len(ts), -1)
    except (TypeError, ValueError):
        pass
    return np.array([np.asarray(x(float(t)), dtype=float).reshape(-1) for t in ts])


def _derivative(x, ts, h):
    """Central differences inside, one-sided second-order stencils at 0 and 1."""
    ts = np.asarray(ts, dtype=float)
    D = np.empty((len(ts), np.size(_evaluate(x, ts[:1]))))
    inner = (ts - h >= 0.0) & (ts + h <= 1.0)
    if np.any(inner):
        ti = ts[inner]
        D[inner] = (_evaluate(x, ti + h) - _evaluate(x, ti - h)) / (2 * h)
    left = ts - h < 0.0
    if np.any(left):
        tl = ts[left]
        D[left] = (-3 * _evaluate(x, tl) + 4 * _evaluate(x, tl + h) - _evaluate(x, tl + 2 * h)) / (2 * h)
    right = ~inner & ~left
    if np.any(right):
        tr = ts[right]
        D[right] = (3 * _evaluate(x, tr) - 4 * _evaluate(x, tr - h) + _evaluate(x, tr - 2 * h)) / (2 * h)
    return D


def boundary_residual(x, problem: BvpProblem):
    total = -problem.alpha.copy()
    for p in problem.points:
        total = total + p.F @ _evaluate(x, np.array([p.t]))[0]
    return float(np.max(np.abs(total)))


def measure_residuals(x, problem: BvpProblem, samples=SAMPLES, h=FD_STEP) -> ResidualSummary:
    """Sup-norm ODE residual on a uniform grid and the boundary residual.

    The ODE residual is ``eps*x' - A x - f`` (``eps`` = 1 when unset), with
    ``f(x(t), t)`` substituted in quasi-linear mode.
    """
    ts = np.linspace(0.0, 1.0, samples)
    X = _evaluate(x, ts)
    D = _derivative(x, ts, h)
    eps = 1.0 if problem.eps is None else problem.eps
    worst = 0.0
    for t, xv, dx in zip(ts, X, D):
        if problem.mode == QUASILINEAR:
            rhs = np.asarray(problem.f(xv, t), dtype=float)
        else:
            rhs = np.asarray(problem.f(t), dtype=float)
        r = eps * dx - np.asarray(problem.A(t), dtype=float) @ xv - rhs
        worst = max(worst, float(np.max(np.abs(r))))
    return ResidualSummary(worst, boundary_residual(x, problem), samples)


def grid_index(t, N):
    k = round(t * N)
    if abs(t * N - k) > 1e-9 * max(1, N):
        raise AnchorOffGrid(f"boundary point t={t} is not a node of the {N}-interval grid")
    return int(k)


def collocation_solve(problem: BvpProblem, N: int):
    """Second-order finite-difference solution on ``N`` uniform intervals.

    Each interval contributes the centred (trapezoidal box) equations
    ``(x_{i+1} - x_i)/h = (g_i + g_{i+1})/2`` with ``g = A x + f``; the
    boundary functional supplies the remaining n rows.  Returns
    ``(ts, X)`` with ``X`` of shape ``(N+1, n)``.

    Raises AnchorOffGrid if a boundary point is not a grid node and
    SingularMatrix if the discrete system is singular.
    """
    if problem.mode == QUASILINEAR:
        raise ValueError("collocation oracle handles linear problems only")
    if N < 10:
        raise ValueError("N must be at least 10")
    n = problem.n
    idx = [grid_index(p.t, N) for p in problem.points]
    ts = np.linspace(0.0, 1.0, N + 1)
    h = 1.0 / N
    eps = 1.0 if problem.eps is None else problem.eps
    As = [np.asarray(problem.A(t), dtype=float) / eps for t in ts]
    fs = [np.asarray(problem.f(t), dtype=float).reshape(n) / eps for t in ts]
    size = (N + 1) * n
    M = np.zeros((size, size))
    rhs = np.zeros(size)
    eye = np.eye(n)
    for i in range(N):
        r = slice(i * n, (i + 1) * n)
        M[r, i * n:(i + 1) * n] = -eye / h - 0.5 * As[i]
        M[r, (i + 1) * n:(i + 2) * n] = eye / h - 0.5 * As[i + 1]
        rhs[r] = 0.5 * (fs[i] + fs[i + 1])
    r = slice(N * n, size)
    for p, k in zip(problem.points, idx):
        M[r, k * n:(k + 1) * n] += p.F
    rhs[r] = problem.alpha
    X, _ = lu_solve(M, rhs)
    return ts, X.reshape(N + 1, n)


def oracle_difference(x, problem: BvpProblem, N: int) -> float:
    """Max node difference between evaluator ``x`` and ``collocation_solve(problem, N)``."""
    ts, X = collocation_solve(problem, N)
    return float(np.max(np.abs(_evaluate(x, ts) - X)))
