"""Fixed-point solution of perturbed-linear and quasi-linear BVPs.

Given a "near" matrix ``B(t)`` with fundamental matrix ``Psi``, the BVP

    x' = A(t) x + f(x, t),   sum_j F_j x(t_j) = alpha

is rewritten as ``x = L x`` with

    (L x)(t) = Psi(t) C + sum_k Psi(t) P_k int_{t_k}^t Psi^{-1}(s) g(s) ds,
    g(s) = (A(s) - B(s)) x(s) + f(x(s), s),

and ``C`` re-solved from the boundary data on every application.  The
iteration is a contraction when ``A - B`` and the Lipschitz constant of
``f`` are small; we measure that empirically rather than bounding it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bvpcore import (BvpSolution, assemble_F, check_solvability, represent, resolve_split)
from .errors import Diverged, EvalError, InsufficientData, NonFiniteRHS
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, MAX_STEPS, DenseOutput, check_square_field, fundamental_matrix
from .numkernel import det
from .problem import QUASILINEAR, BvpProblem
from .verify import measure_residuals

logger = logging.getLogger(__name__)

GRID_POINTS = 201
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100
WARN_RATIO = 0.9


@dataclass
class PicardTrace:
    deltas: list = field(default_factory=list)
    converged: bool = False
    warning: str = ""

    @property
    def iterations(self):
        return len(self.deltas)

    @property
    def ratios(self):
        d = self.deltas
        return [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(d, d[1:])]

    @property
    def tail_ratio(self):
        """Largest ratio over the final five deltas: δ_{i+1} <= r δ_i holds there."""
        r = self.ratios[-4:]
        return max(r) if r else None

    def as_dict(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "deltas": list(self.deltas), "ratios": self.ratios,
                "tail_ratio": self.tail_ratio, "warning": self.warning}


def estimate_contraction(trace) -> float:
    """Geometric-mean ratio of successive deltas (needs at least three)."""
    deltas = trace.deltas if isinstance(trace, PicardTrace) else list(trace)
    if len(deltas) < 3:
        raise InsufficientData(f"need at least 3 deltas, got {len(deltas)}")
    first, last = deltas[0], deltas[-1]
    if first == 0.0:
        return 0.0
    return (last / first) ** (1.0 / (len(deltas) - 1))


def frozen_midpoint(A: Callable) -> Callable:
    """The classical near matrix: A with coefficients frozen at t = 1/2."""
    B = np.array(A(0.5), dtype=float)
    return lambda t: B


class PicardOperator:
    """The map ``x -> L x`` for a fixed problem, near matrix and split.

    Iterates live on a uniform working grid of 201 points as cubic Hermite
    grid functions (values and derivatives sampled from ``L x``).
    """

    def __init__(self, problem: BvpProblem, B: Optional[Callable] = None, split=None,
                 rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_steps=MAX_STEPS, grid_points=GRID_POINTS):
        if problem.eps is not None:
            raise ValueError("fixed-point solver does not handle eps-scaled problems")
        self.problem = problem
        self.B = B if B is not None else frozen_midpoint(problem.A)
        self.split = resolve_split(split, problem)
        self.rtol, self.atol, self.max_steps = rtol, atol, max_steps
        self.grid = np.linspace(0.0, 1.0, grid_points)
        check_square_field(self.B, problem.n)
        self.psi = fundamental_matrix(self.B, problem.n, rtol, atol, max_steps)
        self.F0, self.detF0, self.rcondF0 = assemble_F(problem.points, self.psi)
        check_solvability(self.F0, self.detF0, self.rcondF0).raise_if_ill_posed()

    def rhs(self, x: Optional[DenseOutput]) -> Callable:
        """g(t) = (A - B) x + f for the frozen iterate ``x`` (None means x = 0)."""
        p, n = self.problem, self.problem.n
        quasi = p.mode == QUASILINEAR

        def g(t):
            xv = np.zeros(n) if x is None else x(t)
            try:
                forcing = p.f(xv, t) if quasi else p.f(t)
                out = (np.asarray(p.A(t), dtype=float) - np.asarray(self.B(t), dtype=float)) @ xv \
                    + np.asarray(forcing, dtype=float)
            except (EvalError, OverflowError, FloatingPointError) as exc:
                raise NonFiniteRHS(f"right-hand side failed at t={t}: {exc}") from None
            if not np.all(np.isfinite(out)):
                raise NonFiniteRHS(f"non-finite right-hand side at t={t}")
            return out

        return g

    def apply(self, x: Optional[DenseOutput]):
        """Return ``(C, curve, grid_function)`` for ``L x``."""
        C, curve, _ = represent(self.psi, self.F0, self.problem, self.split, self.rhs(x),
                                self.rtol, self.atol, self.max_steps)
        values = curve(self.grid)
        if not np.all(np.isfinite(values)):
            raise NonFiniteRHS("iterate became non-finite")
        grid_fn = DenseOutput.from_samples(self.grid, values, curve.derivative(self.grid), (self.problem.n,))
        return C, curve, grid_fn

    def iterate(self, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        trace = PicardTrace()
        C, curve, current = self.apply(None)
        growing = 0
        for _ in range(max_iter):
            C, curve, nxt = self.apply(current)
            delta = float(np.max(np.abs(nxt.states - current.states)))
            trace.deltas.append(delta)
            current = nxt
            if delta <= tol:
                trace.converged = True
                break
            if len(trace.deltas) >= 2:
                prev = trace.deltas[-2]
                growing = growing + 1 if delta >= prev else 0
                if growing >= 3:
                    raise Diverged("successive deltas failed to shrink for 3 iterations", trace)
        if not trace.converged:
            raise Diverged(f"no convergence to {tol:g} within {max_iter} iterations", trace)
        if len(trace.deltas) >= 3:
            r = estimate_contraction(trace)
            if r > WARN_RATIO:
                trace.warning = f"weak contraction: estimated ratio {r:.3f}"
        return C, curve, current, trace


def _solution(op: PicardOperator, C, curve, trace) -> BvpSolution:
    p = op.problem
    sol = BvpSolution(
        C=C, x=curve, F=op.F0, detF=op.detF0, rcondF=op.rcondF0,
        det_Fj=[det(pt.F) for pt in p.points],
        provenance={"method": "picard", "rtol": op.rtol, "atol": op.atol, "split": op.split.name,
                    "iterations": trace.iterations, "tail_ratio": trace.tail_ratio},
    )
    sol.residuals = measure_residuals(curve, p)
    return sol


def picard_solve_near(problem: BvpProblem, B: Optional[Callable] = None, split=None, tol=DEFAULT_TOL,
                      max_iter=DEFAULT_MAX_ITER, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Solve a linear BVP by iterating L built on the near matrix ``B``.

    Returns ``(BvpSolution, PicardTrace)``; raises IllPosed if
    ``F0 = sum_j F_j Psi(t_j)`` fails the rcond test and Diverged if the
    deltas stop shrinking.
    """
    if problem.mode == QUASILINEAR:
        raise ValueError("use picard_solve_quasilinear for f(x, t)")
    op = PicardOperator(problem, B, split, rtol, atol)
    C, curve, _, trace = op.iterate(tol, max_iter)
    return _solution(op, C, curve, trace), trace


def picard_solve_quasilinear(problem: BvpProblem, B: Optional[Callable] = None, split=None, tol=DEFAULT_TOL,
                             max_iter=DEFAULT_MAX_ITER, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Solve ``x' = A x + f(x, t)`` by the same iteration with ``f`` re-evaluated on each iterate.

    Convergence of the iterates is necessary but not sufficient: the caller
    should check ``solution.residuals`` (measured against the original
    nonlinear ODE) before accepting the result.
    """
    if problem.mode != QUASILINEAR:
        problem = problem.with_rhs(lambda x, t, f=problem.f: f(t), mode=QUASILINEAR)
    op = PicardOperator(problem, B, split, rtol, atol)
    C, curve, _, trace = op.iterate(tol, max_iter)
    return _solution(op, C, curve, trace), trace
