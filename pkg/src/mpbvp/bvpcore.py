"""Linear many-point BVPs through a fundamental matrix.

For ``x' = A(t) x + f(t)`` with ``sum_j F_j x(t_j) = alpha`` the solution is

    x(t) = Phi(t) (C + sum_k P_k v_k(t)),   v_k(t) = int_{t_k}^t Phi^{-1} f ds,

where ``Phi(0) = I``, the constant split matrices ``P_k`` sum to the
identity, ``F = sum_j F_j Phi(t_j)`` and

    C = F^{-1} (alpha - sum_j F_j Phi(t_j) sum_k P_k v_k(t_j)).

The problem is uniquely solvable exactly when F is nonsingular; numerically
we require ``rcond(F) >= 1e-12``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EpsilonTooSmall, IllPosed
from .integrate import (DEFAULT_ATOL, DEFAULT_RTOL, MAX_STEPS, DenseOutput, FundamentalSolution,
                        anchored_integrals, check_square_field, fundamental_matrix)
from .numkernel import det, rcond_estimate, solve
from .problem import LINEAR, BoundaryPoint, BvpProblem, SplitScheme
from .verify import ResidualSummary, measure_residuals

logger = logging.getLogger(__name__)

RCOND_THRESHOLD = 1e-12
EPS_FLOOR = 1e-3


@dataclass(frozen=True)
class Solvability:
    unique: bool
    rcond: float
    det: float
    reason: str = ""

    def raise_if_ill_posed(self):
        if not self.unique:
            raise IllPosed(self.reason, self.rcond, self.det)


class SolutionCurve:
    """Evaluator for ``x(t) = Phi(t) (C + sum_k P_k v_k(t))``."""

    def __init__(self, phi: DenseOutput, C, terms):
        self.phi = phi
        self.C = np.asarray(C, dtype=float)
        self.terms = [(np.asarray(P, dtype=float), v) for P, v in terms]

    @property
    def n(self):
        return self.C.size

    def _coeffs(self, t):
        c = np.broadcast_to(self.C, np.shape(t) + (self.n,)).copy()
        for P, v in self.terms:
            c = c + v(t) @ P.T
        return c

    def __call__(self, t):
        Phi = self.phi(t)
        c = self._coeffs(t)
        return np.einsum("...ij,...j->...i", Phi, c)

    def derivative(self, t):
        dPhi = self.phi.derivative(t)
        Phi = self.phi(t)
        c = self._coeffs(t)
        dc = np.zeros_like(c)
        for P, v in self.terms:
            dc = dc + v.derivative(t) @ P.T
        return np.einsum("...ij,...j->...i", dPhi, c) + np.einsum("...ij,...j->...i", Phi, dc)


@dataclass
class BvpSolution:
    C: np.ndarray
    x: SolutionCurve
    F: np.ndarray
    detF: float
    rcondF: float
    det_Fj: list
    residuals: Optional[ResidualSummary] = None
    provenance: dict = field(default_factory=dict)
    fundamental: Optional[FundamentalSolution] = None

    def __call__(self, t):
        return self.x(t)

    def bc_tolerance(self, alpha):
        return 1e-8 * (1.0 + float(np.max(np.abs(alpha))))


def _phi_of(Phi):
    return Phi.phi if isinstance(Phi, FundamentalSolution) else Phi


def assemble_F(points: Sequence[BoundaryPoint], Phi):
    """``F = sum_j F_j Phi(t_j)`` together with its determinant and rcond."""
    phi = _phi_of(Phi)
    F = sum(p.F @ phi(p.t) for p in points)
    return F, det(F), rcond_estimate(F)


def check_solvability(F, detF=None, rcondF=None, threshold=RCOND_THRESHOLD) -> Solvability:
    if detF is None:
        detF = det(F)
    if rcondF is None:
        rcondF = rcond_estimate(F)
    if rcondF >= threshold:
        return Solvability(True, rcondF, detF)
    reason = "F is singular" if rcondF == 0.0 else f"rcond(F) below {threshold:g}"
    return Solvability(False, rcondF, detF, reason)


def particular_at(points, split: SplitScheme, fund: FundamentalSolution):
    """Sum of ``F_j x_p(t_j)`` for ``x_p(t) = Phi(t) sum_k P_k v_k(t)``."""
    total = np.zeros(fund.n)
    for p in points:
        coeff = np.zeros(fund.n)
        for k, P in enumerate(split.matrices):
            if fund.integrals[k] is not None:
                coeff += P @ fund.integrals[k](p.t)
        total += p.F @ (fund.phi(p.t) @ coeff)
    return total


def compute_C(F, alpha, points, split: SplitScheme, fund: FundamentalSolution):
    return solve(F, np.asarray(alpha, dtype=float) - particular_at(points, split, fund))


def scaled_coefficients(problem: BvpProblem, atol):
    """Divide through by eps: returns ``(A, f, atol)`` for ``x' = A x + f``."""
    if problem.eps is None:
        return problem.A, problem.f, atol
    eps = problem.eps
    if eps < EPS_FLOOR:
        raise EpsilonTooSmall(
            f"eps = {eps:g} is below {EPS_FLOOR:g}: explicit integration is not reliable there; "
            "use the spectral analysis of A0(t) instead")
    A, f = problem.A, problem.f
    return (lambda t: np.asarray(A(t), dtype=float) / eps,
            lambda t: np.asarray(f(t), dtype=float) / eps,
            atol * eps)


def represent(phi: DenseOutput, F, problem: BvpProblem, split: SplitScheme, g,
              rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_steps=MAX_STEPS):
    """Build the solution of ``x' = B x + g`` for the Phi (of B) and F already at hand.

    Returns ``(C, SolutionCurve, FundamentalSolution)``.
    """
    active = split.active()
    V = anchored_integrals(phi, g, [problem.times[k] for k in active], rtol, atol, max_steps)
    integrals = [None] * split.m
    for k, v in zip(active, V):
        integrals[k] = v
    fund = FundamentalSolution(phi, tuple(problem.times), tuple(integrals), rtol, atol)
    C = compute_C(F, problem.alpha, problem.points, split, fund)
    terms = [(split.matrices[k], integrals[k]) for k in active]
    return C, SolutionCurve(phi, C, terms), fund


def resolve_split(split, problem: BvpProblem) -> SplitScheme:
    if split is None or split == "default":
        return SplitScheme.default(problem.n, problem.m)
    if split == "uniform":
        return SplitScheme.uniform(problem.n, problem.m)
    if split.m != problem.m:
        raise ValueError(f"split has {split.m} matrices but the problem has {problem.m} points")
    return split


def solve_linear_bvp(problem: BvpProblem, split=None, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                     max_steps=MAX_STEPS) -> BvpSolution:
    """Solve a linear many-point BVP; raises IllPosed when F fails the rcond test.

    ``split`` is a SplitScheme, "default" (all weight on ``t_1``) or "uniform".
    """
    if problem.mode != LINEAR:
        raise ValueError("quasi-linear problems are solved by mpbvp.picard")
    split = resolve_split(split, problem)
    A, f, atol_eff = scaled_coefficients(problem, atol)
    check_square_field(A, problem.n)
    phi = fundamental_matrix(A, problem.n, rtol, atol_eff, max_steps)
    F, detF, rcondF = assemble_F(problem.points, phi)
    check_solvability(F, detF, rcondF).raise_if_ill_posed()
    C, x, fund = represent(phi, F, problem, split, f, rtol, atol_eff, max_steps)
    sol = BvpSolution(
        C=C, x=x, F=F, detF=detF, rcondF=rcondF,
        det_Fj=[det(p.F) for p in problem.points],
        provenance={"rtol": rtol, "atol": atol_eff, "split": split.name, "eps": problem.eps,
                    "mesh_steps": phi.nsteps},
        fundamental=fund,
    )
    sol.residuals = measure_residuals(x, problem)
    logger.debug("solved %s: rcond(F)=%.3e residuals=%s", problem.name, rcondF, sol.residuals)
    return sol
