import math

import numpy as np
import pytest

from mpbvp.bvpcore import solve_linear_bvp
from mpbvp.errors import Diverged, IllPosed, InsufficientData, NonFiniteRHS
from mpbvp.picard import (PicardOperator, PicardTrace, estimate_contraction, frozen_midpoint,
                          picard_solve_near, picard_solve_quasilinear)
from mpbvp.problem import QUASILINEAR, BvpProblem

TS = np.linspace(0.0, 1.0, 101)


def two_point(a=1.0, f=1.0):
    return BvpProblem(1, lambda t: np.array([[a]]), lambda t: np.array([f]),
                      [(0.0, [[1.0]]), (1.0, [[1.0]])], np.array([0.0]))


def sin_problem():
    return BvpProblem(1, lambda t: np.array([[-1.0]]), lambda x, t: np.array([0.1 * math.sin(x[0]) + 1.0]),
                      [(0.0, [[1.0]]), (1.0, [[1.0]])], np.array([1.0]), mode=QUASILINEAR)


@pytest.mark.parametrize("deltas,expected", [([1e-1, 1e-2, 1e-3], 0.1), ([1.0, 1.0, 1.0], 1.0)])
def test_estimate_contraction(deltas, expected):
    assert estimate_contraction(deltas) == pytest.approx(expected)
    assert estimate_contraction(PicardTrace(deltas)) == pytest.approx(expected)


def test_estimate_contraction_needs_three():
    with pytest.raises(InsufficientData):
        estimate_contraction([1.0, 0.5])


def test_exact_near_matrix_converges_at_once():
    p = two_point()
    sol, trace = picard_solve_near(p, B=p.A)
    assert trace.converged and trace.iterations == 1 and trace.deltas[0] <= 1e-10
    assert np.max(np.abs(sol.x(TS) - solve_linear_bvp(p).x(TS))) <= 1e-9


def test_nearby_matrix_matches_direct_solve():
    p = two_point()
    sol, trace = picard_solve_near(p, B=lambda t: np.array([[0.9]]))
    direct = solve_linear_bvp(p)
    assert trace.converged
    assert np.max(np.abs(sol.x(TS) - direct.x(TS))) <= 1e-7
    r = estimate_contraction(trace)
    assert r < 1.0
    assert not trace.warning


def test_monotone_tail():
    _, trace = picard_solve_near(two_point(), B=lambda t: np.array([[0.8]]))
    tail = trace.deltas[-5:]
    r = trace.tail_ratio
    assert r < 1.0
    assert all(b <= r * a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))


def test_far_matrix_is_reported():
    p = two_point()
    try:
        _, trace = picard_solve_near(p, B=lambda t: np.array([[-5.0]]))
    except Diverged as exc:
        assert exc.trace is not None and not exc.trace.converged
    else:
        assert trace.warning and estimate_contraction(trace) > 0.9


def test_ill_posed_base_problem():
    # B = 0 makes F0 = F1 + F2 = 0 for x(0) - x(1) = 0
    p = BvpProblem(1, lambda t: np.array([[1.0]]), lambda t: np.array([1.0]),
                   [(0.0, [[1.0]]), (1.0, [[-1.0]])], np.array([0.0]))
    with pytest.raises(IllPosed):
        picard_solve_near(p, B=lambda t: np.zeros((1, 1)))


def test_fixed_point_residual():
    p = two_point()
    op = PicardOperator(p, B=lambda t: np.array([[0.9]]))
    tol = 1e-10
    _, _, current, trace = op.iterate(tol=tol)
    _, _, again = op.apply(current)
    assert np.max(np.abs(again.states - current.states)) <= 2 * tol


def test_degenerate_quasilinear_matches_linear():
    p = two_point()
    q = p.with_rhs(lambda x, t: np.array([1.0]), mode=QUASILINEAR)
    sol, trace = picard_solve_quasilinear(q)
    assert np.max(np.abs(sol.x(TS) - solve_linear_bvp(p).x(TS))) <= 1e-10


def test_sine_nonlinearity_converges_with_small_residual():
    sol, trace = picard_solve_quasilinear(sin_problem(), B=lambda t: np.array([[-1.0]]))
    assert trace.converged
    assert sol.residuals.ode_residual_max <= 1e-7
    assert sol.residuals.bc_residual <= 1e-8 * 2
    assert estimate_contraction(trace) < 0.2


def test_blow_up_is_detected():
    p = BvpProblem(1, lambda t: np.zeros((1, 1)), lambda x, t: np.array([x[0] ** 2]),
                   [(0.0, [[1.0]])], np.array([1.0]), mode=QUASILINEAR)
    with pytest.raises((Diverged, NonFiniteRHS)):
        picard_solve_quasilinear(p, B=lambda t: np.zeros((1, 1)))


def test_frozen_midpoint():
    B = frozen_midpoint(lambda t: np.array([[t]]))
    assert B(0.0)[0, 0] == 0.5 and B(1.0)[0, 0] == 0.5


def test_eps_problems_not_supported():
    p = BvpProblem(1, lambda t: np.array([[-1.0]]), lambda t: np.zeros(1), [(0.0, [[1.0]])],
                   np.ones(1), eps=0.1)
    with pytest.raises(ValueError):
        picard_solve_near(p)
