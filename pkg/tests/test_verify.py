import math

import numpy as np
import pytest

from conftest import REGULAR_LINEAR, corpus_problem
from mpbvp.bvpcore import solve_linear_bvp
from mpbvp.errors import AnchorOffGrid
from mpbvp.problem import QUASILINEAR, BvpProblem
from mpbvp.verify import collocation_solve, grid_index, measure_residuals, oracle_difference


def scalar(a, f, points, alpha):
    return BvpProblem(1, lambda t: np.array([[a]]), lambda t: np.array([f]),
                      [(t, [[F]]) for t, F in points], np.array([alpha], dtype=float))


def test_collocation_constant():
    ts, X = collocation_solve(scalar(0.0, 0.0, [(0.0, 1.0)], 1.0), 10)
    assert len(ts) == 11 and np.allclose(X, 1.0, atol=1e-14)


def test_collocation_exponential():
    _, X = collocation_solve(scalar(1.0, 0.0, [(0.0, 1.0)], 1.0), 400)
    assert abs(X[-1, 0] - math.e) <= 5e-5


def test_collocation_two_point():
    ts, X = collocation_solve(scalar(1.0, 1.0, [(0.0, 1.0), (1.0, 1.0)], 0.0), 400)
    exact = 2 / (1 + math.e) * np.exp(ts) - 1
    assert np.max(np.abs(X[:, 0] - exact)) <= 5e-5


def test_collocation_is_second_order():
    p = scalar(1.0, 1.0, [(0.0, 1.0), (1.0, 1.0)], 0.0)
    errs = []
    for N in (100, 200, 400):
        ts, X = collocation_solve(p, N)
        errs.append(np.max(np.abs(X[:, 0] - (2 / (1 + math.e) * np.exp(ts) - 1))))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


def test_anchor_off_grid():
    p = scalar(1.0, 0.0, [(0.0, 1.0), (1 / 3, 1.0)], 1.0)
    with pytest.raises(AnchorOffGrid):
        collocation_solve(p, 100)
    assert grid_index(0.5, 400) == 200


def test_collocation_rejects_small_grid_and_quasilinear():
    with pytest.raises(ValueError):
        collocation_solve(scalar(1.0, 0.0, [(0.0, 1.0)], 1.0), 5)
    q = BvpProblem(1, lambda t: np.eye(1), lambda x, t: x, [(0.0, np.eye(1))], np.ones(1), mode=QUASILINEAR)
    with pytest.raises(ValueError):
        collocation_solve(q, 50)


def test_residual_of_exact_constant():
    r = measure_residuals(lambda t: np.ones((np.size(t), 1)) if np.ndim(t) else np.ones(1),
                          scalar(0.0, 0.0, [(0.0, 1.0)], 1.0))
    assert r.ode_residual_max <= 1e-10 and r.bc_residual == 0.0 and r.samples == 101


def test_residual_of_exponential():
    r = measure_residuals(lambda t: np.exp(np.asarray(t))[..., None], scalar(1.0, 0.0, [(0.0, 1.0)], 1.0))
    assert r.ode_residual_max <= 1e-9
    assert r.bc_residual <= 1e-15


def test_residual_of_wrong_solution():
    r = measure_residuals(lambda t: np.asarray(t, dtype=float)[..., None], scalar(1.0, 0.0, [(0.0, 1.0)], 0.0))
    assert r.ode_residual_max == pytest.approx(1.0, abs=1e-6)


def test_residual_evaluator_without_vectorisation():
    def x(t):
        if np.ndim(t):
            raise TypeError("scalar evaluator")
        return np.array([math.exp(t)])

    r = measure_residuals(x, scalar(1.0, 0.0, [(0.0, 1.0)], 1.0))
    assert r.ode_residual_max <= 1e-9


def test_quasilinear_residual_uses_state():
    q = BvpProblem(1, lambda t: np.zeros((1, 1)), lambda x, t: x, [(0.0, np.eye(1))], np.ones(1), mode=QUASILINEAR)
    r = measure_residuals(lambda t: np.exp(np.asarray(t))[..., None], q)
    assert r.ode_residual_max <= 1e-9


@pytest.mark.parametrize("name", REGULAR_LINEAR)
def test_oracle_agreement_on_corpus(name):
    p = corpus_problem(name)
    sol = solve_linear_bvp(p)
    d400 = oracle_difference(sol.x, p, 400)
    d800 = oracle_difference(sol.x, p, 800)
    assert d400 <= 1e-4
    assert 3.0 <= d400 / d800 <= 5.0
