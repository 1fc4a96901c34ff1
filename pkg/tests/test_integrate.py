import math

import numpy as np
import pytest
from scipy.linalg import expm

from mpbvp.errors import StiffnessFailure
from mpbvp.integrate import (DenseOutput, anchored_integrals, fundamental_matrix, integrate_ivp)

TS = np.linspace(0.0, 1.0, 101)


def test_constant_solution():
    y = integrate_ivp(lambda t, y: np.zeros(1), 0.0, [3.0])
    assert np.all(y(TS) == 3.0)


def test_exponential():
    y = integrate_ivp(lambda t, y: y, 0.0, [1.0], rtol=1e-10)
    assert abs(y(1.0)[0] - math.e) <= 1e-8
    assert np.max(np.abs(y(TS)[:, 0] - np.exp(TS))) <= 1e-8


def test_backward_leg_from_interior_point():
    y = integrate_ivp(lambda t, y: -2 * t * y, 0.6, [1.0])
    exact = np.exp(-(TS ** 2 - 0.36))
    assert np.max(np.abs(y(TS)[:, 0] - exact)) <= 1e-9
    assert y(0.6)[0] == 1.0
    assert y.t0 == 0.0 and y.t1 == 1.0


def test_extreme_stiffness_hits_step_cap():
    with pytest.raises(StiffnessFailure) as info:
        integrate_ivp(lambda t, y: -y / 1e-12, 0.0, [1.0], max_steps=2000)
    assert 0.0 <= info.value.t < 1.0


def test_invalid_tolerances():
    with pytest.raises(ValueError):
        integrate_ivp(lambda t, y: y, 0.0, [1.0], rtol=0.1)
    with pytest.raises(ValueError):
        integrate_ivp(lambda t, y: y, 2.0, [1.0])


def test_dense_output_nodes_and_continuity():
    y = integrate_ivp(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0])
    for k, t in enumerate(y.mesh):
        assert np.array_equal(y(t), y.states[k])
    inner = y.mesh[1:-1]
    left = y(inner - 1e-13)
    right = y(inner + 1e-13)
    assert np.max(np.abs(left - right)) < 1e-11
    with pytest.raises(ValueError):
        y(1.5)


def test_halving_rtol_does_not_increase_error():
    errors = []
    for rtol in (1e-6, 5e-7, 2.5e-7, 1.25e-7):
        y = integrate_ivp(lambda t, y: np.cos(3 * t) * y, 0.0, [1.0], rtol=rtol, atol=1e-14)
        errors.append(np.max(np.abs(y(TS)[:, 0] - np.exp(np.sin(3 * TS) / 3))))
    assert all(b <= a * 1.05 for a, b in zip(errors, errors[1:]))


def test_fundamental_matrix_zero_field():
    phi = fundamental_matrix(lambda t: np.zeros((3, 3)), 3)
    assert np.array_equal(phi(0.0), np.eye(3))
    assert np.allclose(phi(TS), np.eye(3), atol=1e-15)


def test_fundamental_matrix_diagonal():
    phi = fundamental_matrix(lambda t: np.diag([-1.0, 2.0]), 2)
    assert abs(phi(1.0)[0, 0] - math.exp(-1)) <= 1e-8
    assert abs(phi(1.0)[1, 1] - math.exp(2)) <= 1e-8 * math.exp(2)


def test_fundamental_matrix_against_matrix_exponential():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    phi = fundamental_matrix(lambda t: A, 2)
    assert np.max(np.abs(phi(1.0) - expm(A))) <= 1e-9
    assert np.allclose(expm(A), [[math.cos(1), math.sin(1)], [-math.sin(1), math.cos(1)]])
    for t in (0.3, 0.7):
        assert np.max(np.abs(phi(t) - expm(A * t))) <= 1e-9


def test_fundamental_matrix_keeps_decaying_columns_accurate():
    # columns differ by e^{200}; the decaying one must stay relatively accurate
    phi = fundamental_matrix(lambda t: np.diag([-100.0, 100.0]), 2)
    assert phi(1.0)[0, 0] == pytest.approx(math.exp(-100), rel=1e-7)
    assert phi(1.0)[1, 1] == pytest.approx(math.exp(100), rel=1e-7)


def _trace_integral(A, t, k=20001):
    s = np.linspace(0.0, t, k)
    return np.trapezoid([np.trace(A(si)) for si in s], s)


def test_liouville():
    A = lambda t: np.array([[math.sin(t), 1.0, 0.0], [0.0, -t, 2.0], [1.0, 0.0, math.cos(2 * t)]])
    phi = fundamental_matrix(A, 3)
    for t in (0.25, 0.5, 1.0):
        expected = math.exp(_trace_integral(A, t))
        assert np.linalg.det(phi(t)) == pytest.approx(expected, rel=1e-6)


def test_group_property():
    A = np.array([[0.2, -1.0], [0.5, -0.3]])
    phi = fundamental_matrix(lambda t: A, 2)
    for t, s in [(0.1, 0.2), (0.3, 0.6), (0.45, 0.55)]:
        assert np.max(np.abs(phi(t + s) - phi(t) @ phi(s))) <= 1e-7


def test_anchored_integrals_zero_forcing():
    phi = fundamental_matrix(lambda t: np.array([[0.0, 1.0], [-1.0, 0.0]]), 2)
    vs = anchored_integrals(phi, lambda t: np.zeros(2), [0.0, 0.5, 1.0])
    for v in vs:
        assert np.all(v(TS) == 0.0)


def test_anchored_integral_plain_quadrature():
    phi = fundamental_matrix(lambda t: np.zeros((1, 1)), 1)
    (v,) = anchored_integrals(phi, lambda t: np.ones(1), [0.0])
    assert np.max(np.abs(v(TS)[:, 0] - TS)) <= 1e-12


def test_anchored_integral_scalar_closed_form():
    phi = fundamental_matrix(lambda t: np.ones((1, 1)), 1)
    v0, v1 = anchored_integrals(phi, lambda t: np.ones(1), [0.0, 1.0])
    assert np.max(np.abs(v0(TS)[:, 0] - (1 - np.exp(-TS)))) <= 1e-9
    assert np.max(np.abs(v1(TS)[:, 0] - (math.exp(-1) - np.exp(-TS)))) <= 1e-9
    assert v0(0.0)[0] == 0.0 and v1(1.0)[0] == 0.0


def test_reconstructed_particular_solutions_satisfy_ode():
    A = lambda t: np.array([[0.0, 1.0], [-(1 + t), -0.5]])
    f = lambda t: np.array([math.sin(t), 1.0])
    phi = fundamental_matrix(A, 2)
    h = 1e-5
    for v in anchored_integrals(phi, f, [0.0, 0.5, 1.0]):
        w = lambda t: phi(t) @ v(t)
        worst = 0.0
        for t in TS:
            if t - h < 0:
                dw = (-3 * w(t) + 4 * w(t + h) - w(t + 2 * h)) / (2 * h)
            elif t + h > 1:
                dw = (3 * w(t) - 4 * w(t - h) + w(t - 2 * h)) / (2 * h)
            else:
                dw = (w(t + h) - w(t - h)) / (2 * h)
            worst = max(worst, np.max(np.abs(dw - A(t) @ w(t) - f(t))))
        assert worst <= 1e-6


def test_anchor_validation():
    phi = fundamental_matrix(lambda t: np.zeros((1, 1)), 1)
    with pytest.raises(ValueError):
        anchored_integrals(phi, lambda t: np.ones(1), [0.5, 0.2])


def test_from_samples_interpolates_cubics_exactly():
    ts = np.linspace(0, 1, 11)
    y = ts ** 3
    dy = 3 * ts ** 2
    d = DenseOutput.from_samples(ts, y[:, None], dy[:, None], (1,))
    fine = np.linspace(0, 1, 37)
    assert np.max(np.abs(d(fine)[:, 0] - fine ** 3)) <= 1e-14
