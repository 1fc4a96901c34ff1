import numpy as np
import pytest

from mpbvp.errors import DimensionMismatch, OuterUndefined
from mpbvp.spectral import (OuterSolution, PerturbedProblem, analyze, check_conditions, epsilon_sweep,
                            layer_radii, sample_spectrum)

DIAG2 = lambda t: np.diag([-1.0, 1.0])
DIAG3 = lambda t: np.diag([-1.0, 0.5 - t, 1.0])
ROT = lambda t: np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_constant_diagonal_tracks():
    tr = sample_spectrum(DIAG2, 50)
    assert np.allclose(tr.values[:, 0], -1) and np.allclose(tr.values[:, 1], 1)


def test_rotation_tracks():
    tr = sample_spectrum(ROT, 40)
    assert np.allclose(tr.values.real, 0, atol=1e-14)
    assert np.allclose(np.abs(tr.values.imag), 1)
    rep = check_conditions(tr, [0.0, 1.0])
    assert rep["distinct"].passed
    assert not rep["integral_dichotomy"].passed


def test_interior_track_crosses_zero():
    tr = sample_spectrum(DIAG3, 200)
    mid = tr.values[:, 1].real
    assert np.allclose(mid, 0.5 - tr.grid)
    assert mid[100] == pytest.approx(0.0, abs=1e-15)


def test_tracks_follow_crossing_eigenvalues():
    # the two diagonal entries cross at t = 0.5; tracks must stay continuous
    A = lambda t: np.array([[t, 0.0], [0.0, 1.0 - t]])
    tr = sample_spectrum(A, 100)
    assert np.allclose(tr.values[:, 0], tr.grid) and np.allclose(tr.values[:, 1], 1 - tr.grid)


def test_each_grid_point_is_a_permutation_of_the_spectrum():
    A = lambda t: np.array([[np.cos(3 * t), 2.0, 0.0], [-1.0, t, 0.5], [0.0, 1.0, -2.0 + t]])
    tr = sample_spectrum(A, 60)
    for t, row in zip(tr.grid, tr.values):
        assert np.allclose(np.sort_complex(row), np.sort_complex(np.linalg.eigvals(A(t))))


def test_grid_minimum():
    with pytest.raises(ValueError):
        sample_spectrum(DIAG2, 20)


def test_diag_two_point_passes():
    rep = analyze(DIAG2, [0.0, 1.0])
    assert rep.passed and rep.failing == []
    assert rep["integral_dichotomy"].detail["worst_integral"] < 0


def test_zero_eigenvalue_fails_b():
    rep = analyze(lambda t: np.diag([0.0, 1.0]), [0.0, 1.0])
    assert not rep.passed
    assert not rep["lambda_nonzero"].passed


def test_stray_zero_of_interior_track_fails_b():
    rep = analyze(lambda t: np.diag([-1.0, 0.0, 1.0]), [0.0, 0.5, 1.0])
    assert not rep["lambda_nonzero"].passed
    assert rep["lambda_nonzero"].detail["stray_zeros"]


def test_interior_switch_passes_with_strict_integral():
    rep = analyze(DIAG3, [0.0, 0.5, 1.0])
    assert rep.passed
    # closed form: the middle integral is -(t - 0.5)^2 / 2, worst at the neighbouring grid point
    mid = rep["integral_dichotomy"].detail["per_track"][1]
    assert mid == pytest.approx(-(0.005 ** 2) / 2, rel=1e-9)


def test_wrong_interior_sign_fails_d():
    rep = analyze(lambda t: np.diag([-1.0, t - 0.5, 1.0]), [0.0, 0.5, 1.0])
    assert not rep["interior_switch"].passed
    assert not rep["integral_dichotomy"].passed


def test_endpoint_sign_failure():
    rep = analyze(lambda t: np.diag([0.5, 1.0]), [0.0, 1.0])
    assert not rep["endpoint_signs"].passed


def test_track_point_count_mismatch():
    with pytest.raises(DimensionMismatch):
        analyze(DIAG2, [0.0, 0.5, 1.0])


def test_scalar_layer_problem_passes():
    rep = analyze(lambda t: np.array([[-1.0]]), [0.0])
    assert rep.passed


def test_report_records_conventions():
    notes = " ".join(analyze(DIAG2, [0.0, 1.0]).notes)
    assert "k = 0" in notes and "t1 = 0" in notes
    assert "t1 > 0" in " ".join(analyze(DIAG2, [0.2, 1.0]).notes)


@pytest.mark.parametrize("A0,pts", [(DIAG2, [0.0, 1.0]), (DIAG3, [0.0, 0.5, 1.0]),
                                    (lambda t: np.diag([-1.0 - t, 2.0 + np.sin(t)]), [0.0, 1.0])])
def test_doubling_the_grid(A0, pts):
    coarse, fine = analyze(A0, pts, 100), analyze(A0, pts, 200)
    for c, f in zip(coarse.conditions, fine.conditions):
        assert c.passed == f.passed
        if c.name != "integral_dichotomy" and c.margin is not None:
            assert abs(f.margin - c.margin) <= 0.1 * abs(c.margin) + 1e-12


@pytest.mark.parametrize("scale", [0.01, 3.0, 250.0])
def test_positive_scaling_keeps_sign_verdicts(scale):
    for A0, pts in [(DIAG2, [0.0, 1.0]), (DIAG3, [0.0, 0.5, 1.0]), (lambda t: np.diag([0.0, 1.0]), [0.0, 1.0]),
                    (lambda t: np.diag([-1.0, t - 0.5, 1.0]), [0.0, 0.5, 1.0])]:
        base = analyze(A0, pts)
        scaled = analyze(lambda t: scale * A0(t), pts)
        for name in ("distinct", "lambda_nonzero", "endpoint_signs", "interior_switch"):
            assert base[name].passed == scaled[name].passed


# --- eps problems -------------------------------------------------------------

def layer_problem(f=lambda t, eps: np.array([t]), alpha=2.0):
    return PerturbedProblem(1, lambda t, eps: np.array([[-1.0]]), f, [(0.0, np.array([[1.0]]))],
                            np.array([alpha]))


def test_outer_solution_first_order():
    out = OuterSolution(layer_problem())
    assert out.x0(0.3)[0] == pytest.approx(0.3)
    assert out(0.3, 0.01)[0] == pytest.approx(0.3 - 0.01, abs=1e-8)
    assert OuterSolution(layer_problem(), order=0)(0.3, 0.01)[0] == pytest.approx(0.3)


def test_outer_undefined_for_singular_A0():
    p = PerturbedProblem(1, lambda t, eps: np.array([[t - 0.5]]), lambda t, eps: np.ones(1),
                         [(0.0, np.array([[1.0]]))], np.ones(1))
    with pytest.raises(OuterUndefined):
        epsilon_sweep(p, [0.1])


def test_sweep_layer_shrinks_and_refuses_tiny_eps():
    entries = epsilon_sweep(layer_problem(), [0.1, 0.05, 0.02, 0.01, 1e-5])
    radii = [e.layer_radii[0] for e in entries[:4]]
    assert all(b < a for a, b in zip(radii, radii[1:]))
    for e, eps in zip(entries[:4], [0.1, 0.05, 0.02, 0.01]):
        # a layer (2 + eps) e^{-rho/eps} falls below 1% of max|x| = 2 at rho = eps ln((2 + eps)/0.02)
        assert e.layer_radii[0] == pytest.approx(eps * np.log((2 + eps) / 0.02), abs=1e-3)
    assert entries[-1].solution is None and "EpsilonTooSmall" in entries[-1].failure
    sol = entries[3].solution
    ts = np.linspace(0.2, 1.0, 81)
    assert np.max(np.abs(sol.x(ts)[:, 0] - (ts - 0.01))) <= 1e-3
    assert abs(sol.x(0.0)[0] - 2.0) <= 1e-8 * 3


def test_zero_data_gives_zero_solution_and_radii():
    entries = epsilon_sweep(layer_problem(f=lambda t, eps: np.zeros(1), alpha=0.0), [0.1, 0.05])
    for e in entries:
        assert np.all(e.solution.x(np.linspace(0, 1, 11)) == 0.0)
        assert e.layer_radii == [0.0]


def test_layer_radii_per_anchor_cells():
    ts = np.linspace(0, 1, 2001)
    x = lambda t: np.asarray(np.exp(-np.asarray(t) / 0.01) + np.exp((np.asarray(t) - 1) / 0.02))[..., None]
    radii, _, _ = layer_radii(x, lambda t, eps: np.zeros(1), 0.01, [0.0, 1.0])
    assert radii[0] == pytest.approx(0.01 * np.log(100), abs=1e-3)
    assert radii[1] == pytest.approx(0.02 * np.log(100), abs=1e-3)
