"""Spectral screening and eps sweeps for singularly perturbed problems.

For ``eps x' = A(t, eps) x + f(t, eps)`` with boundary points
``t_1 < ... < t_n`` the reduced matrix ``A0(t) = A(t, 0)`` is checked for
the dichotomy structure that places exponential boundary layers at the
``t_k``:

(a) eigenvalues pairwise distinct on [0, 1];
(b) eigenvalues nonzero;
(c) ``Re l_1 <= 0`` and ``Re l_n >= 0`` on [0, 1];
(d) for k = 2..n-1, ``Re l_k >= 0`` on [0, t_k] and ``<= 0`` on [t_k, 1];
(e) ``Re int_{t_k}^t l_k(s) ds < 0`` for every t != t_k.

Track k is the k-th eigenvalue at t = 0 in (Re, Im) ascending order,
followed continuously along the grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bvpcore import BvpSolution, solve_linear_bvp
from .errors import DimensionMismatch, MpbvpError, OuterUndefined, SingularMatrix
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL
from .numkernel import eigenvalues, solve
from .problem import BoundaryPoint, BvpProblem

logger = logging.getLogger(__name__)

SIGN_TOL = 1e-10
GAP_TOL = 1e-8
INTEGRAL_TOL = 1e-12
DEFAULT_GRID = 200
LAYER_SAMPLES = 2001
LAYER_FRACTION = 0.01


@dataclass(frozen=True)
class EigenTracks:
    grid: np.ndarray
    values: np.ndarray  # (N+1, n) complex; column k is track k
    matching_cost: np.ndarray  # (N,) total pairing distance per grid step

    @property
    def n(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    margin: Optional[float]  # signed slack: >= 0 (or > 0 for strict tests) when satisfied
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {"passed": self.passed, "margin": self.margin, **self.detail}


@dataclass(frozen=True)
class SpectralReport:
    conditions: tuple
    points: tuple
    grid_size: int
    notes: tuple = ()

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failing(self):
        return [c.name for c in self.conditions if not c.passed]

    def as_dict(self):
        return {
            "passed": self.passed,
            "failing": self.failing,
            "grid_size": self.grid_size,
            "points": list(self.points),
            "conditions": {c.name: c.as_dict() for c in self.conditions},
            "notes": list(self.notes),
        }


def _order_key(z):
    return (z.real, z.imag)


def sample_spectrum(A0: Callable, N: int = DEFAULT_GRID) -> EigenTracks:
    """Eigenvalues of ``A0`` on N+1 uniform points, stitched into continuous tracks.

    Consecutive grid points are paired by the assignment minimising the
    total distance (ties resolved by index order).
    """
    if N < 21:
        raise ValueError("grid size N must be at least 21")
    grid = np.linspace(0.0, 1.0, N + 1)
    first = sorted(eigenvalues(A0(grid[0])), key=_order_key)
    values = np.empty((N + 1, len(first)), dtype=complex)
    values[0] = first
    costs = np.zeros(N)
    for i in range(1, N + 1):
        lam = eigenvalues(A0(grid[i]))
        dist = np.abs(values[i - 1][:, None] - lam[None, :])
        rows, cols = linear_sum_assignment(dist)
        values[i, rows] = lam[cols]
        costs[i - 1] = dist[rows, cols].sum()
    return EigenTracks(grid, values, costs)


def _cumulative_integral(grid, y):
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(grid))
    return out


def _integral_to(grid, y, cum, tk):
    """Trapezoid integral of the piecewise-linear ``y`` from 0 to ``tk``."""
    j = min(max(np.searchsorted(grid, tk, side="right") - 1, 0), len(grid) - 2)
    yk = np.interp(tk, grid, y)
    return cum[j] + 0.5 * (y[j] + yk) * (tk - grid[j])


def check_conditions(tracks: EigenTracks, points: Sequence[float]) -> SpectralReport:
    """Evaluate conditions (a)-(e) with track k paired to point t_k.

    Sign tests use a tolerance of 1e-10, the integral test is strict
    (< -1e-12).  An interior track must change sign at its own t_k, so
    (b) exempts that single crossing; any other zero fails (b).
    """
    pts = [float(t) for t in points]
    n = tracks.n
    if len(pts) != n:
        raise DimensionMismatch(f"{n} eigenvalue tracks but {len(pts)} boundary points")
    grid, lam = tracks.grid, tracks.values
    re = lam.real
    h = grid[1] - grid[0]
    results = []
    notes = ["series coefficients are indexed from k = 0; A0 is the eps^0 term"]
    notes.append("anchor convention: t1 = 0" if pts[0] == 0.0 else "anchor convention: t1 > 0")

    # (a) distinctness
    if n > 1:
        gaps = np.abs(lam[:, :, None] - lam[:, None, :])
        iu = np.triu_indices(n, 1)
        min_gap = float(np.min(gaps[:, iu[0], iu[1]]))
        results.append(ConditionResult("distinct", min_gap > GAP_TOL, min_gap, {"min_gap": min_gap}))
    else:
        results.append(ConditionResult("distinct", True, None, {"min_gap": None}))

    # (b) nonvanishing
    absl = np.abs(lam)
    outer_tracks = sorted({0, n - 1})
    min_abs = float(np.min(absl[:, outer_tracks]))
    stray = []
    for k in range(1, n - 1):
        for i in np.nonzero(absl[:, k] <= GAP_TOL)[0]:
            if abs(grid[i] - pts[k]) > h * (1 + 1e-9):
                stray.append((k + 1, float(grid[i])))
    ok_b = min_abs > GAP_TOL and not stray
    results.append(ConditionResult("lambda_nonzero", ok_b, min_abs,
                                   {"min_abs": min_abs, "stray_zeros": stray[:10]}))

    # (c) endpoint tracks
    if n >= 2:
        max_re1 = float(np.max(re[:, 0]))
        min_ren = float(np.min(re[:, n - 1]))
        margin = min(-max_re1, min_ren)
        results.append(ConditionResult("endpoint_signs", max_re1 <= SIGN_TOL and min_ren >= -SIGN_TOL,
                                       margin, {"max_re_first": max_re1, "min_re_last": min_ren}))
    else:
        # a single track pairs with t_1: growing strictly before it, decaying from it on
        left = re[grid < pts[0] - 1e-12, 0]
        right = re[grid >= pts[0] - 1e-12, 0]
        margin = min(np.min(left) if left.size else np.inf, -np.max(right) if right.size else np.inf)
        results.append(ConditionResult("endpoint_signs", margin >= -SIGN_TOL, float(margin), {}))
        notes.append("n = 1: the sign test is taken relative to t1")

    # (d) interior switches
    if n >= 3:
        margins = []
        for k in range(1, n - 1):
            tk = pts[k]
            before = re[grid <= tk + 1e-12, k]
            after = re[grid >= tk - 1e-12, k]
            margins.append(min(np.min(before) if before.size else np.inf,
                               -np.max(after) if after.size else np.inf))
        margin = float(min(margins))
        results.append(ConditionResult("interior_switch", margin >= -SIGN_TOL, margin,
                                       {"per_track": [float(m) for m in margins]}))
    else:
        results.append(ConditionResult("interior_switch", True, None, {"per_track": []}))

    # (e) integral dichotomy
    worst_all = -np.inf
    per_track = []
    for k in range(n):
        y = re[:, k]
        cum = _cumulative_integral(grid, y)
        ik = np.abs(grid - pts[k]) > 1e-12
        vals = cum[ik] - _integral_to(grid, y, cum, pts[k])
        worst = float(np.max(vals)) if vals.size else -np.inf
        per_track.append(worst)
        worst_all = max(worst_all, worst)
    results.append(ConditionResult("integral_dichotomy", worst_all < -INTEGRAL_TOL, float(-worst_all),
                                   {"worst_integral": float(worst_all), "per_track": per_track}))

    return SpectralReport(tuple(results), tuple(pts), len(grid) - 1, tuple(notes))


def analyze(A0: Callable, points: Sequence[float], N: int = DEFAULT_GRID) -> SpectralReport:
    return check_conditions(sample_spectrum(A0, N), points)


@dataclass
class PerturbedProblem:
    """``eps x' = A(t, eps) x + f(t, eps)`` with many-point boundary data.

    ``A`` and ``f`` already include any truncation of their eps-series.
    """

    n: int
    A: Callable[[float, float], np.ndarray]
    f: Callable[[float, float], np.ndarray]
    points: Sequence[BoundaryPoint]
    alpha: np.ndarray
    name: str = ""

    def at(self, eps: float) -> BvpProblem:
        A, f = self.A, self.f
        return BvpProblem(self.n, lambda t: A(t, eps), lambda t: f(t, eps), self.points,
                          self.alpha, eps=eps, name=self.name)

    def A0(self, t):
        return np.asarray(self.A(t, 0.0), dtype=float)

    @property
    def times(self):
        return [p.t if isinstance(p, BoundaryPoint) else float(p[0]) for p in self.points]


class OuterSolution:
    """Regular (outer) approximation ``x0 + eps x1`` of the eps-problem.

    ``A0 x0 + f0 = 0`` and ``x0' = A0 x1 + A1 x0 + f1``, where ``A1`` and
    ``f1`` are the eps-derivatives at eps = 0 (forward difference).
    ``order = 0`` keeps only ``x0``.
    """

    DEPS = 1e-7
    DT = 1e-5

    def __init__(self, problem: PerturbedProblem, order: int = 1):
        self.problem = problem
        self.order = order

    def x0(self, t):
        try:
            return -solve(self.problem.A0(t), np.asarray(self.problem.f(t, 0.0), dtype=float))
        except SingularMatrix:
            raise OuterUndefined(f"A0(t) is singular at t={t}") from None

    def __call__(self, t, eps):
        x0 = self.x0(t)
        if self.order == 0:
            return x0
        p, d, h = self.problem, self.DEPS, self.DT
        A1 = (np.asarray(p.A(t, d), dtype=float) - p.A0(t)) / d
        f1 = (np.asarray(p.f(t, d), dtype=float) - np.asarray(p.f(t, 0.0), dtype=float)) / d
        lo, hi = max(t - h, 0.0), min(t + h, 1.0)
        dx0 = (self.x0(hi) - self.x0(lo)) / (hi - lo)
        x1 = solve(p.A0(t), dx0 - A1 @ x0 - f1)
        return x0 + eps * x1


def layer_radii(x, outer, eps, anchors, samples=LAYER_SAMPLES, fraction=LAYER_FRACTION):
    """Per anchor, the smallest rho with |x - x_outer| <= fraction*|x|_inf once |t - t_k| >= rho.

    Each anchor is judged on the samples nearer to it than to any other
    anchor, so one layer does not mask another.
    """
    ts = np.linspace(0.0, 1.0, samples)
    X = np.asarray(x(ts)).reshape(samples, -1)
    O = np.array([outer(t, eps) for t in ts]).reshape(samples, -1)
    err = np.max(np.abs(X - O), axis=1)
    tol = fraction * float(np.max(np.abs(X)))
    anchors = np.asarray(anchors, dtype=float)
    owner = np.argmin(np.abs(ts[:, None] - anchors[None, :]), axis=1)
    radii = []
    for k, tk in enumerate(anchors):
        bad = (owner == k) & (err > tol)
        radii.append(float(np.max(np.abs(ts[bad] - tk))) if np.any(bad) else 0.0)
    return radii, float(np.max(err)), tol


@dataclass
class SweepEntry:
    eps: float
    solution: Optional[BvpSolution]
    failure: Optional[str]
    layer_radii: Optional[list] = None
    max_outer_error: Optional[float] = None

    def as_dict(self):
        out = {"eps": self.eps, "ok": self.solution is not None, "failure": self.failure,
               "layer_radii": self.layer_radii, "max_outer_error": self.max_outer_error}
        if self.solution is not None:
            out["C"] = self.solution.C.tolist()
            out["rcondF"] = self.solution.rcondF
            out["residuals"] = self.solution.residuals.as_dict()
        return out


def epsilon_sweep(problem: PerturbedProblem, eps_list: Sequence[float], split=None, rtol=DEFAULT_RTOL,
                  atol=DEFAULT_ATOL, outer_order: int = 1) -> list:
    """Solve the eps-problem for each eps and measure boundary-layer widths.

    Failures (refused eps, stiffness, ill-posed F) are recorded per entry
    and the sweep continues.  Raises OuterUndefined if ``A0(t)`` is
    singular on the layer sample grid.
    """
    outer = OuterSolution(problem, outer_order)
    for t in np.linspace(0.0, 1.0, LAYER_SAMPLES):
        outer.x0(t)
    entries = []
    for eps in eps_list:
        eps = float(eps)
        try:
            sol = solve_linear_bvp(problem.at(eps), split, rtol, atol)
        except MpbvpError as exc:
            logger.info("eps=%g failed: %s", eps, exc)
            entries.append(SweepEntry(eps, None, f"{type(exc).__name__}: {exc}"))
            continue
        radii, max_err, _ = layer_radii(sol.x, outer, eps, problem.times)
        entries.append(SweepEntry(eps, sol, None, radii, max_err))
    return entries
