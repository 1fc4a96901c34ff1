"""Adaptive Dormand-Prince 5(4) integration with cubic Hermite dense output.

Besides the generic IVP driver this module builds the two ingredients of
the fundamental-matrix representation of a linear BVP:

* ``Phi(t)``, the fundamental matrix normalised by ``Phi(0) = I``;
* ``v_k(t) = int_{t_k}^t Phi(s)^{-1} f(s) ds`` for each anchor ``t_k``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, StiffnessFailure
from .numkernel import solve

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
MAX_STEPS = 1_000_000
MIN_STEP = 1e-14

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A = [np.array(row) for row in _A]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# Dormand-Prince continuous extension: y(t + th*h) = y + h * K.T @ (_P @ [th, th^2, th^3, th^4])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])
_MID_WEIGHTS = _P @ np.array([0.5, 0.25, 0.125, 0.0625])


class DenseOutput:
    """Piecewise cubic Hermite interpolant through (mesh, states, derivs).

    Values have shape ``shape`` (a vector or a matrix flattened row-major
    in storage).  Evaluation at a mesh node returns the stored state.
    """

    def __init__(self, mesh, states, derivs, shape=None):
        self.mesh = np.asarray(mesh, dtype=float)
        self.states = np.asarray(states, dtype=float).reshape(len(self.mesh), -1)
        self.derivs = np.asarray(derivs, dtype=float).reshape(len(self.mesh), -1)
        self.shape = tuple(shape) if shape is not None else (self.states.shape[1],)
        if len(self.mesh) < 2:
            raise ValueError("dense output needs at least two mesh points")
        if np.any(np.diff(self.mesh) <= 0):
            raise ValueError("mesh must be strictly increasing")
        self._mesh_list = self.mesh.tolist()

    @classmethod
    def from_samples(cls, mesh, states, derivs, shape=None):
        return cls(mesh, states, derivs, shape)

    @property
    def t0(self):
        return self.mesh[0]

    @property
    def t1(self):
        return self.mesh[-1]

    @property
    def nsteps(self):
        return len(self.mesh) - 1

    def _scalar_index(self, t):
        mesh = self._mesh_list
        lo, hi = mesh[0], mesh[-1]
        slack = 1e-12 * max(1.0, hi - lo)
        if not lo - slack <= t <= hi + slack:
            raise ValueError(f"t outside [{lo}, {hi}]")
        i = min(max(bisect.bisect_right(mesh, t) - 1, 0), len(mesh) - 2)
        h = mesh[i + 1] - mesh[i]
        return i, h, (t - mesh[i]) / h

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        span = self.mesh[-1] - self.mesh[0]
        slack = 1e-12 * max(1.0, span)
        if np.any(t < self.mesh[0] - slack) or np.any(t > self.mesh[-1] + slack):
            raise ValueError(f"t outside [{self.mesh[0]}, {self.mesh[-1]}]")
        i = np.searchsorted(self.mesh, t, side="right") - 1
        i = np.clip(i, 0, len(self.mesh) - 2)
        h = self.mesh[i + 1] - self.mesh[i]
        theta = (t - self.mesh[i]) / h
        return t, i, h, theta

    def _out(self, t, flat):
        if np.ndim(t) == 0:
            return flat.reshape(self.shape)
        return flat.reshape(np.shape(t) + self.shape)

    def __call__(self, t):
        # Hermite form anchored at the nearer node: constants and node values are reproduced exactly
        if isinstance(t, (float, int)):
            i, h, th = self._scalar_index(float(t))
            th2 = th * th
            th3 = th2 * th
            y0, y1 = self.states[i], self.states[i + 1]
            slope = (th3 - 2 * th2 + th) * h * self.derivs[i] + (th3 - th2) * h * self.derivs[i + 1]
            if th <= 0.5:
                y = y0 + (3 * th2 - 2 * th3) * (y1 - y0) + slope
            else:
                y = y1 + (2 * th3 - 3 * th2 + 1) * (y0 - y1) + slope
            return y.reshape(self.shape)
        t, i, h, th = self._locate(t)
        th = th[..., None]
        hh = h[..., None]
        th2 = th * th
        th3 = th2 * th
        h00 = 2 * th3 - 3 * th2 + 1
        h10 = th3 - 2 * th2 + th
        h01 = -2 * th3 + 3 * th2
        h11 = th3 - th2
        y0, y1 = self.states[i], self.states[i + 1]
        slope = h10 * hh * self.derivs[i] + h11 * hh * self.derivs[i + 1]
        y = np.where(th <= 0.5, y0 + h01 * (y1 - y0), y1 + h00 * (y0 - y1)) + slope
        return self._out(t, y)

    def derivative(self, t):
        t, i, h, th = self._locate(t)
        th = th[..., None]
        hh = h[..., None]
        th2 = th * th
        d00 = (6 * th2 - 6 * th) / hh
        d10 = 3 * th2 - 4 * th + 1
        d01 = (-6 * th2 + 6 * th) / hh
        d11 = 3 * th2 - 2 * th
        dy = (d00 * self.states[i] + d10 * self.derivs[i]
              + d01 * self.states[i + 1] + d11 * self.derivs[i + 1])
        return self._out(t, dy)


def _initial_step(fun, t, y, f0, direction_len, rtol, atol, scale_fn, t_real):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = scale_fn(y, y, t_real)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_len)
    y1 = y + h0 * f0
    f1 = fun(t + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_len)


def _step_factor(err, err_mid):
    # step error is O(h^5), Hermite interpolation error O(h^4)
    f1 = 10.0 if err == 0.0 else 0.9 * err ** -0.2
    f2 = 10.0 if err_mid == 0.0 else 0.9 * err_mid ** -0.25
    return min(10.0, max(0.2, min(f1, f2)))


def _leg(fun, t0, y0, length, rtol, atol, max_steps, scale_fn, to_time=lambda s: s):
    """Integrate dy/ds = fun(s, y) from s = t0 to t0 + length (length >= 0).

    ``to_time`` maps the leg variable back to the caller's time, which is
    what ``scale_fn(y_old, y_new, t)`` receives.
    """
    t_end = t0 + length
    y = y0.copy()
    f = fun(t0, y)
    ts, ys, fs = [t0], [y.copy()], [f.copy()]
    if length == 0.0:
        return ts, ys, fs
    h = _initial_step(fun, t0, y, f, length, rtol, atol, scale_fn, to_time(t0))
    t = t0
    K = np.empty((7, y.size))
    steps = 0
    rejected_last = False
    while t < t_end:
        if steps >= max_steps:
            raise StiffnessFailure(f"step cap of {max_steps} reached", t)
        if h < MIN_STEP * max(1.0, abs(t)):
            raise StiffnessFailure("step size underflow", t)
        last = t + h >= t_end
        if last:
            h = t_end - t
        K[0] = f
        for s in range(1, 7):
            ys_ = y + h * (_A[s] @ K[:s])
            K[s] = fun(t + _C[s] * h, ys_)
        y_new = ys_  # row 6 of the tableau equals the 5th-order weights (FSAL)
        f_new = K[6].copy()
        scale = scale_fn(y, y_new, to_time(t + h))
        err = np.max(np.abs(h * (_E @ K)) / scale)
        # the cubic Hermite interpolant must meet the same tolerance as the step
        hermite_mid = 0.5 * (y + y_new) + 0.125 * h * (f - f_new)
        err_mid = np.max(np.abs(hermite_mid - (y + h * (_MID_WEIGHTS @ K))) / scale)
        steps += 1
        if err <= 1.0 and err_mid <= 1.0:
            t = t_end if last else t + h
            y, f = y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f.copy())
            factor = _step_factor(err, err_mid)
            if rejected_last:
                factor = min(factor, 1.0)
            h *= factor
            rejected_last = False
        else:
            h *= min(_step_factor(err, err_mid), 0.9)
            rejected_last = True
    return ts, ys, fs


def _componentwise_scale(rtol, atol):
    def scale(y_old, y_new, t=None):
        return atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return scale


def integrate_ivp(field: Callable, t0: float, y0, tspan=(0.0, 1.0), rtol=DEFAULT_RTOL,
                  atol=DEFAULT_ATOL, max_steps=MAX_STEPS, error_scale=None) -> DenseOutput:
    """Solve ``y' = field(t, y)``, ``y(t0) = y0`` over ``tspan`` with dense output.

    When ``t0`` is interior the interval is covered by a forward and a
    backward leg; the backward leg integrates ``z(tau) = y(t0 - tau)`` so
    both legs use the same forward stepping code.  The local error of each
    accepted step satisfies ``|err_i| <= atol + rtol*|y_i|`` unless a
    custom ``error_scale(y_old, y_new, t)`` (flat arrays, ``t`` the end of the
    step) is supplied.

    Raises StiffnessFailure when the step size underflows or a leg needs
    more than ``max_steps`` attempted steps.
    """
    a, b = float(tspan[0]), float(tspan[1])
    t0 = float(t0)
    if not a <= t0 <= b:
        raise ValueError(f"t0 = {t0} outside tspan [{a}, {b}]")
    if not (0.0 < rtol <= 1e-2) or atol < 0.0:
        raise ValueError("rtol must lie in (0, 1e-2] and atol must be non-negative")
    y0 = np.asarray(y0, dtype=float)
    shape = y0.shape if y0.ndim else (1,)
    flat0 = y0.reshape(-1).copy()
    scale_fn = error_scale or _componentwise_scale(rtol, atol)

    def fwd(t, y):
        return np.asarray(field(t, y.reshape(shape)), dtype=float).reshape(-1)

    def bwd(tau, z):
        return -np.asarray(field(t0 - tau, z.reshape(shape)), dtype=float).reshape(-1)

    ts, ys, fs = _leg(fwd, t0, flat0, b - t0, rtol, atol, max_steps, scale_fn)
    if t0 > a:
        taus, zs, gs = _leg(bwd, 0.0, flat0, t0 - a, rtol, atol, max_steps, scale_fn, lambda tau: t0 - tau)
        back_t = [t0 - tau for tau in taus[:0:-1]]
        if back_t:
            back_t[0] = a
        ts = back_t + ts
        ys = zs[:0:-1] + ys
        fs = [-g for g in gs[:0:-1]] + fs
    return DenseOutput(ts, np.array(ys), np.array(fs), shape)


def fundamental_matrix(A: Callable, n: int, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                       max_steps=MAX_STEPS) -> DenseOutput:
    """Integrate ``Phi' = A(t) Phi`` on [0, 1] from ``Phi(0) = I``.

    All n*n entries form one coupled system.  Error control is relative to
    the max-norm of each column: columns are independent solutions whose
    magnitudes can differ by many orders (boundary layers), so a shared
    absolute floor would wipe out the decaying ones.  ``atol`` only guards
    against a column norm of exactly zero, which cannot happen for a
    nonsingular Phi.
    """

    def field(t, Y):
        return np.asarray(A(t), dtype=float) @ Y

    def scale(y_old, y_new, t=None):
        Y0 = y_old.reshape(n, n)
        Y1 = y_new.reshape(n, n)
        col = np.maximum(np.max(np.abs(Y0), axis=0), np.max(np.abs(Y1), axis=0))
        col = np.maximum(col, np.finfo(float).tiny)
        return rtol * np.broadcast_to(col, (n, n)).reshape(-1)

    return integrate_ivp(field, 0.0, np.eye(n), (0.0, 1.0), rtol, atol, max_steps, error_scale=scale)


def anchored_integrals(Phi: DenseOutput, f: Callable, anchors: Sequence[float], rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL, max_steps=MAX_STEPS) -> list[DenseOutput]:
    """For each anchor ``t_k`` return ``v_k`` with ``v_k' = Phi^{-1} f``, ``v_k(t_k) = 0``.

    The absolute tolerance on ``v_k[i]`` is divided by the size of column
    ``i`` of ``Phi(t)``, so the error budget applies to its contribution
    ``Phi v_k`` to the solution rather than to ``v_k`` itself.

    ``Phi(t)^{-1} f(t)`` comes from an LU solve against the interpolated
    ``Phi(t)`` at every stage; no inverse-matrix ODE is integrated.
    """
    anchors = [float(t) for t in anchors]
    if any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise ValueError("anchors must be strictly increasing")
    if anchors and (anchors[0] < Phi.t0 or anchors[-1] > Phi.t1):
        raise ValueError("anchors must lie inside the dense output interval")
    n = Phi.shape[0]
    tiny = np.finfo(float).tiny

    def field(t, v):
        return solve(Phi(t), np.asarray(f(t), dtype=float).reshape(n))

    def scale(v_old, v_new, t):
        # v_i enters the solution multiplied by column i of Phi(t)
        col = np.maximum(np.max(np.abs(Phi(t)), axis=0), tiny)
        return rtol * np.maximum(np.abs(v_old), np.abs(v_new)) + atol / col

    return [integrate_ivp(field, tk, np.zeros(n), (Phi.t0, Phi.t1), rtol, atol, max_steps, error_scale=scale)
            for tk in anchors]


@dataclass(frozen=True)
class FundamentalSolution:
    """``Phi`` with ``Phi(0) = I`` plus anchored integrals ``v_k`` (None where unused)."""

    phi: DenseOutput
    anchors: tuple
    integrals: tuple
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    extra: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.phi.shape[0]

    def v(self, k, t):
        vk = self.integrals[k]
        if vk is None:
            return np.zeros(np.shape(t) + (self.n,))
        return vk(t)


def check_square_field(A, n, t=0.0):
    M = np.asarray(A(t), dtype=float)
    if M.shape != (n, n):
        raise DimensionMismatch(f"A(t) has shape {M.shape}, expected {(n, n)}")
    return M
