"""Problem and split-scheme data types."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch

LINEAR = "linear"
QUASILINEAR = "quasilinear"


@dataclass(frozen=True)
class BoundaryPoint:
    t: float
    F: np.ndarray


@dataclass
class BvpProblem:
    """``eps x' = A(t) x + f``,  ``sum_j F_j x(t_j) = alpha`` on [0, 1].

    ``f`` is ``f(t)`` in linear mode and ``f(x, t)`` in quasi-linear mode.
    ``eps`` is None for the unscaled problem (equivalently eps = 1).

    Points must be strictly increasing in [0, 1].  A single point is the
    Cauchy (initial value) case.
    """

    n: int
    A: Callable[[float], np.ndarray]
    f: Callable
    points: Sequence[BoundaryPoint]
    alpha: np.ndarray
    mode: str = LINEAR
    eps: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        pts = []
        for p in self.points:
            if not isinstance(p, BoundaryPoint):
                p = BoundaryPoint(float(p[0]), p[1])
            F = np.asarray(p.F, dtype=float)
            if F.shape != (self.n, self.n):
                raise DimensionMismatch(f"F at t={p.t} has shape {F.shape}, expected {(self.n, self.n)}")
            pts.append(BoundaryPoint(float(p.t), F))
        self.points = tuple(pts)
        if not self.points:
            raise ValueError("at least one boundary point is required")
        if self.alpha.shape != (self.n,):
            raise DimensionMismatch(f"alpha has length {self.alpha.size}, expected {self.n}")
        ts = self.times
        if ts[0] < 0.0 or ts[-1] > 1.0:
            raise ValueError("boundary points must lie in [0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("boundary points must be strictly increasing")
        if self.mode not in (LINEAR, QUASILINEAR):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.eps is not None and not self.eps > 0.0:
            raise ValueError("eps must be positive")

    @property
    def m(self):
        return len(self.points)

    @property
    def times(self):
        return [p.t for p in self.points]

    @property
    def Fs(self):
        return [p.F for p in self.points]

    def with_rhs(self, f, alpha=None, mode=None):
        return BvpProblem(self.n, self.A, f, self.points,
                          self.alpha if alpha is None else alpha,
                          mode or self.mode, self.eps, self.name)


def _is_exact(P):
    arr = np.asarray(P)
    if arr.dtype.kind in "iub":
        return True
    return arr.dtype == object and all(isinstance(v, (int, Fraction)) for v in arr.flat)


@dataclass(frozen=True)
class SplitScheme:
    """Constant matrices ``P_1..P_m`` summing to the identity.

    ``Phi_k = Phi P_k`` then satisfies ``Phi_k' = A Phi_k`` and
    ``sum_k Phi_k = Phi``.  Integer or Fraction entries are checked
    exactly; float entries to 1e-14.
    """

    P: tuple
    name: str = "custom"
    _float: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mats = tuple(np.asarray(p) for p in self.P)
        if not mats:
            raise ValueError("split needs at least one matrix")
        n = mats[0].shape[0]
        for p in mats:
            if p.shape != (n, n):
                raise DimensionMismatch("split matrices must all be n x n")
        if all(_is_exact(p) for p in mats):
            total = sum(np.asarray(p, dtype=object) for p in mats)
            eye = np.eye(n, dtype=int).astype(object)
            if not np.all(total == eye):
                raise ValueError("split matrices do not sum to the identity")
        else:
            total = sum(np.asarray(p, dtype=float) for p in mats)
            if np.max(np.abs(total - np.eye(n))) > 1e-14:
                raise ValueError("split matrices do not sum to the identity (tol 1e-14)")
        object.__setattr__(self, "P", mats)
        object.__setattr__(self, "_float", tuple(np.asarray(p, dtype=float) for p in mats))

    @property
    def m(self):
        return len(self.P)

    @property
    def matrices(self):
        """The split matrices as float arrays."""
        return self._float

    def active(self):
        """Indices k whose P_k is not identically zero."""
        return [k for k, p in enumerate(self._float) if np.any(p != 0.0)]

    @classmethod
    def default(cls, n, m):
        """P_1 = I, the rest zero: the particular solution is anchored at t_1."""
        eye = np.eye(n, dtype=int)
        return cls(tuple([eye] + [np.zeros((n, n), dtype=int)] * (m - 1)), name="default")

    @classmethod
    def uniform(cls, n, m):
        """P_k = I/m for every k."""
        p = np.full((n, n), Fraction(0), dtype=object)
        for i in range(n):
            p[i, i] = Fraction(1, m)
        return cls(tuple(p.copy() for _ in range(m)), name="uniform")
