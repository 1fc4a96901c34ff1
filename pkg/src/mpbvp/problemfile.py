"""JSON problem files.

A problem file looks like::

    {
      "name": "two-point scalar",
      "n": 1,
      "mode": "linear",
      "A": [["1"]],
      "f": ["1"],
      "points": [{"t": 0, "F": [[1]]}, {"t": 1, "F": [[1]]}],
      "alpha": [0]
    }

``A`` may instead be a list of matrices ``[A0, A1, ...]`` (an eps-series,
``A(t, eps) = sum_k A_k(t) eps^k``) and ``f`` likewise a list of vectors.
Entries are expression strings (or plain numbers) in ``t`` and ``eps``;
quasi-linear ``f`` may also use ``x1..xn``.  Optional keys: ``eps``,
``order`` (series truncation), ``split`` (list of n x n matrices, or
"default"/"uniform") and ``B`` (near matrix for the fixed-point solver).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, ExprError, ProblemFileError
from .expr import compile_expr, parse_expr, variables
from .problem import LINEAR, QUASILINEAR, BoundaryPoint, BvpProblem, SplitScheme
from .spectral import PerturbedProblem


def _compile_entry(entry, allowed, where):
    if isinstance(entry, bool):
        raise ProblemFileError(f"{where}: expected an expression or number, got {entry!r}")
    if isinstance(entry, (int, float)):
        value = float(entry)
        return (lambda *args: value), set()
    if not isinstance(entry, str):
        raise ProblemFileError(f"{where}: expected an expression or number, got {type(entry).__name__}")
    try:
        tree = parse_expr(entry, allowed)
    except ExprError as exc:
        raise ProblemFileError(f"{where}: {exc} in {entry!r}") from None
    return compile_expr(tree, allowed), variables(tree)


def _depth(obj):
    d = 0
    while isinstance(obj, list):
        if not obj:
            return d + 1
        obj = obj[0]
        d += 1
    return d


class _ExprArray:
    """An array of compiled expressions evaluated into a float ndarray."""

    def __init__(self, data, shape, allowed, where):
        arr = np.array(data, dtype=object)
        if arr.shape != shape:
            raise ProblemFileError(f"{where}: shape {arr.shape}, expected {shape}")
        self.shape = shape
        self.funcs = []
        self.used = set()
        for idx in np.ndindex(*shape):
            label = where + "".join(f"[{i}]" for i in idx)
            fn, used = _compile_entry(arr[idx], allowed, label)
            self.funcs.append(fn)
            self.used |= used
        self.constant = None
        if not self.used:
            self.constant = np.array([fn() for fn in self.funcs]).reshape(shape)

    def __call__(self, *args):
        if self.constant is not None:
            return self.constant
        return np.array([fn(*args) for fn in self.funcs], dtype=float).reshape(self.shape)


def _numeric(data, shape, where):
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(f"{where}: expected numbers") from None
    if arr.shape != shape:
        raise ProblemFileError(f"{where}: shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"{where}: non-finite entries")
    return arr


@dataclass
class ProblemFile:
    """A validated, compiled problem file."""

    n: int
    mode: str
    A_terms: list
    f_terms: list
    points: list
    alpha: np.ndarray
    eps: Optional[float] = None
    split: object = None
    B: Optional[_ExprArray] = None
    name: str = ""
    series: bool = False
    raw: dict = field(default_factory=dict)

    @property
    def uses_eps(self):
        return any("eps" in term.used for term in self.A_terms + self.f_terms)

    @property
    def times(self):
        return [p.t for p in self.points]

    def A(self, t, eps):
        total = self.A_terms[0](t, eps)
        for k, term in enumerate(self.A_terms[1:], start=1):
            total = total + term(t, eps) * eps ** k
        return total

    def f(self, t, eps, x=None):
        extra = () if x is None else tuple(x)
        total = self.f_terms[0](t, eps, *extra)
        for k, term in enumerate(self.f_terms[1:], start=1):
            total = total + term(t, eps, *extra) * eps ** k
        return total

    def A0(self, t):
        return self.A(t, 0.0)

    def bvp(self) -> BvpProblem:
        """The problem to solve directly (eps taken from the file, if any)."""
        if self.eps is None and self.uses_eps:
            raise ProblemFileError("expressions use eps but the file has no eps value")
        eps = 0.0 if self.eps is None else self.eps
        A = lambda t: self.A(t, eps)
        if self.mode == QUASILINEAR:
            f = lambda x, t: self.f(t, eps, x)
        else:
            f = lambda t: self.f(t, eps)
        return BvpProblem(self.n, A, f, self.points, self.alpha, self.mode, self.eps, self.name)

    def perturbed(self) -> PerturbedProblem:
        if self.mode != LINEAR:
            raise ProblemFileError("eps sweeps need a linear problem")
        return PerturbedProblem(self.n, self.A, lambda t, eps: self.f(t, eps), self.points,
                                self.alpha, self.name)

    def near_matrix(self):
        if self.B is None:
            return None
        B = self.B
        return lambda t: B(t, 0.0 if self.eps is None else self.eps)


def parse_problem(doc: dict, name: str = "") -> ProblemFile:
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    for key in ("n", "A", "f", "points", "alpha"):
        if key not in doc:
            raise ProblemFileError(f"missing required key {key!r}")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFileError("n must be a positive integer")
    mode = doc.get("mode", LINEAR)
    if mode not in (LINEAR, QUASILINEAR):
        raise ProblemFileError(f"mode must be 'linear' or 'quasilinear', got {mode!r}")
    base = ["t", "eps"]
    f_vars = base + [f"x{i + 1}" for i in range(n)] if mode == QUASILINEAR else base

    A_raw = doc["A"]
    series = _depth(A_raw) == 3
    A_list = A_raw if series else [A_raw]
    f_raw = doc["f"]
    f_list = f_raw if _depth(f_raw) == 2 else [f_raw]
    order = doc.get("order")
    if order is not None:
        if not isinstance(order, int) or order < 0:
            raise ProblemFileError("order must be a non-negative integer")
        A_list, f_list = A_list[:order + 1], f_list[:order + 1]
    if not A_list or not f_list:
        raise ProblemFileError("A and f need at least one term")
    A_terms = [_ExprArray(a, (n, n), base, f"A{k}" if series else "A") for k, a in enumerate(A_list)]
    f_terms = [_ExprArray(v, (n,), f_vars, f"f{k}" if len(f_list) > 1 else "f") for k, v in enumerate(f_list)]

    points_raw = doc["points"]
    if not isinstance(points_raw, list) or not points_raw:
        raise ProblemFileError("points must be a non-empty list")
    points = []
    for j, p in enumerate(points_raw):
        if not isinstance(p, dict) or "t" not in p or "F" not in p:
            raise ProblemFileError(f"points[{j}] must be an object with 't' and 'F'")
        t = _numeric(p["t"], (), f"points[{j}].t")
        points.append(BoundaryPoint(float(t), _numeric(p["F"], (n, n), f"points[{j}].F")))
    ts = [p.t for p in points]
    if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] < 0 or ts[-1] > 1:
        raise ProblemFileError("points must be strictly increasing in [0, 1]")
    alpha = _numeric(doc["alpha"], (n,), "alpha")

    eps = doc.get("eps")
    if eps is not None:
        eps = float(_numeric(eps, (), "eps"))
        if eps <= 0:
            raise ProblemFileError("eps must be positive")

    split = doc.get("split")
    if split is not None and split not in ("default", "uniform"):
        if not isinstance(split, list) or len(split) != len(points):
            raise ProblemFileError("split must list one n x n matrix per point")
        mats = []
        for k, P in enumerate(split):
            arr = np.array(P)
            if arr.shape != (n, n) or arr.dtype.kind not in "iuf":
                raise ProblemFileError(f"split[{k}] must be a numeric {n} x {n} matrix")
            mats.append(arr)
        try:
            split = SplitScheme(tuple(mats), name="file")
        except (ValueError, DimensionMismatch) as exc:
            raise ProblemFileError(f"split: {exc}") from None

    B = doc.get("B")
    if B is not None:
        B = _ExprArray(B, (n, n), base, "B")

    return ProblemFile(n, mode, A_terms, f_terms, points, alpha, eps, split, B,
                       doc.get("name", name), series, doc)


def load_problem(path) -> ProblemFile:
    """Read and validate a problem file; raises ProblemFileError with location info."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_problem(doc, path.stem)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
