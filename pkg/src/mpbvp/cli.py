"""Command-line front end: ``mpbvp solve | spectrum | verify | sweep``.

Exit codes::

    0  success
    1  input error (unreadable or invalid problem file, malformed CSV, bad flags)
    2  ill-posed problem (rcond(F) below threshold)
    3  numerical failure, or residuals above tolerance
    4  spectral conditions not satisfied
    5  verification failed (residuals or oracle disagreement)

Every command writes a JSON report into ``--out`` (default: current
directory).  Reports keep a fixed key order and round floats to 15
significant digits; wall-clock timings live under a single ``timings`` key
that ``--stable-output`` omits, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .bvpcore import solve_linear_bvp
from .errors import (AnchorOffGrid, Diverged, DimensionMismatch, EpsilonTooSmall, IllPosed, MpbvpError,
                     NumericalFailure, ProblemFileError)
from .integrate import DEFAULT_RTOL
from .picard import picard_solve_quasilinear
from .problem import QUASILINEAR
from .problemfile import load_problem
from .spectral import DEFAULT_GRID, analyze, epsilon_sweep
from .verify import measure_residuals, oracle_difference

logger = logging.getLogger("mpbvp")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ILL_POSED = 2
EXIT_NUMERICAL = 3
EXIT_SPECTRAL = 4
EXIT_VERIFY = 5

CSV_POINTS = 201
ODE_TOL = 1e-6
VERIFY_ODE_TOL = 1e-5
ORACLE_TOL = 1e-4
DEFAULT_ORACLE_N = 400


def bc_tolerance(alpha):
    return 1e-8 * (1.0 + float(np.max(np.abs(alpha))))


def _round(value):
    """Recursively convert to JSON-ready values, floats at 15 significant digits."""
    if isinstance(value, dict):
        return {str(k): _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    if isinstance(value, np.ndarray):
        return _round(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.15g}")
    if isinstance(value, complex):
        return [_round(value.real), _round(value.imag)]
    return value


def write_report(out_dir: Path, filename: str, report: dict, timings: dict, stable: bool):
    doc = dict(report)
    if not stable:
        doc["timings"] = timings
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    path.write_text(json.dumps(_round(doc), indent=2) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, x, n: int):
    ts = np.linspace(0.0, 1.0, CSV_POINTS)
    X = np.asarray(x(ts), dtype=float).reshape(CSV_POINTS, n)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + [f"x{i + 1}" for i in range(n)]) + "\n")
        for t, row in zip(ts, X):
            fh.write(",".join(f"{v:.15g}" for v in (t, *row)) + "\n")
    return path


def read_csv(path: Path, n: int):
    """Read a solution CSV; raises ProblemFileError on any structural problem."""
    expected = ["t"] + [f"x{i + 1}" for i in range(n)]
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise ProblemFileError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if header != expected:
        raise ProblemFileError(f"{path}: header {','.join(header)!r} does not match {','.join(expected)!r}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise ProblemFileError(f"{path}: line {lineno}: expected {n + 1} columns, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ProblemFileError(f"{path}: line {lineno}: non-numeric value") from None
    arr = np.array(data)
    if len(arr) < 4:
        raise ProblemFileError(f"{path}: need at least 4 samples")
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"{path}: non-finite values")
    ts = arr[:, 0]
    if np.any(np.diff(ts) <= 0) or abs(ts[0]) > 1e-12 or abs(ts[-1] - 1.0) > 1e-12:
        raise ProblemFileError(f"{path}: t must increase strictly from 0 to 1")
    return ts, arr[:, 1:]


def _fail(message, code):
    print(f"error: {message}", file=sys.stderr)
    return code


def _resolve_split(flag, pf):
    if flag is None:
        return pf.split if pf.split is not None else "default"
    if flag == "file":
        if pf.split is None:
            raise ProblemFileError("--split file given but the problem file has no split")
        return pf.split
    return flag


def cmd_solve(args) -> int:
    out, rtol = Path(args.out), args.tol
    started = time.perf_counter()
    try:
        pf = load_problem(args.problem)
        problem = pf.bvp()
        split = _resolve_split(args.split, pf)
    except (ProblemFileError, DimensionMismatch) as exc:
        return _fail(exc, EXIT_INPUT)
    loaded = time.perf_counter()
    split_name = split if isinstance(split, str) else split.name
    report = {"command": "solve", "problem": pf.name, "n": pf.n, "m": len(pf.points), "mode": pf.mode,
              "eps": pf.eps, "split": split_name, "rtol": rtol}
    trace = None
    try:
        if pf.mode == QUASILINEAR:
            report["method"] = "picard"
            sol, trace = picard_solve_quasilinear(problem, pf.near_matrix(), split, rtol=rtol)
        else:
            report["method"] = "fundamental-matrix"
            sol = solve_linear_bvp(problem, split, rtol=rtol)
    except IllPosed as exc:
        report.update({"status": "ill-posed", "exit_code": EXIT_ILL_POSED, "detF": exc.det,
                       "rcondF": exc.rcond, "message": exc.reason})
        write_report(out, "report.json", report, {"total_s": time.perf_counter() - started}, args.stable_output)
        return _fail(f"ill-posed: {exc.reason} (rcondF={exc.rcond:.3g})", EXIT_ILL_POSED)
    except EpsilonTooSmall as exc:
        return _fail(exc, EXIT_INPUT)
    except MpbvpError as exc:
        report.update({"status": "numerical-failure", "exit_code": EXIT_NUMERICAL,
                       "message": f"{type(exc).__name__}: {exc}"})
        if isinstance(exc, Diverged) and exc.trace is not None:
            report["picard"] = exc.trace.as_dict()
        write_report(out, "report.json", report, {"total_s": time.perf_counter() - started}, args.stable_output)
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL)
    except ValueError as exc:
        return _fail(exc, EXIT_INPUT)
    solved = time.perf_counter()

    res = sol.residuals
    tol_bc = bc_tolerance(pf.alpha)
    ok = res.within(ODE_TOL, tol_bc)
    code = EXIT_OK if ok else EXIT_NUMERICAL
    report.update({
        "status": "ok" if ok else "residuals-above-tolerance",
        "exit_code": code,
        "detF": sol.detF,
        "rcondF": sol.rcondF,
        "C": sol.C,
        "det_Fj": sol.det_Fj,
        "residuals": res.as_dict(),
        "tolerances": {"ode": ODE_TOL, "bc": tol_bc},
    })
    if trace is not None:
        report["picard"] = trace.as_dict()
    write_csv(out / "solution.csv", sol.x, pf.n)
    done = time.perf_counter()
    write_report(out, "report.json", report,
                 {"load_s": loaded - started, "solve_s": solved - loaded, "output_s": done - solved},
                 args.stable_output)
    if not ok:
        return _fail("residuals above tolerance", code)
    return code


def cmd_spectrum(args) -> int:
    started = time.perf_counter()
    try:
        pf = load_problem(args.problem)
        rep = analyze(pf.A0, pf.times, args.grid)
    except (ProblemFileError, DimensionMismatch, ValueError) as exc:
        return _fail(exc, EXIT_INPUT)
    except NumericalFailure as exc:
        return _fail(exc, EXIT_NUMERICAL)
    code = EXIT_OK if rep.passed else EXIT_SPECTRAL
    report = {"command": "spectrum", "problem": pf.name, "n": pf.n, "exit_code": code, **rep.as_dict()}
    write_report(Path(args.out), "spectrum.json", report, {"total_s": time.perf_counter() - started},
                 args.stable_output)
    if code:
        print("spectral conditions failed: " + ", ".join(rep.failing), file=sys.stderr)
    return code


def cmd_verify(args) -> int:
    started = time.perf_counter()
    try:
        pf = load_problem(args.problem)
        problem = pf.bvp()
        ts, X = read_csv(Path(args.solution), pf.n)
    except (ProblemFileError, DimensionMismatch) as exc:
        return _fail(exc, EXIT_INPUT)
    spline = CubicSpline(ts, X, axis=0)
    res = measure_residuals(spline, problem)
    tol_bc = bc_tolerance(pf.alpha)
    checks = {"ode_residual": res.ode_residual_max <= args.ode_tol, "bc_residual": res.bc_residual <= tol_bc}
    report = {"command": "verify", "problem": pf.name, "n": pf.n, "samples": len(ts),
              "residuals": res.as_dict(), "tolerances": {"ode": args.ode_tol, "bc": tol_bc, "oracle": ORACLE_TOL}}

    oracle = {"N": args.oracle}
    if pf.mode == QUASILINEAR:
        oracle["skipped"] = "oracle covers linear problems only"
    elif pf.eps is not None:
        oracle["skipped"] = "eps problems are not resolved by the uniform oracle grid"
    elif args.oracle == 0:
        oracle["skipped"] = "disabled"
    else:
        try:
            diff = oracle_difference(spline, problem, args.oracle)
            diff_fine = oracle_difference(spline, problem, 2 * args.oracle)
            oracle.update({"max_node_difference": diff, "max_node_difference_2N": diff_fine})
            checks["oracle"] = diff <= ORACLE_TOL
        except AnchorOffGrid as exc:
            oracle["skipped"] = str(exc)
        except (NumericalFailure, ValueError) as exc:
            oracle["skipped"] = f"{type(exc).__name__}: {exc}"
    ok = all(checks.values())
    code = EXIT_OK if ok else EXIT_VERIFY
    spacing = float(np.max(np.diff(ts)))
    if pf.eps is not None and pf.eps < 5 * spacing:
        report["note"] = (f"eps = {pf.eps:g} is within 5 sample spacings ({spacing:g}); the spline through "
                          "the samples cannot resolve the layer, so the interpolated residual overstates the error")
    report.update({"oracle": oracle, "checks": checks, "passed": ok, "exit_code": code})
    write_report(Path(args.out), "verify.json", report, {"total_s": time.perf_counter() - started},
                 args.stable_output)
    if not ok:
        failed = [k for k, v in checks.items() if not v]
        print("verification failed: " + ", ".join(failed), file=sys.stderr)
    return code


def _parse_eps_list(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty eps list")
    values = []
    for s in items:
        try:
            v = float(s)
        except ValueError:
            raise ValueError(f"not a number: {s!r}") from None
        if not math.isfinite(v) or v <= 0:
            raise ValueError(f"eps must be positive and finite: {s!r}")
        values.append(v)
    return values


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    try:
        eps_list = _parse_eps_list(args.eps)
        pf = load_problem(args.problem)
        perturbed = pf.perturbed()
        split = _resolve_split(args.split, pf)
    except (ProblemFileError, DimensionMismatch, ValueError) as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        spectral = analyze(pf.A0, pf.times).as_dict()
    except (DimensionMismatch, ValueError, NumericalFailure) as exc:
        spectral = {"skipped": f"{type(exc).__name__}: {exc}"}
    try:
        entries = epsilon_sweep(perturbed, eps_list, split, rtol=args.tol)
    except NumericalFailure as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL)
    rows = []
    for entry in entries:
        row = entry.as_dict()
        if entry.solution is not None:
            name = f"solution_eps_{entry.eps:g}.csv"
            write_csv(out / name, entry.solution.x, pf.n)
            row["csv"] = name
        else:
            row["refused"] = True
        rows.append(row)
    report = {"command": "sweep", "problem": pf.name, "n": pf.n, "spectral": spectral, "entries": rows}
    write_report(out, "sweep.json", report, {"total_s": time.perf_counter() - started}, args.stable_output)
    return EXIT_OK


def _add_common(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--tol", type=float, default=d(DEFAULT_RTOL), help="relative integration tolerance")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--stable-output", action="store_true", default=d(False),
                   help="omit timings so reports are byte-identical across runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpbvp", description="Many-point linear BVP solver")
    _add_common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem")
    p.add_argument("--split", choices=["default", "uniform", "file"], default=None,
                   help="split scheme (default: the file's split if present, else all weight on t1)")
    _add_common(p, suppress=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("spectrum", help="check the spectral conditions on A0(t)")
    p.add_argument("problem")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="number of grid intervals")
    _add_common(p, suppress=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="check a solution CSV against the problem")
    p.add_argument("problem")
    p.add_argument("solution")
    p.add_argument("--oracle", type=int, default=DEFAULT_ORACLE_N,
                   help="collocation oracle intervals (0 disables)")
    p.add_argument("--ode-tol", type=float, default=VERIFY_ODE_TOL,
                   help="ODE residual tolerance for the interpolated samples")
    _add_common(p, suppress=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve the eps-problem for a list of eps")
    p.add_argument("problem")
    p.add_argument("--eps", required=True, help="comma-separated eps values")
    p.add_argument("--split", choices=["default", "uniform", "file"], default=None)
    _add_common(p, suppress=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not (0.0 < args.tol <= 1e-2):
        return _fail("--tol must lie in (0, 1e-2]", EXIT_INPUT)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
