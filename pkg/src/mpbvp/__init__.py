"""Many-point boundary value problems for linear ODE systems.

The solver represents the solution through a fundamental matrix and a
split of the particular solution across the boundary points, checks
solvability with a reciprocal condition number, and cross-checks results
against residuals and an independent finite-difference oracle.
"""

from .bvpcore import BvpSolution, Solvability, assemble_F, check_solvability, solve_linear_bvp
from .errors import (AnchorOffGrid, Diverged, DimensionMismatch, EpsilonTooSmall, EvalError, ExprError,
                     ExprSyntaxError, IllPosed, InsufficientData, MpbvpError, NonFiniteRHS, NumericalFailure,
                     OuterUndefined, ProblemFileError, SingularMatrix, StiffnessFailure, UnknownFunction,
                     UnknownIdentifier)
from .expr import compile_expr, eval_expr, parse_expr, to_source
from .integrate import DenseOutput, fundamental_matrix, integrate_ivp
from .picard import PicardTrace, estimate_contraction, picard_solve_near, picard_solve_quasilinear
from .problem import LINEAR, QUASILINEAR, BoundaryPoint, BvpProblem, SplitScheme
from .problemfile import ProblemFile, load_problem
from .spectral import OuterSolution, PerturbedProblem, SpectralReport, analyze, epsilon_sweep
from .verify import ResidualSummary, collocation_solve, measure_residuals, oracle_difference

__version__ = "0.1.0"
