"""Newton-type solvers for the transport-theory nonsymmetric algebraic Riccati equation."""
from .problem import (
    JacobianBlocks,
    NareProblem,
    ProblemParams,
    bilinear_f2,
    build_abcd,
    build_problem,
    eval_f,
    eval_jacobian,
    nare_residual,
    reconstruct_X,
)
from .quadrature import QuadratureRule, composite_rule, gauss_legendre_4
from .solvers import (
    IterateTrace,
    SolverConfig,
    SolverReport,
    fpi_solve,
    newton_solve,
    nsm_solve,
    res_criterion,
    solve,
    tsmnm_solve,
    tsnm1_solve,
    tsnm2_solve,
)

__version__ = "0.1.0"
