"""Auto-accelerated ILU (A²ILU) preconditioning.

ILU-family factorizations in DDU form, (L + D) D^{-1} (D + U), whose factors
are rescaled by two parameters (phi, gamma) chosen automatically by
minimizing ||(A - M) e||^2; preconditioned CG / BiCGSTAB drivers; 7-point
test-problem generators; and a sweep / collection benchmark harness.
"""
from .accel import (
    AccelerationParams,
    AccelResult,
    ObjectiveData,
    build_objective,
    gradient_hessian,
    make_preconditioner,
    objective,
    optimize,
)
from .errors import (
    BreakdownError,
    ConfigError,
    MatrixMarketError,
    NumericError,
    PoleError,
    ResourceLimitError,
    UnsupportedFormatError,
    ZeroDiagonalError,
)
from .factor import (
    FactorizationConfig,
    FactorTriple,
    crout_ilu,
    factorize,
    ilu0,
    level_ilu,
    milu0,
    shifted_ilu0,
)
from .krylov import SolverConfig, SolveStats, bicgstab_solve, cg_solve, classify_convergence, solve
from .problems import (
    ProblemSpec,
    gen_advection_diffusion,
    gen_helmholtz,
    gen_poisson_jump,
    generate,
)
from .sparse import (
    ScalingRecord,
    SparseMatrix,
    build_rhs_ones,
    diagonal_scale,
    lower_solve,
    matvec,
    read_matrix_market,
    upper_solve,
    write_matrix_market,
)

__version__ = "0.1.0"
