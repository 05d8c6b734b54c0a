"""Fractional and Volterra integro-differential equation solver.

Pipeline: compress the power-law memory kernel into a sum of decaying
exponentials (soe), rewrite each memory integral as a family of auxiliary
linear ODEs (augment), integrate the resulting stiff system with an
adaptive implicit Runge-Kutta method (radau), and solve the arrow-shaped
linear systems arising in each Newton iteration in linear time in the
number of auxiliary states (structlinalg).
"""

from .augment import AugmentedSystem, BlockSpec, StructuredJacobian, augment, jacobian, rhs
from .problem import (
    FractionalIVP,
    IntegralTerm,
    attach_integral_output,
    from_caputo_integral,
    from_caputo_volt1,
    from_caputo_volt2,
)
from .radau import IntegratorConfig, SolveReport, initial_step, integrate
from .soe import (
    KernelParams,
    SumOfExponentials,
    build_soe,
    choose_parameters,
    eval_soe,
    perturbation_bound_half,
    read_soe,
    verify_soe,
    write_soe,
)
from .structlinalg import (
    BandedHeadSolver,
    DenseHeadSolver,
    Factorization,
    FullDenseSolver,
    factorize,
    materialize_dense,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedSystem",
    "BandedHeadSolver",
    "BlockSpec",
    "DenseHeadSolver",
    "Factorization",
    "FractionalIVP",
    "FullDenseSolver",
    "IntegralTerm",
    "IntegratorConfig",
    "KernelParams",
    "SolveReport",
    "StructuredJacobian",
    "SumOfExponentials",
    "attach_integral_output",
    "augment",
    "build_soe",
    "choose_parameters",
    "eval_soe",
    "factorize",
    "from_caputo_integral",
    "from_caputo_volt1",
    "from_caputo_volt2",
    "initial_step",
    "integrate",
    "jacobian",
    "materialize_dense",
    "perturbation_bound_half",
    "read_soe",
    "rhs",
    "solve",
    "verify_soe",
    "write_soe",
]
