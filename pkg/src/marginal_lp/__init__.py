"""Minimal L^p densities on the unit hypercube with prescribed marginals."""

from .analysis import (
    BoundReport,
    Perturbation,
    duality_check,
    minimal_density,
    minimality_probe,
    random_perturbation,
    sharp_bound,
)
from .closed_form import L2Solution, l2_bound, l2_potentials
from .discretization import (
    MarginalSpec,
    MarginalTable,
    Mesh,
    build_mesh,
    marginalize,
    sample_marginal,
)
from .finance import PayoffDecomposition, WeightSpec, carr_madan_decompose, reconstruct, solve_weighted
from .primal import PrimalProblem, cross_validate, solve_primal
from .solver import (
    PotentialSet,
    SolveReport,
    SolverConfig,
    continuation_sweep,
    psi,
    psi_prime,
    residual,
    solve_at_p,
)

__version__ = "0.1.0"
