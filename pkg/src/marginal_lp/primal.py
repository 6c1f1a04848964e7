"""Brute-force primal solver used to certify the potentials solver.

Minimises ``mean |h|**p`` directly over full-grid tables with prescribed
discrete marginals, by projected gradient descent. The feasible set is an
affine subspace and its projection has a closed form, so every iterate is
feasible up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import minimal_density, project_feasible, project_vanishing, sharp_bound
from .closed_form import l2_potentials
from .discretization import Mesh, MarginalTable, all_marginals, as_tables, common_mass
from .solver import ConvergenceError, SolverConfig, continuation_sweep

MAX_PRIMAL_CELLS = 10**3


@dataclass(frozen=True)
class PrimalProblem:
    mesh: Mesh
    marginals: tuple[MarginalTable, ...]
    p: float

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(as_tables(self.marginals)))
        if len(self.marginals) != self.mesh.n or self.marginals[0].m != self.mesh.m:
            raise ValueError("marginals do not match the mesh")
        common_mass(self.marginals)
        if not self.p > 1:
            raise ValueError(f"exponent p={self.p} must exceed 1")
        if self.mesh.size > MAX_PRIMAL_CELLS:
            raise ValueError(f"primal oracle limited to {MAX_PRIMAL_CELLS} cells, got {self.mesh.size}")

    def additive_table(self) -> np.ndarray:
        """Feasible starting point ``sum_i g_i - (n - 1) * mass``."""
        return l2_potentials(self.marginals).minimal_density()

    def objective(self, h: np.ndarray) -> float:
        return float(np.mean(np.abs(h) ** self.p))


@dataclass(frozen=True)
class PrimalResult:
    table: np.ndarray
    objective: float
    grad_inf: float
    iterations: int
    max_feasibility_error: float


@dataclass(frozen=True)
class CrossValidation:
    p: float
    density_sup: float
    objective_rel: float
    primal_objective: float
    dual_bound: float
    primal_iterations: int
    dual_converged: bool


def _smoothed(h, p, eps):
    """Objective and gradient of ``mean((h**2 + eps**2)**(p/2))``."""
    r2 = h * h + eps * eps
    return float(np.mean(r2 ** (0.5 * p))), p * h * r2 ** (0.5 * p - 1.0)


def _pgd(problem: PrimalProblem, h: np.ndarray, eps: float, tol: float, max_iter: int):
    mesh, p = problem.mesh, problem.p
    f, grad = _smoothed(h, p, eps)
    d = project_vanishing(grad, mesh)
    step = 1.0 / max(p * (p - 1.0), 1.0)
    worst = 0.0
    it = 0
    while np.max(np.abs(d)) > tol and it < max_iter:
        it += 1
        slope = float(np.mean(d * d))
        while True:
            h_new = h - step * d
            f_new, grad_new = _smoothed(h_new, p, eps)
            if f_new <= f - 1e-4 * step * slope or step < 1e-300:
                break
            step *= 0.5
        # Re-project onto the affine constraint set to stop drift.
        h_new = project_feasible(h_new, problem.marginals, mesh)
        f_new, grad_new = _smoothed(h_new, p, eps)
        worst = max(worst, _feasibility(h_new, problem))
        d_new = project_vanishing(grad_new, mesh)
        # Barzilai-Borwein step for the next iteration.
        s, y = h_new - h, d_new - d
        sy = float(np.mean(s * y))
        step = float(np.mean(s * s)) / sy if sy > 0 else step * 2.0
        h, f, d = h_new, f_new, d_new
    return h, float(np.max(np.abs(d))), it, worst


def _feasibility(h, problem):
    target = np.stack([g.values for g in problem.marginals])
    return float(np.max(np.abs(all_marginals(h, problem.mesh) - target)))


def solve_primal(problem: PrimalProblem, tol: float = 1e-11, max_iter: int = 200_000) -> PrimalResult:
    """Minimise ``mean |h|**p`` subject to the discrete marginal constraints.

    Starts from the additive table and stops once the sup-norm of the
    projected gradient is below ``tol``. For p < 2 the modulus is smoothed
    and the smoothing is driven down to 1e-12 with warm starts.

    Raises
    ------
    ConvergenceError
        If the iteration cap is hit before the tolerance.
    """
    h = problem.additive_table()
    eps_levels = [0.0] if problem.p >= 2 else [1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
    total = 0
    worst = _feasibility(h, problem)
    for eps in eps_levels:
        h, grad_inf, it, w = _pgd(problem, h, eps, tol, max_iter - total)
        total += it
        worst = max(worst, w)
        if grad_inf > tol:
            raise ConvergenceError(
                f"primal oracle stopped at projected gradient {grad_inf:.3e} > {tol} after {total} iterations"
            )
    return PrimalResult(
        table=h,
        objective=problem.objective(h),
        grad_inf=grad_inf,
        iterations=total,
        max_feasibility_error=worst,
    )


def cross_validate(marginals: Sequence[MarginalTable], p: float, mesh: Mesh | None = None,
                   tol: float = 1e-11, config: SolverConfig | None = None) -> CrossValidation:
    """Run the potentials solver and the primal oracle on one instance and compare."""
    marginals = as_tables(marginals)
    mesh = mesh or Mesh(len(marginals), marginals[0].m)
    primal = solve_primal(PrimalProblem(mesh, tuple(marginals), p), tol=tol)
    (dual,) = continuation_sweep(marginals, [p], config)
    h = minimal_density(dual.potentials, mesh)
    bound = sharp_bound(dual.potentials, mesh).bound
    return CrossValidation(
        p=p,
        density_sup=float(np.max(np.abs(h - primal.table))),
        objective_rel=abs(primal.objective - bound) / abs(bound),
        primal_objective=primal.objective,
        dual_bound=bound,
        primal_iterations=primal.iterations,
        dual_converged=dual.converged,
    )
