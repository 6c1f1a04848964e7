import numpy as np
import pytest

from marginal_lp import PrimalProblem, build_mesh, continuation_sweep, cross_validate, minimal_density, sharp_bound, solve_primal
from marginal_lp.solver import ConvergenceError

from .conftest import gaussian, uniform


@pytest.fixture(scope="module")
def mesh8():
    return build_mesh(2, 8)


@pytest.mark.parametrize("p", [1.4, 2.0, 3.0])
def test_uniform_gives_constant(mesh8, p):
    res = solve_primal(PrimalProblem(mesh8, (uniform(mesh8),) * 2, p))
    np.testing.assert_allclose(res.table, 1.0, atol=1e-12)


def test_quadratic_is_additive(mesh8):
    gs = (gaussian(mesh8, 0.3), gaussian(mesh8, 0.6))
    res = solve_primal(PrimalProblem(mesh8, gs, 2.0))
    g1, g2 = (t.values for t in gs)
    np.testing.assert_allclose(res.table, g1[:, None] + g2[None, :] - 1, atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_matches_potentials_solver(mesh8, p):
    gs = (gaussian(mesh8), gaussian(mesh8))
    res = solve_primal(PrimalProblem(mesh8, gs, p))
    (dual,) = continuation_sweep(list(gs), [p])
    assert np.max(np.abs(res.table - minimal_density(dual.potentials))) <= 1e-4
    assert res.objective >= sharp_bound(dual.potentials).bound - 1e-6
    assert res.max_feasibility_error <= 1e-12


def test_three_axes():
    mesh = build_mesh(3, 5)
    gs = [gaussian(mesh, mu) for mu in (0.3, 0.5, 0.7)]
    cv = cross_validate(gs, 2.5, mesh)
    assert cv.density_sup <= 1e-6
    assert cv.objective_rel <= 1e-8


def test_duality_gap_closes_with_tolerance(mesh8):
    gs = [gaussian(mesh8, 1 / 3), gaussian(mesh8, 2 / 3)]
    (dual,) = continuation_sweep(gs, [3.0])
    bound = sharp_bound(dual.potentials).bound
    gaps = []
    for tol in (1e-3, 1e-6, 1e-10):
        res = solve_primal(PrimalProblem(mesh8, tuple(gs), 3.0), tol=tol)
        gaps.append(res.objective - bound)
    assert all(g >= -1e-12 for g in gaps)
    assert gaps[-1] <= gaps[0]
    assert gaps[-1] <= 1e-12


@pytest.mark.parametrize("p, limit", [(2.0, 1e-8), (3.0, 1e-4), (1.5, 1e-4)])
def test_cross_validate(mesh8, p, limit):
    cv = cross_validate([gaussian(mesh8, 1 / 3), gaussian(mesh8, 2 / 3)], p, mesh8)
    assert cv.density_sup <= limit
    assert cv.objective_rel <= 1e-6
    assert cv.dual_converged


def test_iteration_cap(mesh8):
    with pytest.raises(ConvergenceError):
        solve_primal(PrimalProblem(mesh8, (gaussian(mesh8, 0.3), gaussian(mesh8, 0.6)), 3.0), max_iter=2)


def test_rejects_large_grids():
    mesh = build_mesh(2, 40)
    with pytest.raises(ValueError, match="limited"):
        PrimalProblem(mesh, (uniform(mesh),) * 2, 2.0)
