import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marginal_lp import (
    MarginalTable,
    PotentialSet,
    SolverConfig,
    build_mesh,
    continuation_sweep,
    l2_potentials,
    psi,
    psi_prime,
    residual,
    solve_at_p,
)
from marginal_lp.solver import DiscreteSystem, SingularDerivativeError, continuation_schedule, jacobian

from .conftest import gaussian, uniform


# -- psi -------------------------------------------------------------------

def test_psi_identity_at_two():
    s = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(psi(s, 2.0), s)


def test_psi_examples():
    assert psi(4.0, 3.0) == pytest.approx(2.0, rel=1e-15)
    assert psi(-2.0, 1.5) == pytest.approx(-4.0, rel=1e-15)
    assert psi(0.0, 3.0) == 0.0


def test_psi_smoothed():
    assert psi(0.0, 3.0, 1e-8) == 0.0
    assert psi(3.0, 1.5, 4.0) == pytest.approx(25.0, rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(1.05, 5.0))
def test_psi_inverts_power(s, p):
    t = psi(s, p)
    assert t == pytest.approx(-psi(-s, p))
    assert np.sign(t) * abs(t) ** (p - 1) == pytest.approx(s, rel=1e-9, abs=1e-12)


def test_psi_prime_examples():
    np.testing.assert_array_equal(psi_prime(np.array([-1.0, 0.0, 5.0]), 2.0), 1.0)
    assert psi_prime(4.0, 3.0) == pytest.approx(0.25, rel=1e-15)


def test_psi_prime_singular():
    with pytest.raises(SingularDerivativeError):
        psi_prime(np.array([1.0, 0.0]), 3.0)
    assert psi_prime(0.0, 3.0, 1e-8) == 0.0
    assert psi_prime(0.0, 1.5) == 0.0


@pytest.mark.parametrize("p", [1.5, 2.5])
@pytest.mark.parametrize("eps", [0.0, 1e-3])
def test_psi_prime_finite_differences(p, eps):
    s = np.linspace(-2, 2, 41)
    s = s[np.abs(s) > 1e-9]
    h = 1e-6
    fd = (psi(s + h, p, eps) - psi(s - h, p, eps)) / (2 * h)
    np.testing.assert_allclose(psi_prime(s, p, eps), fd, rtol=1e-6)


# -- residual and Jacobian -------------------------------------------------

def test_residual_uniform_exact():
    mesh = build_mesh(3, 6)
    us = [uniform(mesh)] * 3
    phis = np.zeros((3, 6))
    phis[0] = 3.0
    for p in (1.3, 2.0, 3.7):
        r = residual(PotentialSet(p, phis), us, mesh)
        assert r.shape == (3 * 6 + 2,)
        assert np.max(np.abs(r)) == 0.0


def test_residual_at_zero_potentials(row2):
    r = residual(PotentialSet(2.5, np.zeros((2, 30))), row2)
    np.testing.assert_array_equal(r[:30], -row2[0].values)
    np.testing.assert_array_equal(r[30:60], -row2[1].values)
    np.testing.assert_array_equal(r[60:], 0.0)


def test_residual_size_mismatch(row2):
    with pytest.raises(ValueError, match="do not match"):
        residual(PotentialSet(2.0, np.zeros((2, 29))), row2)
    with pytest.raises(ValueError, match="mesh"):
        residual(PotentialSet(2.0, np.zeros((2, 30))), row2, build_mesh(3, 30))


def test_cross_axis_residual_sums_agree(rng):
    mesh = build_mesh(3, 7)
    gs = [gaussian(mesh, mu) for mu in (0.2, 0.5, 0.6)]
    for _ in range(5):
        phis = rng.standard_normal((3, 7)) + 1
        r = residual(PotentialSet(1.7, phis), gs, mesh)
        sums = r[:21].reshape(3, 7).mean(axis=1)
        assert np.ptp(sums) <= 1e-12


def _fd_jacobian(system, x, p, eps, h=1e-7):
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((system.residual(x + e, p, eps) - system.residual(x - e, p, eps)) / (2 * h))
    return np.stack(cols, axis=1)


@pytest.mark.parametrize("n", [2, 3])
def test_jacobian_finite_differences(n, rng):
    m = 6 if n == 2 else 4
    mesh = build_mesh(n, m)
    for trial in range(4):
        gs = [MarginalTable(v / v.mean()) for v in rng.random((n, m)) + 0.2]
        p = (1.5, 2.5)[trial % 2]
        x = (rng.random((n, m)) + 0.5).ravel()
        system = DiscreteSystem(gs)
        ana = system.jacobian(x, p, 1e-8)
        fd = _fd_jacobian(system, x, p, 1e-8)
        assert np.max(np.abs(ana - fd)) <= 1e-5 * np.max(np.abs(fd))


def test_jacobian_public_wrapper(row1):
    sol = l2_potentials(row1)
    jac = jacobian(PotentialSet(2.0, sol.potentials), row1)
    assert jac.shape == (61, 60)
    assert np.linalg.matrix_rank(jac) == 60


# -- solving ---------------------------------------------------------------

def test_uniform_solution_at_p3():
    mesh = build_mesh(2, 30)
    us = [uniform(mesh)] * 2
    rep = solve_at_p(us, 3.0, l2_potentials(us).potentials)
    assert rep.converged
    np.testing.assert_allclose(rep.potentials.phis[0], 2.0, atol=1e-9)
    np.testing.assert_allclose(rep.potentials.phis[1], 0.0, atol=1e-9)
    assert rep.bound == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("p", [1.2, 1.6, 2.5, 3.0])
def test_remark_solution_has_factor_n(n, p):
    mesh = build_mesh(n, 12 if n == 3 else 30)
    g1 = gaussian(mesh, 0.4, 0.08)
    gs = [g1] + [uniform(mesh)] * (n - 1)
    phis = np.zeros((n, mesh.m))
    phis[0] = n * g1.values ** (p - 1)
    assert np.max(np.abs(residual(PotentialSet(p, phis), gs, mesh))) <= 1e-14
    phis[0] = g1.values ** (p - 1)
    assert np.max(np.abs(residual(PotentialSet(p, phis), gs, mesh))) > 0.1

    (rep,) = continuation_sweep(gs, [p])
    assert rep.converged
    np.testing.assert_allclose(rep.potentials.phis[0], n * g1.values ** (p - 1), atol=1e-8)
    np.testing.assert_allclose(rep.potentials.phis[1:], 0.0, atol=1e-8)


def test_p2_reproduces_closed_form(row1):
    seed = l2_potentials(row1).potentials
    rep = solve_at_p(row1, 2.0, seed)
    assert rep.converged
    assert np.max(np.abs(rep.potentials.phis - seed)) <= 1e-8


def test_p2_from_zero_seed(row2):
    rep = solve_at_p(row2, 2.0, np.zeros((2, 30)))
    assert rep.converged
    assert np.max(np.abs(rep.potentials.phis - l2_potentials(row2).potentials)) <= 1e-8


def test_nonconvergence_reported(row2):
    cfg = SolverConfig(max_iter=1, polish=())
    rep = solve_at_p(row2, 3.0, np.zeros((2, 30)), cfg)
    assert not rep.converged
    assert rep.residual_inf > cfg.tol


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(delta_p=-0.1)
    with pytest.raises(ValueError):
        PotentialSet(1.0, np.zeros((2, 3)))


def test_report_invariant(row2):
    for rep in continuation_sweep(row2, [1.4, 2.6]):
        assert rep.converged
        assert rep.residual_inf <= 1e-9 and rep.gauge_inf <= 1e-9


# -- continuation ----------------------------------------------------------

def test_schedule_down():
    assert continuation_schedule(1.5, 0.1) == [1.9, 1.8, 1.7, 1.6, 1.5]


def test_schedule_up_partial_step():
    assert continuation_schedule(2.25, 0.1) == [2.1, 2.2, 2.25]


def test_single_target_two(row1):
    (rep,) = continuation_sweep(row1, [2.0])
    np.testing.assert_array_equal(rep.potentials.phis, l2_potentials(row1).potentials)
    assert rep.iterations == 0


def test_sweep_visits_schedule(row2):
    (rep,) = continuation_sweep(row2, [1.5])
    assert [p for p, _ in rep.continuation_path] == [2.0, 1.9, 1.8, 1.7, 1.6, 1.5]


def test_sweep_preserves_input_order(row2):
    reps = continuation_sweep(row2, [3.0, 1.2, 2.0, 1.6])
    assert [r.p for r in reps] == [3.0, 1.2, 2.0, 1.6]
    assert all(r.converged for r in reps)


def test_sweep_rejects_bad_targets(row2):
    with pytest.raises(ValueError):
        continuation_sweep(row2, [1.0, 2.0])


def test_flatter_below_peaked_above(row2):
    reps = continuation_sweep(row2, [1.2, 1.6, 2.0, 2.4, 3.0])
    for axis in (0, 1):
        ranges = [np.ptp(r.potentials.phis[axis]) for r in reps]
        assert ranges == sorted(ranges)


def test_equal_marginals_symmetry():
    mesh = build_mesh(3, 10)
    g = gaussian(mesh, 0.45, 0.07)
    for rep in continuation_sweep([g, g, g], [1.5, 2.8]):
        phis = rep.potentials.phis
        np.testing.assert_allclose(phis[1], phis[2], atol=1e-9)
        shift = phis[0] - phis[1]
        assert np.ptp(shift) <= 1e-9


@pytest.mark.parametrize("gaussian_axis", [0, 2])
def test_uniform_axes_constant(gaussian_axis):
    mesh = build_mesh(3, 10)
    gs = [uniform(mesh)] * 3
    gs[gaussian_axis] = gaussian(mesh, 0.35, 0.05)
    for rep in continuation_sweep(gs, [1.3, 2.7]):
        assert rep.converged
        for i in range(3):
            if i != gaussian_axis:
                assert np.ptp(rep.potentials.phis[i]) <= 1e-6


def test_signed_zero_mass_marginals():
    mesh = build_mesh(2, 20)
    a = MarginalTable(np.cos(2 * np.pi * mesh.centers))
    b = MarginalTable(np.sin(2 * np.pi * mesh.centers))
    for rep in continuation_sweep([a, b], [1.6, 2.0, 2.4]):
        assert rep.converged
