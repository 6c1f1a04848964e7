"""Discrete potentials solver for general exponents p > 1.

The unknowns are ``n`` vectors ``phi_i`` sampled at the cell centers. The
minimal density is ``psi(mean_i phi_i(x_i))`` and the system to solve
stacks, for every axis, the mismatch between its discrete marginal and the
data, followed by ``n - 1`` gauge rows ``mean(phi_i) = 0`` for ``i >= 2``.
The system is solved by Levenberg-Marquardt with an analytic Jacobian and
globalised by continuation in ``p`` from the closed-form p = 2 solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .closed_form import l2_potentials
from .discretization import Mesh, MarginalTable, as_tables, build_mesh, common_mass

log = logging.getLogger(__name__)


class SingularDerivativeError(ArithmeticError):
    """psi has an unbounded derivative at a point where it was requested."""


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# nonlinearity

def psi(s, p: float, eps: float = 0.0):
    """Inverse of ``t -> sign(t)|t|**(p-1)``, optionally smoothed at 0.

    With ``eps > 0`` the modulus is replaced by ``sqrt(s**2 + eps**2)``.
    """
    s = np.asarray(s, dtype=float)
    a = 1.0 / (p - 1.0)
    if eps > 0:
        mod = np.sqrt(s * s + eps * eps)
    else:
        mod = np.abs(s)
    if a == 1.0 and eps == 0:
        out = s.copy()
    else:
        out = np.sign(s) * mod**a
    return out if out.ndim else float(out)


def psi_prime(s, p: float, eps: float = 0.0):
    """Derivative of :func:`psi` in its first argument."""
    s = np.asarray(s, dtype=float)
    a = 1.0 / (p - 1.0)
    if eps > 0:
        r2 = s * s + eps * eps
        out = a * np.abs(s) * r2 ** (0.5 * a - 1.0)
    elif a == 1.0:
        out = np.ones_like(s)
    else:
        mod = np.abs(s)
        if a < 1.0 and np.any(mod == 0):
            raise SingularDerivativeError(
                f"psi'(0) is unbounded for p={p} > 2 without smoothing; use eps > 0"
            )
        with np.errstate(divide="ignore"):
            out = a * mod ** (a - 1.0)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class PotentialSet:
    """Exponent ``p`` and potentials ``phis`` of shape ``(n, m)``."""

    p: float
    phis: np.ndarray

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"exponent p={self.p} must exceed 1")
        phis = np.array(self.phis, dtype=float)
        if phis.ndim != 2 or phis.shape[0] < 2:
            raise ValueError(f"potentials must have shape (n, m) with n >= 2, got {phis.shape}")
        if not np.all(np.isfinite(phis)):
            raise ValueError("potentials contain non-finite values")
        phis.setflags(write=False)
        object.__setattr__(self, "phis", phis)

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    @property
    def m(self) -> int:
        return self.phis.shape[1]

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def mesh(self) -> Mesh:
        return Mesh(self.n, self.m)

    def phi_bar(self) -> np.ndarray:
        """Average potential ``(1/n) sum_i phi_i(x_i)`` on the full grid."""
        return phi_bar(self.phis)

    def with_p(self, p: float) -> "PotentialSet":
        return PotentialSet(p, self.phis)


def phi_bar(phis: np.ndarray) -> np.ndarray:
    n, m = phis.shape
    total = np.zeros((m,) * n)
    for i in range(n):
        shape = [1] * n
        shape[i] = m
        total = total + phis[i].reshape(shape)
    return total / n


@dataclass(frozen=True)
class SolverConfig:
    """Tuning of the Levenberg-Marquardt loop and the continuation in p.

    ``polish`` is the decreasing sequence of smoothing levels re-solved after
    the main solve at ``epsilon``; its last entry is the floor.
    """

    epsilon: float = 1e-8
    tol: float = 1e-9
    max_iter: int = 200
    lm_lambda: float = 1e-3
    lm_up: float = 10.0
    lm_down: float = 0.1
    lm_lambda_min: float = 1e-12
    lm_lambda_max: float = 1e16
    delta_p: float = 0.1
    polish: tuple[float, ...] = (1e-10, 1e-12, 0.0)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.delta_p > 0:
            raise ValueError("delta_p must be positive")
        if self.epsilon < 0 or any(e < 0 for e in self.polish):
            raise ValueError("smoothing levels must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class SolveReport:
    potentials: PotentialSet
    residual_inf: float
    gauge_inf: float
    iterations: int
    converged: bool
    bound: float
    epsilon: float = 0.0
    continuation_path: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def p(self) -> float:
        return self.potentials.p


# --------------------------------------------------------------------------
# discrete system

class DiscreteSystem:
    """Residual and Jacobian of the discrete potentials equations.

    ``cell_weights`` multiplies the density inside every marginal integral
    and ``gauge_weights[i]`` weighs the gauge row of axis ``i``; both are
    identically one for the unweighted problem.
    """

    def __init__(self, marginals, cell_weights=None, gauge_weights=None):
        self.marginals = as_tables(marginals)
        self.mass = common_mass(self.marginals)
        self.n = len(self.marginals)
        self.m = self.marginals[0].m
        self.mesh = build_mesh(self.n, self.m)
        self.g = np.stack([t.values for t in self.marginals])
        if cell_weights is None:
            cell_weights = np.ones(self.mesh.shape)
        if gauge_weights is None:
            gauge_weights = np.ones((self.n, self.m))
        self.w = np.asarray(cell_weights, dtype=float).reshape(self.mesh.shape)
        self.gw = np.asarray(gauge_weights, dtype=float).reshape(self.n, self.m)

    @property
    def size(self) -> tuple[int, int]:
        return self.n * self.m + self.n - 1, self.n * self.m

    def _others(self, *axes):
        return tuple(k for k in range(self.n) if k not in axes)

    def residual(self, phis: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
        phis = np.asarray(phis, dtype=float).reshape(self.n, self.m)
        hw = psi(phi_bar(phis), p, eps) * self.w
        blocks = [hw.mean(axis=self._others(i)) - self.g[i] for i in range(self.n)]
        gauge = (phis[1:] * self.gw[1:]).mean(axis=1)
        return np.concatenate(blocks + [gauge])

    def jacobian(self, phis: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
        phis = np.asarray(phis, dtype=float).reshape(self.n, self.m)
        n, m = self.n, self.m
        d = psi_prime(phi_bar(phis), p, eps) * self.w
        jac = np.zeros(self.size)
        for i in range(n):
            rows = slice(i * m, (i + 1) * m)
            jac[rows, rows] = np.diag(d.mean(axis=self._others(i)) / n)
            for j in range(i + 1, n):
                cols = slice(j * m, (j + 1) * m)
                block = d.mean(axis=self._others(i, j)) / (n * m)
                jac[rows, cols] = block
                jac[j * m:(j + 1) * m, rows] = block.T
        for i in range(1, n):
            jac[n * m + i - 1, i * m:(i + 1) * m] = self.gw[i] / m
        return jac

    def split(self, r: np.ndarray) -> tuple[float, float]:
        """Sup-norms of the marginal block and the gauge block."""
        k = self.n * self.m
        gauge = np.max(np.abs(r[k:])) if r.size > k else 0.0
        return float(np.max(np.abs(r[:k]))), float(gauge)

    def bound(self, phis: np.ndarray, p: float) -> float:
        q = p / (p - 1.0)
        return float(np.mean(np.abs(phi_bar(np.asarray(phis))) ** q * self.w))


def residual(potentials: PotentialSet, marginals: Sequence[MarginalTable], mesh: Mesh | None = None,
             eps: float = 0.0) -> np.ndarray:
    """Stacked residual of length ``n*m + n - 1``: marginal rows then gauge rows."""
    system = DiscreteSystem(marginals)
    _check_sizes(potentials, system, mesh)
    return system.residual(potentials.phis, potentials.p, eps)


def jacobian(potentials: PotentialSet, marginals: Sequence[MarginalTable], mesh: Mesh | None = None,
             eps: float = 0.0) -> np.ndarray:
    """Analytic Jacobian of :func:`residual` with respect to the flattened potentials."""
    system = DiscreteSystem(marginals)
    _check_sizes(potentials, system, mesh)
    return system.jacobian(potentials.phis, potentials.p, eps)


def _check_sizes(potentials: PotentialSet, system: DiscreteSystem, mesh: Mesh | None):
    if potentials.phis.shape != (system.n, system.m):
        raise ValueError(
            f"potentials of shape {potentials.phis.shape} do not match "
            f"{system.n} marginals of length {system.m}"
        )
    if mesh is not None and (mesh.n, mesh.m) != (system.n, system.m):
        raise ValueError(f"mesh (n={mesh.n}, m={mesh.m}) does not match the marginals")


# --------------------------------------------------------------------------
# Levenberg-Marquardt

def _levenberg_marquardt(system: DiscreteSystem, x0: np.ndarray, p: float, eps: float,
                         config: SolverConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimise ``|r(x)|**2``; returns the best iterate, its residual and the iteration count."""
    x = np.array(x0, dtype=float).ravel()
    r = system.residual(x, p, eps)
    cost = r @ r
    lam = config.lm_lambda
    target = config.tol * 1e-3
    it = 0
    while it < config.max_iter and np.max(np.abs(r)) > target:
        it += 1
        jac = system.jacobian(x, p, eps)
        jtj = jac.T @ jac
        grad = jac.T @ r
        scale = np.diag(jtj).copy()
        scale[scale <= 0] = 1.0
        accepted = False
        while lam <= config.lm_lambda_max:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jtj + lam * np.diag(scale), -grad, rcond=None)[0]
            x_new = x + step
            r_new = system.residual(x_new, p, eps)
            cost_new = r_new @ r_new
            if np.isfinite(cost_new) and cost_new < cost:
                x, r, cost = x_new, r_new, cost_new
                lam = max(lam * config.lm_down, config.lm_lambda_min)
                accepted = True
                break
            lam *= config.lm_up
        if not accepted:
            log.debug("LM stalled at p=%g eps=%g after %d iterations", p, eps, it)
            break
    return x, r, it


def solve_at_p(marginals: Sequence[MarginalTable], p: float, seed: PotentialSet | np.ndarray | None = None,
               config: SolverConfig | None = None, *, system: DiscreteSystem | None = None) -> SolveReport:
    """Solve the discrete system at exponent ``p`` starting from ``seed``.

    The main solve uses ``config.epsilon``; the smoothing is then lowered
    along ``config.polish``. If the unsmoothed derivative is singular the
    polish stops at the last usable level. A run that misses the tolerance
    returns its best iterate with ``converged=False``.
    """
    config = config or SolverConfig()
    if not p > 1:
        raise ValueError(f"exponent p={p} must exceed 1")
    system = system or DiscreteSystem(marginals)
    if seed is None:
        x = l2_potentials(system.marginals).potentials
    elif isinstance(seed, PotentialSet):
        x = seed.phis
    else:
        x = np.asarray(seed, dtype=float)
    if x.shape != (system.n, system.m):
        raise ValueError(f"seed of shape {x.shape} does not match ({system.n}, {system.m})")

    iterations = 0
    eps_used = config.epsilon
    x, r, it = _levenberg_marquardt(system, x, p, eps_used, config)
    iterations += it
    for eps in config.polish:
        if eps >= eps_used:
            continue
        try:
            x_new, r_new, it = _levenberg_marquardt(system, x, p, eps, config)
        except SingularDerivativeError:
            log.info("polish stopped at eps=%g for p=%g: singular derivative", eps_used, p)
            break
        iterations += it
        x, r, eps_used = x_new, r_new, eps

    res_inf, gauge_inf = system.split(r)
    phis = x.reshape(system.n, system.m)
    converged = res_inf <= config.tol and gauge_inf <= config.tol
    if not converged:
        log.warning("no convergence at p=%g: residual %.3e, gauge %.3e", p, res_inf, gauge_inf)
    return SolveReport(
        potentials=PotentialSet(p, phis),
        residual_inf=res_inf,
        gauge_inf=gauge_inf,
        iterations=iterations,
        converged=converged,
        bound=system.bound(phis, p),
        epsilon=eps_used,
    )


# --------------------------------------------------------------------------
# continuation

def continuation_schedule(target: float, delta_p: float = 0.1, start: float = 2.0) -> list[float]:
    """Exponents visited when walking from ``start`` to ``target`` in steps of at most ``delta_p``."""
    if not target > 1:
        raise ValueError(f"target exponent {target} must exceed 1")
    path = []
    k = 1
    direction = 1.0 if target > start else -1.0
    while True:
        p = round(start + direction * k * delta_p, 12)
        if direction * (p - target) >= -1e-12:
            path.append(float(target))
            return path
        path.append(p)
        k += 1


def continuation_sweep(marginals: Sequence[MarginalTable], p_targets: Sequence[float],
                       config: SolverConfig | None = None, *,
                       system: DiscreteSystem | None = None) -> list[SolveReport]:
    """Solve at every target exponent by continuation from p = 2.

    Targets below and above 2 are reached along separate paths, each step
    seeded with the previous solution. Reports come back in input order; a
    failed step is recorded and the walk continues from its best iterate.
    """
    config = config or SolverConfig()
    targets = [float(t) for t in p_targets]
    if any(not t > 1 for t in targets):
        raise ValueError(f"all target exponents must exceed 1, got {targets}")
    system = system or DiscreteSystem(marginals)
    seed = l2_potentials(system.marginals).potentials
    start = solve_at_p(system.marginals, 2.0, seed, config, system=system)
    results: dict[float, SolveReport] = {}
    if any(abs(t - 2.0) <= 1e-12 for t in targets):
        results[2.0] = replace(start, continuation_path=((2.0, start.residual_inf),))

    for branch in (sorted((t for t in targets if t < 2.0), reverse=True),
                   sorted(t for t in targets if t > 2.0)):
        if not branch:
            continue
        path = continuation_schedule(branch[-1], config.delta_p)
        for t in branch:
            if t not in path:
                path.append(t)
        path = sorted(set(path), reverse=branch[0] < 2.0)
        current = start
        visited = [(2.0, start.residual_inf)]
        for p in path:
            current = solve_at_p(system.marginals, p, current.potentials, config, system=system)
            visited.append((p, current.residual_inf))
            if p in branch:
                results[p] = replace(current, continuation_path=tuple(visited))
    return [results[2.0 if abs(t - 2.0) <= 1e-12 else t] for t in targets]
