"""Sharp bound evaluation, duality gaps and perturbation checks of minimality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretization import Mesh, MarginalTable, all_marginals, as_tables, lift
from .solver import PotentialSet, psi

ATTAINMENT_RTOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    p: float
    q: float
    bound: float
    h_norm_p: float
    phi_bar_norm_q: float
    attainment_error: float

    @property
    def h_norm(self) -> float:
        """``||h*||_p`` itself rather than its p-th power."""
        return self.h_norm_p ** (1.0 / self.p)


@dataclass(frozen=True)
class DualityRecord:
    bound: float
    candidate_norm_p: float
    gap: float
    ok: bool
    phi_bar_norm_q: float
    candidate_norm: float
    marginal_error: float

    @property
    def corollary_holds(self) -> bool:
        """Literal normed inequality ``||phi_bar||_q <= ||g||_p``; reported, never asserted."""
        return self.phi_bar_norm_q <= self.candidate_norm


@dataclass(frozen=True)
class Perturbation:
    """Full-grid table whose discrete marginals all vanish."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def marginal_error(self) -> float:
        mesh = Mesh(self.table.ndim, self.table.shape[0])
        return float(np.max(np.abs(all_marginals(self.table, mesh))))


@dataclass(frozen=True)
class ProbeResult:
    min_drop: float
    max_pairing: float
    trials: int
    amplitude: float


def _mesh_for(potentials: PotentialSet, mesh: Mesh | None) -> Mesh:
    if mesh is None:
        return potentials.mesh()
    if (mesh.n, mesh.m) != potentials.phis.shape:
        raise ValueError(f"mesh (n={mesh.n}, m={mesh.m}) does not match potentials {potentials.phis.shape}")
    return mesh


def minimal_density(potentials: PotentialSet, mesh: Mesh | None = None) -> np.ndarray:
    """Minimal density ``psi(phi_bar)`` on the full grid (no smoothing)."""
    _mesh_for(potentials, mesh)
    return psi(potentials.phi_bar(), potentials.p, 0.0)


def sharp_bound(potentials: PotentialSet, mesh: Mesh | None = None) -> BoundReport:
    """Evaluate ``mean |phi_bar|**q`` and check it against ``mean |h*|**p`` cell by cell."""
    _mesh_for(potentials, mesh)
    p, q = potentials.p, potentials.q
    fbar = potentials.phi_bar()
    h = psi(fbar, p, 0.0)
    lhs = np.abs(h) ** p
    rhs = np.abs(fbar) ** q
    scale = np.maximum(np.abs(rhs), np.finfo(float).tiny)
    err = float(np.max(np.abs(lhs - rhs) / scale))
    if err > ATTAINMENT_RTOL:
        raise ArithmeticError(f"attainment identity violated: cellwise relative error {err:.3e}")
    bound = float(np.mean(rhs))
    return BoundReport(
        p=p,
        q=q,
        bound=bound,
        h_norm_p=float(np.mean(lhs)),
        phi_bar_norm_q=bound ** (1.0 / q),
        attainment_error=err,
    )


def duality_check(potentials: PotentialSet, candidate_joint: np.ndarray, mesh: Mesh | None = None,
                  marginal_tol: float = 1e-8, gap_tol: float = 1e-9) -> DualityRecord:
    """Compare the sharp bound with ``mean |g|**p`` for a feasible joint ``g``.

    The candidate must reproduce the marginals of the minimal density within
    ``marginal_tol``; otherwise a ``ValueError`` is raised.
    """
    mesh = _mesh_for(potentials, mesh)
    g = np.asarray(candidate_joint, dtype=float).reshape(mesh.shape)
    target = all_marginals(minimal_density(potentials, mesh), mesh)
    err = float(np.max(np.abs(all_marginals(g, mesh) - target)))
    if err > marginal_tol:
        raise ValueError(f"candidate marginals differ from the solved ones by {err:.3e} > {marginal_tol}")
    report = sharp_bound(potentials, mesh)
    norm_p = float(np.mean(np.abs(g) ** potentials.p))
    gap = norm_p - report.bound
    return DualityRecord(
        bound=report.bound,
        candidate_norm_p=norm_p,
        gap=gap,
        ok=gap >= -gap_tol,
        phi_bar_norm_q=report.phi_bar_norm_q,
        candidate_norm=norm_p ** (1.0 / potentials.p),
        marginal_error=err,
    )


def product_joint(marginals: Sequence[MarginalTable]) -> np.ndarray:
    """Independent joint ``prod_i g_i(x_i)`` for unit-mass marginals."""
    marginals = as_tables(marginals)
    mesh = Mesh(len(marginals), marginals[0].m)
    out = np.ones(mesh.shape)
    for i, g in enumerate(marginals):
        out = out * lift(g.values, i, mesh)
    return out


def project_vanishing(table: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Project a full-grid table onto the tables with vanishing marginals.

    Subtracts every lifted axis marginal and adds back ``n - 1`` times the
    grand mean.
    """
    table = np.asarray(table, dtype=float).reshape(mesh.shape)
    out = table + (mesh.n - 1) * table.mean()
    for i in range(mesh.n):
        others = tuple(k for k in range(mesh.n) if k != i)
        out = out - table.mean(axis=others, keepdims=True)
    return out


def project_feasible(table: np.ndarray, marginals: Sequence[MarginalTable], mesh: Mesh) -> np.ndarray:
    """Nearest table (in the discrete L2 sense) with the given marginals."""
    marginals = as_tables(marginals)
    table = np.asarray(table, dtype=float).reshape(mesh.shape)
    diff = np.stack([g.values for g in marginals]) - all_marginals(table, mesh)
    out = table - (mesh.n - 1) * diff[0].mean()
    for i in range(mesh.n):
        out = out + lift(diff[i], i, mesh)
    return out


def random_perturbation(mesh: Mesh, seed=None, amplitude: float = 1e-3) -> Perturbation:
    """Random table with vanishing marginals, scaled to sup-norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    phi = project_vanishing(rng.standard_normal(mesh.shape), mesh)
    return Perturbation(_scale(phi, amplitude))


def _scale(phi: np.ndarray, amplitude: float) -> np.ndarray:
    peak = np.max(np.abs(phi))
    if peak == 0:
        return np.zeros_like(phi)
    return phi * (amplitude / peak)


def minimality_probe(potentials: PotentialSet, mesh: Mesh | None = None, trials: int = 100,
                     amplitude: float = 1e-3, seed: int = 0,
                     marginals: Sequence[MarginalTable] | None = None) -> ProbeResult:
    """Smallest change of ``mean |h|**p`` under perturbations with vanishing marginals.

    The base point is the minimal density of ``potentials``. When
    ``marginals`` is given it is first moved onto the tables with those
    marginals, so potentials that do not solve the system give a base point
    that can be improved. Each trial draws one perturbation and tries both
    signs; an extra trial uses the projected gradient direction. Also
    returns the largest ``|mean(sign(h)|h|**(p-1) * phi)|`` over the draws.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    mesh = _mesh_for(potentials, mesh)
    p = potentials.p
    h = minimal_density(potentials, mesh)
    if marginals is not None:
        h = project_feasible(h, marginals, mesh)
    grad = np.sign(h) * np.abs(h) ** (p - 1)
    base = np.mean(np.abs(h) ** p)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    directions = [random_perturbation(mesh, s, amplitude).table for s in seeds]
    # A projected gradient at rounding level is noise: rescaling it would also
    # rescale its marginal error, so the extra trial is skipped.
    steepest = project_vanishing(grad, mesh)
    if np.max(np.abs(steepest)) > 1e-10 * max(1.0, np.max(np.abs(grad))):
        steepest = project_vanishing(_scale(steepest, 1.0), mesh)
        directions.append(_scale(steepest, amplitude))

    min_drop = np.inf
    max_pairing = 0.0
    for phi in directions[:trials]:
        max_pairing = max(max_pairing, abs(float(np.mean(grad * phi))))
    for phi in directions:
        for sgn in (1.0, -1.0):
            drop = float(np.mean(np.abs(h + sgn * phi) ** p) - base)
            min_drop = min(min_drop, drop)
    return ProbeResult(min_drop=min_drop, max_pairing=max_pairing, trials=trials, amplitude=amplitude)
