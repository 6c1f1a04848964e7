"""Weighted baseline measures and static replication of separable payoffs.

Under a baseline probability density ``w`` on the hypercube the marginal
equations integrate the minimal density against ``w`` and the gauge rows
against the axis marginals of ``w``. Each additive component of the
resulting payoff is split into a bond, a forward and strips of puts and
calls by the Carr-Madan formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .closed_form import l2_potentials
from .discretization import Mesh, MarginalTable, all_marginals, as_tables, lift
from .solver import DiscreteSystem, PotentialSet, SolveReport, SolverConfig, continuation_sweep, solve_at_p


@dataclass(frozen=True)
class WeightSpec:
    """Baseline density, either as per-axis factors or as a full tensor (n <= 3)."""

    factors: tuple[np.ndarray, ...] | None = None
    tensor: np.ndarray | None = None

    def __post_init__(self):
        if (self.factors is None) == (self.tensor is None):
            raise ValueError("give exactly one of factors or tensor")
        if self.factors is not None:
            factors = tuple(np.array(f, dtype=float) for f in self.factors)
            for i, f in enumerate(factors):
                if np.any(f <= 0):
                    raise ValueError(f"weight factor {i} has nonpositive values")
                mass = f.mean()
                if abs(mass - 1.0) > 1e-10:
                    raise ValueError(f"weight factor {i} has discrete mass {mass}, expected 1")
            object.__setattr__(self, "factors", factors)
        else:
            t = np.array(self.tensor, dtype=float)
            if t.ndim > 3:
                raise ValueError("full weight tensors are supported for n <= 3 only")
            if np.any(t <= 0):
                raise ValueError("weight tensor has nonpositive values")
            object.__setattr__(self, "tensor", t)

    @classmethod
    def product(cls, factors: Sequence) -> "WeightSpec":
        return cls(factors=tuple(f.values if isinstance(f, MarginalTable) else f for f in factors))

    @classmethod
    def unit(cls, n: int, m: int) -> "WeightSpec":
        return cls(factors=tuple(np.ones(m) for _ in range(n)))

    def cell_weights(self, mesh: Mesh) -> np.ndarray:
        if self.tensor is not None:
            return self.tensor.reshape(mesh.shape)
        if len(self.factors) != mesh.n:
            raise ValueError(f"{len(self.factors)} weight factors for n={mesh.n}")
        out = np.ones(mesh.shape)
        for i, f in enumerate(self.factors):
            out = out * lift(f, i, mesh)
        return out

    def axis_weights(self, mesh: Mesh) -> np.ndarray:
        if self.tensor is not None:
            return all_marginals(self.tensor.reshape(mesh.shape), mesh)
        return np.stack(self.factors)


def weighted_system(marginals: Sequence[MarginalTable], weights: WeightSpec) -> DiscreteSystem:
    marginals = as_tables(marginals)
    mesh = Mesh(len(marginals), marginals[0].m)
    return DiscreteSystem(marginals, weights.cell_weights(mesh), weights.axis_weights(mesh))


def solve_weighted(marginals: Sequence[MarginalTable], weights: WeightSpec, p: float,
                   config: SolverConfig | None = None,
                   seed: PotentialSet | np.ndarray | None = None) -> SolveReport:
    """Solve the weighted potentials system at exponent ``p``.

    Without a seed the solve continues in ``p`` from 2, starting at the
    unweighted closed form. Unit weights reproduce :func:`solve_at_p` and
    :func:`continuation_sweep` exactly.
    """
    system = weighted_system(marginals, weights)
    if seed is not None:
        return solve_at_p(system.marginals, p, seed, config, system=system)
    (report,) = continuation_sweep(system.marginals, [p], config, system=system)
    return report


def weighted_density_marginals(potentials: PotentialSet, weights: WeightSpec) -> np.ndarray:
    """Marginals of ``psi(phi_bar) * w``, i.e. what the weighted constraints prescribe."""
    from .analysis import minimal_density

    mesh = potentials.mesh()
    return all_marginals(minimal_density(potentials) * weights.cell_weights(mesh), mesh)


# --------------------------------------------------------------------------
# Carr-Madan

@dataclass(frozen=True)
class PayoffDecomposition:
    """Bond, forward and option strips replicating a tabulated payoff.

    ``put_weights``/``call_weights`` hold the second derivative at each
    strike; ``put_quadrature``/``call_quadrature`` hold the strike spacing
    used to integrate them (half a spacing at ``k0``, which carries both a
    put and a call).
    """

    strikes: np.ndarray
    k0: float
    bond_units: float
    forward_units: float
    put_strikes: np.ndarray
    put_weights: np.ndarray
    put_quadrature: np.ndarray
    call_strikes: np.ndarray
    call_weights: np.ndarray
    call_quadrature: np.ndarray

    @property
    def put_units(self) -> np.ndarray:
        return self.put_weights * self.put_quadrature

    @property
    def call_units(self) -> np.ndarray:
        return self.call_weights * self.call_quadrature


def carr_madan_decompose(strikes, payoff, k0: float | None = None) -> PayoffDecomposition:
    """Decompose a payoff tabulated on a uniform strike grid.

    Second derivatives use centered differences at interior strikes and the
    forward position uses the centered first difference at ``k0``. ``k0``
    defaults to the middle strike and is moved to the nearest interior
    strike otherwise. Reconstruction is exact at every grid strike.
    """
    strikes = np.asarray(strikes, dtype=float)
    payoff = np.asarray(payoff, dtype=float)
    if strikes.ndim != 1 or strikes.shape != payoff.shape:
        raise ValueError("strikes and payoff must be 1-d arrays of equal length")
    if strikes.size < 5:
        raise ValueError(f"need at least 5 strikes, got {strikes.size}")
    spacing = np.diff(strikes)
    h = spacing.mean()
    if h <= 0 or np.max(np.abs(spacing - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("strike grid must be increasing and uniform")
    if k0 is None:
        j = strikes.size // 2
    else:
        if not strikes[0] < k0 < strikes[-1]:
            raise ValueError(f"k0={k0} lies outside the open strike range ({strikes[0]}, {strikes[-1]})")
        j = int(np.clip(np.rint((k0 - strikes[0]) / h), 1, strikes.size - 2))

    second = (payoff[2:] - 2 * payoff[1:-1] + payoff[:-2]) / h**2  # at strikes[1:-1]
    forward = (payoff[j + 1] - payoff[j - 1]) / (2 * h)
    k = j - 1  # index of k0 inside ``second``
    put_q = np.full(j, h)
    put_q[-1] = 0.5 * h
    call_q = np.full(strikes.size - 1 - j, h)
    call_q[0] = 0.5 * h
    return PayoffDecomposition(
        strikes=strikes,
        k0=float(strikes[j]),
        bond_units=float(payoff[j]),
        forward_units=float(forward),
        put_strikes=strikes[1:j + 1],
        put_weights=second[:k + 1],
        put_quadrature=put_q,
        call_strikes=strikes[j:-1],
        call_weights=second[k:],
        call_quadrature=call_q,
    )


def reconstruct(decomposition: PayoffDecomposition, strikes) -> np.ndarray:
    """Evaluate the replicating portfolio's payoff at terminal prices ``strikes``."""
    d = decomposition
    K = np.asarray(strikes, dtype=float)[..., None]
    puts = np.maximum(d.put_strikes - K, 0.0) @ d.put_units
    calls = np.maximum(K - d.call_strikes, 0.0) @ d.call_units
    return d.bond_units + d.forward_units * (K[..., 0] - d.k0) + puts + calls
