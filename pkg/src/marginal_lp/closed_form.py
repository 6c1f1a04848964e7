"""Explicit solution of the quadratic (p = 2) problem."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretization import MarginalTable, as_tables, common_mass


@dataclass(frozen=True)
class L2Solution:
    """Potentials and bound of the p = 2 problem.

    The minimal density is ``(1/n) * sum_i potentials[i](x_i)``, which
    equals ``sum_i g_i(x_i) - (n - 1) * mass``.
    """

    potentials: np.ndarray
    mass: float
    bound: float

    @property
    def n(self) -> int:
        return self.potentials.shape[0]

    def minimal_density(self) -> np.ndarray:
        n, m = self.potentials.shape
        total = np.zeros((m,) * n)
        for i in range(n):
            shape = [1] * n
            shape[i] = m
            total = total + self.potentials[i].reshape(shape)
        return total / n


def l2_bound(marginals: Sequence[MarginalTable], mass: float | None = None) -> float:
    """Lower bound ``sum_i int g_i**2 - (n - 1) * mass**2`` on ``int g**2``."""
    marginals = as_tables(marginals)
    c = common_mass(marginals)
    if mass is not None and abs(mass - c) > 1e-10:
        raise ValueError(f"common mass {mass} disagrees with the marginal mass {c}")
    n = len(marginals)
    return float(sum(np.mean(g.values**2) for g in marginals) - (n - 1) * c**2)


def l2_potentials(marginals: Sequence[MarginalTable]) -> L2Solution:
    """Closed-form potentials: ``n*g_1`` on the first axis, ``n*(g_i - mass)`` on the others."""
    marginals = as_tables(marginals)
    c = common_mass(marginals)
    n = len(marginals)
    phis = np.stack([n * g.values for g in marginals])
    # Per-axis masses (equal to c within 1e-10) keep the gauge rows exactly zero.
    for i in range(1, n):
        phis[i] -= n * marginals[i].mass
    phis.setflags(write=False)
    return L2Solution(potentials=phis, mass=c, bound=l2_bound(marginals))
