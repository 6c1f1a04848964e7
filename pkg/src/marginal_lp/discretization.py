"""Uniform tensor meshes on the unit hypercube and marginal tables.

Full-grid tables are numpy arrays of shape ``(m,) * n``. Flattened in C
order, axis 0 (the first coordinate) varies slowest, which is the storage
order used for every file written by the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

#: Default cap on ``n * m**n``; admits n = 4 at m = 30 but not n = 5.
DEFAULT_MEMORY_BUDGET = 10_000_000

MARGINAL_KINDS = ("uniform", "gaussian", "beta", "tabulated")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Mesh:
    """Midpoint tensor mesh with ``m`` cells along each of ``n`` axes."""

    n: int
    m: int

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) / self.m

    @property
    def axis_weight(self) -> float:
        return 1.0 / self.m

    @property
    def cell_weight(self) -> float:
        return float(self.m) ** (-self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    def integrate(self, table: np.ndarray) -> float:
        """Midpoint-rule integral of a full-grid table over the hypercube."""
        return float(np.mean(table))


def build_mesh(n: int, m: int = 30, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> Mesh:
    """Build the uniform midpoint mesh on ``[0, 1]**n``.

    Raises
    ------
    ValueError
        If ``n < 2``, ``m < 2`` or ``n * m**n`` exceeds ``memory_budget``.
    """
    n, m = int(n), int(m)
    if n < 2:
        raise ValueError(f"dimension n={n} is below 2")
    if m < 2:
        raise ValueError(f"cells per axis m={m} is below 2")
    if n * m**n > memory_budget:
        raise ValueError(
            f"grid with n={n}, m={m} needs n*m**n={n * m**n} entries, "
            f"over the memory budget of {memory_budget}"
        )
    return Mesh(n, m)


@dataclass(frozen=True)
class MarginalSpec:
    """Recipe for one marginal density sampled at the cell centers."""

    kind: str = "uniform"
    mu: float | None = None
    sigma2: float | None = None
    alpha: float | None = None
    beta: float | None = None
    values: tuple[float, ...] | None = None
    normalize: bool = True
    target: float = 1.0

    def __post_init__(self):
        if self.kind not in MARGINAL_KINDS:
            raise ValueError(f"unknown marginal kind {self.kind!r}; expected one of {MARGINAL_KINDS}")
        if self.kind == "gaussian":
            if self.mu is None or self.sigma2 is None:
                raise ValueError("gaussian marginal needs mu and sigma2")
            if not self.sigma2 > 0:
                raise ValueError(f"gaussian marginal needs sigma2 > 0, got {self.sigma2}")
        elif self.kind == "beta":
            if self.alpha is None or self.beta is None:
                raise ValueError("beta marginal needs alpha and beta")
            if not (self.alpha > 0 and self.beta > 0):
                raise ValueError(f"beta marginal needs alpha, beta > 0, got {self.alpha}, {self.beta}")
        elif self.kind == "tabulated":
            if self.values is None:
                raise ValueError("tabulated marginal needs values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class MarginalTable:
    """Values of one marginal at the cell centers of one axis."""

    values: np.ndarray = field()

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise ValueError("marginal table must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("marginal table contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) / self.m)

    def normalized(self, target: float = 1.0) -> "MarginalTable":
        mass = self.mass
        if mass == 0.0:
            raise ValueError("cannot normalise a marginal table with zero mass")
        return MarginalTable(self.values * (target / mass))


def sample_marginal(spec: MarginalSpec, mesh: Mesh) -> MarginalTable:
    """Sample ``spec`` at the cell centers of ``mesh``.

    Gaussian densities are evaluated untruncated and then rescaled to the
    target discrete mass when ``spec.normalize`` is set.
    """
    x = mesh.centers
    if spec.kind == "uniform":
        values = np.ones(mesh.m)
    elif spec.kind == "gaussian":
        values = stats.norm.pdf(x, loc=spec.mu, scale=np.sqrt(spec.sigma2))
    elif spec.kind == "beta":
        values = stats.beta.pdf(x, spec.alpha, spec.beta)
    else:
        values = np.asarray(spec.values, dtype=float)
        if values.shape != (mesh.m,):
            raise ValueError(f"tabulated marginal has {values.size} values, mesh has m={mesh.m}")
    table = MarginalTable(values)
    if spec.normalize:
        table = table.normalized(spec.target)
    return table


def marginalize(h: np.ndarray, axis: int, mesh: Mesh) -> MarginalTable:
    """Discrete marginal of a full-grid table along ``axis`` (0-based)."""
    h = np.asarray(h, dtype=float).reshape(mesh.shape)
    if not 0 <= axis < mesh.n:
        raise ValueError(f"axis {axis} out of range for n={mesh.n}")
    others = tuple(k for k in range(mesh.n) if k != axis)
    return MarginalTable(h.mean(axis=others))


def all_marginals(h: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Stack of the ``n`` discrete marginals of ``h``, shape ``(n, m)``."""
    return np.stack([marginalize(h, i, mesh).values for i in range(mesh.n)])


def lift(values: np.ndarray, axis: int, mesh: Mesh) -> np.ndarray:
    """Broadcastable view of a per-axis vector as a function on the full grid."""
    shape = [1] * mesh.n
    shape[axis] = mesh.m
    return np.asarray(values, dtype=float).reshape(shape)


def as_tables(marginals: Sequence) -> list[MarginalTable]:
    """Coerce arrays or tables into a list of :class:`MarginalTable`."""
    return [g if isinstance(g, MarginalTable) else MarginalTable(g) for g in marginals]


def common_mass(marginals: Sequence[MarginalTable], tol: float = 1e-10) -> float:
    """Shared discrete mass of compatible marginals.

    Raises ``ValueError`` when lengths differ or masses disagree by more than
    ``tol``; the marginal constraint set is empty in that case.
    """
    marginals = as_tables(marginals)
    lengths = {g.m for g in marginals}
    if len(lengths) != 1:
        raise ValueError(f"marginal tables have different lengths {sorted(lengths)}")
    masses = np.array([g.mass for g in marginals])
    if np.ptp(masses) > tol:
        raise ValueError(f"incompatible marginals: discrete masses {masses.tolist()} differ by more than {tol}")
    return float(masses[0])
