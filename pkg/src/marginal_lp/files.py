"""Experiment configuration and the CSV/JSON artifacts written by the CLI.

Numbers are written with 17 significant digits so that every value
round-trips exactly; files use LF line endings.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from .discretization import MarginalSpec, Mesh, build_mesh, sample_marginal
from .finance import WeightSpec
from .solver import PotentialSet, SolverConfig

_number = {"type": "number"}
_marginal = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "gaussian", "beta", "tabulated"]},
        "mu": _number,
        "sigma2": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "values": {"type": "array", "items": _number},
        "normalize": {"type": "boolean"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["n", "m", "marginals", "p_targets"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "m": {"type": "integer", "minimum": 2},
        "marginals": {"type": "array", "items": _marginal, "minItems": 2},
        "p_targets": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}, "minItems": 1},
        "solver": {
            "type": "object",
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "epsilon": {"type": "number", "minimum": 0},
                "delta_p": {"type": "number", "exclusiveMinimum": 0},
                "polish": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
            "additionalProperties": False,
        },
        "weights": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["product", "tensor"]},
                "factors": {"type": "array", "items": _marginal},
                "values": {"type": "array", "items": _number},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
        "out_dir": {"type": "string"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


class ExperimentConfig:
    """Validated experiment description with the marginals already sampled."""

    def __init__(self, raw: dict):
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.path))
        if errors:
            e = errors[0]
            where = "/".join(str(k) for k in e.path) or "<root>"
            raise ConfigError(f"config error at {where}: {e.message}")
        self.raw = raw
        self.n = raw["n"]
        self.m = raw["m"]
        if len(raw["marginals"]) != self.n:
            raise ConfigError(f"config error at marginals: expected {self.n} entries, got {len(raw['marginals'])}")
        try:
            self.mesh: Mesh = build_mesh(self.n, self.m)
            self.marginals = [sample_marginal(_spec(d), self.mesh) for d in raw["marginals"]]
            self.weights = _weights(raw.get("weights"), self.mesh)
            self.solver = SolverConfig(**_solver_kwargs(raw.get("solver", {})))
        except ValueError as exc:
            raise ConfigError(f"config error: {exc}") from exc
        self.p_targets = [float(p) for p in raw["p_targets"]]
        self.seed = raw.get("seed", 0)
        self.out_dir = raw.get("out_dir")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls(raw)


def _spec(d: dict) -> MarginalSpec:
    d = dict(d)
    if "values" in d:
        d["values"] = tuple(d["values"])
    d.setdefault("normalize", d["kind"] != "tabulated")
    return MarginalSpec(**d)


def _weights(d: dict | None, mesh: Mesh) -> WeightSpec | None:
    if d is None:
        return None
    if d["kind"] == "product":
        factors = d.get("factors") or []
        if len(factors) != mesh.n:
            raise ValueError(f"weights need {mesh.n} factors, got {len(factors)}")
        return WeightSpec.product([sample_marginal(_spec({**f, "normalize": True}), mesh) for f in factors])
    values = np.asarray(d.get("values") or [], dtype=float)
    if values.size != mesh.size:
        raise ValueError(f"weight tensor needs {mesh.size} values, got {values.size}")
    return WeightSpec(tensor=values.reshape(mesh.shape))


def _solver_kwargs(d: dict) -> dict:
    out = dict(d)
    if "polish" in out:
        out["polish"] = tuple(out["polish"])
    return out


# --------------------------------------------------------------------------
# writers and readers

def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_potentials_csv(path, potentials: PotentialSet) -> None:
    x = Mesh(potentials.n, potentials.m).centers
    header = ["xi"] + [f"phi_{i + 1}" for i in range(potentials.n)]
    rows = ([float(x[k])] + [float(v) for v in potentials.phis[:, k]] for k in range(potentials.m))
    write_csv(path, header, rows)


def read_potentials_csv(path, p: float) -> PotentialSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PotentialSet(p, data[:, 1:].T)


def read_payoff_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns (strike, payoff), with an optional header row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not _is_numeric(rows[0]):
        rows = rows[1:]
    if not rows or any(len(r) < 2 or not _is_numeric(r[:2]) for r in rows):
        raise ValueError(f"{path}: expected two numeric columns strike,payoff")
    data = np.array([[float(r[0]), float(r[1])] for r in rows])
    return data[:, 0], data[:, 1]


def _is_numeric(row) -> bool:
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True
