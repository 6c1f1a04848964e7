"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error, 2 a solve did not
converge, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .discretization import Mesh
from .files import (
    ConfigError,
    ExperimentConfig,
    fmt,
    read_payoff_csv,
    write_csv,
    write_json,
    write_potentials_csv,
)
from .finance import carr_madan_decompose, reconstruct, weighted_system
from .primal import PrimalProblem, solve_primal
from .solver import DiscreteSystem, PotentialSet, SolveReport, continuation_sweep

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3
ORACLE_MAX_M = 10

log = logging.getLogger("marginal_lp")


def _system(cfg: ExperimentConfig) -> DiscreteSystem:
    if cfg.weights is not None:
        return weighted_system(cfg.marginals, cfg.weights)
    return DiscreteSystem(cfg.marginals)


def _summary(cfg: ExperimentConfig, report: SolveReport) -> dict:
    return {
        "p": report.p,
        "n": cfg.n,
        "m": cfg.m,
        "bound": report.bound,
        "residual_inf": report.residual_inf,
        "gauge_inf": report.gauge_inf,
        "iterations": report.iterations,
        "converged": report.converged,
        "epsilon": report.epsilon,
    }


def _out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    path = out or cfg.out_dir
    if path is None:
        raise ConfigError("config error at out_dir: no output directory in config or --out")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _p_tag(p: float) -> str:
    return f"{p:.6g}"


def cmd_solve(cfg: ExperimentConfig, out: str | None = None) -> int:
    if len(cfg.p_targets) != 1:
        raise ConfigError(f"config error at p_targets: solve takes one exponent, got {len(cfg.p_targets)}")
    out_dir = _out_dir(cfg, out)
    (report,) = continuation_sweep(cfg.marginals, cfg.p_targets, cfg.solver, system=_system(cfg))
    write_potentials_csv(out_dir / "potentials.csv", report.potentials)
    write_json(out_dir / "summary.json", _summary(cfg, report))
    return EXIT_OK if report.converged else EXIT_CONVERGENCE


def cmd_sweep(cfg: ExperimentConfig, out: str | None = None) -> int:
    out_dir = _out_dir(cfg, out)
    reports = continuation_sweep(cfg.marginals, cfg.p_targets, cfg.solver, system=_system(cfg))
    x = Mesh(cfg.n, cfg.m).centers
    runs, long_rows = [], []
    for report in reports:
        name = f"potentials_p{_p_tag(report.p)}.csv"
        write_potentials_csv(out_dir / name, report.potentials)
        runs.append({**_summary(cfg, report), "file": name,
                     "continuation_path": [list(step) for step in report.continuation_path]})
        for i in range(cfg.n):
            long_rows.extend([report.p, i + 1, x[k], report.potentials.phis[i, k]] for k in range(cfg.m))
    write_csv(out_dir / "sweep_long.csv", ["p", "axis", "xi", "phi"],
              ([float(p), axis, float(xi), float(phi)] for p, axis, xi, phi in long_rows))
    write_json(out_dir / "index.json", {"runs": runs})
    return EXIT_OK if all(r.converged for r in reports) else EXIT_CONVERGENCE


def _check(passed: bool, **values) -> dict:
    return {"passed": bool(passed), **values}


def verify_potentials(cfg: ExperimentConfig, potentials: PotentialSet, system: DiscreteSystem,
                      eps: float = 0.0) -> dict:
    """All verification checks for one set of potentials, keyed by check name."""
    mesh = cfg.mesh
    checks = {}
    res_inf, gauge_inf = system.split(system.residual(potentials.phis, potentials.p, eps))
    checks["residual"] = _check(res_inf <= cfg.solver.tol and gauge_inf <= cfg.solver.tol,
                                residual_inf=res_inf, gauge_inf=gauge_inf)

    try:
        b = analysis.sharp_bound(potentials, mesh)
        rel = abs(b.h_norm_p - b.bound) / abs(b.bound)
        checks["attainment"] = _check(rel <= 1e-12, bound=b.bound, h_norm_p=b.h_norm_p, relative_error=rel)
    except ArithmeticError as exc:
        checks["attainment"] = _check(False, error=str(exc))

    mass = system.mass
    if abs(mass) > 0:
        joint = analysis.product_joint(cfg.marginals) / mass ** (cfg.n - 1)
        try:
            d = analysis.duality_check(potentials, joint, mesh)
            checks["duality_product"] = _check(d.ok, bound=d.bound, candidate_norm_p=d.candidate_norm_p,
                                               gap=d.gap, phi_bar_norm_q=d.phi_bar_norm_q,
                                               candidate_norm=d.candidate_norm,
                                               corollary_normed_form=d.corollary_holds)
        except ValueError as exc:
            checks["duality_product"] = _check(False, error=str(exc))

    probe = analysis.minimality_probe(potentials, mesh, trials=100, amplitude=1e-3,
                                      seed=cfg.seed, marginals=cfg.marginals)
    checks["minimality"] = _check(probe.min_drop >= -1e-9 and probe.max_pairing <= 1e-9,
                                  min_drop=probe.min_drop, max_pairing=probe.max_pairing)

    if cfg.m <= ORACLE_MAX_M and cfg.weights is None:
        try:
            primal = solve_primal(PrimalProblem(mesh, tuple(cfg.marginals), potentials.p))
            h = analysis.minimal_density(potentials, mesh)
            bound = analysis.sharp_bound(potentials, mesh).bound
            sup = float(np.max(np.abs(h - primal.table)))
            rel = abs(primal.objective - bound) / abs(bound)
            checks["oracle"] = _check(sup <= 1e-4 and rel <= 1e-6, density_sup=sup, objective_rel=rel,
                                      primal_objective=primal.objective, dual_bound=bound)
        except (RuntimeError, ValueError) as exc:
            checks["oracle"] = _check(False, error=str(exc))
    return checks


def cmd_verify(cfg: ExperimentConfig, out: str | None = None, corrupt: float = 0.0) -> int:
    out_dir = _out_dir(cfg, out)
    system = _system(cfg)
    reports = continuation_sweep(cfg.marginals, cfg.p_targets, cfg.solver, system=system)
    runs, failed = [], []
    for report in reports:
        potentials = report.potentials
        if corrupt:
            phis = potentials.phis.copy()
            phis[0] += corrupt
            potentials = PotentialSet(potentials.p, phis)
        checks = verify_potentials(cfg, potentials, system, report.epsilon)
        names = sorted(k for k, v in checks.items() if not v["passed"])
        failed.extend(f"p={_p_tag(report.p)}:{k}" for k in names)
        runs.append({"p": report.p, "converged": report.converged, "checks": checks})
    write_json(out_dir / "verify_report.json",
               {"n": cfg.n, "m": cfg.m, "corrupt": corrupt, "passed": not failed, "failed": failed, "runs": runs})
    for name in failed:
        print(f"FAILED {name}", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_decompose(payoff_path: str, k0: float | None, out: str | None) -> int:
    strikes, payoff = read_payoff_csv(payoff_path)
    d = carr_madan_decompose(strikes, payoff, k0)
    out_dir = Path(out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    err = np.abs(reconstruct(d, strikes) - payoff)[1:-1]
    write_json(out_dir / "decomposition.json", {
        "k0": d.k0,
        "bond_units": d.bond_units,
        "forward_units": d.forward_units,
        "n_strikes": int(strikes.size),
        "reconstruction_error_interior": float(err.max()),
    })
    rows = [["put", float(k), float(w), float(q), float(w * q)]
            for k, w, q in zip(d.put_strikes, d.put_weights, d.put_quadrature)]
    rows += [["call", float(k), float(w), float(q), float(w * q)]
             for k, w, q in zip(d.call_strikes, d.call_weights, d.call_quadrature)]
    write_csv(out_dir / "weights.csv", ["side", "strike", "second_derivative", "quadrature", "units"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marginal-lp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "solve at one exponent"), ("sweep", "continuation over several exponents"),
                        ("verify", "solve and run all verification checks")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        if name == "verify":
            p.add_argument("--corrupt", type=float, default=0.0, metavar="SHIFT",
                           help="shift phi_1 by SHIFT before checking (negative control)")
    p = sub.add_parser("decompose", help="Carr-Madan decomposition of a tabulated payoff")
    p.add_argument("--payoff", required=True, metavar="PATH")
    p.add_argument("--k0", type=float, metavar="NUM")
    p.add_argument("--out", metavar="DIR")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "decompose":
            return cmd_decompose(args.payoff, args.k0, args.out)
        cfg = ExperimentConfig.load(args.config)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out)
        return cmd_verify(cfg, args.out, args.corrupt)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
