"""Command-line front end.

Subcommands:

    qcdirichlet solve-beltrami <config.json>   solve the Dirichlet problem for
                                               the Beltrami equation with source
    qcdirichlet solve-poisson  <config.json>   solve div[A grad u] = g
    qcdirichlet audit-criteria <config.json>   evaluate boundary-singularity
                                               criteria for a coefficient
    qcdirichlet qc-map         <config.json>   build the normalized coefficient-
                                               conformal map only

Global flags: --out-dir, --seed, --grid-n, --quiet.  Outputs are CSV fields
plus a run manifest (JSON) with parameters, residuals, verdicts and file
hashes.  Exit codes: 0 solved within tolerances, 2 solved with warnings,
3 stage failure or invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beltrami import StageError, solve_beltrami
from .config import ConfigError, parse_config
from .criteria import (
    circle_mean,
    cz_test,
    default_eps0,
    fmo_test,
    lehto_test,
    mean_test,
    orlicz_test,
    psi_condition_test,
    tangent_dilatation_callable,
)
from .fieldio import export_field, write_manifest
from .fields import ComplexField, RealField
from .poisson import solve_poisson
from .qcmap import NonContractionError, solve_degenerate, solve_mu_conformal

EXIT_OK = 0
EXIT_WARNINGS = 2
EXIT_FAILURE = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcdirichlet", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"qcdirichlet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve-beltrami", "solve the Beltrami Dirichlet problem from a config"),
        ("solve-poisson", "solve the divergence-form Poisson problem from a config"),
        ("audit-criteria", "audit boundary-singularity criteria from a config"),
        ("qc-map", "construct the coefficient-conformal map from a config"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", type=Path, help="JSON problem configuration")
        sp.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--grid-n", type=int, default=None, help="override the grid resolution")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def _say(args, *msg) -> None:
    if not args.quiet:
        print(*msg)


def _export(field, out: Path, name: str, files: dict) -> None:
    path = out / f"{name}.csv"
    manifest = export_field(field, path)
    files[name] = {"path": str(path), "sha256": manifest["sha256"]}


def _cmd_solve_beltrami(args) -> int:
    cfg = parse_config(args.config, grid_n=args.grid_n, seed=args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    sol = solve_beltrami(cfg.problem, solver_tol=cfg.tolerances.get("solver", 1e-6),
                         degenerate=cfg.degenerate, seed=cfg.seed)
    rep = sol.report
    files: dict = {}
    _export(sol.omega, out, "omega", files)
    _export(sol.f.f, out, "f", files)
    _export(sol.f.J, out, "jacobian", files)
    _export(sol.S, out, "S", files)
    _export(sol.H, out, "H", files)
    _export(sol.A, out, "A_holomorphic", files)
    if cfg.raw.get("output", {}).get("heatmaps"):
        export_field(RealField(sol.omega.grid, sol.omega.values.real, sol.omega.mask),
                     out / "omega_re.pgm", format="pgm-heatmap")
    manifest = {
        "tool": f"qcdirichlet {__version__}",
        "task": "solve-beltrami",
        "config": cfg.raw,
        "seed": cfg.seed,
        "residuals": rep.as_dict(),
        "map_residual": sol.f.residual,
        "map_iterations": sol.f.iterations,
        "source_lp_norms": sol.source_lp,
        "gauge_imag_at_anchor": rep.gauge_imag,
        "ladder_trace": sol.ladder.convergence_trace if sol.ladder else None,
        "files": files,
    }
    write_manifest(manifest, out / "run_manifest.json")
    _say(args, f"interior residual {rep.interior_l2:.3e}, boundary sup {rep.boundary_sup:.3e}")
    tol_int = cfg.tolerances.get("interior_residual", 1e-2)
    # boundary probes sit two cells inward, so the default threshold scales
    # with the grid and the data range
    phi_range = float(np.ptp(cfg.problem.phi.values)) or 1.0
    tol_bd = cfg.tolerances.get("boundary_sup", 6 * cfg.grid.spacing * max(1.0, phi_range))
    warn = rep.interior_l2 > tol_int or rep.boundary_sup > tol_bd
    if sol.ladder is not None and not sol.ladder.converged:
        warn = True
        _say(args, "warning: truncation ladder did not converge")
    return EXIT_WARNINGS if warn else EXIT_OK


def _cmd_solve_poisson(args) -> int:
    cfg = parse_config(args.config, grid_n=args.grid_n, seed=args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    sol = solve_poisson(cfg.problem, solver_tol=cfg.tolerances.get("solver", 1e-6),
                        degenerate=cfg.degenerate)
    rep = sol.report
    files: dict = {}
    _export(sol.u, out, "u", files)
    _export(sol.f.f, out, "f", files)
    _export(sol.G, out, "G", files)
    _export(sol.N, out, "log_potential", files)
    _export(sol.H_harm, out, "harmonic", files)
    if cfg.raw.get("output", {}).get("heatmaps"):
        export_field(sol.u, out / "u.pgm", format="pgm-heatmap")
    manifest = {
        "tool": f"qcdirichlet {__version__}",
        "task": "solve-poisson",
        "config": cfg.raw,
        "seed": cfg.seed,
        "weak_form": rep.as_dict(),
        "map_residual": sol.f.residual,
        "files": files,
    }
    write_manifest(manifest, out / "run_manifest.json")
    _say(args, f"weak residual {rep.max_normalized:.3e}, boundary sup {rep.boundary_sup:.3e}")
    phi_range = float(np.ptp(cfg.problem.phi.values)) or 1.0
    warn = rep.max_normalized > cfg.tolerances.get("weak_residual", 1e-2)
    warn = warn or rep.boundary_sup > cfg.tolerances.get(
        "boundary_sup", 6 * cfg.grid.spacing * max(1.0, phi_range))
    return EXIT_WARNINGS if warn else EXIT_OK


def _cmd_qc_map(args) -> int:
    cfg = parse_config(args.config, grid_n=args.grid_n, seed=args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    mu = cfg.audit["mu"]
    kmax = float(np.max(np.abs(mu.values)))
    ladder = None
    if cfg.degenerate == "always" or (cfg.degenerate == "auto" and kmax > 0.9):
        ladder = solve_degenerate(mu, caps=cfg.audit.get("caps") or (2, 4, 8, 16, 32, 64),
                                  tol=cfg.tolerances.get("ladder", 1e-3))
        qc = ladder.final
    else:
        qc = solve_mu_conformal(mu, tol=cfg.tolerances.get("solver", 1e-6))
    files: dict = {}
    _export(qc.f, out, "f", files)
    _export(qc.J, out, "jacobian", files)
    manifest = {
        "tool": f"qcdirichlet {__version__}",
        "task": "qc-map",
        "config": cfg.raw,
        "seed": cfg.seed,
        "map_residual": qc.residual,
        "map_iterations": qc.iterations,
        "jacobian_min": float(qc.J.values.min()),
        "ladder_levels": ladder.levels if ladder else None,
        "ladder_trace": ladder.convergence_trace if ladder else None,
        "ladder_converged": ladder.converged if ladder else None,
        "files": files,
    }
    write_manifest(manifest, out / "run_manifest.json")
    _say(args, f"map residual {qc.residual:.3e}, min J {qc.J.values.min():.3e}")
    if ladder is not None and not ladder.converged:
        _say(args, "warning: truncation ladder did not converge")
        return EXIT_WARNINGS
    return EXIT_OK


def _cmd_audit(args) -> int:
    cfg = parse_config(args.config, grid_n=args.grid_n, seed=args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    audit = cfg.audit
    rows = []
    inconclusive = 0
    for z0 in audit["points"]:
        eps0 = audit["eps0"] or default_eps0(z0)
        if "q_profile" in audit:
            prof = audit["q_profile"]
            from .criteria import tangent_profile_mu

            mu_fn = tangent_profile_mu(prof, z0)
            Q_fn = lambda z, prof=prof, z0=z0: prof(np.abs(np.asarray(z) - z0))
        else:
            mu_fn = audit["mu_callable"]
            Q_fn = None
        KT = tangent_dilatation_callable(mu_fn, z0)
        if Q_fn is None:
            Q_fn = KT
        verdicts = {}
        for crit in audit["criteria"]:
            if crit == "FMO":
                v = fmo_test(Q_fn, z0, eps0=eps0)
            elif crit == "MEAN":
                v = mean_test(Q_fn, z0, eps0)
            elif crit == "CZ":
                v = cz_test(mu_fn, z0, eps0)
            elif crit == "LEHTO":
                v = lehto_test(lambda r, KT=KT, z0=z0: circle_mean(KT, z0, r), eps0, z0=z0)
            elif crit in ("ORLICZ", "EXP"):
                v = orlicz_test(KT, z0, eps0, audit["gauge"], delta=audit["delta"])
            elif crit == "PSI":
                v = psi_condition_test(mu_fn, z0, audit["psi"], eps0)
            else:
                raise ConfigError("criteria", f"unknown criterion {crit!r}")
            verdicts[crit] = v
            trace_file = out / f"trace_{crit}_{z0.real:+.3f}{z0.imag:+.3f}.csv"
            with open(trace_file, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["eps", "value"])
                w.writerows(v.trace)
            rows.append({
                "z0_re": z0.real,
                "z0_im": z0.imag,
                "criterion": crit,
                "verdict": v.verdict,
                "growth_exponent": v.growth_exponent,
                "trace_file": trace_file.name,
            })
            inconclusive += v.verdict == "INCONCLUSIVE"
    table = out / "verdicts.csv"
    with open(table, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    manifest = {
        "tool": f"qcdirichlet {__version__}",
        "task": "audit-criteria",
        "config": cfg.raw,
        "seed": cfg.seed,
        "verdicts": [
            {k: r[k] for k in ("z0_re", "z0_im", "criterion", "verdict", "growth_exponent")}
            for r in rows
        ],
        "files": {"verdicts": str(table)},
    }
    write_manifest(manifest, out / "run_manifest.json")
    for r in rows:
        _say(args, f"z0=({r['z0_re']:+.3f},{r['z0_im']:+.3f}) {r['criterion']:7s} {r['verdict']}")
    return EXIT_WARNINGS if inconclusive else EXIT_OK


_COMMANDS = {
    "solve-beltrami": _cmd_solve_beltrami,
    "solve-poisson": _cmd_solve_poisson,
    "audit-criteria": _cmd_audit,
    "qc-map": _cmd_qc_map,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, StageError, NonContractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
