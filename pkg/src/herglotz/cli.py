"""Batch front end: subcommands over problem config files, bundled problems,
machine-readable reports.

Exit codes: 0 all verdicts pass, 1 a check failed its tolerance,
2 configuration/parse error, 3 numerical failure (non-finite or domain).
Reports land under --out (default ./out) as CSV profiles plus JSON summaries;
identical inputs produce bit-identical files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundles import BUNDLE_NAMES, bundle
from .conditions import dbr_residuals, el_residuals, hypothesis_profiles
from .config import load_config, schema_path
from .errors import (
    ConfigError,
    DomainError,
    ExpressionSyntaxError,
    HerglotzError,
    NonFinite,
)
from .integrate import integrate_z
from .noether import check_noether, conserved_quantities, group_variation
from .reportio import fmt, write_json, write_text_atomic
from .solver import solve_direct
from .trajectory import trajectory_csv

_DEFAULT_TOLS = {"el": 1e-4, "dbr": 1e-4, "hyp": 1e-6, "inv": 1e-8, "drift": 1e-6}
_PAPER_Z_TOL = 1e-8


def _load(config_arg: str):
    p = Path(config_arg)
    if p.exists():
        return load_config(p)
    if config_arg in BUNDLE_NAMES:
        return bundle(config_arg).config()
    raise ConfigError(f"no such config file or bundle: {config_arg}")


def _built(args, need_traj=False, need_group=False):
    cfg = _load(args.config)
    problem, traj, group, opts = cfg.build(n_override=args.n)
    if need_traj and traj is None:
        raise ConfigError("this command needs a trajectory section in the config")
    if need_group and group is None:
        raise ConfigError("this command needs a group section in the config")
    return problem, traj, group, opts


def _verdict_line(summary: dict) -> str:
    return (f"{summary['label']}: sup_norm={fmt(summary.get('sup_norm', summary.get('drift', 0.0)))} "
            f"tol={fmt(summary['tolerance'])} {summary['verdict'].upper()}")


def _write_report(out: Path, stem: str, report) -> None:
    write_text_atomic(out / f"{stem}.csv", report.csv())


def cmd_integrate(args) -> int:
    problem, traj, _, _ = _built(args, need_traj=True)
    zpath = integrate_z(problem, traj)
    out = Path(args.out)
    write_text_atomic(out / "zpath.csv", zpath.csv())
    write_json(out / "integrate.json",
               {"z_b": zpath.z_b, "lambda_b": zpath.lambda_b, "z_a": float(zpath.z[0])})
    print(f"z(b) = {fmt(zpath.z_b)}  lambda(b) = {fmt(zpath.lambda_b)}")
    return 0


def cmd_check_el(args) -> int:
    problem, traj, _, _ = _built(args, need_traj=True)
    tol = args.tol if args.tol is not None else _DEFAULT_TOLS["el"]
    zpath = integrate_z(problem, traj)
    r1, r2 = el_residuals(problem, traj, zpath, tol)
    out = Path(args.out)
    _write_report(out, "el1", r1)
    _write_report(out, "el2", r2)
    write_json(out / "check_el.json", [r1.summary(), r2.summary()])
    print(_verdict_line(r1.summary()))
    print(_verdict_line(r2.summary()))
    return 0 if (r1.passed and r2.passed) else 1


def cmd_check_dbr(args) -> int:
    problem, traj, _, _ = _built(args, need_traj=True)
    tol = args.tol if args.tol is not None else _DEFAULT_TOLS["dbr"]
    zpath = integrate_z(problem, traj)
    r1, r2 = dbr_residuals(problem, traj, zpath, tol)
    out = Path(args.out)
    _write_report(out, "dbr1", r1)
    _write_report(out, "dbr2", r2)
    write_json(out / "check_dbr.json", [r1.summary(), r2.summary()])
    print(_verdict_line(r1.summary()))
    print(_verdict_line(r2.summary()))
    return 0 if (r1.passed and r2.passed) else 1


def cmd_check_hyp(args) -> int:
    problem, traj, group, _ = _built(args, need_traj=True)
    tol = args.tol if args.tol is not None else _DEFAULT_TOLS["hyp"]
    h1, h2 = hypothesis_profiles(problem, traj, group=group, tol=tol)
    out = Path(args.out)
    _write_report(out, "hyp_extremal", h1)
    summaries = [h1.summary()]
    ok = h1.passed
    if h2 is not None:
        _write_report(out, "hyp_noether", h2)
        summaries.append(h2.summary())
        ok = ok and h2.passed
    write_json(out / "check_hyp.json", summaries)
    for s in summaries:
        print(_verdict_line(s))
    return 0 if ok else 1


def cmd_invariance(args) -> int:
    problem, traj, group, _ = _built(args, need_traj=True, need_group=True)
    tol = args.tol if args.tol is not None else _DEFAULT_TOLS["inv"]
    zpath = integrate_z(problem, traj)
    prof = group_variation(problem, traj, zpath, group)
    out = Path(args.out)
    write_text_atomic(out / "invariance.csv", prof.csv())
    write_json(out / "invariance.json", prof.summary(tol))
    print(_verdict_line(prof.summary(tol)))
    return 0 if prof.sup_norm <= tol else 1


def cmd_noether(args) -> int:
    problem, traj, group, _ = _built(args, need_traj=True, need_group=True)
    zpath = integrate_z(problem, traj)
    verdict = check_noether(problem, traj, zpath, group, tol=args.tol)
    out = Path(args.out)
    write_text_atomic(out / "qpath.csv", verdict.conservation.csv())
    write_json(out / "noether.json", verdict.summary())
    for p in verdict.conservation.profiles:
        print(f"{p.label}: mean={fmt(p.mean)} drift={fmt(p.drift)} "
              f"tol={fmt(p.tolerance)} {'PASS' if p.passed else 'FAIL'}")
    if verdict.passed:
        print("noether: PASS")
        return 0
    print(f"noether: FAIL (first failed premise: {verdict.first_failure})")
    return 1


def cmd_solve(args) -> int:
    problem, _, _, opts = _built(args)
    result = solve_direct(problem, opts)
    out = Path(args.out)
    write_text_atomic(out / "solution.csv", trajectory_csv(result.trajectory))
    write_json(out / "solve.json", result.summary())
    zpath = integrate_z(problem, result.trajectory)
    write_text_atomic(out / "solution_zpath.csv", zpath.csv())
    print(f"solve: z(b) = {fmt(result.z_b)}  iterations = {result.iterations}  "
          f"grad_norm = {fmt(result.final_grad_norm)}  "
          f"{'CONVERGED' if result.converged else 'NOT CONVERGED'}")
    return 0 if result.converged else 1


def cmd_paper_example(args) -> int:
    info = bundle("paper-s4")
    cfg = info.config()
    problem, traj, group, _ = cfg.build(n_override=args.n)
    expected = info.expected
    out = Path(args.out)
    zpath = integrate_z(problem, traj)
    write_text_atomic(out / "zpath.csv", zpath.csv())

    failures = []
    z_b_err = abs(zpath.z_b - expected["z_b"])
    print(f"z(2) = {fmt(zpath.z_b)}  (reference {fmt(expected['z_b'])}, "
          f"|error| = {fmt(z_b_err)})")
    if z_b_err > _PAPER_Z_TOL:
        failures.append("z(b)")
    tmid = 1.0
    nodes = problem.grid.main_nodes
    mid_idx = int(np.argmin(np.abs(nodes - tmid)))
    z_mid_err = None
    if abs(nodes[mid_idx] - tmid) < problem.grid.h / 4:
        z_mid_err = abs(zpath.z[mid_idx] - expected["z_at_1"])
        print(f"z(1) = {fmt(float(zpath.z[mid_idx]))}  (reference "
              f"{fmt(expected['z_at_1'])}, |error| = {fmt(z_mid_err)})")
        if z_mid_err > _PAPER_Z_TOL:
            failures.append("z(1)")
    lam_err = float(np.max(np.abs(zpath.lam - np.exp(-nodes))))
    print(f"max |lambda(t) - exp(-t)| over nodes = {fmt(lam_err)}")
    if lam_err > _PAPER_Z_TOL:
        failures.append("lambda")

    tol = args.tol
    r1, r2 = el_residuals(problem, traj, zpath, tol if tol else _DEFAULT_TOLS["el"])
    d1, d2 = dbr_residuals(problem, traj, zpath, tol if tol else _DEFAULT_TOLS["dbr"])
    h1, h2 = hypothesis_profiles(problem, traj, group=group, zpath=zpath,
                                 tol=tol if tol else _DEFAULT_TOLS["hyp"])
    inv = group_variation(problem, traj, zpath, group)
    inv_tol = tol if tol else _DEFAULT_TOLS["inv"]
    cons = conserved_quantities(problem, traj, zpath, group,
                                tol if tol else _DEFAULT_TOLS["drift"])
    reports = {"el1": r1, "el2": r2, "dbr1": d1, "dbr2": d2, "hyp_extremal": h1}
    if h2 is not None:
        reports["hyp_noether"] = h2
    for stem, rep in reports.items():
        _write_report(out, stem, rep)
        print(_verdict_line(rep.summary()))
        if not rep.passed:
            failures.append(rep.label)
    write_text_atomic(out / "invariance.csv", inv.csv())
    print(_verdict_line(inv.summary(inv_tol)))
    if inv.sup_norm > inv_tol:
        failures.append("invariance")
    write_text_atomic(out / "qpath.csv", cons.csv())
    for p in cons.profiles:
        print(f"{p.label}: mean={fmt(p.mean)} drift={fmt(p.drift)} "
              f"tol={fmt(p.tolerance)} {'PASS' if p.passed else 'FAIL'}")
        if not p.passed:
            failures.append(p.label)
    summary = {
        "z_b": zpath.z_b,
        "z_b_reference": expected["z_b"],
        "z_b_error": z_b_err,
        "z_mid_error": z_mid_err,
        "lambda_max_error": lam_err,
        "checks": [rep.summary() for rep in reports.values()],
        "invariance": inv.summary(inv_tol),
        "conservation": cons.summary(),
        "verdict": "pass" if not failures else "fail",
        "failures": failures,
    }
    write_json(out / "paper_example.json", summary)
    print(f"paper-example: {'PASS' if not failures else 'FAIL'}")
    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="herglotz",
        description="Delayed Herglotz variational problems: integrate the "
                    "functional, verify optimality conditions, monitor "
                    "conserved quantities, solve by direct transcription.",
        epilog=f"Config schema: {schema_path()}",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, config=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("config", help="problem config JSON path, or a bundle name "
                                          f"({', '.join(BUNDLE_NAMES)})")
        p.add_argument("--out", default="out", help="report directory (default ./out)")
        p.add_argument("--n", type=int, default=None, help="override the grid resolution")
        p.add_argument("--tol", type=float, default=None, help="override check tolerances")
        p.set_defaults(handler=fn)
        return p

    add("integrate", cmd_integrate, "integrate z and lambda along the config trajectory")
    add("check-el", cmd_check_el, "Euler-Lagrange residuals of the config trajectory")
    add("check-dbr", cmd_check_dbr, "DuBois-Reymond residuals of the config trajectory")
    add("check-hyp", cmd_check_hyp, "auxiliary hypothesis profiles")
    add("invariance", cmd_invariance, "invariance defect of the config group")
    add("noether", cmd_noether, "full conserved-quantity check with premises")
    add("solve", cmd_solve, "extremize z(b) by direct transcription")
    add("paper-example", cmd_paper_example,
        "run the bundled delayed reference problem end to end", config=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ExpressionSyntaxError as e:
        print(f"herglotz: expression syntax error: {e}", file=sys.stderr)
        return 2
    except (DomainError, NonFinite) as e:
        print(f"herglotz: numerical failure: {e}", file=sys.stderr)
        return 3
    except HerglotzError as e:
        print(f"herglotz: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"herglotz: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
