"""Command dispatch and run-artifact persistence.

Subcommands:

* ``solve``          construct the mild solution for one eps and persist it
* ``verify``         run the inequality/identity suite (exit 4 on failure)
* ``sweep``          run the eps sweep with slope fits (exit 4 on band
                     failure, 5 when a requested fit has too few points)
* ``oracle-compare`` finite-difference cross-check on the compact window

Exit code 2 signals a config/argument problem, 3 a solver failure.  Every
run writes a ``manifest.txt`` with the full effective config so it can be
reproduced bit-identically in single-threaded mode.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .backend import BACKEND
from .config import (
    config_text,
    data_from_names,
    grid_from_config,
    load_config,
    solver_config_from,
)
from .errors import DomainError, SolverFailure
from .harness import LemmaReport, RateReport, SweepPlan, run_lemma_suite, run_sweep
from .oracle import FDConfig, fd_solve
from .solver import ProblemSpec, continue_global, prepare, save_solver_run


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynbc", description=__doc__)
    p.add_argument("--version", action="version", version=f"dynbc {__version__} ({BACKEND} core)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "sweep", "oracle-compare"):
        q = sub.add_parser(name)
        q.add_argument("--config", default=None, help="JSON config file")
        q.add_argument("--eps", type=float, default=None, help="override problem.eps")
        q.add_argument("--horizon", type=float, default=None, help="override problem.horizon")
        q.add_argument("--out", default=None, help="output directory")
        q.add_argument("--seed", type=int, default=None, help="override seed")
        q.add_argument("--threads", type=int, default=None, help="worker cap for sweeps")
        q.add_argument(
            "--print-config", action="store_true", help="print the effective config and exit"
        )
    return p


def _effective_config(args) -> dict:
    cfg = load_config(args.config)
    if args.eps is not None:
        cfg["problem"]["eps"] = args.eps
    if args.horizon is not None:
        cfg["problem"]["horizon"] = args.horizon
    env_out = os.environ.get("DYNBC_OUT")
    if env_out:
        cfg["outputs"]["dir"] = env_out
    if args.out is not None:
        cfg["outputs"]["dir"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    return cfg


def _write_manifest(cfg: dict, outdir: str, extra_lines=()) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "manifest.txt")
    with open(path, "w") as fh:
        fh.write(f"dynbc {__version__}\n")
        fh.write(f"backend = {BACKEND}\n")
        for line in extra_lines:
            fh.write(line + "\n")
        fh.write("effective config:\n")
        fh.write(config_text(cfg))
    return path


def _cmd_solve(cfg: dict) -> int:
    grid = grid_from_config(cfg)
    data = data_from_names(cfg["problem"]["phi"], cfg["problem"]["phi_b"])
    spec = ProblemSpec(data, cfg["problem"]["eps"], cfg["problem"]["horizon"])
    prob = prepare(spec, grid, cfg["grid"]["guard"])
    outdir = cfg["outputs"]["dir"]
    try:
        run = continue_global(prob, spec.horizon, solver_config_from(cfg))
    except SolverFailure as exc:
        _write_manifest(cfg, outdir, [f"status = solver failure: {exc}"])
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    _write_manifest(
        cfg,
        outdir,
        [
            "status = ok",
            f"T_star = {run.T_star!r}",
            f"xt_norm = {run.xt_norm!r}",
            f"iterations = {[iv.iterations for iv in run.intervals]!r}",
        ],
    )
    save_solver_run(run, outdir, cfg["outputs"]["persist_fields"])
    print(f"eps = {run.eps:g}  T_star = {run.T_star:g}  intervals = {len(run.intervals)}")
    print(f"{'t':>12s} {'E[v](t)':>14s} {'sup|w(t)|':>14s}")
    for t, e, ws in zip(run.times, run.e_table, run.w_sup_table):
        print(f"{t:12.6f} {e:14.6e} {ws:14.6e}")
    return 0


def _cmd_verify(cfg: dict) -> int:
    grid = grid_from_config(cfg)
    report = run_lemma_suite(grid, cfg["seed"])
    outdir = cfg["outputs"]["dir"]
    _write_manifest(cfg, outdir, [f"status = {'ok' if report.all_passed else 'failures'}"])
    path = os.path.join(outdir, "report.txt")
    with open(path, "w") as fh:
        fh.write(report.to_text())
    print(report.to_text(), end="")
    return 0 if report.all_passed else 4


def _sweep_plan(cfg: dict) -> SweepPlan:
    s = cfg["sweep"]
    return SweepPlan(
        eps_values=list(s["eps_values"]),
        functionals=tuple(s["functionals"]),
        window=tuple(s["window"]),
        k_lateral=s["k_lateral"],
        k_depth=s["k_depth"],
        strip_depth=s["strip_depth"],
        t_small=s["t_small"],
        floor=s["floor"],
        bands={k: tuple(v) for k, v in s["bands"].items()},
        max_fit_residual=s["max_fit_residual"],
        horizon=cfg["problem"]["horizon"],
    )


def _write_rate_files(report: RateReport, outdir: str) -> None:
    for name, vals in report.values.items():
        path = os.path.join(outdir, f"rates_{name}.dat")
        with open(path, "w") as fh:
            fh.write(f"# log10(eps)  log10({name})\n")
            for e, v in zip(report.eps_values, vals):
                if v > report.floor:
                    fh.write(f"{np.log10(e):.12f} {np.log10(v):.12f}\n")
                else:
                    fh.write(f"# eps={e:g} below floor {report.floor:g}\n")


def _cmd_sweep(cfg: dict) -> int:
    if len(cfg["sweep"]["eps_values"]) < 3:
        print("sweep needs at least 3 eps values", file=sys.stderr)
        return 5
    plan = _sweep_plan(cfg)
    grid = grid_from_config(cfg)
    data = data_from_names(cfg["problem"]["phi"], cfg["problem"]["phi_b"])
    report = run_sweep(plan, grid, data, solver_config_from(cfg), cfg["threads"])
    outdir = cfg["outputs"]["dir"]
    _write_manifest(cfg, outdir, [f"status = {'ok' if report.all_bands_passed else 'band failures'}"])
    with open(os.path.join(outdir, "report.txt"), "w") as fh:
        fh.write(report.to_text())
    _write_rate_files(report, outdir)
    print(report.to_text(), end="")
    for name in report.bands:
        fit = report.fits.get(name)
        floored = len(report.excluded.get(name, [])) == len(report.eps_values)
        if fit is None and not floored:
            return 5
    return 0 if report.all_bands_passed else 4


def _cmd_oracle_compare(cfg: dict) -> int:
    grid = grid_from_config(cfg)
    data = data_from_names(cfg["problem"]["phi"], cfg["problem"]["phi_b"])
    eps = cfg["problem"]["eps"]
    horizon = cfg["problem"]["horizon"]
    window = cfg["sweep"]["window"]
    win_times = np.linspace(window[0], min(window[1], horizon), 5)
    fd_times, fd_fields = fd_solve(data, eps, FDConfig(grid, cfg["oracle"]["dt"]), win_times)
    prob = prepare(ProblemSpec(data, eps, horizon), grid, cfg["grid"]["guard"])
    try:
        run = continue_global(prob, horizon, solver_config_from(cfg), report_times=fd_times)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    kmask = np.abs(grid.x_prime) <= cfg["sweep"]["k_lateral"]
    dmask = grid.x_depth <= cfg["sweep"]["k_depth"]
    gap = 0.0
    for t, ff in zip(fd_times, fd_fields):
        j = int(np.argmin(np.abs(run.times - t)))
        diff = np.abs(run.u[j].values - ff.values)
        gap = max(gap, float(np.max(diff[np.ix_(dmask, kmask)])))
    tol = cfg["oracle"]["gap_tol"]
    outdir = cfg["outputs"]["dir"]
    _write_manifest(
        cfg,
        outdir,
        [f"status = {'ok' if gap <= tol else 'gap too large'}", f"gap = {gap!r}", f"tol = {tol!r}"],
    )
    with open(os.path.join(outdir, "report.txt"), "w") as fh:
        fh.write(f"oracle comparison at eps = {eps:g}\n")
        fh.write(f"sup-norm gap on the compact window: {gap:.6e} (tol {tol:g})\n")
        fh.write(f"fd dt = {cfg['oracle']['dt']:g}, diffusion number = "
                 f"{FDConfig(grid, cfg['oracle']['dt']).diffusion_number(eps):.3g}\n")
    print(f"gap = {gap:.6e} (tol {tol:g})")
    return 0 if gap <= tol else 4


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(config_text(cfg), end="")
        return 0
    try:
        if args.command == "solve":
            return _cmd_solve(cfg)
        if args.command == "verify":
            return _cmd_verify(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        if args.command == "oracle-compare":
            return _cmd_oracle_compare(cfg)
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
