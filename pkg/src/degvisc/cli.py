"""Command-line entry point: ``degvisc <command> --config FILE [--out DIR]``."""

from __future__ import annotations

import argparse
import contextlib
import random
import sys
import warnings
from pathlib import Path

import numpy as np

from degvisc.config import ConfigError, RunConfig, describe_defaults, parse_config
from degvisc.diagnostics import Record, VerificationReport, anchor_legend, verify_trajectory
from degvisc.entropy import production_measure, quadratic_pair, residual_battery, standard_battery
from degvisc.grid import GridSpec
from degvisc.io import atomic_write, header_lines, read_csv, write_csv, write_trajectory
from degvisc.model import InvalidModelError, ModelSpec
from degvisc.mollify import mollify_model
from degvisc.scenarios import builtin_model
from degvisc.solver import solve, solve_reference
from degvisc.sweep import SweepPlan, run_mu_study, run_sweep

REPORT_COLUMNS = ["estimate_id", "bound", "observed", "slack", "pass", "anchor"]
RESIDUAL_COLUMNS = ["entropy_k", "delta", "phi_id", "residual", "tolerance", "pass"]
SWEEP_COLUMNS = ["eps", "mu", "p", "time", "error", "l1_norm", "l2_bound_margin", "l3_norm", "runtime_s"]


class SeedlessViolation(RuntimeError):
    """Random numbers were requested while running with ``--seedless``."""


@contextlib.contextmanager
def seedless():
    """Make every stdlib/numpy random entry point raise for the duration."""
    def refuse(*_a, **_k):
        raise SeedlessViolation("random number generation used under --seedless")

    targets = [(random, n) for n in ("random", "seed", "randint", "uniform", "choice", "shuffle", "gauss")]
    targets += [(np.random, n) for n in ("default_rng", "seed", "rand", "randn", "random", "uniform",
                                         "normal", "randint", "choice", "shuffle", "permutation")]
    saved = [(mod, n, getattr(mod, n)) for mod, n in targets]
    try:
        for mod, n in targets:
            setattr(mod, n, refuse)
        yield
    finally:
        for mod, n, f in saved:
            setattr(mod, n, f)


# ---------------------------------------------------------------------------
# builders

def build_model(cfg: RunConfig) -> ModelSpec:
    params = dict(cfg.scenario.params)
    params["dim"] = cfg.scenario.dimension
    return builtin_model(cfg.scenario.name, params)


def build_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.scenario.dimension, cfg.grid.half_width, cfg.grid.cells_per_axis, cfg.grid.boundary)


def _family(cfg, model, grid):
    return mollify_model(model, cfg.viscosity.mu, grid, ladder=cfg.mollification.ladder,
                         cutoff=cfg.mollification.cutoff, nodes=cfg.mollification.nodes)


def _comments(cfg: RunConfig) -> list[str]:
    return header_lines(cfg.digest(), anchor_legend())


def _out(cfg: RunConfig, override) -> Path:
    return Path(override) if override else Path(cfg.output.dir)


# ---------------------------------------------------------------------------
# commands; each returns an exit status

def command_validate(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    model = build_model(cfg)
    report = model.hypothesis_report
    lines = []
    for name, rec in report.records.items():
        lines.append(f"{name}: {'PASS' if rec.passed else 'FAIL'}  " + "; ".join(rec.evidence))
    ok = report.all_passed(("H1", "H2", "H3", "H4"))
    if not report.passed("H5"):
        lines.append("WARNING: H5 fails (flux affine on an interval); vanishing-viscosity compactness not guaranteed")
    text = "\n".join(f"# {c}" for c in _comments(cfg)) + "\n" + "\n".join(lines) + "\n"
    atomic_write(out / "validate.txt", text)
    print("\n".join(lines))
    return 0 if ok else 1


def command_run(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    fam = _family(cfg, model, grid)
    traj = solve(model, fam, cfg.viscosity.eps, grid, cfg.time.T, cfg.output_times(), cfl=cfg.viscosity.cfl)
    write_trajectory(out / "trajectory.csv", traj, _comments(cfg))
    print(f"run: {traj.stepper_log.steps} steps, {len(traj.snapshots)} snapshots -> {out / 'trajectory.csv'}")
    return 0


def command_reference(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    fine = grid.refined(cfg.sweep.reference_factor)
    traj = solve_reference(model, fine, cfg.time.T, cfg.output_times(), cfl=cfg.viscosity.reference_cfl,
                           study_grid=grid)
    write_trajectory(out / "reference.csv", traj, _comments(cfg))
    print(f"reference: {traj.stepper_log.steps} steps on {fine.cells_per_axis} cells -> {out / 'reference.csv'}")
    return 0


def verification(cfg: RunConfig) -> tuple[VerificationReport, list]:
    """Solve, check every estimate and run the entropy battery on the viscous run."""
    model, grid = build_model(cfg), build_grid(cfg)
    fam = _family(cfg, model, grid)
    eps = cfg.viscosity.eps
    times = cfg.output_times()
    traj = solve(model, fam, eps, grid, cfg.time.T, times, cfl=cfg.viscosity.cfl,
                 every_step=cfg.diagnostics.residuals)
    partner = solve(model, fam, eps, grid, cfg.time.T, times, cfl=cfg.viscosity.cfl,
                    initial=cfg.diagnostics.partner_scale * fam.u0_mu.values)
    report = verify_trajectory(traj.sampled(times), model, fam, eps, partner, cfg.diagnostics.C_s,
                               cfg.diagnostics.window)
    rows = []
    if cfg.diagnostics.residuals and eps > 0:
        e = cfg.entropy
        battery = standard_battery(grid, cfg.time.T, e.t_fractions, e.t_radius_fraction, e.centers, e.radii)
        rows = residual_battery(traj, model, eps, e.ks, e.delta, e.C_tol, battery)
        worst = min(rows, key=lambda r: r.residual)
        report.records.append(Record("entropy_residual", 0.0, -worst.residual, worst.tolerance,
                                     "entropy inequality for smoothed Kruzhkov pairs",
                                     f"k={worst.k:g} {worst.phi_id}"))
        prod = production_measure(traj, fam, quadratic_pair(model), eps)
        report.records.append(Record("entropy_production", prod.bound, prod.total_mass, 0.0,
                                     "entropy production bound C2 (||u0||^2 + 2 kappa T)", "eta=u^2/2"))
    return report, rows


def command_verify(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    report, rows = verification(cfg)
    comments = _comments(cfg)
    write_csv(out / "report.csv", REPORT_COLUMNS, report.rows(), comments)
    if rows:
        write_csv(out / "residuals.csv", RESIDUAL_COLUMNS,
                  [(r.k, r.delta, r.phi_id, r.residual, r.tolerance, r.passed) for r in rows], comments)
    text = report.summary()
    atomic_write(out / "report.txt", "\n".join(f"# {c}" for c in comments) + "\n" + text + "\n")
    print(text)
    bad = report.first_failure()
    if bad is not None:
        print(f"FAILED: {bad.estimate_id} ({bad.anchor})", file=sys.stderr)
        return 1
    return 0


def command_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    s = cfg.sweep
    factor = s.mu_factor
    plan = SweepPlan(tuple(s.eps_ladder), mu_rule=lambda e: factor * e, eps_data_rule=s.eps_data_rule,
                     window=tuple(s.window), p_list=tuple(s.p_list), output_times=tuple(cfg.output_times()),
                     reference_factor=s.reference_factor)
    table = run_sweep(model, plan, grid, cfg.time.T, jobs=jobs)
    comments = _comments(cfg) + ["runtime_s is wall-clock time and not reproducible"]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, table.csv_rows(), comments)
    text = table.summary()
    if s.mu_ladder:
        mu_tab = run_mu_study(model, cfg.viscosity.eps, s.mu_ladder, grid, cfg.time.T, tuple(s.window),
                              tuple(s.p_list), cfg.output_times(), jobs=jobs)
        write_csv(out / "mu_study.csv", SWEEP_COLUMNS, mu_tab.csv_rows(), comments)
        text += "\n\nregularisation study\n" + mu_tab.summary()
    atomic_write(out / "sweep.txt", "\n".join(f"# {c}" for c in comments) + "\n" + text + "\n")
    print(text)
    if not table.verdict():
        print("FAILED: sweep verdict", file=sys.stderr)
        return 1
    return 0


def command_report(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    """Bundle existing artifacts in ``out`` into ``summary.txt``; fails on any failing row."""
    lines, ok, found = [], True, False
    for name in ("report.csv", "residuals.csv"):
        path = out / name
        if not path.exists():
            continue
        found = True
        _, rows = read_csv(path)
        failing = [r for r in rows if r.get("pass") != "true"]
        ok &= not failing
        label = "estimate_id" if name == "report.csv" else "phi_id"
        lines.append(f"{name}: {len(rows) - len(failing)}/{len(rows)} pass"
                     + (f"; failing: {', '.join(r[label] for r in failing)}" if failing else ""))
    for name in ("sweep.txt", "validate.txt"):
        path = out / name
        if path.exists():
            found = True
            body = [l for l in path.read_text().splitlines() if not l.startswith("#")]
            verdicts = [l for l in body if "verdict" in l or "WARNING" in l or l.startswith("H")]
            lines.append(f"{name}: " + " | ".join(verdicts))
            ok &= not any("verdict: FAIL" in l for l in verdicts)
    if not found:
        print(f"no artifacts in {out}", file=sys.stderr)
        return 1
    atomic_write(out / "summary.txt", "\n".join(f"# {c}" for c in _comments(cfg)) + "\n" + "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if ok else 1


COMMANDS = {"validate": command_validate, "run": command_run, "reference": command_reference,
            "verify": command_verify, "sweep": command_sweep, "report": command_report}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degvisc", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--jobs", type=int, default=1, help="parallel ladder entries")
    p.add_argument("--seedless", action="store_true", help="fail if any random number is drawn")
    p.add_argument("--echo-config", action="store_true", help="print the effective configuration")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.echo_config:
        print(describe_defaults(cfg))
    out = _out(cfg, args.out)
    guard = seedless() if args.seedless else contextlib.nullcontext()
    try:
        with guard, warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](cfg, out, args.jobs)
    except SeedlessViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
