"""Vanishing-viscosity and vanishing-regularisation convergence studies."""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from degvisc.entropy import EntropyPair, decomposition_bounds, decomposition_norms, quadratic_pair
from degvisc.grid import GridSpec, Trajectory, l2_norm
from degvisc.model import GridDatum, ModelSpec, validate_hypotheses
from degvisc.mollify import MU_MAX, MollifierKernel, mollify_model, mollify_values
from degvisc.solver import restrict, solve, solve_reference

REFERENCE_FACTOR = 4


def default_mu_rule(eps: float) -> float:
    return eps / 10.0


class CompactnessWarning(UserWarning):
    """The flux fails the genuine nonlinearity condition needed for strong compactness."""


@dataclass(frozen=True)
class SweepPlan:
    eps_ladder: tuple[float, ...]
    mu_rule: Callable[[float], float] = default_mu_rule
    eps_data_rule: str = "mollified"
    window: tuple[float, float] = (-0.5, 0.5)
    p_list: tuple[float, ...] = (1.0, 2.0)
    output_times: tuple[float, ...] | None = None
    reference_factor: int = REFERENCE_FACTOR

    def __post_init__(self):
        ladder = tuple(float(e) for e in self.eps_ladder)
        object.__setattr__(self, "eps_ladder", ladder)
        if len(ladder) < 3:
            raise ValueError("viscosity ladder needs at least 3 entries")
        if any(e <= 0 for e in ladder) or any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("viscosity ladder must be positive and strictly decreasing")
        if self.eps_data_rule not in ("mollified", "fixed"):
            raise ValueError("eps_data_rule must be 'mollified' or 'fixed'")
        a, b = self.window
        if not a < b:
            raise ValueError("window must satisfy a < b")
        if any(p < 1 for p in self.p_list):
            raise ValueError("exponents must be >= 1")
        if self.reference_factor < 4:
            raise ValueError("reference grid must be at least 4x finer")

    def check_grid(self, grid: GridSpec):
        a, b = self.window
        if not (-grid.half_width < a and b < grid.half_width):
            raise ValueError(f"window {self.window} not strictly inside the domain")


@dataclass
class SweepRow:
    eps: float
    mu: float
    errors: dict[tuple[float, float], float] = field(default_factory=dict)
    l1: float = float("nan")
    l2: float = float("nan")
    l3: float = float("nan")
    bounds: tuple[float, float, float] = (float("nan"),) * 3
    runtime_s: float = 0.0
    status: str = "ok"
    datum_margins: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class ConvergenceTable:
    rows: list[SweepRow]
    times: tuple[float, ...]
    p_list: tuple[float, ...]
    label: str = "eps"

    def error_series(self, p: float, t: float | None = None) -> np.ndarray:
        t = self.times[-1] if t is None else t
        return np.array([r.errors.get((p, t), np.nan) for r in self.rows])

    def strictly_decreasing(self, p: float, t: float | None = None) -> bool:
        e = self.error_series(p, t)
        return bool(np.all(np.isfinite(e)) and np.all(e[1:] < e[:-1]))

    def l1_decreasing(self) -> bool:
        e = np.array([r.l1 for r in self.rows])
        return bool(np.all(np.isfinite(e)) and np.all(e[1:] < e[:-1]))

    def l2_within(self) -> bool:
        return all(r.l2 <= r.bounds[1] for r in self.rows)

    def l3_within(self) -> bool:
        return all(r.l3 <= r.bounds[2] * (1 + 1e-12) + 1e-15 for r in self.rows)

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def verdict(self) -> bool:
        return (self.all_ok and all(self.strictly_decreasing(p) for p in self.p_list)
                and self.l1_decreasing() and self.l2_within() and self.l3_within())

    def csv_rows(self) -> list[tuple]:
        out = []
        for r in self.rows:
            for p in self.p_list:
                for t in self.times:
                    out.append((r.eps, r.mu, p, t, r.errors.get((p, t), np.nan), r.l1,
                                r.bounds[1] - r.l2, r.l3, r.runtime_s))
        return out

    def summary(self) -> str:
        lines = [f"{self.label:>10} {'mu':>10} " + " ".join(f"L{p:g}(K)@T".rjust(12) for p in self.p_list)
                 + f" {'l1':>12} {'l2':>12} {'l3':>12} status"]
        for r in self.rows:
            errs = " ".join(f"{r.errors.get((p, self.times[-1]), np.nan):12.5e}" for p in self.p_list)
            lines.append(f"{r.eps:10.4g} {r.mu:10.4g} {errs} {r.l1:12.5e} {r.l2:12.5e} {r.l3:12.5e} {r.status}")
        for p in self.p_list:
            lines.append(f"L{p:g} error strictly decreasing: {'PASS' if self.strictly_decreasing(p) else 'FAIL'}")
        if self.label == "eps":
            lines.append(f"l1 decreasing: {'PASS' if self.l1_decreasing() else 'FAIL'}; "
                         f"l2 <= bound: {'PASS' if self.l2_within() else 'FAIL'}; "
                         f"l3 <= bound: {'PASS' if self.l3_within() else 'FAIL'}")
            lines.append(f"verdict: {'PASS' if self.verdict() else 'FAIL'}")
        return "\n".join(lines)


def lp_error(u: np.ndarray, v: np.ndarray, grid: GridSpec, p: float, window) -> float:
    d = np.abs(u - v)[grid.window_mask(window)]
    return float((np.sum(d ** p) * grid.cell_volume) ** (1.0 / p))


def _times(T: float, output_times) -> tuple[float, ...]:
    ts = sorted(set(float(t) for t in (output_times or ()) if 0 < t <= T) | {float(T)})
    return tuple(ts)


def eps_datum(model: ModelSpec, plan: SweepPlan, eps: float, grid: GridSpec) -> GridDatum:
    """Viscosity-dependent initial datum ``u_{0,eps}``."""
    base = model.initial.discretize(grid)
    if plan.eps_data_rule == "fixed":
        return base
    return GridDatum.from_values(mollify_values(base.values, grid, MollifierKernel(min(eps, MU_MAX))), grid)


def reference_solution(model: ModelSpec, grid: GridSpec, T: float, times: Sequence[float],
                       factor: int = REFERENCE_FACTOR) -> dict[float, np.ndarray]:
    """Godunov reference on a ``factor``-times finer grid, restricted to ``grid``."""
    fine = grid.refined(factor)
    ref = solve_reference(model, fine, T, times, study_grid=grid)
    return {s.t: restrict(s.values, fine, grid) for s in ref.snapshots}


def _sweep_row(model, plan, grid, T, times, eps, ref, pair) -> SweepRow:
    mu = float(plan.mu_rule(eps))
    row = SweepRow(eps, mu)
    start = time.perf_counter()
    try:
        datum = eps_datum(model, plan, eps, grid)
        u0 = model.initial.discretize(grid)
        row.datum_margins = {"range": min(float(datum.values.min()), 1.0 - float(datum.values.max())),
                             "l2": u0.l2_norm - datum.l2_norm}
        family = mollify_model(model, mu, grid, datum=datum)
        traj = solve(model, family, eps, grid, T, times, every_step=True)
        for p in plan.p_list:
            for t in times:
                row.errors[(p, t)] = lp_error(traj.at(t).values, ref[t], grid, p, plan.window)
        row.l1, row.l2, row.l3 = decomposition_norms(traj, family, pair, eps)
        row.bounds = tuple(decomposition_bounds(traj, model, pair, eps))
    except Exception as exc:  # a failed entry aborts its row only
        row.status = f"aborted: {type(exc).__name__}: {exc}"
    row.runtime_s = time.perf_counter() - start
    return row


def _check_compactness(model: ModelSpec):
    report = model.hypothesis_report or validate_hypotheses(model)
    if not report.passed("H5"):
        warnings.warn("flux is affine on some interval: the strong compactness hypothesis is unmet, "
                      "convergence is not guaranteed", CompactnessWarning, stacklevel=3)


def run_sweep(model: ModelSpec, plan: SweepPlan, grid: GridSpec, T: float, jobs: int = 1,
              pair: EntropyPair | None = None) -> ConvergenceTable:
    """Solve along the viscosity ladder and compare with a fine-grid reference on the window."""
    plan.check_grid(grid)
    _check_compactness(model)
    times = _times(T, plan.output_times)
    ref = reference_solution(model, grid, T, times, plan.reference_factor)
    pair = pair or quadratic_pair(model)

    def work(eps):
        return _sweep_row(model, plan, grid, T, times, eps, ref, pair)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, plan.eps_ladder))
    else:
        rows = [work(e) for e in plan.eps_ladder]
    return ConvergenceTable(rows, times, plan.p_list, "eps")


def run_mu_study(model: ModelSpec, eps: float, mu_ladder: Sequence[float], grid: GridSpec, T: float,
                 window=(-0.5, 0.5), p_list=(1.0, 2.0), output_times=None, jobs: int = 1) -> ConvergenceTable:
    """Differences between solutions at successive ``mu`` (Cauchy evidence as ``mu -> 0``).

    Row ``i`` compares the run at ``mu_ladder[i+1]`` with the one at ``mu_ladder[i]``.
    """
    if not eps > 0:
        raise ValueError("the regularisation study needs eps > 0")
    mus = [float(m) for m in mu_ladder]
    if len(mus) < 3 or any(b >= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu ladder must have >= 3 strictly decreasing entries")
    times = _times(T, output_times)

    def work(mu):
        start = time.perf_counter()
        fam = mollify_model(model, mu, grid)
        traj = solve(model, fam, eps, grid, T, times)
        return traj, time.perf_counter() - start

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(work, mus))
    else:
        runs = [work(m) for m in mus]
    rows = []
    for (prev, _), (cur, rt), mu in zip(runs[:-1], runs[1:], mus[1:]):
        row = SweepRow(eps, mu, runtime_s=rt)
        for p in p_list:
            for t in times:
                row.errors[(p, t)] = lp_error(cur.at(t).values, prev.at(t).values, grid, p, window)
        rows.append(row)
    return ConvergenceTable(rows, times, tuple(p_list), "mu")


def successive_ratios(table: ConvergenceTable, p: float) -> np.ndarray:
    e = table.error_series(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return e[1:] / e[:-1]


def initial_l1_distance(model: ModelSpec, plan: SweepPlan, grid: GridSpec) -> list[float]:
    """``||u_{0,eps} - u0||_{L1(K)}`` along the ladder."""
    u0 = model.initial.discretize(grid).values
    return [lp_error(eps_datum(model, plan, e, grid).values, u0, grid, 1.0, plan.window)
            for e in plan.eps_ladder]
