"""Margin reports for the a priori estimates of the regularised problem.

Every check returns a :class:`Record` storing the worst snapshot (or snapshot
pair); a record passes when ``observed <= bound + slack``.  Bounds are
computed from :class:`EstimateConstants` and the run's own initial datum only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from degvisc.grid import Trajectory, l1_norm, l2_norm, max_lipschitz, second_variation, total_variation
from degvisc.model import ModelSpec

DEFAULT_C_S = 1.0
RANGE_TOL = 1e-12
IDENTITY_TOL = 1e-10

ANCHORS = {
    "max_principle": "invariant region: 0 <= u <= 1",
    "l1_growth": "L1 growth: ||u(t)||_1 <= ||u0||_1 + kappa t",
    "l2_energy": "L2 energy: ||u(t)||_2^2 + 2 eps int (a+mu)|grad u|^2 <= ||u0||_2^2 + 2 kappa t",
    "l2_identity": "L2 energy balance of the pure diffusion scheme (equality)",
    "bv_space": "BV in space: TV(u(t)) <= TV(u0) e^(kappa t) + e^(kappa t) - 1",
    "tvd": "TV nonincreasing between snapshots (source-free, one dimension)",
    "time_lipschitz": "time Lipschitz in L1 with constant L",
    "contraction": "L1 stability: ||u(t)-v(t)||_1 <= e^(kappa t) ||u0-v0||_1",
    "gradient_A": "local Lipschitz bound of A(u(t,.)) on an interior window",
    "gradient_A_ladder": "Lipschitz bound of A(u) uniform along a viscosity ladder",
}


def anchor_legend() -> str:
    return "; ".join(f"{k}: {v}" for k, v in ANCHORS.items())


@dataclass
class Record:
    estimate_id: str
    bound: float
    observed: float
    slack: float
    anchor: str
    note: str = ""

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("every record needs an anchor")

    @property
    def passed(self) -> bool:
        return bool(self.observed <= self.bound + self.slack)

    @property
    def margin(self) -> float:
        return self.bound + self.slack - self.observed


@dataclass
class EstimateConstants:
    """Constants entering the bounds; ``L`` is the time-Lipschitz constant."""

    kappa: float
    L_f: float
    kappa0: float
    tv0: float
    tvA0: float
    eps: float
    T: float

    @property
    def L(self) -> float:
        e = np.exp(self.kappa * self.T)
        return float((self.L_f * self.tv0 + self.eps * self.kappa0 + self.eps * self.tvA0 + self.kappa) * e
                     + e - 1.0)

    @classmethod
    def for_run(cls, model: ModelSpec, family, eps: float, T: float, traj: Trajectory | None = None):
        """Constants of ``model`` with the unsmoothed datum of ``family`` (or of ``traj``)."""
        if family is not None:
            u0, grid, k0 = family.base_datum.values, family.grid, family.kappa0
        elif traj is not None:
            u0, grid, k0 = traj.initial.values, traj.grid, 0.0
        else:
            raise ValueError("need a family or a trajectory")
        A0 = np.asarray(model.diffusion.A(u0), dtype=float)
        return cls(model.kappa, model.flux.lipschitz_const, k0, float(sum(total_variation(u0, grid))),
                   second_variation(A0, grid), float(eps), float(T))


Slack = float | Callable[[float], float]


def default_slack(traj: Trajectory, C_s: float = DEFAULT_C_S) -> float:
    return C_s * traj.grid.dx * (1.0 + traj.times[-1])


def _slack_at(slack: Slack | None, traj: Trajectory, t: float) -> float:
    if slack is None:
        return default_slack(traj)
    return float(slack(t)) if callable(slack) else float(slack)


def _worst(candidates):
    """Candidate ``(bound, observed, slack, note)`` with the smallest margin."""
    return min(candidates, key=lambda c: c[0] + c[2] - c[1])


def check_maximum_principle(traj: Trajectory) -> Record:
    """Largest excursion outside [0, 1] over snapshots and logged steps."""
    lo = min(float(s.values.min()) for s in traj.snapshots)
    hi = max(float(s.values.max()) for s in traj.snapshots)
    log = traj.stepper_log
    if log.steps:
        lo, hi = min(lo, min(log.umin)), max(hi, max(log.umax))
    excess = max(0.0, hi - 1.0, -lo)
    return Record("max_principle", 0.0, excess, RANGE_TOL, ANCHORS["max_principle"],
                  f"min={lo:.17g} max={hi:.17g}")


def check_l1_growth(traj: Trajectory, kappa: float, slack: Slack | None = None) -> Record:
    grid = traj.grid
    n0 = l1_norm(traj.initial.values, grid)
    cands = [(n0 + kappa * s.t, s.l1(), _slack_at(slack, traj, s.t), f"t={s.t:.6g}")
             for s in traj.snapshots[1:]]
    b, o, sl, note = _worst(cands)
    return Record("l1_growth", b, o, sl, ANCHORS["l1_growth"], note)


def check_l2_energy(traj: Trajectory, kappa: float, eps: float, slack: Slack | None = None) -> Record:
    grid = traj.grid
    e0 = l2_norm(traj.initial.values, grid) ** 2
    log = traj.stepper_log
    cands = [(e0 + 2.0 * kappa * s.t, s.l2() ** 2 + 2.0 * eps * log.dissipation_until(s.t),
              _slack_at(slack, traj, s.t), f"t={s.t:.6g}") for s in traj.snapshots[1:]]
    b, o, sl, note = _worst(cands)
    return Record("l2_energy", b, o, sl, ANCHORS["l2_energy"], note)


def check_l2_identity(traj: Trajectory, eps: float, tol: float = IDENTITY_TOL) -> Record:
    """``| ||u(t)||^2 + 2 eps D(t) - ||u0||^2 |``, exact for source- and flux-free runs."""
    grid = traj.grid
    e0 = l2_norm(traj.initial.values, grid) ** 2
    log = traj.stepper_log
    dev = max(abs(s.l2() ** 2 + 2.0 * eps * log.dissipation_until(s.t) - e0) for s in traj.snapshots[1:])
    return Record("l2_identity", 0.0, dev, tol, ANCHORS["l2_identity"])


def check_bv_space(traj: Trajectory, kappa: float, tv0: float | None = None,
                   slack: Slack | None = None) -> Record:
    if tv0 is None:
        tv0 = float(sum(traj.initial.tv()))
    cands = []
    for s in traj.snapshots[1:]:
        e = np.exp(kappa * s.t)
        for axis, tv in enumerate(s.tv()):
            cands.append((tv0 * e + e - 1.0, tv, _slack_at(slack, traj, s.t), f"t={s.t:.6g} axis={axis}"))
    b, o, sl, note = _worst(cands)
    return Record("bv_space", b, o, sl, ANCHORS["bv_space"], note)


def check_tvd(traj: Trajectory, tol: float = 1e-12) -> Record:
    """Largest increase of the per-axis TV between consecutive snapshots."""
    worst, note = 0.0, ""
    tvs = [s.tv() for s in traj.snapshots]
    for (a, b), s in zip(zip(tvs[:-1], tvs[1:]), traj.snapshots[1:]):
        for axis, (x, y) in enumerate(zip(a, b)):
            if y - x > worst:
                worst, note = y - x, f"t={s.t:.6g} axis={axis}"
    scale = max(1.0, max(sum(t) for t in tvs))
    return Record("tvd", 0.0, worst, tol * scale, ANCHORS["tvd"], note)


def check_time_lipschitz(traj: Trajectory, constants: EstimateConstants, slack: Slack | None = None) -> Record:
    grid = traj.grid
    L = constants.L
    snaps = traj.snapshots
    sl = _slack_at(slack, traj, traj.times[-1])
    cands = []
    for i in range(len(snaps)):
        for j in range(i + 1, len(snaps)):
            dt = snaps[j].t - snaps[i].t
            cands.append((L * dt, l1_norm(snaps[j].values - snaps[i].values, grid), sl,
                          f"s={snaps[i].t:.6g} t={snaps[j].t:.6g} L={L:.6g}"))
    b, o, s_, note = _worst(cands)
    return Record("time_lipschitz", b, o, s_, ANCHORS["time_lipschitz"], note)


def check_contraction(traj_u: Trajectory, traj_v: Trajectory, kappa: float,
                      slack: Slack | None = None) -> Record:
    grid = traj_u.grid
    if traj_v.grid != grid or not np.allclose(traj_u.times, traj_v.times, rtol=0, atol=1e-14):
        raise ValueError("contraction needs two runs on the same grid and snapshot times")
    d0 = l1_norm(traj_u.initial.values - traj_v.initial.values, grid)
    cands = [(np.exp(kappa * a.t) * d0, l1_norm(a.values - b.values, grid), _slack_at(slack, traj_u, a.t),
              f"t={a.t:.6g}") for a, b in zip(traj_u.snapshots[1:], traj_v.snapshots[1:])]
    b, o, sl, note = _worst(cands)
    return Record("contraction", b, o, sl, ANCHORS["contraction"], note)


def gradient_A_sup(traj: Trajectory, model: ModelSpec, window: Sequence[float] = (-1.0, 1.0)) -> float:
    mask = traj.grid.window_mask(window)
    return max(max_lipschitz(np.asarray(model.diffusion.A(s.values), dtype=float), traj.grid, mask)
               for s in traj.snapshots)


def check_gradient_A_bounded(traj: Trajectory, model: ModelSpec, eps: float,
                             window: Sequence[float] = (-1.0, 1.0), cap: float = np.inf) -> Record:
    """Records ``sup_t Lip(A(u(t)))`` on ``window``; passes when finite and below ``cap``."""
    sup = gradient_A_sup(traj, model, window)
    return Record("gradient_A", float(cap), sup if np.isfinite(sup) else np.inf, 0.0, ANCHORS["gradient_A"],
                  f"eps={eps:g} window={tuple(window)}")


def check_gradient_A_ladder(trajs: Sequence[Trajectory], model: ModelSpec, eps_list: Sequence[float],
                            window: Sequence[float] = (-1.0, 1.0), growth: float = 0.1) -> Record:
    """Ratio of the Lipschitz bound at each viscosity to that at the largest one."""
    sups = [gradient_A_sup(t, model, window) for t in trajs]
    base = sups[int(np.argmax(eps_list))]
    ratio = max(s / base for s in sups) if base > 0 else (0.0 if max(sups) == 0 else np.inf)
    note = " ".join(f"eps={e:g}:{s:.6g}" for e, s in zip(eps_list, sups))
    return Record("gradient_A_ladder", 1.0, ratio, growth, ANCHORS["gradient_A_ladder"], note)


@dataclass
class VerificationReport:
    records: list[Record]
    constants: EstimateConstants | None = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def first_failure(self) -> Record | None:
        return next((r for r in self.records if not r.passed), None)

    def rows(self) -> list[tuple]:
        return [(r.estimate_id, r.bound, r.observed, r.slack, r.passed, r.anchor) for r in self.records]

    def summary(self) -> str:
        lines = []
        for r in self.records:
            lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.estimate_id:<18} observed={r.observed:.6g} "
                         f"bound={r.bound:.6g} slack={r.slack:.3g}  {r.note}")
        if self.constants is not None:
            c = self.constants
            lines.append(f"constants: kappa={c.kappa:g} L_f={c.L_f:g} kappa0={c.kappa0:.6g} tv0={c.tv0:.6g} "
                         f"tvA0={c.tvA0:.6g} L={c.L:.6g} (tvA0 is the discrete second variation of A(u0))")
        return "\n".join(lines)


def verify_trajectory(traj: Trajectory, model: ModelSpec, family, eps: float,
                      partner: Trajectory | None = None, C_s: float = DEFAULT_C_S,
                      window: Sequence[float] = (-1.0, 1.0)) -> VerificationReport:
    """All single-run checks, plus contraction against ``partner`` when given."""
    T = traj.times[-1]
    slack = C_s * traj.grid.dx * (1.0 + T)
    const = EstimateConstants.for_run(model, family, eps, T, traj)
    kappa = model.kappa
    recs = [check_maximum_principle(traj),
            check_l1_growth(traj, kappa, slack),
            check_l2_energy(traj, kappa, eps, slack),
            check_bv_space(traj, kappa, const.tv0, slack)]
    if model.source.is_zero and traj.grid.dimension == 1:
        recs.append(check_tvd(traj))
    if model.source.is_zero and model.flux.lipschitz_const == 0.0 and traj.grid.boundary == "periodic":
        recs.append(check_l2_identity(traj, eps))
    recs.append(check_time_lipschitz(traj, const, slack))
    if partner is not None:
        recs.append(check_contraction(traj, partner, kappa, slack))
    recs.append(check_gradient_A_bounded(traj, model, eps, window))
    return VerificationReport(recs, const, {"eps": eps, "mu": traj.mu, "dx": traj.grid.dx, "T": T})
