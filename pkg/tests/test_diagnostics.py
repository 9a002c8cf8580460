import warnings

import numpy as np
import pytest

from degvisc.diagnostics import (ANCHORS, EstimateConstants, Record, check_contraction, check_gradient_A_bounded,
                                 check_gradient_A_ladder, check_l1_growth, check_l2_energy, check_l2_identity,
                                 check_maximum_principle, check_bv_space, check_time_lipschitz, check_tvd,
                                 verify_trajectory)
from degvisc.grid import GridSpec, l1_norm, total_variation, trajectory_from_field
from degvisc.mollify import mollify_model
from degvisc.scenarios import SCENARIOS, builtin_model
from degvisc.solver import BoundaryContaminationWarning, solve, solve_reference

TIMES = [0.1 * k for k in range(1, 11)]


def run(name, params=None, eps=0.01, n=400, half_width=3.0, T=1.0, boundary="outflow", mu=1e-3, **kw):
    m = builtin_model(name, params)
    g = GridSpec(m.dimension, half_width, n, boundary)
    fam = mollify_model(m, mu, g)
    return m, fam, solve(m, fam, eps, g, T, [t for t in TIMES if t <= T], **kw)


def test_record_pass_rule_and_anchor():
    assert Record("x", 1.0, 1.05, 0.1, "a").passed
    assert not Record("x", 1.0, 1.2, 0.1, "a").passed
    assert Record("x", 1.0, 1.2, 0.1, "a").margin == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        Record("x", 1.0, 0.0, 0.0, "")
    assert all(ANCHORS.values())


def test_time_lipschitz_constant_formula():
    c = EstimateConstants(kappa=0.5, L_f=1.0, kappa0=0.2, tv0=1.6, tvA0=3.0, eps=0.1, T=2.0)
    e = np.exp(1.0)
    assert c.L == pytest.approx((1.6 + 0.02 + 0.3 + 0.5) * e + e - 1)


# maximum principle --------------------------------------------------------

def test_max_principle_heat_and_entry_from_vacuum():
    _, _, traj = run("heat", eps=0.1, half_width=4.0)
    assert check_maximum_principle(traj).passed
    _, _, traj = run("lwr_entry", {"datum": "constant", "value": 0.0})
    rec = check_maximum_principle(traj)
    assert rec.passed and traj.final.values.max() < 1.0


def test_max_principle_flags_oversized_step():
    m = builtin_model("heat", {"datum": "box", "height": 1.0})
    g = GridSpec(1, 2.0, 200)
    traj = solve(m, None, 1.0, g, 0.02, dt=g.dx ** 2, check_stability=False)
    assert not check_maximum_principle(traj).passed


# L1 ----------------------------------------------------------------------

def test_l1_conserved_without_source():
    _, _, traj = run("greenshields_lwr", boundary="periodic")
    rec = check_l1_growth(traj, 0.0, 0.0)
    assert abs(rec.bound - rec.observed) <= 1e-12 and rec.passed


def test_l1_growth_below_kappa_line():
    m, _, traj = run("lwr_entry")
    rec = check_l1_growth(traj, m.kappa, 0.0)
    assert rec.passed and rec.observed < rec.bound
    masses = [s.l1() for s in traj.snapshots]
    assert all(b > a for a, b in zip(masses, masses[1:]))


def test_l1_decreases_at_exit_ramp():
    m, _, traj = run("lwr_exit", {"datum": "constant", "value": 0.8}, n=300)
    # compare on a window that the boundary cannot reach by T
    w = traj.grid.window_mask((-1.0, 1.5))
    masses = [float(np.sum(s.values[w])) * traj.grid.dx for s in traj.snapshots]
    assert all(b < a for a, b in zip(masses, masses[1:]))
    rec = check_l1_growth(traj, m.kappa)
    assert rec.passed and traj.final.l1() < traj.initial.l1()


# L2 ----------------------------------------------------------------------

def test_l2_identity_for_heat():
    _, _, traj = run("heat", eps=0.1, boundary="periodic")
    rec = check_l2_identity(traj, 0.1)
    assert rec.passed and rec.observed <= 1e-10
    assert check_l2_energy(traj, 0.0, 0.1, 0.0).margin >= -1e-10


def test_l2_norm_nonincreasing_for_inviscid_monotone_scheme():
    m = builtin_model("burgers")
    g = GridSpec(1, 3.0, 400)
    traj = solve(m, None, 0.0, g, 1.0, TIMES)
    norms = [s.l2() for s in traj.snapshots]
    assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))


def test_l2_energy_with_source():
    m, _, traj = run("lwr_entry")
    assert check_l2_energy(traj, m.kappa, 0.01, traj.grid.dx).passed


# BV ----------------------------------------------------------------------

def test_tvd_without_source():
    _, _, traj = run("greenshields_lwr")
    assert check_tvd(traj).passed
    assert check_bv_space(traj, 0.0).passed


def test_bv_envelope_with_source():
    m, _, traj = run("lwr_entry")
    assert check_bv_space(traj, m.kappa, None, traj.grid.dx).passed


def test_bv_per_axis_for_two_dimensional_box():
    m = builtin_model("greenshields_lwr", {"dim": 2})
    g = GridSpec(2, 2.5, 80)
    traj = solve(m, mollify_model(m, 0.02, g), 0.01, g, 0.3, [0.1, 0.2])
    # datum TV per axis: 2 * height * side length, by hand
    tv0 = total_variation(m.initial.discretize(g).values, g)
    assert tv0[0] == pytest.approx(2 * 0.8 * 1.0, rel=1e-12) and tv0[1] == pytest.approx(tv0[0])
    rec = check_bv_space(traj, 0.0, max(tv0), 0.0)
    assert rec.passed


# time Lipschitz ------------------------------------------------------------

def test_time_lipschitz_constant_state():
    g = GridSpec(1, 2.0, 100)
    traj = trajectory_from_field(lambda t, c: np.full(np.shape(c[0]), 0.3), g, np.linspace(0, 1, 6))
    c = EstimateConstants(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    rec = check_time_lipschitz(traj, c, 0.0)
    assert rec.observed == 0.0 and rec.passed


def test_time_lipschitz_rarefaction_rate():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 1.0, "ur": 0.0})
    g = GridSpec(1, 2.0, 800)
    traj = solve_reference(m, g, 1.0, TIMES)
    c = EstimateConstants.for_run(m, None, 0.0, 1.0, traj)
    assert c.L == pytest.approx(m.flux.lipschitz_const * c.tv0)
    # closed-form rate: int |d_t u| dx = int_{|x|<t} |x|/(2 t^2) dx = 1/2 for the fan (1 - x/t)/2
    a, b = traj.at(0.4).values, traj.at(0.8).values
    assert l1_norm(a - b, g) == pytest.approx(0.5 * 0.4, abs=5 * g.dx)
    assert 0.5 <= c.L
    assert check_time_lipschitz(traj, c, g.dx).passed


def test_time_lipschitz_heat_dominated_by_diffusion_term():
    m, fam, traj = run("heat", eps=1.0, n=600, half_width=6.0, T=0.2)
    c = EstimateConstants.for_run(m, fam, 1.0, 0.2)
    assert c.L_f == 0.0 and c.kappa == 0.0
    assert c.eps * c.tvA0 > c.eps * c.kappa0
    assert check_time_lipschitz(traj, c).passed


# contraction ---------------------------------------------------------------

def test_contraction_exact_without_source():
    m, fam, u = run("greenshields_lwr")
    v = solve(m, fam, 0.01, u.grid, 1.0, TIMES, initial=0.5 * fam.u0_mu.values)
    rec = check_contraction(u, v, 0.0, 1e-12)
    assert rec.passed
    same = check_contraction(u, u, 0.0, 0.0)
    assert same.observed == 0.0 and same.bound == 0.0 and same.passed


def test_contraction_envelope_with_source():
    m, fam, u = run("lwr_entry")
    shifted = np.roll(fam.u0_mu.values, 20)
    v = solve(m, fam, 0.01, u.grid, 1.0, TIMES, initial=shifted)
    assert check_contraction(u, v, m.kappa, u.grid.dx).passed


def test_contraction_needs_matching_runs():
    m, fam, u = run("heat", T=0.5)
    v = solve(m, fam, 0.01, u.grid, 0.5, [0.25])
    with pytest.raises(ValueError):
        check_contraction(u, v, 0.0)


# gradient of A --------------------------------------------------------------

def test_gradient_A_heat_constant_in_viscosity():
    # pure diffusion with a linear A: the window Lipschitz bound is the datum's
    m = builtin_model("heat")
    g = GridSpec(1, 3.0, 400)
    trajs = [solve(m, mollify_model(m, 1e-3, g), e, g, 0.05) for e in (0.04, 0.02, 0.01)]
    sups = [check_gradient_A_bounded(t, m, e).observed for t, e in zip(trajs, (0.04, 0.02, 0.01))]
    assert max(sups) - min(sups) <= 1e-12 + 0.01 * max(sups)
    assert check_gradient_A_ladder(trajs, m, (0.04, 0.02, 0.01)).passed


def test_gradient_A_shock_recorded():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 0.0, "ur": 1.0})
    g = GridSpec(1, 2.0, 400)
    recs = []
    for eps in (0.04, 0.02, 0.01):
        traj = solve(m, mollify_model(m, eps / 10, g), eps, g, 1.0, [0.5])
        recs.append(check_gradient_A_bounded(traj, m, eps))
    assert all(np.isfinite(r.observed) and r.passed for r in recs)


def test_gradient_A_constant_state():
    g = GridSpec(1, 2.0, 100)
    traj = trajectory_from_field(lambda t, c: np.full(np.shape(c[0]), 0.6), g, [0.0, 0.5])
    assert check_gradient_A_bounded(traj, builtin_model("greenshields_lwr"), 0.1).observed == 0.0


# whole report ---------------------------------------------------------------

@pytest.mark.parametrize("name", SCENARIOS)
def test_every_scenario_passes_at_reference_resolution(name):
    m = builtin_model(name)
    g = GridSpec(1, 3.0, 400)
    fam = mollify_model(m, 1e-3, g)
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryContaminationWarning)
        traj = solve(m, fam, 0.01, g, 1.0, TIMES)
        partner = solve(m, fam, 0.01, g, 1.0, TIMES, initial=0.5 * fam.u0_mu.values)
    report = verify_trajectory(traj, m, fam, 0.01, partner)
    assert report.passed, report.summary()
    assert {"max_principle", "l1_growth", "l2_energy", "bv_space", "time_lipschitz", "contraction",
            "gradient_A"} <= {r.estimate_id for r in report.records}
    assert report.first_failure() is None
