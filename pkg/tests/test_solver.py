import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from degvisc.grid import GridFunction, GridSpec, l1_norm, total_variation
from degvisc.model import DiffusionSpec, ModelSpec, SourceSpec
from degvisc.mollify import mollify_model
from degvisc.scenarios import builtin_model, bump
from degvisc.solver import (BoundaryContaminationWarning, InstabilityError, restrict, solve,
                            solve_reference, stable_dt, step)


def rarefaction(x, t):
    # greenshields 1|0: f'(u) = 1 - 2u, so u = (1 - x/t)/2 inside the fan
    return np.clip((1.0 - x / t) / 2.0, 0.0, 1.0)


def crossing(values, grid, level=0.5):
    """Interpolated position where a monotone profile crosses ``level``."""
    x = grid.centers
    j = int(np.flatnonzero(np.diff(np.sign(values - level)) != 0)[0])
    return x[j] + (level - values[j]) / (values[j + 1] - values[j]) * grid.dx


# stable_dt ----------------------------------------------------------------

def test_stable_dt_greenshields_example():
    m = builtin_model("greenshields_lwr")
    g = GridSpec(1, 4.0, 800)  # dx = 0.01
    expected = 0.9 * min(0.01 / 2, 0.01 ** 2 / (2 * 0.01 * 1.001), 1e12)
    assert stable_dt(m, 0.01, 0.001, g, cfl=0.9) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.9 * 4.995004995e-3)


def test_stable_dt_without_dynamics_uses_kappa_guard():
    m = builtin_model("heat")
    g = GridSpec(1, 2.0, 100)
    assert stable_dt(m, 0.0, 0.0, g, cfl=0.5) == pytest.approx(0.5e12)
    traj = solve(m, None, 0.0, g, 0.7)
    assert traj.stepper_log.steps == 1 and traj.times[-1] == 0.7


def test_parabolic_cap_scales_with_dx_squared():
    m = builtin_model("heat")
    coarse, fine = GridSpec(1, 2.0, 200), GridSpec(1, 2.0, 400)
    assert stable_dt(m, 1.0, 0.0, coarse) == pytest.approx(4 * stable_dt(m, 1.0, 0.0, fine))


def test_stable_dt_rejects_bad_arguments():
    m = builtin_model("heat")
    g = GridSpec(1, 2.0, 100)
    for args in ((-1.0, 0.0, 0.4), (0.1, -0.1, 0.4), (0.1, 0.0, 0.0), (0.1, 0.0, 1.5)):
        with pytest.raises(ValueError):
            stable_dt(m, args[0], args[1], g, cfl=args[2])


# step ---------------------------------------------------------------------

def test_static_problem_step_is_identity():
    base = builtin_model("heat", validate=False)
    zero = DiffusionSpec(lambda u: np.zeros_like(u), lambda u: np.zeros_like(u), 0.0)
    m = ModelSpec(base.flux, zero, SourceSpec(), base.initial)
    g = GridSpec(1, 1.0, 50)
    u = np.linspace(0, 1, 50) ** 2
    out = step(GridFunction(u, g, 0.0), m, None, 1.0, 0.3)
    np.testing.assert_array_equal(out.values, u)
    assert out.t == 0.3


def test_heat_step_is_explicit_stencil_and_conserves_mass():
    m = builtin_model("heat")
    g = GridSpec(1, 1.0, 40, "periodic")
    u = np.zeros(40)
    u[7] = 1.0
    dt = 0.4 * g.dx ** 2
    out = step(GridFunction(u, g, 0.0), m, None, 1.0, dt).values
    lam = dt / g.dx ** 2
    expected = u + lam * (np.roll(u, 1) - 2 * u + np.roll(u, -1))
    np.testing.assert_allclose(out, expected, atol=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-15)


# solve --------------------------------------------------------------------

def test_heat_kernel_oracle():
    m = builtin_model("heat")
    g = GridSpec(1, 4.0, 800)
    mu, t = 1e-3, 0.1
    traj = solve(m, mollify_model(m, mu, g), 1.0, g, t)
    D = 1.0 + mu  # the regularised problem is the heat equation with diffusivity eps (1 + mu)
    s, w = leggauss(200)
    y, wy = 0.5 * s, 0.5 * w
    kern = np.exp(-(g.centers[:, None] - y) ** 2 / (4 * D * t)) / np.sqrt(4 * np.pi * D * t)
    oracle = kern @ (wy * bump(y / 0.5))
    assert np.abs(traj.final.values - oracle).max() <= 1e-3


def test_rarefaction_error_within_dx_log_envelope():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 1.0, "ur": 0.0})
    for n in (200, 400, 800):
        g = GridSpec(1, 2.0, n)
        u = solve(m, None, 0.0, g, 1.0).final.values
        exact = g.cell_averages(lambda c: rarefaction(c[0], 1.0))
        err = l1_norm(u - exact, g)
        assert err <= 0.5 * g.dx * np.log(1 / g.dx)


def test_periodic_mass_conserved():
    m = builtin_model("greenshields_lwr", {"datum": "bump", "height": 0.9, "width": 0.6})
    g = GridSpec(1, 2.0, 400, "periodic")
    traj = solve(m, mollify_model(m, 0.01, g), 0.02, g, 1.0, [0.25, 0.5, 0.75])
    masses = [s.mass() for s in traj.snapshots]
    assert max(abs(mm - masses[0]) for mm in masses) <= 1e-12


def test_stationary_shock_does_not_drift():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 0.0, "ur": 1.0})
    g = GridSpec(1, 2.0, 800)
    for traj in (solve(m, None, 0.0, g, 1.0), solve_reference(m, g, 1.0)):
        assert abs(crossing(traj.final.values, g)) <= 2 * g.dx


def test_reference_shock_stays_sharp():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 0.0, "ur": 1.0})
    g = GridSpec(1, 2.0, 400)
    np.testing.assert_array_equal(solve_reference(m, g, 1.0).final.values, m.initial.discretize(g).values)


def test_expansion_shock_opens_into_fan():
    m = builtin_model("greenshields_lwr", {"datum": "riemann", "ul": 1.0, "ur": 0.0})
    g = GridSpec(1, 2.0, 800)
    u = solve_reference(m, g, 1.0).final.values
    assert np.abs(np.diff(u)).max() < 0.05
    exact = g.cell_averages(lambda c: rarefaction(c[0], 1.0))
    assert l1_norm(u - exact, g) < 0.01


def test_entry_ramp_from_half_state_follows_ode_bound():
    m = builtin_model("lwr_entry", {"datum": "constant", "value": 0.5})
    g = GridSpec(1, 3.0, 600)
    times = [0.2 * k for k in range(1, 6)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryContaminationWarning)
        traj = solve_reference(m, g, 1.0, times)
    inside = (g.centers > 0.0) & (g.centers < 0.5)
    ode = solve_ivp(lambda t, u: 1.0 - u, (0, 1), [0.5], t_eval=times, rtol=1e-10, atol=1e-12)
    dt = max(traj.stepper_log.dt)
    prev = traj.initial.values[inside]
    for snap, bound in zip(traj.snapshots[1:], ode.y[0]):
        cur = snap.values[inside]
        assert np.all(cur >= prev - 1e-14)
        # forward Euler on u' = 1 - u overshoots the flow by O(dt)
        assert cur.max() <= bound + dt
        prev = cur
    # far upstream of the ramp edge, the cell sees the pure ODE
    assert prev.max() == pytest.approx(ode.y[0][-1], abs=2e-2)


def test_oversized_step_is_caught():
    m = builtin_model("heat", {"datum": "box", "height": 1.0})
    g = GridSpec(1, 2.0, 200)
    dt = 2.0 * g.dx ** 2 / 2.0  # cfl = 2 on the parabolic limit
    with pytest.raises(InstabilityError) as info:
        solve(m, None, 1.0, g, 0.1, dt=dt)
    assert info.value.step_index >= 0
    traj = solve(m, None, 1.0, g, 20 * dt, dt=dt, check_stability=False)
    assert traj.final.values.max() > 1.0 or traj.final.values.min() < 0.0


def test_output_times_hit_exactly_and_initial_snapshot():
    m = builtin_model("burgers")
    g = GridSpec(1, 2.0, 200)
    traj = solve(m, mollify_model(m, 0.01, g), 0.01, g, 0.5, [0.1, 0.25])
    np.testing.assert_array_equal(traj.times, [0.0, 0.1, 0.25, 0.5])
    np.testing.assert_array_equal(traj.initial.values, mollify_model(m, 0.01, g).u0_mu.values)


def test_boundary_warning_when_wave_reaches_edge():
    m = builtin_model("greenshields_lwr", {"datum": "box", "height": 0.2, "left": -0.5, "right": 1.9})
    g = GridSpec(1, 2.0, 200)
    with pytest.warns(BoundaryContaminationWarning):
        solve(m, None, 0.0, g, 0.5)


def test_restrict_is_averaging():
    fine, coarse = GridSpec(1, 1.0, 40), GridSpec(1, 1.0, 10)
    v = np.arange(40.0)
    np.testing.assert_allclose(restrict(v, fine, coarse), np.arange(10) * 4 + 1.5)
    with pytest.raises(ValueError):
        restrict(v, fine, GridSpec(1, 1.0, 12))
    with pytest.raises(ValueError):
        solve_reference(builtin_model("heat"), GridSpec(1, 1.0, 40), 0.1, study_grid=GridSpec(1, 1.0, 20))


def test_two_dimensional_solve_stays_in_range():
    m = builtin_model("greenshields_lwr", {"dim": 2})
    g = GridSpec(2, 3.0, 96)
    traj = solve(m, mollify_model(m, 0.02, g), 0.01, g, 0.5)
    assert traj.final.values.min() >= -1e-12 and traj.final.values.max() <= 1 + 1e-12
    assert traj.final.mass() <= traj.initial.mass() + 1e-12


# monotone-scheme properties on arbitrary data ------------------------------

G64 = GridSpec(1, 1.0, 64, "periodic")
levels = st.lists(st.floats(0.0, 1.0), min_size=64, max_size=64).map(np.array)


@settings(max_examples=25, deadline=None)
@given(levels, levels, st.sampled_from(["greenshields_lwr", "burgers", "porous_medium"]))
def test_l1_contraction_and_tvd(u0, v0, name):
    m = builtin_model(name)
    fam = mollify_model(m, 0.02, G64)
    tu = solve(m, fam, 0.01, G64, 0.2, [0.1], initial=u0)
    tv = solve(m, fam, 0.01, G64, 0.2, [0.1], initial=v0)
    d0 = l1_norm(u0 - v0, G64)
    for a, b in zip(tu.snapshots[1:], tv.snapshots[1:]):
        assert l1_norm(a.values - b.values, G64) <= d0 + 1e-12
    tvs = [total_variation(s.values, G64)[0] for s in tu.snapshots]
    assert all(b <= a + 1e-12 for a, b in zip(tvs, tvs[1:]))
    assert abs(tu.final.mass() - tu.initial.mass()) <= 1e-12
