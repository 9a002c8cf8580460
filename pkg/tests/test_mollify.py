import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from degvisc.grid import GridSpec, total_variation
from degvisc.model import InvalidModelError
from degvisc.mollify import MollifierKernel, mollify_model, mollify_values, verify_family
from degvisc.scenarios import builtin_model

LADDER = (0.04, 0.02, 0.01)
U = np.linspace(0.0, 1.0, 4001)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(1, 2.0, 800)


def _second_moment(kernel):
    s, w = leggauss(200)
    return float(np.sum(s ** 2 * kernel.profile(s) * w))


def test_kernel_unit_mass_and_nonnegative():
    k = MollifierKernel(0.03)
    assert k.mass() == pytest.approx(1.0, abs=1e-12)
    assert np.all(k.profile(np.linspace(-1.5, 1.5, 301)) >= 0)
    shifts, weights = k.shifts
    assert weights.sum() == pytest.approx(1.0, abs=1e-14) and np.all(np.abs(shifts) < 0.03)
    m = k.cell_weights(0.005)
    assert m.sum() == pytest.approx(1.0, abs=1e-14) and np.all(m >= 0)


def test_heat_diffusion_is_fixed_point(grid):
    fam = mollify_model(builtin_model("heat"), 0.01, grid)
    np.testing.assert_allclose(fam.A_mu.A(U), U, atol=1e-14)
    np.testing.assert_allclose(fam.A_mu.a(U), 1.0, atol=1e-14)


def test_greenshields_flux_error_is_second_order(grid):
    m = builtin_model("greenshields_lwr")
    errs = []
    for mu in LADDER:
        fam = mollify_model(m, mu, grid)
        err = np.abs(fam.f_mu.eval(U)[0] - m.flux.eval(U)[0]).max()
        # |f''|/2 * mu^2 * second moment, doubled for the f_mu(0) shift
        assert err <= 2.0 * mu ** 2 * _second_moment(fam.kernel) + 1e-12
        assert np.abs(fam.f_mu.eval(np.array([0.0]))).max() <= 1e-12
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


def test_mollified_flux_keeps_lipschitz_bound(grid):
    m = builtin_model("burgers")
    fam = mollify_model(m, 0.04, grid)
    q = np.abs(np.diff(fam.f_mu.eval(U)[0])) / np.diff(U)
    assert q.max() <= m.flux.lipschitz_const + 1e-12


def test_indicator_datum_tv_not_increased():
    g = GridSpec(1, 2.0, 800)
    u0 = g.cell_averages(lambda c: np.where(np.abs(c[0]) < 1.0, 1.0, 0.0))
    v = mollify_values(u0, g, MollifierKernel(0.05))
    assert total_variation(v, g)[0] <= 2.0 + 1e-12
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_zero_flux_errors_vanish(grid):
    fams = [mollify_model(builtin_model("heat"), mu, grid) for mu in LADDER]
    rep = verify_family(fams)
    assert np.all(rep.errors("f_sup_error") == 0.0)
    assert rep.passed


def test_greenshields_ladder_ratios(grid):
    m = builtin_model("greenshields_lwr")
    rep = verify_family([mollify_model(m, mu, grid) for mu in LADDER])
    r = rep.ratios("f_sup_error")
    assert np.all((r > 3.0) & (r < 5.0))
    assert rep.monotone("f_sup_error") and rep.monotone("A_sup_error")
    assert rep.passed
    for row in rep.rows:
        assert all(v >= 0 for v in row.margins.values())


def test_indicator_source_error_per_edge(grid):
    # lwr_entry: h = 1 - u, one interval, two edges
    m = builtin_model("lwr_entry")
    fams = [mollify_model(m, mu, grid) for mu in LADDER]
    rep = verify_family(fams, T=1.0)
    for mu, err in zip(LADDER, rep.errors("g_l1_error")):
        assert 0 < err <= 2 * (2 * mu * 1.0)


def test_smoothed_source_sign_conditions(grid):
    fam = mollify_model(builtin_model("lwr_exit"), 0.02, grid)
    x = (grid.centers,)
    assert np.all(fam.g_mu.eval(0.3, x, np.ones_like(x[0])) <= 0)
    assert np.all(fam.g_mu.eval(0.3, x, np.zeros_like(x[0])) >= 0)


def test_kappa0_frozen_over_ladder(grid):
    fam = mollify_model(builtin_model("greenshields_lwr"), 0.01, grid)
    assert fam.kappa0 == max(fam.curvature.values())
    assert set(LADDER) <= set(fam.curvature)


def test_rejects_bad_widths_and_cutoff(grid):
    m = builtin_model("greenshields_lwr")
    for mu in (0.0, -0.01, 0.3):
        with pytest.raises(InvalidModelError):
            mollify_model(m, mu, grid)
    with pytest.raises(InvalidModelError):
        mollify_model(m, 0.01, grid, cutoff=0.2)
    with pytest.raises(ValueError):
        verify_family([mollify_model(m, mu, grid) for mu in (0.01, 0.02, 0.04)])
