"""Kernel smoothing of the problem data into the mu-indexed regularised family.

Flux and diffusion are extended outside [0, 1] by their tangent lines and then
convolved with the standard bump of width ``mu``.  Convolution with a unit-mass
nonnegative kernel is a convex combination of translates, so Lipschitz
constants, monotonicity of ``A`` and the sign of ``a`` carry over exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage
from scipy.integrate import trapezoid

from degvisc.grid import GridSpec, l1_norm, l2_norm, second_variation
from degvisc.model import (
    DiffusionSpec, FluxSpec, GridDatum, InvalidModelError, ModelSpec, SourceSpec,
    monotone_breakpoints, validate_hypotheses)
from degvisc.scenarios import bump

MU_MAX = 0.25
DEFAULT_LADDER = (0.04, 0.02, 0.01)


@dataclass(frozen=True)
class MollifierKernel:
    """Normalised bump ``rho(s) ~ exp(-1/(1 - s^2))`` on [-1, 1], scaled to ``width``."""

    width: float
    nodes: int = 40

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("kernel width must be positive")

    @cached_property
    def _unit(self):
        s, w = leggauss(self.nodes)
        b = bump(s) * w
        return s, b / b.sum()

    @cached_property
    def _norm(self) -> float:
        s, w = leggauss(200)
        return float(np.sum(bump(s) * w))

    def profile(self, s) -> np.ndarray:
        """Unit-width density, integrating to one."""
        return bump(s) / self._norm

    def density(self, x) -> np.ndarray:
        return self.profile(np.asarray(x) / self.width) / self.width

    def mass(self) -> float:
        s, w = leggauss(200)
        return float(np.sum(self.profile(s) * w))

    @property
    def shifts(self) -> tuple[np.ndarray, np.ndarray]:
        """Discrete kernel: shifts ``width * s_i`` and weights summing to one."""
        s, w = self._unit
        return self.width * s, w

    @cached_property
    def _cdf_table(self):
        s = np.linspace(-1.0, 1.0, 40001)
        p = self.profile(s)
        c = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(s))])
        return s, c / c[-1]

    def cdf(self, s) -> np.ndarray:
        """``int_{-1}^{s} rho`` for the unit-width profile."""
        grid, c = self._cdf_table
        return np.interp(s, grid, c, left=0.0, right=1.0)

    def smooth(self, func: Callable) -> Callable:
        """``u -> sum_i w_i func(u - width * s_i)``."""
        shifts, weights = self.shifts

        def smoothed(u):
            u = np.asarray(u, dtype=float)
            vals = np.asarray(func(u[..., None] - shifts), dtype=float)
            return vals @ weights
        return smoothed

    def cell_weights(self, dx: float) -> np.ndarray:
        """Weights ``m_k`` mapping cell averages to cell averages of the convolution.

        ``m_k = int rho_mu(z) hat(z/dx - k) dz`` where ``hat`` is the overlap of
        two unit cells; the weights are nonnegative and sum to one.
        """
        K = int(np.ceil(self.width / dx)) + 1
        ks = np.arange(-K, K + 1)
        s, w = leggauss(16)
        m = np.zeros(ks.size)
        cuts = np.unique(np.clip(np.arange(-K - 1, K + 2) * dx, -self.width, self.width))
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            z = 0.5 * (a + b) + 0.5 * (b - a) * s
            rho = self.density(z) * 0.5 * (b - a) * w
            hat = np.maximum(0.0, 1.0 - np.abs(z[None, :] / dx - ks[:, None]))
            m += hat @ rho
        return m / m.sum()


def tangent_extension(func: Callable, deriv: Callable) -> Callable:
    f0 = float(np.asarray(func(np.array([0.0])))[0])
    f1 = float(np.asarray(func(np.array([1.0])))[0])
    d0 = float(np.asarray(deriv(np.array([0.0])))[0])
    d1 = float(np.asarray(deriv(np.array([1.0])))[0])

    def ext(u):
        u = np.asarray(u, dtype=float)
        inner = np.asarray(func(np.clip(u, 0.0, 1.0)), dtype=float)
        return np.where(u < 0.0, f0 + d0 * u, np.where(u > 1.0, f1 + d1 * (u - 1.0), inner))
    return ext


def clamped(func: Callable) -> Callable:
    return lambda u: func(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))


TABLE_NODES = 16385


def tabulate(values: Callable, slopes: Callable, n: int = TABLE_NODES) -> Callable:
    """Cubic Hermite table of ``values`` on [0, 1], using exact ``slopes`` at the nodes.

    Evaluation clamps to [0, 1]; affine functions are reproduced exactly.
    """
    nodes = np.linspace(0.0, 1.0, n)
    v = np.asarray(values(nodes), dtype=float)
    h = 1.0 / (n - 1)
    d = h * np.asarray(slopes(nodes), dtype=float)

    def table(u):
        s = np.clip(np.asarray(u, dtype=float), 0.0, 1.0) * (n - 1)
        i = np.minimum(s.astype(np.intp), n - 2)
        t = s - i
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * v[i] + (t3 - 2 * t2 + t) * d[i]
                + (3 * t2 - 2 * t3) * v[i + 1] + (t3 - t2) * d[i + 1])
    return table


def mollify_flux(flux: FluxSpec, kernel: MollifierKernel) -> FluxSpec:
    comps, ders = [], []
    for fi, di in zip(flux.components, flux.derivatives):
        conv = kernel.smooth(tangent_extension(fi, di))
        offset = float(conv(np.array([0.0]))[0])
        deriv = kernel.smooth(clamped(di))
        comps.append(tabulate(lambda u, conv=conv, offset=offset: conv(u) - offset, deriv))
        ders.append(deriv)
    bps = tuple(monotone_breakpoints(c) for c in comps)
    return FluxSpec(tuple(comps), tuple(ders), flux.lipschitz_const, bps,
                    f"{flux.name}*rho_{kernel.width:g}")


def mollify_diffusion(diff: DiffusionSpec, kernel: MollifierKernel) -> DiffusionSpec:
    a_mu = kernel.smooth(clamped(diff.a))
    return DiffusionSpec(tabulate(kernel.smooth(tangent_extension(diff.A, diff.a)), a_mu), a_mu,
                         diff.lipschitz_const,
                         f"{diff.name}*rho_{kernel.width:g}")


def mollify_source(src: SourceSpec, kernel: MollifierKernel, dimension: int) -> SourceSpec:
    if src.structure == "zero":
        return src
    mu = kernel.width
    if src.structure == "indicator_ramp":
        intervals = src.intervals

        def chi_mu(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for a, b in intervals:
                out += kernel.cdf((x - a) / mu) - kernel.cdf((x - b) / mu)
            return np.clip(out, 0.0, 1.0)
        return SourceSpec(src.kappa, "indicator_ramp", intervals, src.profile,
                          indicator=chi_mu, extent=src.extent + mu, name=f"{src.name}*rho_{mu:g}")
    shifts, weights = kernel.shifts
    func = src.func

    if dimension == 1:
        def g_mu(t, coords, u):
            x = coords[0]
            return sum(wi * np.asarray(func(t, (x - si,), u), dtype=float)
                       for si, wi in zip(shifts, weights))
    else:
        def g_mu(t, coords, u):
            X, Y = coords
            return sum(wi * wj * np.asarray(func(t, (X - si, Y - sj), u), dtype=float)
                       for si, wi in zip(shifts, weights) for sj, wj in zip(shifts, weights))
    return SourceSpec(src.kappa, "general", func=g_mu, extent=src.extent + mu,
                      name=f"{src.name}*rho_{mu:g}")


def mollify_values(values: np.ndarray, grid: GridSpec, kernel: MollifierKernel) -> np.ndarray:
    """Cell averages of the kernel convolution of a piecewise-constant field."""
    m = kernel.cell_weights(grid.dx)
    mode = "wrap" if grid.boundary == "periodic" else "nearest"
    out = np.asarray(values, dtype=float)
    for axis in range(grid.dimension):
        out = ndimage.convolve1d(out, m[::-1], axis=axis, mode=mode)
    return np.clip(out, 0.0, 1.0)


def _cut_off(values, grid: GridSpec, cutoff):
    if cutoff is None:
        return values
    mask = np.ones(grid.shape, dtype=bool)
    for c in grid.coords:
        mask &= np.abs(c) <= cutoff
    return np.where(mask, values, 0.0)


@dataclass(frozen=True)
class MollifiedFamily:
    """Smooth data ``(f_mu, A_mu, g_mu, u0_mu)`` at one ``mu`` plus the frozen ``kappa0``."""

    mu: float
    f_mu: FluxSpec
    A_mu: DiffusionSpec
    g_mu: SourceSpec
    u0_mu: GridDatum
    kappa0: float
    base: ModelSpec
    base_datum: GridDatum
    kernel: MollifierKernel
    ladder: tuple[float, ...] = DEFAULT_LADDER
    curvature: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.u0_mu.grid

    def as_model(self) -> ModelSpec:
        return ModelSpec(self.f_mu, self.A_mu, self.g_mu, self.base.initial, None,
                         f"{self.base.name}@mu={self.mu:g}", self.base.params)


def mollify_model(model: ModelSpec, mu: float, grid: GridSpec,
                  ladder: Sequence[float] = DEFAULT_LADDER, cutoff: float | None = None,
                  datum: GridDatum | None = None, nodes: int = 40) -> MollifiedFamily:
    """Regularise ``model`` at scale ``mu`` on ``grid``.

    ``datum`` overrides the un-smoothed initial cell averages (used for
    viscosity-dependent data).  ``kappa0`` is the largest
    ``mu' * ||u0_mu'''||_1`` over ``ladder`` and ``mu`` itself.
    """
    if not (0.0 < mu <= MU_MAX):
        raise InvalidModelError(f"mu must lie in (0, {MU_MAX}], got {mu}")
    if cutoff is not None and cutoff < model.initial.support_radius:
        raise InvalidModelError(f"cutoff radius {cutoff} smaller than datum support radius "
                                f"{model.initial.support_radius}")
    report = model.hypothesis_report or validate_hypotheses(model)
    failed = [h for h in ("H1", "H2", "H3", "H4") if not report.passed(h)]
    if failed:
        raise InvalidModelError(f"model fails {failed}; cannot regularise")
    if grid.dimension != model.dimension:
        raise InvalidModelError("grid and model dimensions differ")

    kernel = MollifierKernel(mu, nodes)
    base = datum if datum is not None else model.initial.discretize(grid)
    u0 = _cut_off(mollify_values(base.values, grid, kernel), grid, cutoff)
    u0_mu = GridDatum.from_values(u0, grid)

    curvature = {}
    for m in sorted(set(ladder) | {mu}, reverse=True):
        v = u0 if m == mu else _cut_off(mollify_values(base.values, grid, MollifierKernel(m, nodes)),
                                        grid, cutoff)
        curvature[m] = m * second_variation(v, grid)
    kappa0 = max(curvature.values())

    return MollifiedFamily(mu, mollify_flux(model.flux, kernel), mollify_diffusion(model.diffusion, kernel),
                           mollify_source(model.source, kernel, model.dimension), u0_mu, kappa0,
                           model, base, kernel, tuple(ladder), curvature)


# ---------------------------------------------------------------------------
# verification of the approximation conditions

@dataclass
class FamilyRow:
    mu: float
    f_sup_error: float
    A_sup_error: float
    g_l1_error: float
    u0_l1_error: float
    u0_l2_error: float
    margins: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(v >= 0.0 for v in self.margins.values())


@dataclass
class ConvergenceReport:
    rows: list[FamilyRow]

    def errors(self, key: str) -> np.ndarray:
        return np.array([getattr(r, key) for r in self.rows])

    def ratios(self, key: str) -> np.ndarray:
        e = self.errors(key)
        with np.errstate(divide="ignore", invalid="ignore"):
            return e[:-1] / e[1:]

    def monotone(self, key: str) -> bool:
        e = self.errors(key)
        return bool(np.all(e[1:] <= e[:-1]))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _sup_error(f1: Callable, f2: Callable, n: int = 4001) -> float:
    u = np.linspace(0.0, 1.0, n)
    return float(np.max(np.abs(np.asarray(f1(u)) - np.asarray(f2(u)))))


def _g_l1_error(base: SourceSpec, smooth: SourceSpec, dimension: int, T: float) -> float:
    if base.is_zero:
        return 0.0
    ts = np.linspace(0.0, T, 11)
    if dimension == 1:
        n = 50001
        x = np.linspace(-smooth.extent, smooth.extent, n)
        coords, w = (x,), 2 * smooth.extent / (n - 1)
    else:
        n = 801
        x = np.linspace(-smooth.extent, smooth.extent, n)
        coords, w = tuple(np.meshgrid(x, x, indexing="ij")), (2 * smooth.extent / (n - 1)) ** 2
    worst = 0.0
    for uk in np.linspace(0.0, 1.0, 21):
        u = np.full_like(coords[0], uk)
        per_t = np.array([np.sum(np.abs(smooth.eval(t, coords, u) - base.eval(t, coords, u))) * w
                          for t in ts])
        worst = max(worst, float(trapezoid(per_t, ts)) if T > 0 else 0.0)
    return worst


def verify_family(families: Sequence[MollifiedFamily], T: float = 1.0) -> ConvergenceReport:
    """Approximation errors and condition margins along a decreasing mu-ladder."""
    mus = [fam.mu for fam in families]
    if len(mus) < 3 or any(b >= a for a, b in zip(mus, mus[1:])):
        raise ValueError("need >= 3 strictly decreasing mu values")
    rows = []
    for fam in families:
        model = fam.base
        grid = fam.grid
        u = np.linspace(0.0, 1.0, 4001)
        f_err = max(_sup_error(fi, gi) for fi, gi in zip(fam.f_mu.components, model.flux.components))
        A_err = _sup_error(fam.A_mu.A, model.diffusion.A)
        g_err = _g_l1_error(model.source, fam.g_mu, model.dimension, T)
        diff = fam.u0_mu.values - fam.base_datum.values
        lf_model = float(np.max(np.sqrt(np.sum(model.flux.deriv(u) ** 2, axis=0))))
        lf_mu = float(np.max(np.sqrt(np.sum(fam.f_mu.deriv(u) ** 2, axis=0))))
        tol = 1e-12
        u0, base = fam.u0_mu, fam.base_datum
        A_base = model.diffusion.A(base.values)
        A_mu_u0 = fam.A_mu.A(u0.values)
        fam_report = validate_hypotheses(fam.as_model(), samples=17, T=T)
        margins = {
            "flux_vanishes_at_zero": F0_margin(fam.f_mu),
            "flux_lipschitz": lf_model - lf_mu + tol,
            "diffusivity_nonnegative": float(np.min(fam.A_mu.a(u))) + tol,
            "source_hypotheses": 0.0 if fam_report.passed("H3") else -1.0,
            "datum_range": min(float(u0.values.min()), 1.0 - float(u0.values.max())),
            "datum_l1": base.l1_norm - u0.l1_norm + tol * max(1.0, base.l1_norm),
            "datum_l2": base.l2_norm - u0.l2_norm + tol * max(1.0, base.l2_norm),
            "datum_tv": base.tv_total - u0.tv_total + tol * max(1.0, base.tv_total),
            "datum_diffusion_curvature": (second_variation(A_base, grid) - second_variation(A_mu_u0, grid)
                                          + tol * max(1.0, second_variation(A_base, grid))),
            "datum_mu_curvature": fam.kappa0 - fam.mu * second_variation(u0.values, grid) + tol,
        }
        rows.append(FamilyRow(fam.mu, f_err, A_err, g_err, l1_norm(diff, grid), l2_norm(diff, grid),
                              margins))
    return ConvergenceReport(rows)


def F0_margin(flux: FluxSpec) -> float:
    f0 = float(np.max(np.abs(flux.eval(np.array([0.0])))))
    return 1e-12 - f0
