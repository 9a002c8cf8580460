"""Explicit monotone finite-volume solvers.

``solve`` integrates the regularised viscous problem with Engquist-Osher
fluxes, the central Laplacian of ``A_mu(u) + mu u`` and a pointwise source.
``solve_reference`` is the inviscid Godunov scheme with the source applied by
first-order splitting.  Both keep a constant ``dt`` per run and truncate only
the step landing on an output time.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from degvisc.grid import GridFunction, GridSpec, StepperLog, Trajectory, axis_differences
from degvisc.model import FluxSpec, ModelSpec, SourceSpec

DEFAULT_CFL = 0.4
REFERENCE_CFL = 0.9
KAPPA_FLOOR = 1e-12
OVERSHOOT_TOL = 1e-6
BOUNDARY_CELLS = 5


class InstabilityError(RuntimeError):
    """Raised when the discrete solution leaves the invariant region."""

    def __init__(self, step_index: int, t: float, umin: float, umax: float):
        super().__init__(f"instability at step {step_index} (t={t:.6g}): "
                         f"u in [{umin:.6g}, {umax:.6g}]")
        self.step_index = step_index
        self.t = t


class BoundaryContaminationWarning(UserWarning):
    """The non-constant part of the solution came near an outflow boundary."""


def stable_dt(model: ModelSpec, eps: float, mu: float, grid: GridSpec, cfl: float = DEFAULT_CFL) -> float:
    """``cfl * min(dx/(2N L_f), dx^2/(2N eps (a_max+mu)), 1/max(kappa, 1e-12))``."""
    if eps < 0 or mu < 0:
        raise ValueError("eps and mu must be nonnegative")
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    dx, N = grid.dx, grid.dimension
    if not dx > 0:
        raise ValueError("grid spacing must be positive")
    L = model.flux.lipschitz_const
    b = eps * (model.diffusion.a_max + mu)
    hyper = dx / (2 * N * L) if L > 0 else np.inf
    parab = dx * dx / (2 * N * b) if b > 0 else np.inf
    source = 1.0 / max(model.kappa, KAPPA_FLOOR)
    return float(cfl * min(hyper, parab, source))


def reference_dt(model: ModelSpec, grid: GridSpec, cfl: float = REFERENCE_CFL) -> float:
    """``cfl * min(dx/(N L_f), 1/max(kappa, 1e-12))``, the monotonicity limit of unsplit Godunov."""
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    L = model.flux.lipschitz_const
    hyper = grid.dx / (grid.dimension * L) if L > 0 else np.inf
    return float(cfl * min(hyper, 1.0 / max(model.kappa, KAPPA_FLOOR)))


def _select(model: ModelSpec, family):
    """Flux, diffusion, source and mu actually used by the viscous scheme."""
    if family is None:
        return model.flux, model.diffusion, model.source, 0.0
    return family.f_mu, family.A_mu, family.g_mu, family.mu


def _shifted(values: np.ndarray, axis: int, start: int, stop: int | None):
    sl = [slice(1, -1)] * values.ndim
    sl[axis] = slice(start, stop)
    return values[tuple(sl)]


def _engquist_osher(flux: FluxSpec, axis: int, padded: np.ndarray) -> np.ndarray:
    """Face fluxes along ``axis`` from a one-cell padded array (n+1 faces)."""
    plus, minus = flux.split(axis, padded)
    return _shifted(plus, axis, None, -1) + _shifted(minus, axis, 1, None)


def _godunov(flux: FluxSpec, axis: int, padded: np.ndarray) -> np.ndarray:
    fi = flux.components[axis]
    uL = _shifted(padded, axis, None, -1)
    uR = _shifted(padded, axis, 1, None)
    lo, hi = np.minimum(uL, uR), np.maximum(uL, uR)
    fL, fR = np.asarray(fi(uL), dtype=float), np.asarray(fi(uR), dtype=float)
    rising = uL <= uR
    best = np.where(rising, np.minimum(fL, fR), np.maximum(fL, fR))
    for b in flux.breakpoints[axis][1:-1]:
        fb = float(np.asarray(fi(np.array([b])))[0])
        inside = (lo < b) & (b < hi)
        best = np.where(inside & rising, np.minimum(best, fb), best)
        best = np.where(inside & ~rising, np.maximum(best, fb), best)
    return best


def _divergence(face_flux: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    return np.diff(face_flux, axis=axis) / grid.dx


def _laplacian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    p = grid.pad(values)
    core = (slice(1, -1),) * grid.dimension
    out = -2.0 * grid.dimension * p[core]
    for i in range(grid.dimension):
        out = out + _shifted(p, i, 2, None) + _shifted(p, i, None, -2)
    return out / grid.dx ** 2


class _Operator:
    """Frozen discretisation of one problem on one grid."""

    def __init__(self, model: ModelSpec, family, eps: float, grid: GridSpec, scheme: str):
        self.flux, self.diffusion, self.source, self.mu = _select(model, family)
        if scheme == "godunov":
            self.flux, self.source, self.mu = model.flux, model.source, 0.0
        self.eps = float(eps)
        self.grid = grid
        self.scheme = scheme
        self.zero_flux = self.flux.lipschitz_const == 0.0
        self.numerical_flux = _godunov if scheme == "godunov" else _engquist_osher

    def B(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.diffusion.A(u), dtype=float) + self.mu * u

    def transport(self, u: np.ndarray) -> np.ndarray:
        if self.zero_flux:
            return np.zeros_like(u)
        p = self.grid.pad(u)
        out = np.zeros_like(u)
        for i in range(self.grid.dimension):
            out -= _divergence(self.numerical_flux(self.flux, i, p), i, self.grid)
        return out

    def g(self, t: float, u: np.ndarray) -> np.ndarray:
        if self.source.is_zero:
            return np.zeros_like(u)
        return self.source.eval(t, self.grid.coords, u)

    def advance(self, u: np.ndarray, t: float, dt: float) -> tuple[np.ndarray, float]:
        """One step; returns the new state and the step's dissipation increment."""
        if self.scheme == "godunov":
            star = u + dt * self.transport(u)
            return star + dt * self.g(t, star), 0.0
        rhs = self.transport(u) + self.g(t, u)
        Bu = None
        if self.eps > 0:
            Bu = self.B(u)
            rhs = rhs + self.eps * _laplacian(Bu, self.grid)
        new = u + dt * rhs
        return new, (self.dissipation(u, new, Bu, dt) if Bu is not None else 0.0)

    def dissipation(self, u, new, Bu, dt) -> float:
        ubar = 0.5 * (u + new)
        grid = self.grid
        total = 0.0
        for i in range(grid.dimension):
            total += float(np.sum(axis_differences(ubar, grid, i) * axis_differences(Bu, grid, i)))
        return dt * total * grid.dx ** (grid.dimension - 2)


def step(state: GridFunction, model: ModelSpec, family, eps: float, dt: float) -> GridFunction:
    """One explicit Engquist-Osher step of size ``dt`` from ``state``.

    ``family=None`` runs the unregularised data with ``mu = 0``.
    """
    op = _Operator(model, family, eps, state.grid, "engquist-osher")
    new, _ = op.advance(state.values, state.t, dt)
    return GridFunction(new, state.grid, state.t + dt)


def _output_schedule(T: float, output_times: Sequence[float] | None) -> list[float]:
    if not T > 0:
        raise ValueError("T must be positive")
    times = sorted(set(float(t) for t in (() if output_times is None else output_times) if t > 0))
    if times and times[-1] > T * (1 + 1e-14):
        raise ValueError("output times must not exceed T")
    if not times or times[-1] < T:
        times.append(float(T))
    return times


def _boundary_touched(u: np.ndarray, grid: GridSpec) -> bool:
    if grid.boundary == "periodic":
        return False
    k = BOUNDARY_CELLS
    for axis in range(grid.dimension):
        for band in (np.take(u, range(k), axis=axis), np.take(u, range(u.shape[axis] - k, u.shape[axis]), axis=axis)):
            spread = np.ptp(band, axis=axis)
            if np.max(spread) > 1e-9:
                return True
    return False


def _integrate(op: _Operator, u0: np.ndarray, T: float, output_times, dt: float,
               every_step: bool, check_stability: bool, eps: float, mu: float) -> Trajectory:
    grid = op.grid
    schedule = _output_schedule(T, output_times)
    log = StepperLog()
    u = np.array(u0, dtype=float)
    snaps = [GridFunction(u.copy(), grid, 0.0)]
    t = 0.0
    n = 0
    warned = False
    for t_out in schedule:
        while t < t_out:
            last = t + dt >= t_out * (1 - 1e-13)
            h = t_out - t if last else dt
            new, diss = op.advance(u, t, h)
            umin, umax = float(new.min()), float(new.max())
            if check_stability and (umin < -OVERSHOOT_TOL or umax > 1 + OVERSHOOT_TOL
                                    or not np.isfinite(umin + umax)):
                raise InstabilityError(n, t, umin, umax)
            log.dt.append(h)
            log.t.append(t)
            log.umin.append(umin)
            log.umax.append(umax)
            log.dissipation.append(diss)
            u = new
            t = t_out if last else t + h
            n += 1
            if every_step and t < t_out:
                snaps.append(GridFunction(u.copy(), grid, t))
        snaps.append(GridFunction(u.copy(), grid, t_out))
        if not warned and _boundary_touched(u, grid):
            warnings.warn(f"solution non-constant within {BOUNDARY_CELLS} cells of the outflow "
                          f"boundary at t={t_out:.6g}", BoundaryContaminationWarning, stacklevel=3)
            warned = True
    return Trajectory(snaps, log, eps=eps, mu=mu, every_step=every_step, scheme=op.scheme)


def _initial_values(model: ModelSpec, family, grid: GridSpec, initial) -> np.ndarray:
    if initial is not None:
        values = initial.values if hasattr(initial, "values") else np.asarray(initial, dtype=float)
    elif family is not None:
        values = family.u0_mu.values
    else:
        values = model.initial.discretize(grid).values
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError("initial values do not match the grid")
    return values


def solve(model: ModelSpec, family, eps: float, grid: GridSpec, T: float,
          output_times: Sequence[float] | None = None, *, cfl: float = DEFAULT_CFL,
          dt: float | None = None, every_step: bool = False, check_stability: bool = True,
          initial=None) -> Trajectory:
    """Viscous regularised solve on ``grid`` up to ``T``.

    The datum is ``initial`` if given, else ``family.u0_mu``, else the cell
    averages of ``model.initial``.  ``every_step`` keeps all intermediate states
    (needed by the space-time residuals and production measures).  An explicit
    ``dt`` bypasses :func:`stable_dt`.
    """
    if family is not None and family.grid != grid:
        raise ValueError("family was built on a different grid")
    mu = 0.0 if family is None else family.mu
    h = stable_dt(model, eps, mu, grid, cfl) if dt is None else float(dt)
    op = _Operator(model, family, eps, grid, "engquist-osher")
    return _integrate(op, _initial_values(model, family, grid, initial), T, output_times, h,
                      every_step, check_stability, eps, mu)


def solve_reference(model: ModelSpec, grid_fine: GridSpec, T: float,
                    output_times: Sequence[float] | None = None, *, cfl: float = REFERENCE_CFL,
                    every_step: bool = False, study_grid: GridSpec | None = None,
                    initial=None, dt: float | None = None) -> Trajectory:
    """Inviscid Godunov reference; ``study_grid`` (if given) must be >= 4x coarser."""
    if study_grid is not None and grid_fine.cells_per_axis < 4 * study_grid.cells_per_axis:
        raise ValueError("reference grid must be at least 4x finer than the study grid")
    h = reference_dt(model, grid_fine, cfl) if dt is None else float(dt)
    op = _Operator(model, None, 0.0, grid_fine, "godunov")
    return _integrate(op, _initial_values(model, None, grid_fine, initial), T, output_times, h,
                      every_step, True, 0.0, 0.0)


def restrict(values: np.ndarray, fine: GridSpec, coarse: GridSpec) -> np.ndarray:
    """Cell-average restriction from ``fine`` onto a nested ``coarse`` grid."""
    r, rem = divmod(fine.cells_per_axis, coarse.cells_per_axis)
    if rem or fine.half_width != coarse.half_width or fine.dimension != coarse.dimension:
        raise ValueError("grids are not nested")
    n = coarse.cells_per_axis
    if fine.dimension == 1:
        return values.reshape(n, r).mean(axis=1)
    return values.reshape(n, r, n, r).mean(axis=(1, 3))
