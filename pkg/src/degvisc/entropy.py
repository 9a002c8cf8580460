"""Entropy pairs, weak and entropy residuals, and the discrete entropy production.

Residuals treat the discrete solution as piecewise constant on cells and
between consecutive snapshots.  Test functions are separable bumps
``phi = T(t) prod_i S_i(x_i)``, so space integrals of ``phi``, ``grad phi`` and
``lap phi`` against cell-constant data reduce to cell integrals of ``S`` and
face values of ``S`` and ``S'``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicHermiteSpline

from degvisc.grid import GridSpec, Trajectory, axis_differences, l2_norm
from degvisc.model import DiffusionSpec, FluxSpec, ModelSpec
from degvisc.scenarios import bump

DEFAULT_DELTA = 0.01
DEFAULT_KS = (0.1, 0.3, 0.5, 0.7, 0.9)
_GL_NODES, _GL_WEIGHTS = leggauss(10)


# ---------------------------------------------------------------------------
# entropy pairs

@dataclass(frozen=True)
class EntropyPair:
    """Convex ``eta`` with entropy flux ``q' = eta' f'`` and diffusion ``calA' = eta' a``."""

    eta: Callable
    eta_prime: Callable
    eta_second: Callable
    q_components: tuple[Callable, ...]
    calA: Callable
    C2: float
    name: str = ""
    k: float | None = None
    delta: float | None = None

    def q(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([np.asarray(qi(u), dtype=float) for qi in self.q_components])

    def eta_prime_sup(self) -> float:
        return float(np.max(np.abs(self.eta_prime(np.linspace(0.0, 1.0, 2001)))))


def _mesh(k: float | None, delta: float | None, extra: Sequence[float]) -> np.ndarray:
    """Nodes on [0, 1], graded towards ``k`` at scale ``delta``."""
    pts = [np.linspace(0.0, 1.0, 257), np.asarray(extra, dtype=float)]
    if k is not None:
        r = delta * np.concatenate([np.linspace(0.0, 8.0, 129), 8.0 * 1.08 ** np.arange(1, 120)])
        r = r[r < 1.0]
        pts += [k - r, k + r]
    m = np.unique(np.clip(np.concatenate(pts), 0.0, 1.0))
    return m[np.concatenate([[True], np.diff(m) > 1e-13])]


def _primitive(integrand: Callable, mesh: np.ndarray) -> np.ndarray:
    """Cumulative Gauss-Legendre integral of ``integrand`` from 0 at each mesh node."""
    a, b = mesh[:-1], mesh[1:]
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES
    panel = np.sum(np.asarray(integrand(s), dtype=float) * _GL_WEIGHTS, axis=1) * half
    return np.concatenate([[0.0], np.cumsum(panel)])


def _hermite(integrand: Callable, mesh: np.ndarray) -> Callable:
    spline = CubicHermiteSpline(mesh, _primitive(integrand, mesh), np.asarray(integrand(mesh), dtype=float))
    return lambda u: spline(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))


def build_pair(eta: Callable, eta_prime: Callable, eta_second: Callable, C2: float,
               flux: FluxSpec, diffusion: DiffusionSpec, name: str = "",
               k: float | None = None, delta: float | None = None) -> EntropyPair:
    """Pair with ``q`` and ``calA`` from composite quadrature, normalised to vanish at 0."""
    extra = [b for bps in flux.breakpoints for b in bps]
    mesh = _mesh(k, delta, extra)
    qs = tuple(_hermite(lambda s, d=d: eta_prime(s) * d(s), mesh) for d in flux.derivatives)
    calA = _hermite(lambda s: eta_prime(s) * diffusion.a(s), mesh)
    return EntropyPair(eta, eta_prime, eta_second, qs, calA, float(C2), name, k, delta)


def kruzhkov_pair(k: float, delta: float, model: ModelSpec) -> EntropyPair:
    """Smoothed Kruzhkov entropy ``sqrt((u-k)^2 + delta^2) - delta`` with ``C2 = 1/delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if delta > 0.1:
        raise ValueError("delta must not exceed 0.1")
    if not 0.0 <= k <= 1.0:
        raise ValueError("k must lie in [0, 1]")

    def eta(u):
        return np.sqrt((np.asarray(u) - k) ** 2 + delta ** 2) - delta

    def eta_p(u):
        s = np.asarray(u) - k
        return s / np.sqrt(s * s + delta ** 2)

    def eta_pp(u):
        s = np.asarray(u) - k
        return delta ** 2 / (s * s + delta ** 2) ** 1.5

    return build_pair(eta, eta_p, eta_pp, 1.0 / delta, model.flux, model.diffusion,
                      f"kruzhkov(k={k:g}, delta={delta:g})", k, delta)


def quadratic_pair(model: ModelSpec) -> EntropyPair:
    """``eta = u^2/2``."""
    return build_pair(lambda u: 0.5 * np.asarray(u) ** 2, lambda u: np.asarray(u, dtype=float),
                      lambda u: np.ones_like(np.asarray(u, dtype=float)), 1.0,
                      model.flux, model.diffusion, "quadratic")


def affine_pair(model: ModelSpec) -> EntropyPair:
    """``eta = u``: ``q = f`` and ``calA = A - A(0)``, so the entropy residual is the weak one."""
    A0 = float(np.asarray(model.diffusion.A(np.array([0.0])))[0])
    return EntropyPair(lambda u: np.asarray(u, dtype=float),
                       lambda u: np.ones_like(np.asarray(u, dtype=float)),
                       lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                       tuple(model.flux.components),
                       lambda u: np.asarray(model.diffusion.A(u), dtype=float) - A0, 0.0, "affine")


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class TestFunction:
    """Nonnegative separable bump centred at ``(t0, x0)`` with radii ``(rt, rx)``."""

    __test__ = False  # not a pytest class

    t0: float
    x0: tuple[float, ...]
    rt: float
    rx: float
    name: str = ""

    def time(self, t) -> np.ndarray:
        return bump((np.asarray(t, dtype=float) - self.t0) / self.rt)

    def space(self, x, axis: int = 0) -> np.ndarray:
        return bump((np.asarray(x, dtype=float) - self.x0[axis]) / self.rx)

    def space_prime(self, x, axis: int = 0) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.x0[axis]) / self.rx
        inside = np.abs(s) < 1.0
        si = np.where(inside, s, 0.0)
        d = -2.0 * si / (1.0 - si * si) ** 2 * bump(si)
        return np.where(inside, d, 0.0) / self.rx

    def __call__(self, t, coords) -> np.ndarray:
        out = np.asarray(self.time(t), dtype=float)
        for i, x in enumerate(coords):
            out = out * self.space(x, i)
        return out

    def check_support(self, grid: GridSpec, t_end: float):
        for c in self.x0:
            if abs(c) + self.rx >= grid.half_width:
                raise ValueError(f"test function {self.name or self} leaves the computational box")
        if self.t0 + self.rt > t_end * (1 + 1e-12):
            raise ValueError(f"test function {self.name or self} is not supported in [0, {t_end:g})")

    # cell integrals
    def _cell_space(self, grid: GridSpec, axis: int) -> np.ndarray:
        a, b = grid.faces[:-1], grid.faces[1:]
        half = 0.5 * (b - a)
        s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES
        return np.sum(self.space(s, axis) * _GL_WEIGHTS, axis=1) * half

    def _time_integrals(self, times: np.ndarray):
        """``T(t_{m+1}) - T(t_m)`` and ``int T`` over each snapshot interval."""
        Tv = self.time(times)
        a, b = times[:-1], times[1:]
        half = 0.5 * (b - a)
        s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES
        ints = np.sum(self.time(s) * _GL_WEIGHTS, axis=1) * half
        for m in np.flatnonzero(b - a > self.rt / 8):
            pieces = int(np.ceil((b[m] - a[m]) / (self.rt / 8)))
            edges = np.linspace(a[m], b[m], pieces + 1)
            h = 0.5 * np.diff(edges)
            z = (0.5 * (edges[1:] + edges[:-1]))[:, None] + h[:, None] * _GL_NODES
            ints[m] = float(np.sum(self.time(z) * _GL_WEIGHTS * h[:, None]))
        return np.diff(Tv), ints, Tv[0]


def standard_battery(grid: GridSpec, T: float = 1.0, t_fractions: Sequence[float] = (0.0, 0.5),
                     rt_fraction: float = 0.4, centers: Sequence[float] = (-0.25, 0.0, 0.25),
                     radii: Sequence[float] = (0.25, 0.5)) -> list[TestFunction]:
    """The fixed 12-bump battery: 3 centres x 2 radii x 2 time centres.

    Time centres and the time radius are fractions of ``T``.
    """
    out = []
    pad = (0.0,) * (grid.dimension - 1)
    rt = rt_fraction * T
    for f in t_fractions:
        t0 = f * T
        for r in radii:
            for c in centers:
                out.append(TestFunction(float(t0), (float(c),) + pad, rt, float(r),
                                        f"phi(t0={t0:g},x0={c:g},r={r:g})"))
    return out


# ---------------------------------------------------------------------------
# residuals

def _space_weights(phi: TestFunction, grid: GridSpec):
    """Per-cell weights for ``phi``, ``d_i phi`` and ``lap phi`` (space part only)."""
    N = grid.dimension
    cells = [phi._cell_space(grid, i) for i in range(N)]
    grads1 = [np.diff(phi.space(grid.faces, i)) for i in range(N)]
    laps1 = [np.diff(phi.space_prime(grid.faces, i)) for i in range(N)]

    def outer(factors):
        out = factors[0]
        for f in factors[1:]:
            out = np.multiply.outer(out, f)
        return out

    mass = outer(cells)
    grad, lap = [], np.zeros(grid.shape)
    for i in range(N):
        g = list(cells)
        g[i] = grads1[i]
        grad.append(outer(g))
        l = list(cells)
        l[i] = laps1[i]
        lap = lap + outer(l)
    return mass, grad, lap


@dataclass
class _Fields:
    """Stepwise nonlinear fields of one trajectory (rows = snapshot intervals)."""

    density0: np.ndarray
    density: np.ndarray
    flux: np.ndarray
    diffusion: np.ndarray | None
    source: np.ndarray | None


def _stack(traj: Trajectory) -> np.ndarray:
    return np.stack([s.values for s in traj.snapshots[:-1]])


def _fields(traj: Trajectory, model: ModelSpec, eps: float, density: Callable, flux: Callable,
            diffusion: Callable, source_factor: Callable) -> _Fields:
    U = _stack(traj)
    D = np.asarray(density(U), dtype=float)
    src = None
    if not model.source.is_zero:
        times = traj.times
        src = np.stack([np.asarray(source_factor(u), dtype=float)
                        * model.source.eval(0.5 * (times[m] + times[m + 1]), traj.grid.coords, u)
                        for m, u in enumerate(U)])
    return _Fields(np.asarray(density(traj.initial.values), dtype=float), D, np.asarray(flux(U), dtype=float),
                   np.asarray(diffusion(U), dtype=float) if eps else None, src)


def _combine(traj: Trajectory, fields: _Fields, phi: TestFunction, eps: float) -> float:
    grid = traj.grid
    times = traj.times
    phi.check_support(grid, times[-1])
    mass, grad, lap = _space_weights(phi, grid)
    dT, intT, T0 = phi._time_integrals(times)
    axes = tuple(range(1, grid.dimension + 1))
    per_step = dT * np.sum(fields.density * mass, axis=axes)
    space = sum(np.sum(fields.flux[i] * grad[i], axis=axes) for i in range(grid.dimension))
    if fields.diffusion is not None:
        space = space + eps * np.sum(fields.diffusion * lap, axis=axes)
    if fields.source is not None:
        space = space + np.sum(fields.source * mass, axis=axes)
    return float(np.sum(fields.density0 * mass) * T0 + np.sum(per_step + space * intT))


def _weak_fields(traj, model, eps):
    return _fields(traj, model, eps, lambda u: u,
                   model.flux.eval,
                   lambda u: model.diffusion.A(u), lambda u: 1.0)


def _entropy_fields(traj, model, pair, eps):
    return _fields(traj, model, eps, pair.eta, pair.q, pair.calA, pair.eta_prime)


def weak_residual(traj: Trajectory, model: ModelSpec, phi: TestFunction, eps: float) -> float:
    """``int int u phi_t + f(u).grad phi + eps A(u) lap phi + g phi + int u0 phi(0)``."""
    return _combine(traj, _weak_fields(traj, model, eps), phi, eps)


def entropy_residual(traj: Trajectory, model: ModelSpec, pair: EntropyPair,
                     phi: TestFunction, eps: float) -> float:
    """Entropy-inequality functional; nonnegative for entropy solutions and ``phi >= 0``."""
    return _combine(traj, _entropy_fields(traj, model, pair, eps), phi, eps)


@dataclass
class ResidualRow:
    k: float
    delta: float
    phi_id: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual >= -self.tolerance


def residual_battery(traj: Trajectory, model: ModelSpec, eps: float, ks: Sequence[float] = DEFAULT_KS,
                     delta: float = DEFAULT_DELTA, C_tol: float = 1.0,
                     battery: Sequence[TestFunction] | None = None) -> list[ResidualRow]:
    """Kruzhkov residuals over ``ks`` x the battery, with tolerance ``C_tol * dx``."""
    battery = battery if battery is not None else standard_battery(traj.grid, traj.times[-1])
    tol = C_tol * traj.grid.dx
    rows = []
    for k in ks:
        fields = _entropy_fields(traj, model, kruzhkov_pair(k, delta, model), eps)
        for phi in battery:
            rows.append(ResidualRow(k, delta, phi.name, _combine(traj, fields, phi, eps), tol))
    return rows


# ---------------------------------------------------------------------------
# production measure

@dataclass
class EntropyProduction:
    """Discrete ``eps eta''(u) (a_mu(u)+mu) |grad u|^2``.

    ``density`` is the time-integrated production per cell (face contributions
    split evenly between neighbours); ``min_face_density`` is the smallest
    per-step face contribution.
    """

    density: np.ndarray
    total_mass: float
    bound: float
    min_face_density: float

    @property
    def within_bound(self) -> bool:
        return self.total_mass <= self.bound


def _require_steps(traj: Trajectory, family):
    if not traj.every_step:
        raise ValueError("production and decomposition need a trajectory with every_step=True")
    if family is not None and family.grid != traj.grid:
        raise ValueError("family and trajectory live on different grids")


def _to_cells(face_vals: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    out = np.zeros(grid.shape)
    if grid.boundary == "periodic":
        return 0.5 * (face_vals + np.roll(face_vals, 1, axis=axis))
    lo = [slice(None)] * grid.dimension
    hi = [slice(None)] * grid.dimension
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] += 0.5 * face_vals
    out[tuple(hi)] += 0.5 * face_vals
    return out


def _face_mean(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    if grid.boundary == "periodic":
        return 0.5 * (values + np.roll(values, -1, axis=axis))
    lo = [slice(None)] * grid.dimension
    hi = [slice(None)] * grid.dimension
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (values[tuple(lo)] + values[tuple(hi)])


def _diffusion(model: ModelSpec, family):
    if family is None:
        return model.diffusion, 0.0, model.source
    return family.A_mu, family.mu, family.g_mu


def production_measure(traj: Trajectory, family, pair: EntropyPair, eps: float,
                       model: ModelSpec | None = None) -> EntropyProduction:
    """Space-time production of ``pair`` along a stepwise trajectory.

    Per step and face the contribution is
    ``eps dt eta''(ubar) D ubar . D B(u^n) dx^(N-2)`` with ``ubar`` the two-level
    average and ``B = A_mu + mu id``; for ``eta = u^2/2`` the total is exactly
    ``eps`` times the solver's dissipation accumulator.
    """
    _require_steps(traj, family)
    if family is None and model is None:
        raise ValueError("need a family or a model")
    diffusion, mu, _ = _diffusion(model if family is None else family.base, family)
    grid = traj.grid
    N = grid.dimension
    density = np.zeros(grid.shape)
    low = np.inf
    scale = grid.dx ** (N - 2)
    for a, b in zip(traj.snapshots[:-1], traj.snapshots[1:]):
        dt = b.t - a.t
        ubar = 0.5 * (a.values + b.values)
        Bu = np.asarray(diffusion.A(a.values), dtype=float) + mu * a.values
        for i in range(N):
            face = (eps * dt * scale) * np.asarray(pair.eta_second(_face_mean(ubar, grid, i)), dtype=float) \
                * axis_differences(ubar, grid, i) * axis_differences(Bu, grid, i)
            if face.size:
                low = min(low, float(face.min()))
            density += _to_cells(face, grid, i)
    u0 = traj.initial.values
    kappa = (model or family.base).kappa
    T = traj.times[-1]
    bound = pair.C2 * (l2_norm(u0, grid) ** 2 + 2.0 * kappa * T)
    return EntropyProduction(density, float(np.sum(density)), float(bound),
                             low if np.isfinite(low) else 0.0)


class DecompositionNorms(NamedTuple):
    l1: float
    l2: float
    l3: float


def decomposition_norms(traj: Trajectory, family, pair: EntropyPair, eps: float,
                        model: ModelSpec | None = None) -> DecompositionNorms:
    """``(||eps grad calA(u)||_L2, production mass, ||eta'(u) g||_L1)`` over the run."""
    _require_steps(traj, family)
    base = model if family is None else family.base
    _, _, source = _diffusion(base, family)
    grid = traj.grid
    N = grid.dimension
    l1_sq = 0.0
    l3 = 0.0
    for a, b in zip(traj.snapshots[:-1], traj.snapshots[1:]):
        dt = b.t - a.t
        u = a.values
        cA = np.asarray(pair.calA(u), dtype=float)
        for i in range(N):
            l1_sq += dt * float(np.sum((eps * axis_differences(cA, grid, i) / grid.dx) ** 2)) * grid.cell_volume
        if not source.is_zero:
            g = source.eval(a.t, grid.coords, u)
            l3 += dt * float(np.sum(np.abs(np.asarray(pair.eta_prime(u)) * g))) * grid.cell_volume
    l2 = production_measure(traj, family, pair, eps, model=base).total_mass
    return DecompositionNorms(float(np.sqrt(l1_sq)), l2, l3)


def decomposition_bounds(traj: Trajectory, model: ModelSpec, pair: EntropyPair, eps: float) -> DecompositionNorms:
    """A priori bounds matching :func:`decomposition_norms` term by term."""
    grid = traj.grid
    T = traj.times[-1]
    e2 = l2_norm(traj.initial.values, grid) ** 2 + 2.0 * model.kappa * T
    ep = pair.eta_prime_sup()
    a_max = model.diffusion.a_max
    return DecompositionNorms(float(np.sqrt(eps * ep ** 2 * a_max * e2 / 2.0)),
                              pair.C2 * e2, ep * model.kappa * T)
