"""Problem data ``(f, A, g, u0)`` and validation of the standing hypotheses.

The hypotheses are labelled H1 ... H5:

* H1  ``f`` Lipschitz on [0, 1] with ``f(0) = 0``;
* H2  ``A`` Lipschitz with ``A' = a >= 0``;
* H3  ``g`` satisfies ``g(., ., 1) <= 0 <= g(., ., 0)``, ``|g_u| <= kappa`` and
  ``sup_{t,u} max(||g||_1, |D_x g|, ||g_t||_1) <= kappa``;
* H4  ``0 <= u0 <= 1`` and ``u0`` integrable;
* H5  ``u -> f(u) . xi`` is not affine on any nontrivial interval (needed only
  for the vanishing-viscosity limit).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from degvisc.grid import GridSpec, l1_norm, l2_norm, second_variation, total_variation

F0_TOL = 1e-12
H5_TOL = 1e-10
H5_DEPTH = 4


class InvalidModelError(ValueError):
    """Raised when model callables are undefined or inconsistent."""


def _check_finite(values, what: str, inputs) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        flat = np.broadcast_to(np.asarray(inputs, dtype=float), values.shape)
        raise InvalidModelError(f"{what} returned {values[tuple(idx)]} at input {flat[tuple(idx)]!r}")
    return values


def monotone_breakpoints(func: Callable, n: int = 1025) -> tuple[float, ...]:
    """Points ``0 = b_0 < ... < b_m = 1`` such that ``func`` is monotone on each piece.

    Interior extrema are located on a sample and polished with a bounded
    scalar minimisation.
    """
    u = np.linspace(0.0, 1.0, n)
    v = np.asarray(func(u), dtype=float)
    d = np.diff(v)
    scale = max(1.0, float(np.max(np.abs(v))))
    s = np.sign(np.where(np.abs(d) > 1e-15 * scale, d, 0.0))
    # carry the last nonzero sign across flat stretches
    last = 0.0
    for i in range(s.size):
        if s[i] == 0.0:
            s[i] = last
        else:
            last = s[i]
    points = [0.0]
    for i in range(1, s.size):
        if s[i] != 0.0 and s[i - 1] != 0.0 and s[i] != s[i - 1]:
            lo, hi = u[max(i - 1, 0)], u[min(i + 1, n - 1)]
            sgn = 1.0 if s[i - 1] > 0 else -1.0  # maximum if increasing before
            res = optimize.minimize_scalar(lambda x: -sgn * float(func(np.array([x]))[0]),
                                           bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-13})
            b = float(res.x)
            if points[-1] < b < 1.0:
                points.append(b)
    points.append(1.0)
    return tuple(points)


def split_monotone(func: Callable, breakpoints: Sequence[float], u: np.ndarray):
    """Increasing and decreasing parts ``(f_plus, f_minus)`` with ``f_plus + f_minus = f - f(0)``.

    One evaluation of ``func``: on the piece containing ``u`` the active part
    is ``f(u) - f(b_j)``, below it the completed rises are accumulated.
    """
    bp = np.asarray(breakpoints, dtype=float)
    fb = np.asarray(func(bp), dtype=float)
    uc = np.clip(u, 0.0, 1.0)
    fu = np.asarray(func(uc), dtype=float)
    rise = np.diff(fb)
    inc = rise >= 0
    below = np.concatenate([[0.0], np.cumsum(np.where(inc, rise, 0.0))])
    j = np.clip(np.searchsorted(bp, uc, side="right") - 1, 0, bp.size - 2)
    plus = below[j] + np.where(inc[j], fu - fb[j], 0.0)
    return plus, fu - fb[0] - plus


@dataclass(frozen=True)
class FluxSpec:
    """Convective flux ``f : [0, 1] -> R^N`` as per-axis component callables."""

    components: tuple[Callable, ...]
    derivatives: tuple[Callable, ...]
    lipschitz_const: float
    breakpoints: tuple[tuple[float, ...], ...] | None = None
    name: str = ""

    def __post_init__(self):
        if len(self.components) not in (1, 2) or len(self.derivatives) != len(self.components):
            raise InvalidModelError("flux needs one component and one derivative per axis")
        if self.lipschitz_const < 0:
            raise InvalidModelError("flux Lipschitz constant must be nonnegative")
        for i, fi in enumerate(self.components):
            f0 = float(np.asarray(fi(np.array([0.0])), dtype=float)[0])
            if not np.isfinite(f0) or abs(f0) > F0_TOL:
                raise InvalidModelError(f"flux component {i} has f(0) = {f0!r}, must vanish")
        if self.breakpoints is None:
            object.__setattr__(self, "breakpoints",
                               tuple(monotone_breakpoints(fi) for fi in self.components))

    @property
    def dimension(self) -> int:
        return len(self.components)

    def eval(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(fi(u), dtype=float), u.shape)
                         for fi in self.components])

    def deriv(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(di(u), dtype=float), u.shape)
                         for di in self.derivatives])

    def split(self, axis: int, u: np.ndarray):
        return split_monotone(self.components[axis], self.breakpoints[axis], u)


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion ``A`` with derivative ``a = A' >= 0``."""

    A: Callable
    a: Callable
    lipschitz_const: float
    name: str = ""

    @property
    def a_max(self) -> float:
        u = np.linspace(0.0, 1.0, 2001)
        return float(np.max(np.asarray(self.a(u), dtype=float)))


def sharp_indicator(intervals: Sequence[tuple[float, float]]) -> Callable:
    def chi(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b in intervals:
            out = np.where((x > a) & (x < b), 1.0, out)
        return out
    return chi


@dataclass(frozen=True)
class SourceSpec:
    """Source ``g(t, x, u)``.

    ``structure`` is ``"zero"``, ``"indicator_ramp"`` (``g = chi(x) h(t, u)`` in
    one dimension, ``chi`` the indicator of ``intervals`` or a smoothed version of
    it) or ``"general"`` (``func(t, coords, u)``).
    """

    kappa: float = 0.0
    structure: str = "zero"
    intervals: tuple[tuple[float, float], ...] = ()
    profile: Callable | None = None
    func: Callable | None = None
    indicator: Callable | None = None
    extent: float = 10.0
    name: str = ""

    def __post_init__(self):
        if self.structure not in ("zero", "indicator_ramp", "general"):
            raise InvalidModelError(f"unknown source structure {self.structure!r}")
        if self.kappa < 0:
            raise InvalidModelError("kappa must be nonnegative")
        if self.structure == "indicator_ramp":
            if self.profile is None or not self.intervals:
                raise InvalidModelError("indicator_ramp needs intervals and a profile h(t, u)")
            if self.indicator is None:
                object.__setattr__(self, "indicator", sharp_indicator(self.intervals))
        if self.structure == "general" and self.func is None:
            raise InvalidModelError("general source needs func(t, coords, u)")

    @property
    def is_zero(self) -> bool:
        return self.structure == "zero"

    def eval(self, t: float, coords: tuple[np.ndarray, ...], u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.structure == "zero":
            return np.zeros_like(u)
        if self.structure == "indicator_ramp":
            return np.asarray(self.indicator(coords[0]), dtype=float) * np.asarray(self.profile(t, u), dtype=float)
        return np.broadcast_to(np.asarray(self.func(t, coords, u), dtype=float), u.shape)


@dataclass(frozen=True)
class InitialDatum:
    """Initial datum ``u0`` given pointwise on coordinate tuples."""

    sample: Callable
    support_radius: float = np.inf
    name: str = ""

    def discretize(self, grid: GridSpec) -> "GridDatum":
        return GridDatum.from_values(grid.cell_averages(self.sample), grid)


@dataclass(frozen=True)
class GridDatum:
    """Cell averages of an initial datum together with their norms."""

    values: np.ndarray
    grid: GridSpec
    l1_norm: float
    l2_norm: float
    tv: tuple[float, ...]
    second_variation: float

    @classmethod
    def from_values(cls, values: np.ndarray, grid: GridSpec) -> "GridDatum":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("datum values do not match the grid")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise InvalidModelError("initial datum must take values in [0, 1]")
        values.setflags(write=False)
        return cls(values, grid, l1_norm(values, grid), l2_norm(values, grid),
                   total_variation(values, grid), second_variation(values, grid))

    @property
    def tv_total(self) -> float:
        """Sum of the per-axis variations (bounds the isotropic one)."""
        return float(sum(self.tv))


@dataclass
class HypothesisRecord:
    hypothesis: str
    passed: bool
    evidence: list[str] = field(default_factory=list)
    witnesses: list = field(default_factory=list)


@dataclass
class HypothesisReport:
    records: dict[str, HypothesisRecord]
    observed_kappa: dict[str, float] = field(default_factory=dict)

    def passed(self, hypothesis: str) -> bool:
        return self.records[hypothesis].passed

    def all_passed(self, hypotheses: Sequence[str] = ("H1", "H2", "H3", "H4", "H5")) -> bool:
        return all(self.records[h].passed for h in hypotheses)

    def summary(self) -> dict[str, bool]:
        return {k: r.passed for k, r in self.records.items()}


@dataclass(frozen=True)
class ModelSpec:
    flux: FluxSpec
    diffusion: DiffusionSpec
    source: SourceSpec
    initial: InitialDatum
    hypothesis_report: HypothesisReport | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.flux.dimension

    @property
    def kappa(self) -> float:
        return self.source.kappa

    def with_initial(self, initial: InitialDatum) -> "ModelSpec":
        return dataclasses.replace(self, initial=initial)

    def validated(self, samples: int = 65) -> "ModelSpec":
        return dataclasses.replace(self, hypothesis_report=validate_hypotheses(self, samples))


# ---------------------------------------------------------------------------
# hypothesis checks

def _h1(model: ModelSpec, u: np.ndarray) -> HypothesisRecord:
    f = _check_finite(model.flux.eval(u), "flux", u[None, :])
    _check_finite(model.flux.deriv(u), "flux derivative", u[None, :])
    rec = HypothesisRecord("H1", True)
    f0 = np.abs(f[:, 0]).max()
    rec.evidence.append(f"|f(0)| = {f0:.3e}")
    if f0 > F0_TOL:
        rec.passed = False
    quot = np.sqrt(np.sum(np.diff(f, axis=1) ** 2, axis=0)) / np.diff(u)
    lip = float(quot.max())
    rec.evidence.append(f"max difference quotient = {lip:.6g} (declared L_f = {model.flux.lipschitz_const:.6g})")
    if lip > model.flux.lipschitz_const * (1 + 1e-9) + 1e-12:
        rec.passed = False
    return rec


def _h2(model: ModelSpec, u: np.ndarray) -> HypothesisRecord:
    d = model.diffusion
    A = _check_finite(d.A(u), "diffusion A", u)
    a = _check_finite(d.a(u), "diffusivity a", u)
    rec = HypothesisRecord("H2", True)
    rec.evidence.append(f"min a = {a.min():.3e}")
    if a.min() < -1e-14:
        rec.passed = False
    dA = np.diff(A)
    if dA.min() < -1e-14:
        rec.passed = False
        rec.evidence.append(f"A decreases by {-dA.min():.3e}")
    lip = float((np.abs(dA) / np.diff(u)).max())
    rec.evidence.append(f"max quotient of A = {lip:.6g} (declared L_A = {d.lipschitz_const:.6g})")
    if lip > d.lipschitz_const * (1 + 1e-9) + 1e-12:
        rec.passed = False
    worst = 0.0
    nodes, weights = np.polynomial.legendre.leggauss(8)
    for uk in np.linspace(0.0, 1.0, 9)[1:]:
        edges = np.linspace(0.0, uk, 129)
        half = 0.5 * np.diff(edges)
        s = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * nodes
        integral = float(np.sum(np.asarray(d.a(s), dtype=float) * weights * half[:, None]))
        diff = float(np.asarray(d.A(np.array([uk])))[0] - np.asarray(d.A(np.array([0.0])))[0])
        worst = max(worst, abs(diff - integral))
    rec.evidence.append(f"max |A(u) - A(0) - int a| = {worst:.3e}")
    if worst > 1e-7 * (1.0 + d.lipschitz_const):
        rec.passed = False
    return rec


def _source_points(model: ModelSpec, n_x: int):
    src = model.source
    N = model.dimension
    if N == 1:
        x = np.linspace(-src.extent, src.extent, n_x)
        return (x,), 2 * src.extent / (n_x - 1)
    n = max(int(np.sqrt(n_x)), 41)
    x = np.linspace(-src.extent, src.extent, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    h = 2 * src.extent / (n - 1)
    return (X, Y), h * h


def _h3(model: ModelSpec, u: np.ndarray, T: float) -> tuple[HypothesisRecord, dict]:
    src = model.source
    rec = HypothesisRecord("H3", True)
    observed: dict[str, float] = {}
    if src.is_zero:
        rec.evidence.append("g = 0")
        return rec, {"g_u": 0.0, "l1": 0.0, "tv_x": 0.0, "g_t": 0.0}
    coords, w = _source_points(model, 4001)
    times = np.linspace(0.0, T, 5)
    sign_gap = 0.0
    for t in times:
        g1 = _check_finite(src.eval(t, coords, np.ones_like(coords[0])), "source at u=1", coords[0])
        g0 = _check_finite(src.eval(t, coords, np.zeros_like(coords[0])), "source at u=0", coords[0])
        sign_gap = max(sign_gap, float(g1.max()), float(-g0.min()))
    rec.evidence.append(f"sign conditions: max violation {max(sign_gap, 0.0):.3e}")
    if sign_gap > 1e-14:
        rec.passed = False
    # |g_u| by difference quotients
    gu = 0.0
    l1 = 0.0
    for t in times:
        vals = np.stack([src.eval(t, coords, np.full_like(coords[0], uk)) for uk in u])
        vals = _check_finite(vals, "source", u[:, None] if model.dimension == 1 else u[:, None, None])
        quot = np.abs(np.diff(vals, axis=0)) / np.diff(u).reshape((-1,) + (1,) * model.dimension)
        gu = max(gu, float(quot.max()))
        l1 = max(l1, float(np.max(np.sum(np.abs(vals), axis=tuple(range(1, vals.ndim))) * w)))
    observed["g_u"] = gu
    observed["l1"] = l1
    # time derivative
    gt = 0.0
    dt = T / 64
    tt = np.linspace(0.0, T, 65)
    for uk in u[:: max(1, len(u) // 9)]:
        vals = np.stack([src.eval(t, coords, np.full_like(coords[0], uk)) for t in tt])
        gt = max(gt, float(np.max(np.sum(np.abs(np.diff(vals, axis=0)), axis=tuple(range(1, vals.ndim)))) * w / dt))
    observed["g_t"] = gt
    if src.structure == "indicator_ramp":
        hmax = max(float(np.max(np.abs(src.profile(t, u)))) for t in times)
        tv = 2.0 * hmax * len(src.intervals)
        observed["tv_x"] = tv
        rec.evidence.append(f"|D_x g| = 2 sup|h| per ramp = {tv:.6g}")
    else:
        observed["tv_x"] = float("nan")
        rec.evidence.append("|D_x g| <= kappa declared, not verified")
    for key in ("g_u", "l1", "tv_x", "g_t"):
        val = observed[key]
        if np.isfinite(val) and val > src.kappa * (1 + 1e-6) + 1e-12:
            rec.passed = False
            rec.evidence.append(f"{key} = {val:.6g} exceeds kappa = {src.kappa:.6g}")
    rec.evidence.append("observed " + ", ".join(f"{k}={v:.6g}" for k, v in observed.items()))
    return rec, observed


def _h4(model: ModelSpec) -> HypothesisRecord:
    rec = HypothesisRecord("H4", True)
    R = model.initial.support_radius
    span = (R + 1.0) if np.isfinite(R) else 10.0
    x = np.linspace(-span, span, 4001)
    if model.dimension == 1:
        coords = (x,)
    else:
        xs = x[::20]
        coords = tuple(np.meshgrid(xs, xs, indexing="ij"))
    v = _check_finite(np.broadcast_to(model.initial.sample(coords), coords[0].shape),
                      "initial datum", coords[0])
    rec.evidence.append(f"range [{v.min():.6g}, {v.max():.6g}]")
    if v.min() < 0.0 or v.max() > 1.0:
        rec.passed = False
    if np.isfinite(R):
        rec.evidence.append(f"compact support, radius {R:.6g}")
    else:
        rec.evidence.append("unbounded support: integrability holds on the truncated box only")
    return rec


def _dyadic(depth: int):
    n = 2 ** depth
    return [(k / n, (k + 1) / n) for k in range(n)]


def _directions(N: int) -> list[np.ndarray]:
    if N == 1:
        return [np.array([1.0]), np.array([-1.0])]
    ang = np.arange(8) * np.pi / 4
    return [np.array([np.cos(a), np.sin(a)]) for a in ang]


def _affine_on(func, a: float, b: float, samples: int) -> bool:
    u = np.linspace(a, b, samples)
    p = func(u)
    return bool(np.abs(p[2:] - 2.0 * p[1:-1] + p[:-2]).max() <= H5_TOL)


def _merge(intervals, func, samples: int):
    """Join adjacent affine pieces whose union is still affine."""
    out = []
    for a, b in sorted(intervals):
        if out and abs(out[-1][1] - a) < 1e-15 and _affine_on(func, out[-1][0], b, samples):
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def _h5(model: ModelSpec, samples: int) -> HypothesisRecord:
    rec = HypothesisRecord("H5", True)
    for xi in _directions(model.dimension):
        proj = lambda u, xi=xi: np.tensordot(xi, model.flux.eval(u), axes=1)  # noqa: E731
        failing = [(a, b) for a, b in _dyadic(H5_DEPTH) if _affine_on(proj, a, b, samples)]
        for iv in _merge(failing, proj, samples):
            rec.passed = False
            rec.witnesses.append((tuple(float(c) for c in xi), iv))
    if rec.passed:
        rec.evidence.append(f"second differences exceed {H5_TOL:g} on all {2 ** H5_DEPTH} dyadic "
                            f"subintervals for {len(_directions(model.dimension))} directions")
    else:
        rec.evidence.append("affine on: " + "; ".join(f"xi={w[0]} on [{w[1][0]:g}, {w[1][1]:g}]"
                                                     for w in rec.witnesses))
    return rec


def validate_hypotheses(model: ModelSpec, samples: int = 65, T: float = 1.0) -> HypothesisReport:
    """Check H1-H5 on deterministic samples; one record per hypothesis."""
    if samples < 3:
        raise ValueError("samples must be >= 3")
    u = np.linspace(0.0, 1.0, max(samples, 3) * 16 + 1)
    records = {"H1": _h1(model, u), "H2": _h2(model, u)}
    h3, observed = _h3(model, np.linspace(0.0, 1.0, max(samples, 3) * 4 + 1), T)
    records["H3"] = h3
    records["H4"] = _h4(model)
    records["H5"] = _h5(model, samples)
    return HypothesisReport(records, observed)
