"""Uniform box grids, cell-average fields and trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

BOUNDARIES = ("outflow", "periodic")

# midpoint sub-samples per axis used to form cell averages of callables
SUBCELLS = {1: 16, 2: 4}


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``cells_per_axis**N`` cells on ``[-L, L]**N``."""

    dimension: int
    half_width: float
    cells_per_axis: int
    boundary: str = "outflow"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if int(self.cells_per_axis) != self.cells_per_axis or self.cells_per_axis < 8:
            raise ValueError(f"cells_per_axis must be an integer >= 8, got {self.cells_per_axis}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dimension

    @cached_property
    def centers(self) -> np.ndarray:
        n = self.cells_per_axis
        return -self.half_width + (np.arange(n) + 0.5) * self.dx

    @cached_property
    def faces(self) -> np.ndarray:
        n = self.cells_per_axis
        return -self.half_width + np.arange(n + 1) * self.dx

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, one full array per axis."""
        if self.dimension == 1:
            return (self.centers,)
        return tuple(np.meshgrid(self.centers, self.centers, indexing="ij"))

    def refined(self, factor: int) -> "GridSpec":
        return GridSpec(self.dimension, self.half_width,
                        self.cells_per_axis * factor, self.boundary)

    def cell_averages(self, func: Callable) -> np.ndarray:
        """Cell averages of ``func(coords)`` by a sub-cell midpoint rule."""
        sub = SUBCELLS[self.dimension]
        n = self.cells_per_axis
        h = self.dx / sub
        fine = -self.half_width + (np.arange(n * sub) + 0.5) * h
        if self.dimension == 1:
            vals = np.asarray(func((fine,)), dtype=float)
            vals = np.broadcast_to(vals, fine.shape)
            return vals.reshape(n, sub).mean(axis=1)
        X, Y = np.meshgrid(fine, fine, indexing="ij")
        vals = np.broadcast_to(np.asarray(func((X, Y)), dtype=float), X.shape)
        return vals.reshape(n, sub, n, sub).mean(axis=(1, 3))

    def window_mask(self, window: Sequence[float]) -> np.ndarray:
        """Cells whose centers lie in the box ``[a, b]**N``."""
        a, b = window
        mask = np.ones(self.shape, dtype=bool)
        for c in self.coords:
            mask &= (c >= a) & (c <= b)
        return mask

    def pad(self, values: np.ndarray, width: int = 1) -> np.ndarray:
        mode = "wrap" if self.boundary == "periodic" else "edge"
        return np.pad(values, width, mode=mode)


# ---------------------------------------------------------------------------
# discrete norms

def l1_norm(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(np.abs(values)) * grid.cell_volume)


def l2_norm(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(values * values) * grid.cell_volume))


def axis_differences(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Face differences along ``axis``; periodic grids include the wrap face."""
    if grid.boundary == "periodic":
        return np.roll(values, -1, axis=axis) - values
    return np.diff(values, axis=axis)


def total_variation(values: np.ndarray, grid: GridSpec) -> tuple[float, ...]:
    """Per-axis discrete total variation, ``sum |Delta_i u| * dx**(N-1)``."""
    w = grid.dx ** (grid.dimension - 1)
    return tuple(float(np.sum(np.abs(axis_differences(values, grid, i))) * w)
                 for i in range(grid.dimension))


def second_variation(values: np.ndarray, grid: GridSpec) -> float:
    """Discrete ``sum_i ||d_i^2 v||_{L1}``, the BV norm of the gradient."""
    p = grid.pad(values)
    total = 0.0
    core = (slice(1, -1),) * grid.dimension
    for i in range(grid.dimension):
        plus = list(core)
        minus = list(core)
        plus[i] = slice(2, None)
        minus[i] = slice(None, -2)
        d2 = p[tuple(plus)] - 2.0 * p[core] + p[tuple(minus)]
        total += float(np.sum(np.abs(d2)))
    return total * grid.dx ** (grid.dimension - 2)


def max_lipschitz(values: np.ndarray, grid: GridSpec, mask: np.ndarray | None = None) -> float:
    """Largest face difference quotient, optionally restricted to ``mask`` cells."""
    best = 0.0
    for i in range(grid.dimension):
        d = np.abs(axis_differences(values, grid, i)) / grid.dx
        if mask is not None:
            if grid.boundary == "periodic":
                m = mask & np.roll(mask, -1, axis=i)
            else:
                sl_lo = [slice(None)] * grid.dimension
                sl_hi = [slice(None)] * grid.dimension
                sl_lo[i] = slice(None, -1)
                sl_hi[i] = slice(1, None)
                m = mask[tuple(sl_lo)] & mask[tuple(sl_hi)]
            d = d[m]
        if d.size:
            best = max(best, float(d.max()))
    return best


@dataclass
class GridFunction:
    """Cell averages of a field on ``grid`` at time ``t``."""

    values: np.ndarray
    grid: GridSpec
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction values must be finite")

    def l1(self) -> float:
        return l1_norm(self.values, self.grid)

    def l2(self) -> float:
        return l2_norm(self.values, self.grid)

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def tv(self) -> tuple[float, ...]:
        return total_variation(self.values, self.grid)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)


@dataclass
class StepperLog:
    """Per-step history kept by the time integrators.

    ``dissipation`` holds, per step, ``dt * sum_faces grad(ubar) . grad(B(u^n)) dx^N``
    where ``ubar`` is the two-level average and ``B = A_mu + mu*id``; with this
    choice the discrete L2 balance of a pure diffusion step is an identity.
    """

    dt: list[float] = field(default_factory=list)
    t: list[float] = field(default_factory=list)
    umin: list[float] = field(default_factory=list)
    umax: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.dt)

    def dissipation_until(self, t: float) -> float:
        """Accumulated dissipation over all steps ending at or before ``t``."""
        ends = np.asarray(self.t) + np.asarray(self.dt)
        d = np.asarray(self.dissipation)
        return float(np.sum(d[ends <= t * (1 + 1e-14) + 1e-300]))


@dataclass
class Trajectory:
    """Time-ordered snapshots of one run plus its stepper log."""

    snapshots: list[GridFunction]
    stepper_log: StepperLog
    eps: float = 0.0
    mu: float = 0.0
    every_step: bool = False
    scheme: str = "engquist-osher"

    def __post_init__(self):
        ts = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def initial(self) -> GridFunction:
        return self.snapshots[0]

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]

    def sampled(self, times: Sequence[float]) -> "Trajectory":
        """The initial snapshot plus those at ``times``, sharing this run's log."""
        snaps = [self.snapshots[0]] + [self.at(t) for t in times if t > 0]
        return Trajectory(snaps, self.stepper_log, self.eps, self.mu, False, self.scheme)

    def at(self, t: float) -> GridFunction:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.snapshots[i]


def trajectory_from_field(field: Callable, grid: GridSpec, times: Sequence[float]) -> Trajectory:
    """Trajectory of cell averages of a closed-form ``field(t, coords)``."""
    snaps = [GridFunction(grid.cell_averages(lambda c, t=t: field(t, c)), grid, float(t))
             for t in times]
    return Trajectory(snaps, StepperLog(), every_step=True, scheme="closed-form")
