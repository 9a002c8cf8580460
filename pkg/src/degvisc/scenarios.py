"""Built-in scenario library.

=================  =========================  ===================  ==================
scenario           flux f(u)                  diffusion A(u)       hypotheses passed
=================  =========================  ===================  ==================
greenshields_lwr   vmax u (1 - u)             vmax u^2 / 2         H1-H5
burgers            u^2 / 2                    u                    H1-H5
heat               0                          D u                  H1-H4 (H5 fails)
porous_medium      0                          u^m                  H1-H4 (H5 fails)
lwr_entry          vmax u (1 - u)             vmax u^2 / 2         H1-H5
lwr_exit           vmax u (1 - u)             vmax u^2 / 2         H1-H5
custom_table       piecewise linear table     u^2 / 2 or u         H1-H4 (H5 fails)
=================  =========================  ===================  ==================

The traffic diffusivity is ``a(u) = -u v'(u)`` for the velocity ``v(u) = vmax (1 - u)``,
so it vanishes at the vacuum state ``u = 0``.  The ramp scenarios add
``g = chi_I(x) h(u)`` with ``h = rate (1 - u)`` (entry) or ``h = -rate u`` (exit).

In two dimensions (``dim = 2``) the flux gets the transverse component
``vmax u^3 / 3`` (traffic, Burgers) so that H5 still holds in every direction.
"""

from __future__ import annotations

import csv
from typing import Any

import numpy as np

from degvisc.model import (
    DiffusionSpec, FluxSpec, InitialDatum, InvalidModelError, ModelSpec, SourceSpec)

SCENARIOS = ("greenshields_lwr", "burgers", "heat", "porous_medium",
             "lwr_entry", "lwr_exit", "custom_table")

# parameter -> (default, low, high); None bounds mean unchecked
_DATUM_PARAMS = {
    "datum": None,
    "height": (None, 0.0, 1.0),
    "left": (None, -1e6, 1e6),
    "right": (None, -1e6, 1e6),
    "ul": (None, 0.0, 1.0),
    "ur": (None, 0.0, 1.0),
    "x0": (0.0, -1e6, 1e6),
    "center": (0.0, -1e6, 1e6),
    "width": (None, 1e-6, 1e6),
    "value": (None, 0.0, 1.0),
}

_SCENARIO_PARAMS = {
    "greenshields_lwr": {"vmax": (1.0, 1e-6, 10.0)},
    "burgers": {},
    "heat": {"diffusivity": (1.0, 1e-6, 100.0)},
    "porous_medium": {"m": (2.0, 1.0, 5.0)},
    "lwr_entry": {"vmax": (1.0, 1e-6, 10.0), "rate": (1.0, 1e-6, 100.0), "I": None},
    "lwr_exit": {"vmax": (1.0, 1e-6, 10.0), "rate": (1.0, 1e-6, 100.0), "I": None},
    "custom_table": {"table": None, "table_u": None, "table_f": None, "diffusion": None},
}

_DEFAULT_DATUM = {
    "greenshields_lwr": dict(datum="box", height=0.8, left=-0.5, right=0.5),
    "burgers": dict(datum="box", height=0.8, left=-0.5, right=0.5),
    "heat": dict(datum="bump", height=1.0, center=0.0, width=0.5),
    "porous_medium": dict(datum="bump", height=1.0, center=0.0, width=0.5),
    "lwr_entry": dict(datum="box", height=0.3, left=-1.0, right=0.0),
    "lwr_exit": dict(datum="box", height=0.8, left=-0.5, right=1.0),
    "custom_table": dict(datum="box", height=0.8, left=-0.5, right=0.5),
}

GREENSHIELDS_TABLE = (tuple(np.round(np.linspace(0.0, 1.0, 11), 12)),
                      tuple(np.round(np.linspace(0.0, 1.0, 11) * (1 - np.linspace(0.0, 1.0, 11)), 12)))


def _number(name: str, value: Any, low: float, high: float) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidModelError(f"parameter {name!r} must be a number, got {value!r}") from None
    if not (low <= v <= high):
        raise InvalidModelError(f"parameter {name!r} = {v} outside [{low}, {high}]")
    return v


def bump(s):
    """Standard C-infinity bump ``exp(1 - 1/(1 - s^2))`` (peak value 1)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


_DATUM_KEYS = {"box": {"height", "left", "right"}, "riemann": {"ul", "ur", "x0"},
               "bump": {"height", "center", "width"}, "constant": {"value"}}


def make_datum(dim: int, kind: str = "box", **p) -> InitialDatum:
    """Initial data: ``box``, ``riemann``, ``bump`` or ``constant``."""
    allowed = _DATUM_KEYS.get(kind)
    if allowed is None:
        raise InvalidModelError(f"unknown datum {kind!r}")
    extra = set(p) - allowed
    if extra:
        raise InvalidModelError(f"unknown {kind} datum parameters {sorted(extra)}")
    if kind == "box":
        h = p.get("height", 0.8)
        a, b = p.get("left", -0.5), p.get("right", 0.5)
        if not a < b:
            raise InvalidModelError("box datum needs left < right")

        def sample(c):
            out = np.full(np.shape(c[0]), h)
            for x in c:
                out = np.where((x >= a) & (x < b), out, 0.0)
            return out
        radius = max(abs(a), abs(b)) * (np.sqrt(dim) if dim == 2 else 1.0)
        return InitialDatum(sample, radius, f"box({h:g} on [{a:g},{b:g}])")
    if kind == "riemann":
        ul, ur, x0 = p.get("ul", 0.0), p.get("ur", 1.0), p.get("x0", 0.0)

        def sample(c):
            return np.where(np.asarray(c[0]) < x0, ul, ur).astype(float)
        return InitialDatum(sample, np.inf, f"riemann({ul:g}|{ur:g} at {x0:g})")
    if kind == "bump":
        h, c0, w = p.get("height", 1.0), p.get("center", 0.0), p.get("width", 0.5)

        def sample(c):
            out = np.full(np.shape(c[0]), h)
            for x in c:
                out = out * bump((np.asarray(x) - c0) / w)
            return out
        return InitialDatum(sample, abs(c0) + w * (np.sqrt(dim) if dim == 2 else 1.0),
                            f"bump({h:g}, {c0:g}, {w:g})")
    if kind == "constant":
        v = p.get("value", 0.5)
        return InitialDatum(lambda c: np.full(np.shape(c[0]), v), np.inf, f"constant({v:g})")
    raise InvalidModelError(f"unknown datum {kind!r}")


def _transverse(vmax: float):
    return (lambda u: vmax * np.asarray(u) ** 3 / 3.0, lambda u: vmax * np.asarray(u) ** 2)


def _traffic_flux(vmax: float, dim: int) -> FluxSpec:
    comps = [lambda u: vmax * u * (1.0 - u)]
    ders = [lambda u: vmax * (1.0 - 2.0 * np.asarray(u))]
    bps = [(0.0, 0.5, 1.0)]
    L = vmax
    if dim == 2:
        f2, d2 = _transverse(vmax)
        comps.append(f2)
        ders.append(d2)
        bps.append((0.0, 1.0))
        L = vmax * np.sqrt(2.0)
    return FluxSpec(tuple(comps), tuple(ders), L, tuple(bps), f"greenshields(vmax={vmax:g})")


def _traffic_diffusion(vmax: float) -> DiffusionSpec:
    # a(u) = -u v'(u) with v(u) = vmax (1 - u)
    return DiffusionSpec(lambda u: vmax * np.asarray(u) ** 2 / 2.0,
                         lambda u: vmax * np.asarray(u, dtype=float),
                         vmax, "traffic")


def _zero_flux(dim: int) -> FluxSpec:
    z = lambda u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
    return FluxSpec((z,) * dim, (z,) * dim, 0.0, ((0.0, 1.0),) * dim, "zero")


def _ramp_source(kind: str, rate: float, intervals) -> SourceSpec:
    if kind == "entry":
        h = lambda t, u: rate * (1.0 - np.asarray(u))  # noqa: E731
    else:
        h = lambda t, u: -rate * np.asarray(u)  # noqa: E731
    length = sum(b - a for a, b in intervals)
    kappa = max(rate, rate * length, 2.0 * rate * len(intervals))
    extent = max(max(abs(a), abs(b)) for a, b in intervals) + 1.0
    return SourceSpec(kappa, "indicator_ramp", tuple(intervals), h, extent=extent,
                      name=f"{kind}(rate={rate:g}, I={list(intervals)})")


def _intervals(value) -> tuple[tuple[float, float], ...]:
    if value is None:
        return ((0.0, 0.5),)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or np.any(arr[:, 1] <= arr[:, 0]):
        raise InvalidModelError(f"I must be [a, b] or a list of [a, b] with a < b, got {value!r}")
    order = np.argsort(arr[:, 0])
    arr = arr[order]
    if np.any(arr[1:, 0] < arr[:-1, 1]):
        raise InvalidModelError("ramp intervals must be disjoint")
    return tuple((float(a), float(b)) for a, b in arr)


def read_flux_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column CSV ``u, f(u)``; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise InvalidModelError(f"{path}: bad row {i + 1}: {row!r}") from None
    u, f = np.array(rows).T
    return u, f


def table_flux(u_nodes, f_nodes) -> FluxSpec:
    u_nodes = np.asarray(u_nodes, dtype=float)
    f_nodes = np.asarray(f_nodes, dtype=float)
    if u_nodes.ndim != 1 or u_nodes.size < 2 or u_nodes.size != f_nodes.size:
        raise InvalidModelError("flux table needs matching u and f columns with >= 2 rows")
    if np.any(np.diff(u_nodes) <= 0) or u_nodes[0] != 0.0 or u_nodes[-1] != 1.0:
        raise InvalidModelError("flux table u must increase strictly from 0 to 1")
    slopes = np.diff(f_nodes) / np.diff(u_nodes)

    def f(u):
        return np.interp(u, u_nodes, f_nodes)

    def df(u):
        k = np.clip(np.searchsorted(u_nodes, u, side="right") - 1, 0, slopes.size - 1)
        return slopes[k]
    return FluxSpec((f,), (df,), float(np.abs(slopes).max()), (tuple(u_nodes),), "table")


def builtin_model(name: str, params: dict | None = None, validate: bool = True) -> ModelSpec:
    """Build one of the scenarios in ``SCENARIOS``.

    Datum keys (``datum``, ``height``, ``left``, ``right``, ``ul``, ``ur``,
    ``x0``, ``center``, ``width``, ``value``) and ``dim`` are accepted for every
    scenario; see the module table for the scenario-specific keys.
    """
    if name not in SCENARIOS:
        raise InvalidModelError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    params = dict(params or {})
    allowed = set(_SCENARIO_PARAMS[name]) | set(_DATUM_PARAMS) | {"dim"}
    unknown = set(params) - allowed
    if unknown:
        raise InvalidModelError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    dim = params.get("dim", 1)
    if dim not in (1, 2):
        raise InvalidModelError(f"parameter 'dim' must be 1 or 2, got {dim!r}")
    if dim == 2 and name in ("lwr_entry", "lwr_exit", "custom_table"):
        raise InvalidModelError(f"scenario {name} is one-dimensional")

    spec = _SCENARIO_PARAMS[name]

    def num(key):
        default, lo, hi = spec[key]
        return _number(key, params.get(key, default), lo, hi)

    datum_kw = dict(_DEFAULT_DATUM[name])
    if "datum" in params and params["datum"] != datum_kw["datum"]:
        datum_kw = {"datum": params["datum"]}
    for key, rng in _DATUM_PARAMS.items():
        if key == "datum" or key not in params:
            continue
        datum_kw[key] = _number(key, params[key], rng[1], rng[2])
    kind = datum_kw.pop("datum")
    if kind not in ("box", "riemann", "bump", "constant"):
        raise InvalidModelError(f"unknown datum {kind!r}")
    datum = make_datum(dim, kind, **datum_kw)

    source = SourceSpec()
    if name == "greenshields_lwr":
        vmax = num("vmax")
        flux, diff = _traffic_flux(vmax, dim), _traffic_diffusion(vmax)
    elif name == "burgers":
        comps = [lambda u: np.asarray(u) ** 2 / 2.0]
        ders = [lambda u: np.asarray(u, dtype=float)]
        bps = [(0.0, 1.0)]
        L = 1.0
        if dim == 2:
            f2, d2 = _transverse(1.0)
            comps.append(f2)
            ders.append(d2)
            bps.append((0.0, 1.0))
            L = np.sqrt(2.0)
        flux = FluxSpec(tuple(comps), tuple(ders), L, tuple(bps), "burgers")
        diff = DiffusionSpec(lambda u: np.asarray(u, dtype=float),
                             lambda u: np.ones_like(np.asarray(u, dtype=float)), 1.0, "linear")
    elif name == "heat":
        D = num("diffusivity")
        flux = _zero_flux(dim)
        diff = DiffusionSpec(lambda u: D * np.asarray(u, dtype=float),
                             lambda u: np.full_like(np.asarray(u, dtype=float), D), D, "linear")
    elif name == "porous_medium":
        m = num("m")
        flux = _zero_flux(dim)
        diff = DiffusionSpec(lambda u: np.asarray(u, dtype=float) ** m,
                             lambda u: m * np.asarray(u, dtype=float) ** (m - 1.0), m,
                             f"porous(m={m:g})")
    elif name in ("lwr_entry", "lwr_exit"):
        vmax = num("vmax")
        flux, diff = _traffic_flux(vmax, 1), _traffic_diffusion(vmax)
        source = _ramp_source("entry" if name == "lwr_entry" else "exit", num("rate"),
                              _intervals(params.get("I")))
    else:
        if params.get("table") is not None:
            tu, tf = read_flux_table(params["table"])
        elif params.get("table_u") is not None:
            tu, tf = params["table_u"], params.get("table_f")
            if tf is None:
                raise InvalidModelError("table_u given without table_f")
        else:
            tu, tf = GREENSHIELDS_TABLE
        flux = table_flux(tu, tf)
        kind_d = params.get("diffusion", "quadratic")
        if kind_d == "quadratic":
            diff = DiffusionSpec(lambda u: np.asarray(u) ** 2 / 2.0,
                                 lambda u: np.asarray(u, dtype=float), 1.0, "quadratic")
        elif kind_d == "linear":
            diff = DiffusionSpec(lambda u: np.asarray(u, dtype=float),
                                 lambda u: np.ones_like(np.asarray(u, dtype=float)), 1.0, "linear")
        else:
            raise InvalidModelError(f"diffusion must be 'quadratic' or 'linear', got {kind_d!r}")

    model = ModelSpec(flux, diff, source, datum, None, name, params)
    return model.validated() if validate else model
