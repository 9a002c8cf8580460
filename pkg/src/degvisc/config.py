"""Typed, sectioned TOML run configuration with exhaustive validation."""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w

from degvisc.scenarios import SCENARIOS


class ConfigError(ValueError):
    """Invalid configuration; the message names the section, key and line."""


# (type, default, low, high); low/high are None when unbounded or not numeric
_F = float
_SCHEMA: dict[str, dict[str, tuple]] = {
    "scenario": {
        "name": (str, "greenshields_lwr", None, None),
        "dimension": (int, 1, 1, 2),
        "params": (dict, {}, None, None),
    },
    "grid": {
        "half_width": (_F, 2.0, 1e-6, 1e6),
        "cells_per_axis": (int, 800, 8, 1_000_000),
        "boundary": (str, "outflow", None, None),
    },
    "time": {
        "T": (_F, 1.0, 1e-12, 1e6),
        "snapshots": (int, 10, 1, 100_000),
        "output_times": (list, [], None, None),
    },
    "viscosity": {
        "eps": (_F, 0.01, 0.0, 100.0),
        "mu": (_F, 0.001, 1e-9, 0.25),
        "cfl": (_F, 0.4, 1e-6, 1.0),
        "reference_cfl": (_F, 0.9, 1e-6, 1.0),
    },
    "mollification": {
        "ladder": (list, [0.04, 0.02, 0.01], 1e-9, 0.25),
        "nodes": (int, 40, 4, 400),
        "cutoff": (_F, None, 0.0, 1e6),
    },
    "entropy": {
        "ks": (list, [0.1, 0.3, 0.5, 0.7, 0.9], 0.0, 1.0),
        "delta": (_F, 0.01, 1e-9, 0.1),
        "C_tol": (_F, 1.0, 0.0, 1e6),
        "t_fractions": (list, [0.0, 0.5], 0.0, 1.0),
        "t_radius_fraction": (_F, 0.4, 1e-6, 1.0),
        "centers": (list, [-0.25, 0.0, 0.25], -1e6, 1e6),
        "radii": (list, [0.25, 0.5], 1e-6, 1e6),
    },
    "diagnostics": {
        "C_s": (_F, 1.0, 0.0, 1e6),
        "window": (list, [-1.0, 1.0], -1e6, 1e6),
        "partner_scale": (_F, 0.5, 0.0, 1.0),
        "residuals": (bool, True, None, None),
    },
    "sweep": {
        "eps_ladder": (list, [0.04, 0.02, 0.01, 0.005], 1e-9, 100.0),
        "mu_factor": (_F, 0.1, 1e-9, 1.0),
        "eps_data_rule": (str, "mollified", None, None),
        "window": (list, [-0.5, 0.5], -1e6, 1e6),
        "p_list": (list, [1.0, 2.0], 1.0, 1e3),
        "reference_factor": (int, 4, 4, 64),
        "mu_ladder": (list, [], 1e-9, 0.25),
    },
    "output": {
        "dir": (str, "out", None, None),
    },
}

_CHOICES = {("grid", "boundary"): ("outflow", "periodic"),
            ("sweep", "eps_data_rule"): ("mollified", "fixed"),
            ("scenario", "name"): SCENARIOS}


def _section_class(name: str):
    fields = [(k, Any, field(default_factory=(lambda d=d: list(d) if isinstance(d, list) else dict(d)))
               if isinstance(d, (list, dict)) else field(default=d))
              for k, (_, d, _, _) in _SCHEMA[name].items()]
    return dataclasses.make_dataclass(name.capitalize() + "Section", fields)


SECTIONS = {name: _section_class(name) for name in _SCHEMA}


@dataclass
class RunConfig:
    scenario: Any = field(default_factory=SECTIONS["scenario"])
    grid: Any = field(default_factory=SECTIONS["grid"])
    time: Any = field(default_factory=SECTIONS["time"])
    viscosity: Any = field(default_factory=SECTIONS["viscosity"])
    mollification: Any = field(default_factory=SECTIONS["mollification"])
    entropy: Any = field(default_factory=SECTIONS["entropy"])
    diagnostics: Any = field(default_factory=SECTIONS["diagnostics"])
    sweep: Any = field(default_factory=SECTIONS["sweep"])
    output: Any = field(default_factory=SECTIONS["output"])

    def to_dict(self, include_none: bool = False) -> dict:
        out = {}
        for name in _SCHEMA:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: v for k, v in sec.items() if include_none or v is not None}
        return out

    def output_times(self) -> list[float]:
        if self.time.output_times:
            return [float(t) for t in self.time.output_times]
        n = self.time.snapshots
        return [self.time.T * (i + 1) / n for i in range(n)]

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _where(text: str, section: str, key: str | None = None) -> str:
    line = _line_of(text, section, key) if text else None
    name = f"[{section}]" + (f" {key}" if key else "")
    return f"{name} (line {line})" if line else name


def _coerce(value, typ, section, key, lo, hi, loc):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{loc}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{loc}: expected an integer, got {value!r}")
    elif typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{loc}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{loc}: value must be finite")
    elif typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{loc}: expected a string, got {value!r}")
        choices = _CHOICES.get((section, key))
        if choices and value not in choices:
            raise ConfigError(f"{loc}: {value!r} not one of {list(choices)}")
        return value
    elif typ is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{loc}: expected a table")
        return dict(value)
    elif typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{loc}: expected an array")
        items = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{loc}: array entries must be finite numbers, got {v!r}")
            if lo is not None and not lo <= v <= hi:
                raise ConfigError(f"{loc}: entry {v!r} outside range [{lo:g}, {hi:g}]")
            items.append(float(v))
        return items
    if lo is not None and not lo <= value <= hi:
        raise ConfigError(f"{loc}: {value!r} outside range [{lo:g}, {hi:g}]")
    return value


def _decreasing(values, loc, minimum: int):
    if len(values) < minimum:
        raise ConfigError(f"{loc}: needs at least {minimum} entries")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{loc}: ladder must be strictly decreasing")


def _cross_checks(cfg: RunConfig, text: str):
    w = lambda s, k: _where(text, s, k)  # noqa: E731
    _decreasing(cfg.mollification.ladder, w("mollification", "ladder"), 3)
    _decreasing(cfg.sweep.eps_ladder, w("sweep", "eps_ladder"), 3)
    if cfg.sweep.mu_ladder:
        _decreasing(cfg.sweep.mu_ladder, w("sweep", "mu_ladder"), 3)
    ts = cfg.time.output_times
    if ts and (any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] <= 0 or ts[-1] > cfg.time.T):
        raise ConfigError(f"{w('time', 'output_times')}: must be increasing within (0, T]")
    for sec in ("diagnostics", "sweep"):
        win = getattr(cfg, sec).window
        if len(win) != 2 or not win[0] < win[1] or max(abs(win[0]), abs(win[1])) >= cfg.grid.half_width:
            raise ConfigError(f"{w(sec, 'window')}: need [a, b] with a < b strictly inside the domain")
    if not cfg.sweep.p_list:
        raise ConfigError(f"{w('sweep', 'p_list')}: needs at least one exponent")
    if not cfg.entropy.ks:
        raise ConfigError(f"{w('entropy', 'ks')}: needs at least one k")


def config_from_dict(data: dict, text: str = "") -> RunConfig:
    cfg = RunConfig()
    for section, content in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{_where(text, section)}: unknown section; valid sections are {list(_SCHEMA)}")
        if not isinstance(content, dict):
            raise ConfigError(f"{_where(text, section)}: expected a table")
        target = getattr(cfg, section)
        for key, value in content.items():
            spec = _SCHEMA[section].get(key)
            if spec is None:
                raise ConfigError(f"{_where(text, section, key)}: unknown key; valid keys are {list(_SCHEMA[section])}")
            typ, _, lo, hi = spec
            setattr(target, key, _coerce(value, typ, section, key, lo, hi, _where(text, section, key)))
    _cross_checks(cfg, text)
    return cfg


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    if "scenario" in data and isinstance(data["scenario"], dict) and "params" in data["scenario"]:
        if not isinstance(data["scenario"]["params"], dict):
            raise ConfigError(f"{_where(text, 'scenario', 'params')}: expected a table")
    return config_from_dict(data, text)


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config_text(path.read_text())


def serialize(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def describe_defaults(cfg: RunConfig) -> str:
    """Full effective configuration, for echoing what was filled in."""
    return serialize(cfg)
