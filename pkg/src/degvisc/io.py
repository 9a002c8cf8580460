"""Deterministic, atomic text output."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from degvisc import __version__


def fmt(value) -> str:
    """17-significant-digit floats, lower-case booleans, plain strings."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def header_lines(config_hash: str, legend: str = "") -> list[str]:
    lines = [f"config_sha256: {config_hash}", f"version: degvisc {__version__}"]
    if legend:
        lines.append(f"anchors: {legend}")
    return lines


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, columns, rows, comments=()) -> Path:
    return atomic_write(path, csv_text(columns, rows, comments))


def read_csv(path) -> tuple[list[str], list[dict[str, str]]]:
    """Comment lines and data rows of a file written by :func:`write_csv`."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else body).append(line)
    reader = csv.DictReader(body)
    return [c[1:].strip() for c in comments], list(reader)


def trajectory_rows(traj):
    grid = traj.grid
    for snap in traj.snapshots:
        flat = snap.values.ravel()
        if grid.dimension == 1:
            for x, u in zip(grid.centers, flat):
                yield (snap.t, x, u)
        else:
            X, Y = grid.coords
            for x, y, u in zip(X.ravel(), Y.ravel(), flat):
                yield (snap.t, x, y, u)


def write_trajectory(path, traj, comments=()) -> Path:
    cols = ["t", "x", "u"] if traj.grid.dimension == 1 else ["t", "x", "y", "u"]
    return write_csv(path, cols, trajectory_rows(traj), comments)
