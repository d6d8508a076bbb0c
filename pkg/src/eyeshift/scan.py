"""Dense photosensor response scans and table-based fast evaluation.

A scan renders the scene over a grid of eye rotations (default +/-10 deg,
step 0.5) and sensor translations (default +/-2 mm, step 0.5) and records the
photodiode outputs and differential channels per grid point.

Two layouts are supported:

* ``separable`` (default): two orthogonal 2-D slices through the origin,
  (theta_h x dx) at theta_v = dy = 0 and (theta_v x dy) at theta_h = dx = 0.
  Horizontal and vertical calibration are independent, so these slices carry
  everything single-axis protocols need, at a small fraction of the renders.
* ``full``: the complete 4-D product grid, retained for cross-axis studies.

Fast evaluation interpolates the table instead of rendering per sample:
bilinear within each slice, and for off-slice states the first-order additive
composition

    f(th, tv, dx, dy) ~= f(th, 0, dx, 0) + f(0, tv, 0, dy) - f(0, 0, 0, 0)

which is exact on the slice planes and ignores second-order cross-axis
interactions elsewhere.  Full tables use multilinear interpolation in 4-D.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import psog as psog_mod
from . import scene as scene_mod
from .psog import PhotosensorLayout
from .scene import EyeState, SceneConfig, SensorPose

__all__ = [
    "ScanSpec",
    "ScanTable",
    "TableInterpolator",
    "scan_states",
    "run_scan",
    "save_table",
    "load_table",
    "append_rows",
]

COLUMNS = ("theta_h", "theta_v", "dx", "dy", "i_pd1", "i_pd2", "i_pd3", "i_pd4", "i_h", "i_v")
SIGNAL_COLUMNS = COLUMNS[4:]


@dataclass(frozen=True)
class ScanSpec:
    """Grid ranges (symmetric, inclusive) and layout mode for a scan."""

    eye_range: float = 10.0
    eye_step: float = 0.5
    shift_range: float = 2.0
    shift_step: float = 0.5
    mode: str = "separable"

    def __post_init__(self) -> None:
        if self.mode not in ("separable", "full"):
            raise ValueError("scan mode must be 'separable' or 'full'")
        if self.eye_step <= 0 or self.shift_step <= 0:
            raise ValueError("grid steps must be positive")
        if self.eye_range <= 0 or self.shift_range <= 0:
            raise ValueError("grid ranges must be positive")

    @property
    def eye_values(self) -> np.ndarray:
        n = int(round(2 * self.eye_range / self.eye_step))
        return np.round(np.linspace(-self.eye_range, self.eye_range, n + 1), 9)

    @property
    def shift_values(self) -> np.ndarray:
        n = int(round(2 * self.shift_range / self.shift_step))
        return np.round(np.linspace(-self.shift_range, self.shift_range, n + 1), 9)


@dataclass
class ScanTable:
    """Scan rows in column order given by ``COLUMNS``."""

    data: np.ndarray  # (n_rows, 10)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(COLUMNS):
            raise ValueError(f"scan table must have {len(COLUMNS)} columns")

    def __len__(self) -> int:
        return len(self.data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]


def scan_states(spec: ScanSpec) -> list[tuple[float, float, float, float]]:
    """Deterministic ordered list of (theta_h, theta_v, dx, dy) grid states."""
    eyes, shifts = spec.eye_values, spec.shift_values
    states = []
    if spec.mode == "separable":
        for dx in shifts:
            for th in eyes:
                states.append((float(th), 0.0, float(dx), 0.0))
        for dy in shifts:
            for tv in eyes:
                states.append((0.0, float(tv), 0.0, float(dy)))
    else:
        for th in eyes:
            for tv in eyes:
                for dx in shifts:
                    for dy in shifts:
                        states.append((float(th), float(tv), float(dx), float(dy)))
    return states


def _row_for_state(state, cfg: SceneConfig, layout: PhotosensorLayout) -> list[float]:
    th, tv, dx, dy = state
    frame = scene_mod.render_frame(EyeState(theta_h=th, theta_v=tv), SensorPose(dx=dx, dy=dy), cfg)
    sample = psog_mod.psog_sample(frame, layout, cfg)
    return [th, tv, dx, dy, *sample.i_pd, sample.i_h, sample.i_v]


def _rows_for_states(states, cfg, layout):
    return [_row_for_state(s, cfg, layout) for s in states]


def run_scan(
    cfg: SceneConfig,
    layout: PhotosensorLayout,
    spec: ScanSpec,
    jobs: int = 1,
    skip: int = 0,
    row_sink: Callable | None = None,
) -> ScanTable:
    """Render the scan grid, optionally in parallel and resuming after ``skip`` rows.

    ``row_sink`` (if given) receives each chunk of finished rows in grid order,
    which the CLI uses for checkpointed CSV output.
    """
    states = scan_states(spec)[skip:]
    chunks = [states[i : i + 64] for i in range(0, len(states), 64)]
    rows: list[list[float]] = []

    def consume(chunk_iter: Iterable) -> None:
        for chunk in chunk_iter:
            rows.extend(chunk)
            if row_sink is not None:
                row_sink(chunk)

    if jobs <= 1 or len(states) < 4:
        consume(_rows_for_states(c, cfg, layout) for c in chunks)
    else:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=jobs) as executor:
            consume(executor.map(partial(_rows_for_states, cfg=cfg, layout=layout), chunks))
    return ScanTable(np.asarray(rows, dtype=float).reshape(len(rows), len(COLUMNS)))


def save_table(table: ScanTable, path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in table.data:
            writer.writerow([repr(float(v)) for v in row])


def append_rows(path, rows) -> None:
    """Append finished rows to an existing scan CSV (checkpointed scans)."""
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def load_table(path) -> ScanTable:
    from .psog import _read_csv_rows

    rows = _read_csv_rows(path, list(COLUMNS))
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(COLUMNS))
    return ScanTable(data)


def count_rows(path) -> int:
    """Completed data rows in a scan CSV (for resuming)."""
    if not os.path.exists(path):
        return 0
    with open(path, newline="") as fh:
        n = sum(1 for line in fh if line.strip() and not line.startswith("#"))
    return max(n - 1, 0)  # minus header


class TableInterpolator:
    """Fast signal evaluation backed by a scan table.

    Queries are clamped to the grid ranges; callers are expected to stay
    within them (scenario generators do).
    """

    def __init__(self, table: ScanTable):
        th = table.column("theta_h")
        tv = table.column("theta_v")
        dx = table.column("dx")
        dy = table.column("dy")
        on_h_slice = (tv == 0.0) & (dy == 0.0)
        on_v_slice = (th == 0.0) & (dx == 0.0)
        unique = [np.unique(c) for c in (th, tv, dx, dy)]
        full_size = int(np.prod([len(u) for u in unique]))
        if len(table) == full_size and full_size > 0 and all(len(u) > 1 for u in unique):
            self.mode = "full"
            self._build_full(table, unique)
        elif np.all(on_h_slice | on_v_slice):
            self.mode = "separable"
            self._build_separable(table, on_h_slice, on_v_slice)
        else:
            raise ValueError("scan table is neither a full 4-D grid nor two axis slices")

    def _grid_from_rows(self, keys_a, keys_b, values, what):
        ua, ub = np.unique(keys_a), np.unique(keys_b)
        if len(ua) < 2 or len(ub) < 2:
            raise ValueError(f"{what} slice needs at least a 2x2 grid")
        grid = np.full((len(ua), len(ub)), np.nan)
        ia = np.searchsorted(ua, keys_a)
        ib = np.searchsorted(ub, keys_b)
        grid[ia, ib] = values
        if np.isnan(grid).any():
            raise ValueError(f"{what} slice is not a complete grid")
        return ua, ub, grid

    def _build_separable(self, table, on_h, on_v) -> None:
        self._interp_h = {}
        self._interp_v = {}
        self._origin = {}
        th, tv = table.column("theta_h"), table.column("theta_v")
        dx, dy = table.column("dx"), table.column("dy")
        for name in SIGNAL_COLUMNS:
            col = table.column(name)
            ua, ub, grid = self._grid_from_rows(th[on_h], dx[on_h], col[on_h], "horizontal")
            self._interp_h[name] = RegularGridInterpolator((ua, ub), grid, method="linear")
            self._h_bounds = (ua, ub)
            ua, ub, grid = self._grid_from_rows(tv[on_v], dy[on_v], col[on_v], "vertical")
            self._interp_v[name] = RegularGridInterpolator((ua, ub), grid, method="linear")
            self._v_bounds = (ua, ub)
            origin_rows = on_h & (th == 0.0) & (dx == 0.0)
            if not origin_rows.any():
                raise ValueError("separable scan must include the all-zero origin state")
            self._origin[name] = float(col[origin_rows][0])

    def _build_full(self, table, unique) -> None:
        self._axes = unique
        order = np.lexsort(
            (table.column("dy"), table.column("dx"), table.column("theta_v"), table.column("theta_h"))
        )
        shape = tuple(len(u) for u in unique)
        self._interp_full = {}
        for name in SIGNAL_COLUMNS:
            grid = table.column(name)[order].reshape(shape)
            self._interp_full[name] = RegularGridInterpolator(tuple(unique), grid, method="linear")

    def evaluate(self, name: str, theta_h, theta_v, dx, dy):
        """Interpolated signal column; scalar in, scalar out, arrays broadcast."""
        if name not in SIGNAL_COLUMNS:
            raise ValueError(f"unknown signal column {name!r}")
        th, tv, sx, sy = np.broadcast_arrays(
            *[np.asarray(v, dtype=float) for v in (theta_h, theta_v, dx, dy)]
        )
        scalar = th.ndim == 0
        if scalar:
            th, tv, sx, sy = (v.reshape(1) for v in (th, tv, sx, sy))
        if self.mode == "full":
            pts = np.stack(
                [np.clip(v, ax[0], ax[-1]) for v, ax in zip((th, tv, sx, sy), self._axes)],
                axis=-1,
            )
            out = self._interp_full[name](pts)
        else:
            ua, ub = self._h_bounds
            pts_h = np.stack([np.clip(th, ua[0], ua[-1]), np.clip(sx, ub[0], ub[-1])], axis=-1)
            ua, ub = self._v_bounds
            pts_v = np.stack([np.clip(tv, ua[0], ua[-1]), np.clip(sy, ub[0], ub[-1])], axis=-1)
            out = self._interp_h[name](pts_h) + self._interp_v[name](pts_v) - self._origin[name]
        return float(out[0]) if scalar else out

    def signals(self, theta_h, theta_v, dx, dy):
        """(i_h, i_v) at the given state(s)."""
        return (
            self.evaluate("i_h", theta_h, theta_v, dx, dy),
            self.evaluate("i_v", theta_h, theta_v, dx, dy),
        )
