"""Photosensor (photodiode array) simulation on rendered frames.

Four virtual photodiodes watch the eye through semi-overlapping Gaussian
reception windows arranged in a 2x2 quadrant layout around the frame centre:

    PD1 upper-nasal   PD2 upper-temporal
    PD4 lower-nasal   PD3 lower-temporal

Window centres are given in degrees of visual field relative to the frame
centre, with +x nasal and +y down (image convention).  A photodiode output is
the Gaussian-weighted mean intensity over its window; the two differential
channels are

    i_h = (pd1 + pd4) - (pd2 + pd3)        (nasal minus temporal pairs)
    i_v = (pd1 + pd2) - (pd3 + pd4)        (upper minus lower pairs)

Because the windows ride with the sensor assembly they are fixed in image
coordinates; sensor translation shows up as the eye image moving under them.

The module also carries a minimal photodiode electrical model (responsivity
and ideal-diode dark current) used for unit-level reasoning about the
transduction chain; the rendered-intensity path above stays dimensionless.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .scene import Frame, SceneConfig

__all__ = [
    "BOLTZMANN_J_PER_K",
    "ELECTRON_CHARGE_C",
    "PhotodiodeParams",
    "PhotosensorLayout",
    "PsogSample",
    "PsogStream",
    "NoSignalError",
    "photocurrent",
    "diode_current",
    "photodiode_output",
    "psog_sample",
]

BOLTZMANN_J_PER_K = 1.38e-23
ELECTRON_CHARGE_C = 1.602176634e-19


class NoSignalError(ValueError):
    """Raised when a reception window holds no in-frame pixels (no useful information)."""


@dataclass(frozen=True)
class PhotodiodeParams:
    """Electrical parameters of one photodiode."""

    responsivity: float = 0.5  # [A/W]
    reverse_saturation_current: float = 1e-12  # [A]
    bias_voltage: float = 0.0  # [V]
    temperature: float = 300.0  # [K]

    def __post_init__(self) -> None:
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")
        if self.reverse_saturation_current <= 0:
            raise ValueError("reverse saturation current must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def photocurrent(incident_power: float, params: PhotodiodeParams) -> float:
    """Photocurrent [A] for incident optical power [W]: linear in power."""
    if incident_power < 0:
        raise ValueError("incident power must be non-negative")
    return params.responsivity * incident_power


def diode_current(params: PhotodiodeParams) -> float:
    """Ideal-diode dark current [A] at the configured bias and temperature."""
    vt = BOLTZMANN_J_PER_K * params.temperature / ELECTRON_CHARGE_C
    return params.reverse_saturation_current * math.expm1(params.bias_voltage / vt)


@dataclass(frozen=True)
class PhotosensorLayout:
    """Placement and shape of the four reception windows.

    ``window_centers`` lists (x_deg, y_deg) for PD1..PD4.  ``window_size`` is
    the full square window side in degrees; the Gaussian sigma is
    ``window_size * sigma_ratio``.
    """

    window_centers: tuple = ((4.5, -4.5), (-4.5, -4.5), (-4.5, 4.5), (4.5, 4.5))
    window_size: float = 13.0
    sigma_ratio: float = 0.25

    def __post_init__(self) -> None:
        if len(self.window_centers) != 4:
            raise ValueError("layout requires exactly four windows (PD1..PD4)")
        if self.window_size <= 0 or self.sigma_ratio <= 0:
            raise ValueError("window size and sigma ratio must be positive")
        centers = self.window_centers
        for i in range(4):
            for j in range(i + 1, 4):
                if (
                    abs(centers[i][0] - centers[j][0]) >= self.window_size
                    or abs(centers[i][1] - centers[j][1]) >= self.window_size
                ):
                    raise ValueError("windows must pairwise overlap")


@dataclass(frozen=True)
class PsogSample:
    """One photosensor sample: four photodiode outputs plus the differential channels."""

    i_pd: tuple
    i_h: float
    i_v: float
    t: float = 0.0


@lru_cache(maxsize=64)
def _window_kernel(center_deg: tuple, window_size: float, sigma_ratio: float, cfg: SceneConfig):
    """(row slice, col slice, weights, weight sum) for one window, clipped to the frame.

    Returns ``None`` when the window holds no in-frame pixels; evaluation then
    trips :class:`NoSignalError`.
    """
    pitch = cfg.deg_per_px
    half_px = (window_size / 2.0) / pitch
    sigma_px = window_size * sigma_ratio / pitch
    px = cfg.width / 2.0 + center_deg[0] / pitch
    py = cfg.height / 2.0 + center_deg[1] / pitch
    c0 = max(int(math.ceil(px - half_px - 0.5)), 0)
    c1 = min(int(math.floor(px + half_px - 0.5)), cfg.width - 1)
    r0 = max(int(math.ceil(py - half_px - 0.5)), 0)
    r1 = min(int(math.floor(py + half_px - 0.5)), cfg.height - 1)
    if c0 > c1 or r0 > r1:
        return None
    du = np.arange(c0, c1 + 1) + 0.5 - px
    dv = np.arange(r0, r1 + 1) + 0.5 - py
    w = np.exp(-(dv[:, None] ** 2 + du[None, :] ** 2) / (2.0 * sigma_px * sigma_px))
    return (slice(r0, r1 + 1), slice(c0, c1 + 1), w, float(w.sum()))


def _window_kernels(layout: PhotosensorLayout, cfg: SceneConfig):
    return tuple(
        _window_kernel(tuple(c), layout.window_size, layout.sigma_ratio, cfg)
        for c in layout.window_centers
    )


def photodiode_output(frame: Frame, center_deg, layout: PhotosensorLayout, cfg: SceneConfig) -> float:
    """Gaussian-weighted mean intensity over one window centred at ``center_deg``.

    The weight mass is renormalised over the pixels that actually fall inside
    the frame, so partially cropped windows stay within [0, 1].
    """
    kernel = _window_kernel(tuple(center_deg), layout.window_size, layout.sigma_ratio, cfg)
    return _apply_kernel(frame, kernel, cfg)


def _apply_kernel(frame: Frame, kernel, cfg: SceneConfig) -> float:
    if frame.width != cfg.width or frame.height != cfg.height:
        raise ValueError("frame dimensions do not match the scene configuration")
    if kernel is None:
        raise NoSignalError("reception window lies fully outside the frame: no useful information")
    rs, cs, w, wsum = kernel
    return float((frame.intensities[rs, cs] * w).sum() / wsum)


def psog_sample(frame: Frame, layout: PhotosensorLayout, cfg: SceneConfig, t: float = 0.0) -> PsogSample:
    """Evaluate all four photodiodes on a frame and form the differential channels."""
    kernels = _window_kernels(layout, cfg)
    pd = tuple(_apply_kernel(frame, k, cfg) for k in kernels)
    i_h = (pd[0] + pd[3]) - (pd[1] + pd[2])
    i_v = (pd[0] + pd[1]) - (pd[2] + pd[3])
    return PsogSample(pd, i_h, i_v, t)


CSV_HEADER = ["t", "i_pd1", "i_pd2", "i_pd3", "i_pd4", "i_h", "i_v"]


@dataclass
class PsogStream:
    """Column-oriented photosensor sample stream."""

    t: np.ndarray
    i_pd: np.ndarray  # shape (n, 4)
    i_h: np.ndarray
    i_v: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_samples(cls, samples) -> "PsogStream":
        samples = list(samples)
        return cls(
            t=np.array([s.t for s in samples]),
            i_pd=np.array([s.i_pd for s in samples]),
            i_h=np.array([s.i_h for s in samples]),
            i_v=np.array([s.i_v for s in samples]),
        )

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for k in range(len(self)):
                writer.writerow(
                    [repr(float(v)) for v in (self.t[k], *self.i_pd[k], self.i_h[k], self.i_v[k])]
                )

    @classmethod
    def read_csv(cls, path) -> "PsogStream":
        rows = _read_csv_rows(path, CSV_HEADER)
        data = np.asarray(rows, dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(CSV_HEADER))
        return cls(t=data[:, 0], i_pd=data[:, 1:5], i_h=data[:, 5], i_v=data[:, 6])


def _read_csv_rows(path, expected_header):
    """Shared CSV reader: skips '#' comment lines, validates the header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header != expected_header:
            raise ValueError(f"unexpected CSV header {header!r}, wanted {expected_header!r}")
        return [row for row in reader if row]
