"""Multirate fusion of the photosensor and camera channels.

The photosensor channel runs at ``f_psog`` (default 1000 Hz), the camera
channel at ``f_vog`` (default 5 Hz), an integer divisor.  Fusion smooths both
channels with a short causal moving average, upsamples the low-rate shift
estimates by zero-order hold, and inverts the calibration per high-rate
sample at the currently applied sensor position:

    gaze[k] = invert(ma(raw)[k], x_s_applied[k])

Smoothing of the shift stream runs at the camera rate before the hold, so a
step in the true sensor position first affects the applied ``x_s`` within one
camera period and settles fully after ``ma_window`` camera samples.  Either
smoother can be disabled per stream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import calib

__all__ = [
    "StreamConfig",
    "GazeStream",
    "FLAG_EXTRAPOLATED",
    "FLAG_STALE_SHIFT",
    "moving_average",
    "zoh_upsample",
    "correct",
]

FLAG_EXTRAPOLATED = 1  # inversion left the fitted domain (clamped result)
FLAG_STALE_SHIFT = 2  # applied shift was held past its nominal coverage


@dataclass(frozen=True)
class StreamConfig:
    """Rates and filter settings for the fusion pipeline."""

    f_psog: float = 1000.0
    f_vog: float = 5.0
    ma_window: int = 3
    shift_gate_mm: float = 0.0  # |shift| below this is treated as zero; 0 = always apply
    smooth_psog: bool = True
    smooth_vog: bool = True

    def __post_init__(self) -> None:
        if self.f_psog <= 0 or self.f_vog <= 0:
            raise ValueError("rates must be positive")
        ratio = self.f_psog / self.f_vog
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("f_psog must be an integer multiple of f_vog")
        if self.ma_window < 1:
            raise ValueError("ma_window must be at least 1")
        if self.shift_gate_mm < 0:
            raise ValueError("shift gate must be non-negative")

    @property
    def ratio(self) -> int:
        return int(round(self.f_psog / self.f_vog))


def moving_average(x, n: int) -> np.ndarray:
    """Causal moving average of window ``n`` with prefix warm-up.

    Sample i < n-1 averages everything seen so far (i+1 samples); from i = n-1
    on it is the plain windowed mean.  n=1 returns a copy.
    """
    x = np.asarray(x, dtype=float)
    if n < 1:
        raise ValueError("window must be at least 1")
    if x.ndim != 1:
        raise ValueError("moving_average expects a 1-D stream")
    out = np.empty_like(x)
    warm = min(n - 1, len(x))
    for i in range(warm):
        out[i] = np.mean(x[: i + 1])
    if len(x) >= n:
        windows = np.lib.stride_tricks.sliding_window_view(x, n)
        out[n - 1 :] = windows.mean(axis=-1)
    return out


def zoh_upsample(values, ratio: int, n_out: int | None = None):
    """Zero-order-hold upsampling by an integer ratio.

    Low-rate sample k covers output indices [k*ratio, (k+1)*ratio).  When
    ``n_out`` asks for more samples than the nominal coverage, the last value
    is held and those trailing samples are flagged stale.  Returns
    ``(values_out, stale)``.
    """
    values = np.asarray(values, dtype=float)
    if ratio < 1:
        raise ValueError("ratio must be at least 1")
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("zoh_upsample expects a non-empty 1-D stream")
    nominal = len(values) * ratio
    n_out = nominal if n_out is None else int(n_out)
    out = np.repeat(values, ratio)
    stale = np.zeros(nominal, dtype=bool)
    if n_out <= nominal:
        return out[:n_out], stale[:n_out]
    pad = n_out - nominal
    out = np.concatenate([out, np.full(pad, values[-1])])
    stale = np.concatenate([stale, np.ones(pad, dtype=bool)])
    return out, stale


def correct(psog_stream, vog_stream, model: calib.CalibModel, cfg: StreamConfig) -> "GazeStream":
    """Run the full shift-aware fusion pipeline.

    ``psog_stream`` provides t/i_h/i_v at the high rate, ``vog_stream``
    provides shift estimates (and their freshness flags) at the low rate; both
    must start at t = 0.  Traditional (shift-unaware) operation is simply this
    function with an all-zero shift stream, which follows the identical code
    path.
    """
    n_hi = len(psog_stream.t)
    if n_hi == 0:
        raise ValueError("empty photosensor stream")
    if len(vog_stream.t) == 0:
        raise ValueError("empty camera stream")
    if abs(psog_stream.t[0]) > 1e-9 or abs(vog_stream.t[0]) > 1e-9:
        raise ValueError("streams must be aligned to start at t = 0")

    n = cfg.ma_window
    i_h = moving_average(psog_stream.i_h, n) if cfg.smooth_psog else np.array(psog_stream.i_h, dtype=float)
    i_v = moving_average(psog_stream.i_v, n) if cfg.smooth_psog else np.array(psog_stream.i_v, dtype=float)
    s_h = moving_average(vog_stream.shift_h, n) if cfg.smooth_vog else np.array(vog_stream.shift_h, dtype=float)
    s_v = moving_average(vog_stream.shift_v, n) if cfg.smooth_vog else np.array(vog_stream.shift_v, dtype=float)

    s_h, stale_h = zoh_upsample(s_h, cfg.ratio, n_hi)
    s_v, stale_v = zoh_upsample(s_v, cfg.ratio, n_hi)
    carried, _ = zoh_upsample(np.asarray(~np.asarray(vog_stream.valid, dtype=bool), dtype=float), cfg.ratio, n_hi)
    stale = stale_h | stale_v | (carried > 0.5)

    if cfg.shift_gate_mm > 0.0:
        s_h = np.where(np.abs(s_h) < cfg.shift_gate_mm, 0.0, s_h)
        s_v = np.where(np.abs(s_v) < cfg.shift_gate_mm, 0.0, s_v)

    gaze_h, oor_h = calib.invert(model, i_h, s_h, "h")
    gaze_v, oor_v = calib.invert(model, i_v, s_v, "v")
    extrapolated = (
        oor_h
        | oor_v
        | calib.is_extrapolating(model, np.zeros(n_hi), s_h, "h")
        | calib.is_extrapolating(model, np.zeros(n_hi), s_v, "v")
    )

    flags = np.zeros(n_hi, dtype=int)
    flags[extrapolated] |= FLAG_EXTRAPOLATED
    flags[stale] |= FLAG_STALE_SHIFT
    return GazeStream(
        t=np.array(psog_stream.t, dtype=float),
        gaze_h=gaze_h,
        gaze_v=gaze_v,
        shift_h=s_h,
        shift_v=s_v,
        flags=flags,
    )


CSV_HEADER = ["t", "gaze_h_deg", "gaze_v_deg", "shift_h_mm", "shift_v_mm", "flags"]


@dataclass
class GazeStream:
    """High-rate fused gaze output. ``flags`` is a bitmask (1 extrapolated, 2 stale shift)."""

    t: np.ndarray
    gaze_h: np.ndarray
    gaze_v: np.ndarray
    shift_h: np.ndarray
    shift_v: np.ndarray
    flags: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("# flags bitmask: 1 = extrapolated inversion, 2 = stale shift\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for k in range(len(self)):
                writer.writerow(
                    [
                        repr(float(self.t[k])),
                        repr(float(self.gaze_h[k])),
                        repr(float(self.gaze_v[k])),
                        repr(float(self.shift_h[k])),
                        repr(float(self.shift_v[k])),
                        int(self.flags[k]),
                    ]
                )

    @classmethod
    def read_csv(cls, path) -> "GazeStream":
        from .psog import _read_csv_rows

        rows = _read_csv_rows(path, CSV_HEADER)
        data = np.asarray(rows, dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(CSV_HEADER))
        return cls(
            t=data[:, 0],
            gaze_h=data[:, 1],
            gaze_v=data[:, 2],
            shift_h=data[:, 3],
            shift_v=data[:, 4],
            flags=data[:, 5].astype(int),
        )
