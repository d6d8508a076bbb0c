"""Video-based feature tracking and sensor-shift estimation.

The camera channel tracks two features per frame: the pupil centre (dark
region) and one corneal glint (bright spot).  Both respond to eye rotation
and to sensor translation, but with different sensitivities.  With

    g_e = glint displacement / pupil displacement   for eye-only motion,
    g_s = glint displacement / pupil displacement   for sensor-only motion,

a measured pair of displacements (d_pc, d_cr) from a stored reference frame
separates into an eye part and a sensor part; the sensor part of the pupil
displacement is, per axis,

    pc_s = (d_cr - d_pc * g_e) / (g_s - g_e)        [pixels]

and dividing by the calibrated pixels-per-millimetre factor converts it to a
sensor translation in mm.  The separation only needs displacements, so the
algebra is exact whenever both relations are linear; gain nonlinearity across
the pose range is what limits accuracy in practice.

Displacements are always taken against features of a reference frame captured
at the neutral eye position and neutral pose.  The reference stores every
glint; a detected glint is matched to the nearest reference glint, so the
estimate does not depend on which of the two illuminator glints the detector
happened to pick (valid while per-frame glint travel stays below half the
glint spacing, which holds across the supported pose range).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import scene
from .scene import EyeState, Frame, SceneConfig, SensorPose

__all__ = [
    "VogConfig",
    "TrackedFeatures",
    "GainModel",
    "ShiftEstimate",
    "VogStream",
    "detect_pupil_center",
    "detect_corneal_reflection",
    "track_features",
    "estimate_gains",
    "estimate_sensor_shift",
    "ShiftTracker",
]


@dataclass(frozen=True)
class VogConfig:
    """Detection thresholds and gain-calibration sweeps for the camera channel."""

    pupil_threshold: float = 0.15
    glint_threshold: float = 0.97
    min_pupil_px: int = 20
    min_glint_px: int = 2
    max_shift_mm: float = 5.0
    eye_sweep_deg: tuple = (-10.0, -5.0, 5.0, 10.0)
    pose_sweep_mm: tuple = (-2.0, -1.0, 1.0, 2.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.pupil_threshold < self.glint_threshold < 1.0):
            raise ValueError("thresholds must satisfy 0 < pupil < glint < 1")
        if len(self.eye_sweep_deg) < 3 or len(self.pose_sweep_mm) < 3:
            raise ValueError("gain sweeps need at least three points per axis")


class _Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class TrackedFeatures:
    """Per-frame feature detections in pixel coordinates."""

    pc_px: tuple
    cr_px: tuple
    pc_valid: bool
    cr_valid: bool
    t: float = 0.0


@dataclass(frozen=True)
class GainModel:
    """Per-axis gains, pixel scale and the reference-frame features.

    Axis order is (horizontal, vertical) throughout.  Valid models satisfy
    0 < g_e < g_s < 1.2 per axis (eye-driven glint motion is always the
    smaller fraction of pupil motion; sensor-driven motion approaches rigid).
    """

    g_e: tuple
    g_s: tuple
    px_per_mm: tuple
    ref_pc: tuple
    ref_glints: tuple

    def __post_init__(self) -> None:
        for axis in (0, 1):
            ge, gs = self.g_e[axis], self.g_s[axis]
            if not (0.0 < ge < gs < 1.2):
                raise ValueError(
                    f"gain separation violated on axis {axis}: g_e={ge:.3f}, g_s={gs:.3f}"
                )
            if self.px_per_mm[axis] <= 0:
                raise ValueError("px_per_mm must be positive")
        if len(self.ref_glints) < 1:
            raise ValueError("reference must store at least one glint")


@dataclass(frozen=True)
class ShiftEstimate:
    """Estimated sensor translation (mm, sensor-pose sign convention)."""

    x_h: float
    x_v: float
    t: float = 0.0
    unreliable: bool = False


def _weighted_centroid(ys, xs, weights) -> _Point:
    wsum = float(weights.sum())
    if wsum <= 0:
        weights = np.ones_like(weights)
        wsum = float(weights.sum())
    cx = float(((xs + 0.5) * weights).sum() / wsum)
    cy = float(((ys + 0.5) * weights).sum() / wsum)
    return _Point(cx, cy)


def detect_pupil_center(frame: Frame, threshold: float = 0.15, min_px: int = 20):
    """Centroid of the largest dark connected region, weighted by darkness.

    Returns ``((x, y), valid)``; ``valid`` is False when no region passes the
    minimum pixel count.  4-connectivity.
    """
    mask = frame.intensities < threshold
    labels, count = ndimage.label(mask)
    if count == 0:
        return _Point(float("nan"), float("nan")), False
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    best = int(sizes.argmax())
    if sizes[best] < min_px:
        return _Point(float("nan"), float("nan")), False
    ys, xs = np.nonzero(labels == best)
    weights = threshold - frame.intensities[ys, xs]
    return _weighted_centroid(ys, xs, weights), True


def _detect_glints(frame: Frame, threshold: float, min_px: int):
    """All bright-region centroids (weighted by excess intensity), sorted by x."""
    mask = frame.intensities > threshold
    labels, count = ndimage.label(mask)
    out = []
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        if len(ys) < min_px:
            continue
        weights = frame.intensities[ys, xs] - threshold
        out.append(_weighted_centroid(ys, xs, weights))
    return sorted(out, key=lambda p: p.x)


def detect_corneal_reflection(frame: Frame, threshold: float, pc, min_px: int = 2):
    """Centroid of the bright region nearest the pupil centre.

    Which of the two illuminator glints gets picked may change between frames;
    the shift estimator compensates by matching against per-glint reference
    positions, so the choice is harmless.
    """
    glints = _detect_glints(frame, threshold, min_px)
    if not glints or not np.all(np.isfinite(pc)):
        return _Point(float("nan"), float("nan")), False
    dists = [(g.x - pc[0]) ** 2 + (g.y - pc[1]) ** 2 for g in glints]
    return glints[int(np.argmin(dists))], True


def track_features(frame: Frame, cfg: VogConfig, t: float = 0.0) -> TrackedFeatures:
    pc, pc_valid = detect_pupil_center(frame, cfg.pupil_threshold, cfg.min_pupil_px)
    if pc_valid:
        cr, cr_valid = detect_corneal_reflection(frame, cfg.glint_threshold, pc, cfg.min_glint_px)
    else:
        cr, cr_valid = _Point(float("nan"), float("nan")), False
    return TrackedFeatures(tuple(pc), tuple(cr), pc_valid, cr_valid, t)


_MIN_DISPLACEMENT_PX = 0.5


def _nearest_reference_glint(cr, ref_glints) -> np.ndarray:
    ref = np.asarray(ref_glints, dtype=float)
    d2 = ((ref - np.asarray(cr, dtype=float)) ** 2).sum(axis=1)
    return ref[int(d2.argmin())]


def estimate_gains(
    scene_cfg: SceneConfig,
    vog_cfg: VogConfig,
    eye_sweep: tuple | None = None,
    pose_sweep: tuple | None = None,
) -> GainModel:
    """Calibrate per-axis gains by rendered eye-only and sensor-only sweeps.

    Sweep points whose pupil displacement falls below half a pixel are
    excluded as degenerate; an axis with no usable points raises ValueError.
    """
    eye_sweep = tuple(eye_sweep if eye_sweep is not None else vog_cfg.eye_sweep_deg)
    pose_sweep = tuple(pose_sweep if pose_sweep is not None else vog_cfg.pose_sweep_mm)
    if len(eye_sweep) < 3 or len(pose_sweep) < 3:
        raise ValueError("gain sweeps need at least three points per axis")

    neutral_frame = scene.render_frame(EyeState(), SensorPose(), scene_cfg)
    ref = track_features(neutral_frame, vog_cfg)
    if not (ref.pc_valid and ref.cr_valid):
        raise ValueError("reference frame features could not be detected")
    ref_glints = tuple(
        map(tuple, _detect_glints(neutral_frame, vog_cfg.glint_threshold, vog_cfg.min_glint_px))
    )

    def sweep_ratios(states_and_poses, axis: int):
        ratios, scales = [], []
        for eye, pose, delta in states_and_poses:
            feats = track_features(scene.render_frame(eye, pose, scene_cfg), vog_cfg)
            if not (feats.pc_valid and feats.cr_valid):
                continue
            d_pc = feats.pc_px[axis] - ref.pc_px[axis]
            matched = _nearest_reference_glint(feats.cr_px, ref_glints)
            d_cr = feats.cr_px[axis] - matched[axis]
            if abs(d_pc) < _MIN_DISPLACEMENT_PX:
                continue
            ratios.append(d_cr / d_pc)
            scales.append(d_pc / delta)
        if not ratios:
            raise ValueError("all sweep points were degenerate; cannot estimate gains")
        return float(np.mean(ratios)), float(np.mean(scales))

    ge_h, _ = sweep_ratios(
        [(EyeState(theta_h=v), SensorPose(), v) for v in eye_sweep if v != 0.0], 0
    )
    ge_v, _ = sweep_ratios(
        [(EyeState(theta_v=v), SensorPose(), v) for v in eye_sweep if v != 0.0], 1
    )
    gs_h, ppm_h = sweep_ratios(
        [(EyeState(), SensorPose(dx=v), v) for v in pose_sweep if v != 0.0], 0
    )
    gs_v, ppm_v = sweep_ratios(
        [(EyeState(), SensorPose(dy=v), v) for v in pose_sweep if v != 0.0], 1
    )

    return GainModel(
        g_e=(ge_h, ge_v),
        g_s=(gs_h, gs_v),
        px_per_mm=(ppm_h, ppm_v),
        ref_pc=tuple(ref.pc_px),
        ref_glints=ref_glints,
    )


def estimate_sensor_shift(
    features: TrackedFeatures, gains: GainModel, max_shift_mm: float = 5.0
) -> ShiftEstimate:
    """Separate the sensor part of the measured displacements, per axis.

    Requires valid features (the stream-level tracker handles carry-forward of
    stale estimates).  Estimates beyond ``max_shift_mm`` in magnitude are
    flagged unreliable.
    """
    if not (features.pc_valid and features.cr_valid):
        raise ValueError("cannot estimate sensor shift from invalid features")
    matched = _nearest_reference_glint(features.cr_px, gains.ref_glints)
    out = []
    for axis in range(2):
        d_pc = features.pc_px[axis] - gains.ref_pc[axis]
        d_cr = features.cr_px[axis] - matched[axis]
        pc_s = (d_cr - d_pc * gains.g_e[axis]) / (gains.g_s[axis] - gains.g_e[axis])
        out.append(pc_s / gains.px_per_mm[axis])
    unreliable = bool(max(abs(out[0]), abs(out[1])) > max_shift_mm)
    return ShiftEstimate(out[0], out[1], features.t, unreliable)


class ShiftTracker:
    """Stream-level shift estimation with carry-forward on invalid frames.

    Holds the last adopted estimate; frames with missing features (or
    estimates flagged unreliable) return the previous value marked stale.
    Single-writer: not safe for concurrent updates.
    """

    def __init__(self, gains: GainModel, max_shift_mm: float = 5.0):
        self.gains = gains
        self.max_shift_mm = max_shift_mm
        self._last = ShiftEstimate(0.0, 0.0, 0.0)

    def update(self, features: TrackedFeatures) -> tuple[ShiftEstimate, bool]:
        """Returns (estimate, fresh). ``fresh`` is False for carried-forward values."""
        if features.pc_valid and features.cr_valid:
            est = estimate_sensor_shift(features, self.gains, self.max_shift_mm)
            if not est.unreliable:
                self._last = est
                return est, True
        self._last = replace(self._last, t=features.t)
        return self._last, False


CSV_HEADER = ["t", "pc_x", "pc_y", "cr_x", "cr_y", "shift_h_mm", "shift_v_mm", "valid"]


@dataclass
class VogStream:
    """Column-oriented camera-channel stream (one row per processed frame)."""

    t: np.ndarray
    pc_x: np.ndarray
    pc_y: np.ndarray
    cr_x: np.ndarray
    cr_y: np.ndarray
    shift_h: np.ndarray
    shift_v: np.ndarray
    valid: np.ndarray  # bool: this row's estimate is fresh, not carried forward

    def __len__(self) -> int:
        return len(self.t)

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for k in range(len(self)):
                writer.writerow(
                    [
                        repr(float(self.t[k])),
                        repr(float(self.pc_x[k])),
                        repr(float(self.pc_y[k])),
                        repr(float(self.cr_x[k])),
                        repr(float(self.cr_y[k])),
                        repr(float(self.shift_h[k])),
                        repr(float(self.shift_v[k])),
                        int(self.valid[k]),
                    ]
                )

    @classmethod
    def read_csv(cls, path) -> "VogStream":
        from .psog import _read_csv_rows

        rows = _read_csv_rows(path, CSV_HEADER)
        data = np.asarray(rows, dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(CSV_HEADER))
        return cls(
            t=data[:, 0],
            pc_x=data[:, 1],
            pc_y=data[:, 2],
            cr_x=data[:, 3],
            cr_y=data[:, 4],
            shift_h=data[:, 5],
            shift_v=data[:, 6],
            valid=data[:, 7].astype(bool),
        )
