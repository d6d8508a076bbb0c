"""Scenario generation, fixation metrics and the end-to-end pipeline runner.

A scenario is a high-rate ground-truth eye track (piecewise-constant targets,
optionally smoothed with minimum-jerk transitions) plus a list of
piecewise-constant sensor-shift events.  Two generators are provided:

* a jumping-point protocol: a horizontal phase of fixations at +/-2.5, 5,
  7.5, 10 degrees (four one-second fixations per amplitude), then the same
  vertically; 36 s total with lead-in/gap/tail rest at centre;
* a reading-like protocol: seeded staircases of short fixations sweeping
  left to right, stepping down line by line, inside +/-10 deg horizontally
  and +/-5 deg vertically.

Metrics follow the fixation convention: per fixation, accuracy is the mean
absolute error per axis; crosstalk (jumping-point protocol only) is the
off-axis output excursion as a percentage of the on-axis stimulus.  Segment
axis context is inferred from the ground truth itself: an axis is active in a
fixation when its mean magnitude is at least 0.5 deg.

The pipeline runner produces the camera stream by rendering frames at the
camera rate and the photosensor stream either from a scan-table interpolator
(fast mode) or by rendering every high-rate sample (exact mode), then applies
fusion in shift-aware ("corrected") and/or shift-blind ("traditional") form.
Both forms consume the identical input streams, so paired comparisons see the
same simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import calib as calib_mod
from . import fusion as fusion_mod
from . import scene as scene_mod
from . import vog as vog_mod
from .calib import CalibGrid, CalibModel
from .fusion import GazeStream, StreamConfig
from .psog import PhotosensorLayout, PsogStream, psog_sample
from .scan import ScanTable, TableInterpolator
from .scene import EyeState, SceneConfig, SensorPose
from .vog import GainModel, ShiftTracker, VogConfig, VogStream, track_features

__all__ = [
    "ShiftEvent",
    "Scenario",
    "FixationSegment",
    "FixationMetrics",
    "MetricsReport",
    "PipelineSetup",
    "ExperimentResult",
    "gen_hv_scenario",
    "gen_reading_scenario",
    "hv_shift_events",
    "segment_fixations",
    "run_experiment",
    "shift_estimation_sweep",
    "calib_grid_from_table",
    "vog_estimated_positions",
    "shift_grid_experiment",
]

ON_AXIS_MIN_DEG = 0.5  # |mean truth| below this means the axis is not active in a fixation


@dataclass(frozen=True)
class ShiftEvent:
    """One piecewise-constant sensor translation: active on [start, start + duration)."""

    start: float
    duration: float
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("shift event duration must be positive")


@dataclass(frozen=True)
class Scenario:
    """Ground-truth stimulus: eye track at the high rate plus shift events.

    ``target_h/target_v`` hold the piecewise-constant fixation targets used
    for segmentation; ``theta_h/theta_v`` are the actual eye positions (equal
    to the targets unless transitions were smoothed).
    """

    label: str
    f_psog: float
    theta_h: np.ndarray
    theta_v: np.ndarray
    target_h: np.ndarray
    target_v: np.ndarray
    shift_events: tuple = ()
    phases: tuple = ()  # optional ("h"|"v", start_s, end_s) stimulus phase windows

    def __len__(self) -> int:
        return len(self.theta_h)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) / self.f_psog

    @property
    def duration(self) -> float:
        return len(self) / self.f_psog

    def shift_at(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-constant shift (dx, dy) sampled at ``times``; events add."""
        times = np.asarray(times, dtype=float)
        dx = np.zeros_like(times)
        dy = np.zeros_like(times)
        for ev in self.shift_events:
            active = (times >= ev.start) & (times < ev.start + ev.duration)
            dx[active] += ev.dx
            dy[active] += ev.dy
        return dx, dy


def _min_jerk_segment(n: int, x0: float, x1: float) -> np.ndarray:
    tau = np.linspace(0.0, 1.0, n, endpoint=False)
    s = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    return x0 + (x1 - x0) * s


def _profile_track(target: np.ndarray, f: float, profile: str) -> np.ndarray:
    """Replace instantaneous target steps with minimum-jerk transitions."""
    if profile == "step":
        return target.copy()
    if profile != "minjerk":
        raise ValueError("saccade profile must be 'step' or 'minjerk'")
    out = target.copy()
    steps = np.nonzero(np.diff(target) != 0.0)[0]
    for idx in steps:
        x0, x1 = target[idx], target[idx + 1]
        # duration grows with amplitude: 25 ms + 2.5 ms/deg
        n = int(round((0.025 + 0.0025 * abs(x1 - x0)) * f))
        n = min(n, len(target) - idx - 1)
        if n > 0:
            out[idx + 1 : idx + 1 + n] = _min_jerk_segment(n, x0, x1)
    return out


def gen_hv_scenario(
    amplitudes=(2.5, 5.0, 7.5, 10.0),
    dwell: float = 1.0,
    f_psog: float = 1000.0,
    lead: float = 1.0,
    gap: float = 1.0,
    tail: float = 2.0,
    saccade_profile: str = "step",
) -> Scenario:
    """Jumping-point protocol: horizontal phase then vertical phase.

    Each amplitude contributes four fixations (+a, -a, +a, -a) of ``dwell``
    seconds, so the defaults give 16 fixations per phase and a 36 s track
    including the rest periods at centre.
    """
    jumps = []
    for a in amplitudes:
        jumps.extend([a, -a, a, -a])
    n_dwell = int(round(dwell * f_psog))
    phase_len = len(jumps) * n_dwell

    def phase_track(values):
        return np.repeat(np.asarray(values, dtype=float), n_dwell)

    n_lead = int(round(lead * f_psog))
    n_gap = int(round(gap * f_psog))
    n_tail = int(round(tail * f_psog))
    zeros = np.zeros
    target_h = np.concatenate(
        [zeros(n_lead), phase_track(jumps), zeros(n_gap + phase_len + n_tail)]
    )
    target_v = np.concatenate(
        [zeros(n_lead + phase_len + n_gap), phase_track(jumps), zeros(n_tail)]
    )
    h_phase = ("h", lead, lead + phase_len / f_psog)
    v_phase = ("v", lead + phase_len / f_psog + gap, lead + 2 * phase_len / f_psog + gap)
    return Scenario(
        label="hv",
        f_psog=f_psog,
        theta_h=_profile_track(target_h, f_psog, saccade_profile),
        theta_v=_profile_track(target_v, f_psog, saccade_profile),
        target_h=target_h,
        target_v=target_v,
        phases=(h_phase, v_phase),
    )


def gen_reading_scenario(
    duration: float = 10.0,
    lines: int = 4,
    seed: int = 0,
    f_psog: float = 1000.0,
    saccade_profile: str = "step",
) -> Scenario:
    """Reading-like staircases: short fixations stepping rightward, line by line.

    Horizontal positions stay within +/-10 deg, vertical within +/-5 deg.
    Fixation durations and step sizes are drawn from a seeded generator, so
    the track is reproducible.
    """
    rng = np.random.default_rng(seed)
    n_total = int(round(duration * f_psog))
    v_levels = np.linspace(-4.0, 4.0, max(lines, 2))
    h_vals: list[float] = []
    v_vals: list[float] = []
    line = 0
    h = -8.0
    filled = 0
    while filled < n_total:
        n_fix = int(round(rng.uniform(0.18, 0.30) * f_psog))
        n_fix = min(n_fix, n_total - filled)
        h_vals.extend([h] * n_fix)
        v_vals.extend([float(v_levels[line % len(v_levels)])] * n_fix)
        filled += n_fix
        h += float(rng.uniform(2.0, 4.0))
        if h > 8.0:
            h = -8.0
            line += 1
    target_h = np.asarray(h_vals)
    target_v = np.asarray(v_vals)
    return Scenario(
        label="tx",
        f_psog=f_psog,
        theta_h=_profile_track(target_h, f_psog, saccade_profile),
        theta_v=_profile_track(target_v, f_psog, saccade_profile),
        target_h=target_h,
        target_v=target_v,
    )


def hv_shift_events(
    scenario: Scenario, magnitude_mm: float, direction: str = "same", duration: float = 4.0
) -> Scenario:
    """Attach one shift event per stimulus phase, at the largest-amplitude fixations.

    ``direction='same'`` shifts along each phase's own axis (horizontal shift
    during horizontal eye movements); ``'cross'`` swaps the axes.
    """
    if not scenario.phases:
        raise ValueError("scenario carries no phase windows; cannot place shift events")
    if direction not in ("same", "cross"):
        raise ValueError("direction must be 'same' or 'cross'")
    events = []
    for axis, start, end in scenario.phases:
        ev_start = max(end - duration, start)
        ev_axis = axis if direction == "same" else ("v" if axis == "h" else "h")
        events.append(
            ShiftEvent(
                start=ev_start,
                duration=min(duration, end - ev_start),
                dx=magnitude_mm if ev_axis == "h" else 0.0,
                dy=magnitude_mm if ev_axis == "v" else 0.0,
            )
        )
    return replace(scenario, shift_events=tuple(events))


@dataclass(frozen=True)
class FixationSegment:
    """One trimmed fixation: sample range [i0, i1), axis context and timing."""

    i0: int
    i1: int
    t_start: float
    t_end: float
    axis: str  # 'h', 'v', 'both' or 'none'
    mean_h: float
    mean_v: float


def segment_fixations(
    t: np.ndarray,
    target_h: np.ndarray,
    target_v: np.ndarray,
    trim_s: float = 0.1,
    f: float | None = None,
):
    """Split a piecewise-constant ground-truth track into trimmed fixations.

    Each constant plateau of the (target_h, target_v) pair becomes one
    segment with ``trim_s`` removed from both ends.  Plateaus shorter than
    twice the trim are dropped; the second return value counts them.
    """
    t = np.asarray(t, dtype=float)
    if f is None:
        f = 1.0 / (t[1] - t[0]) if len(t) > 1 else 1.0
    trim_n = int(round(trim_s * f))
    changes = np.nonzero((np.diff(target_h) != 0.0) | (np.diff(target_v) != 0.0))[0] + 1
    bounds = np.concatenate([[0], changes, [len(t)]])
    segments = []
    dropped = 0
    for k in range(len(bounds) - 1):
        i0, i1 = int(bounds[k]) + trim_n, int(bounds[k + 1]) - trim_n
        if i1 <= i0:
            dropped += 1
            continue
        mh = float(np.mean(target_h[i0:i1]))
        mv = float(np.mean(target_v[i0:i1]))
        h_on, v_on = abs(mh) >= ON_AXIS_MIN_DEG, abs(mv) >= ON_AXIS_MIN_DEG
        axis = "both" if (h_on and v_on) else "h" if h_on else "v" if v_on else "none"
        segments.append(FixationSegment(i0, i1, float(t[i0]), float(t[i1 - 1]), axis, mh, mv))
    return segments, dropped


@dataclass(frozen=True)
class FixationMetrics:
    """Per-fixation error metrics; crosstalk entries are None when undefined."""

    index: int
    axis: str
    t_start: float
    t_end: float
    acc_h: float
    acc_v: float
    cross_hv: float | None
    cross_vh: float | None
    during_shift: bool


@dataclass
class MetricsReport:
    """Per-fixation metrics plus aggregates recomputed on demand from them."""

    label: str
    mode: str
    fixations: list
    dropped_segments: int = 0

    def _values(self, attr: str, axes: tuple, during_shift: bool | None = None):
        out = []
        for fm in self.fixations:
            if fm.axis not in axes:
                continue
            if during_shift is not None and fm.during_shift != during_shift:
                continue
            v = getattr(fm, attr)
            if v is not None:
                out.append(v)
        return np.asarray(out, dtype=float)

    def accuracy_values(self, axis: str, during_shift: bool | None = None) -> np.ndarray:
        """Per-fixation accuracy for one axis, over fixations where that axis is active."""
        attr = "acc_h" if axis == "h" else "acc_v"
        return self._values(attr, (axis, "both"), during_shift)

    def crosstalk_values(self, kind: str) -> np.ndarray:
        """kind 'hv': horizontal leakage during vertical fixations; 'vh' the converse."""
        if kind == "hv":
            return self._values("cross_hv", ("v",))
        if kind == "vh":
            return self._values("cross_vh", ("h",))
        raise ValueError("crosstalk kind must be 'hv' or 'vh'")

    @staticmethod
    def _mean_sd(values: np.ndarray) -> tuple[float, float]:
        if len(values) == 0:
            return float("nan"), float("nan")
        return float(np.mean(values)), float(np.std(values))

    def summary(self) -> dict:
        out = {
            "label": self.label,
            "mode": self.mode,
            "n_fixations": len(self.fixations),
            "dropped_segments": self.dropped_segments,
        }
        for axis in ("h", "v"):
            m, s = self._mean_sd(self.accuracy_values(axis))
            out[f"acc_{axis}_mean_deg"], out[f"acc_{axis}_sd_deg"] = m, s
            m, s = self._mean_sd(self.accuracy_values(axis, during_shift=True))
            out[f"acc_{axis}_shifted_mean_deg"], out[f"acc_{axis}_shifted_sd_deg"] = m, s
        for kind in ("hv", "vh"):
            m, s = self._mean_sd(self.crosstalk_values(kind))
            out[f"cross_{kind}_mean_pct"], out[f"cross_{kind}_sd_pct"] = m, s
        return out


def compute_metrics(
    output: GazeStream,
    truth_h: np.ndarray,
    truth_v: np.ndarray,
    segments,
    dropped: int,
    shift_dx: np.ndarray,
    shift_dy: np.ndarray,
    label: str,
    mode: str,
) -> MetricsReport:
    """Fixation accuracy and crosstalk for one pipeline output against ground truth.

    Crosstalk for a single-axis fixation is the mean off-axis deviation of the
    output as a percentage of the mean on-axis stimulus; fixations whose
    on-axis stimulus mean falls below 0.5 deg are excluded (division guard).
    A fixation counts as "during shift" when a nonzero shift covers its whole
    trimmed span.
    """
    fixations = []
    for idx, seg in enumerate(segments):
        sl = slice(seg.i0, seg.i1)
        err_h = output.gaze_h[sl] - truth_h[sl]
        err_v = output.gaze_v[sl] - truth_v[sl]
        acc_h = float(np.mean(np.abs(err_h)))
        acc_v = float(np.mean(np.abs(err_v)))
        cross_hv = cross_vh = None
        if seg.axis == "v" and abs(seg.mean_v) >= ON_AXIS_MIN_DEG:
            cross_hv = float(
                abs(np.mean(output.gaze_h[sl]) - np.mean(truth_h[sl])) / abs(seg.mean_v) * 100.0
            )
        if seg.axis == "h" and abs(seg.mean_h) >= ON_AXIS_MIN_DEG:
            cross_vh = float(
                abs(np.mean(output.gaze_v[sl]) - np.mean(truth_v[sl])) / abs(seg.mean_h) * 100.0
            )
        shifted = bool(
            np.all((np.abs(shift_dx[sl]) > 0.0) | (np.abs(shift_dy[sl]) > 0.0))
        )
        fixations.append(
            FixationMetrics(
                idx, seg.axis, seg.t_start, seg.t_end, acc_h, acc_v, cross_hv, cross_vh, shifted
            )
        )
    return MetricsReport(label=label, mode=mode, fixations=fixations, dropped_segments=dropped)


@dataclass(frozen=True)
class PipelineSetup:
    """Everything a pipeline run needs besides the scenario itself."""

    scene: SceneConfig
    layout: PhotosensorLayout
    vog: VogConfig
    stream: StreamConfig
    gains: GainModel
    model: CalibModel
    table: ScanTable | None = None
    interpolator: TableInterpolator | None = field(default=None, compare=False)

    def get_interpolator(self) -> TableInterpolator:
        if self.interpolator is not None:
            return self.interpolator
        if self.table is None:
            raise ValueError("fast mode needs a scan table in the pipeline setup")
        interp = TableInterpolator(self.table)
        object.__setattr__(self, "interpolator", interp)
        return interp


@dataclass
class ExperimentResult:
    scenario: Scenario
    truth_h: np.ndarray
    truth_v: np.ndarray
    shift_dx: np.ndarray
    shift_dy: np.ndarray
    vog_stream: VogStream
    psog_stream: PsogStream
    segments: list
    corrected: GazeStream | None = None
    traditional: GazeStream | None = None
    corrected_metrics: MetricsReport | None = None
    traditional_metrics: MetricsReport | None = None

    def metrics(self, mode: str) -> MetricsReport:
        report = self.corrected_metrics if mode == "corrected" else self.traditional_metrics
        if report is None:
            raise ValueError(f"mode {mode!r} was not run")
        return report


def _render_vog_stream(scenario: Scenario, setup: PipelineSetup) -> VogStream:
    f_vog = setup.stream.f_vog
    n_frames = int(np.floor((len(scenario) - 1) / scenario.f_psog * f_vog)) + 1
    times = np.arange(n_frames) / f_vog
    idx = np.round(times * scenario.f_psog).astype(int)
    dx, dy = scenario.shift_at(times)
    tracker = ShiftTracker(setup.gains, setup.vog.max_shift_mm)
    rows = {k: [] for k in ("pc_x", "pc_y", "cr_x", "cr_y", "shift_h", "shift_v", "valid")}
    for k in range(n_frames):
        eye = EyeState(theta_h=float(scenario.theta_h[idx[k]]), theta_v=float(scenario.theta_v[idx[k]]))
        frame = scene_mod.render_frame(eye, SensorPose(dx=float(dx[k]), dy=float(dy[k])), setup.scene)
        feats = track_features(frame, setup.vog, t=float(times[k]))
        est, fresh = tracker.update(feats)
        rows["pc_x"].append(feats.pc_px[0])
        rows["pc_y"].append(feats.pc_px[1])
        rows["cr_x"].append(feats.cr_px[0])
        rows["cr_y"].append(feats.cr_px[1])
        rows["shift_h"].append(est.x_h)
        rows["shift_v"].append(est.x_v)
        rows["valid"].append(fresh)
    return VogStream(
        t=times, **{k: np.asarray(v, dtype=float) for k, v in rows.items() if k != "valid"},
        valid=np.asarray(rows["valid"], dtype=bool),
    )


def _psog_stream_fast(scenario: Scenario, setup: PipelineSetup) -> PsogStream:
    dx, dy = scenario.shift_at(scenario.t)
    interp = setup.get_interpolator()
    pd = np.stack(
        [interp.evaluate(f"i_pd{k}", scenario.theta_h, scenario.theta_v, dx, dy) for k in range(1, 5)],
        axis=1,
    )
    i_h, i_v = interp.signals(scenario.theta_h, scenario.theta_v, dx, dy)
    return PsogStream(t=scenario.t, i_pd=pd, i_h=i_h, i_v=i_v)


def _psog_stream_exact(scenario: Scenario, setup: PipelineSetup) -> PsogStream:
    dx, dy = scenario.shift_at(scenario.t)
    samples = []
    for k in range(len(scenario)):
        eye = EyeState(theta_h=float(scenario.theta_h[k]), theta_v=float(scenario.theta_v[k]))
        frame = scene_mod.render_frame(eye, SensorPose(dx=float(dx[k]), dy=float(dy[k])), setup.scene)
        samples.append(psog_sample(frame, setup.layout, setup.scene, t=float(scenario.t[k])))
    return PsogStream.from_samples(samples)


def run_experiment(
    scenario: Scenario,
    setup: PipelineSetup,
    mode: str = "both",
    eval_mode: str = "fast",
    trim_s: float = 0.1,
) -> ExperimentResult:
    """Simulate one scenario end to end and compute fixation metrics.

    ``mode`` selects shift-aware correction, shift-blind traditional
    operation, or both; in 'both' the two share the same simulated streams.
    ``eval_mode`` 'fast' interpolates the photosensor channel from the scan
    table, 'exact' renders every high-rate sample.
    """
    if mode not in ("corrected", "traditional", "both"):
        raise ValueError("mode must be 'corrected', 'traditional' or 'both'")
    if eval_mode not in ("fast", "exact"):
        raise ValueError("eval_mode must be 'fast' or 'exact'")

    vog_stream = _render_vog_stream(scenario, setup)
    psog_stream = (
        _psog_stream_fast(scenario, setup) if eval_mode == "fast" else _psog_stream_exact(scenario, setup)
    )
    segments, dropped = segment_fixations(
        scenario.t, scenario.target_h, scenario.target_v, trim_s, scenario.f_psog
    )
    shift_dx, shift_dy = scenario.shift_at(scenario.t)
    result = ExperimentResult(
        scenario=scenario,
        truth_h=scenario.theta_h,
        truth_v=scenario.theta_v,
        shift_dx=shift_dx,
        shift_dy=shift_dy,
        vog_stream=vog_stream,
        psog_stream=psog_stream,
        segments=segments,
    )

    def metrics_for(stream: GazeStream, run_mode: str) -> MetricsReport:
        return compute_metrics(
            stream,
            scenario.theta_h,
            scenario.theta_v,
            segments,
            dropped,
            shift_dx,
            shift_dy,
            scenario.label,
            run_mode,
        )

    if mode in ("corrected", "both"):
        result.corrected = fusion_mod.correct(psog_stream, vog_stream, setup.model, setup.stream)
        result.corrected_metrics = metrics_for(result.corrected, "corrected")
    if mode in ("traditional", "both"):
        zero_vog = VogStream(
            t=vog_stream.t,
            pc_x=vog_stream.pc_x,
            pc_y=vog_stream.pc_y,
            cr_x=vog_stream.cr_x,
            cr_y=vog_stream.cr_y,
            shift_h=np.zeros_like(vog_stream.shift_h),
            shift_v=np.zeros_like(vog_stream.shift_v),
            valid=np.ones_like(vog_stream.valid, dtype=bool),
        )
        result.traditional = fusion_mod.correct(psog_stream, zero_vog, setup.model, setup.stream)
        result.traditional_metrics = metrics_for(result.traditional, "traditional")
    return result


def calib_grid_from_table(
    table: ScanTable, eye_positions=(-10.0, 0.0, 10.0), sensor_positions=(-2.0, 0.0, 2.0)
) -> CalibGrid:
    """Assemble the calibration grid from scan-table states (exact on grid nodes)."""
    interp = TableInterpolator(table)
    eye = np.asarray(eye_positions, dtype=float)
    raw_h = np.empty((len(sensor_positions), len(eye)))
    raw_v = np.empty_like(raw_h)
    for j, s in enumerate(sensor_positions):
        raw_h[j] = interp.evaluate("i_h", eye, 0.0, float(s), 0.0)
        raw_v[j] = interp.evaluate("i_v", 0.0, eye, 0.0, float(s))
    return CalibGrid(
        eye_positions=tuple(float(e) for e in eye),
        sensor_positions=tuple(float(s) for s in sensor_positions),
        raw_h=raw_h,
        raw_v=raw_v,
    )


def vog_estimated_positions(setup: PipelineSetup, sensor_positions, axis: str) -> np.ndarray:
    """Camera-based estimates of nominal sensor positions (neutral eye), one per position."""
    out = []
    for s in sensor_positions:
        pose = SensorPose(dx=float(s)) if axis == "h" else SensorPose(dy=float(s))
        frame = scene_mod.render_frame(EyeState(), pose, setup.scene)
        feats = track_features(frame, setup.vog)
        est = vog_mod.estimate_sensor_shift(feats, setup.gains, setup.vog.max_shift_mm)
        out.append(est.x_h if axis == "h" else est.x_v)
    return np.asarray(out, dtype=float)


def auto_calibrate(setup: PipelineSetup, grid: CalibGrid) -> CalibModel:
    """Refit the calibration with camera-estimated sensor positions."""
    est_h = vog_estimated_positions(setup, grid.sensor_positions, "h")
    est_v = vog_estimated_positions(setup, grid.sensor_positions, "v")
    return calib_mod.fit_auto(grid, est_h, est_v)


def shift_estimation_sweep(
    setup: PipelineSetup,
    shifts_mm=(-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75),
    eye_positions=((0.0, 0.0), (7.5, 0.0), (-7.5, 0.0), (0.0, 7.5), (0.0, -7.5)),
):
    """Estimation error over a grid of true shifts and representative eye positions.

    Returns a list of dicts with axis, true shift, eye state and the estimate.
    """
    rows = []
    for axis in ("h", "v"):
        for s in shifts_mm:
            for th, tv in eye_positions:
                pose = SensorPose(dx=float(s)) if axis == "h" else SensorPose(dy=float(s))
                frame = scene_mod.render_frame(EyeState(theta_h=th, theta_v=tv), pose, setup.scene)
                feats = track_features(frame, setup.vog)
                est = vog_mod.estimate_sensor_shift(feats, setup.gains, setup.vog.max_shift_mm)
                estimate = est.x_h if axis == "h" else est.x_v
                rows.append(
                    {
                        "axis": axis,
                        "true_mm": float(s),
                        "theta_h": float(th),
                        "theta_v": float(tv),
                        "estimate_mm": float(estimate),
                        "error_mm": float(estimate - s),
                    }
                )
    return rows


def shift_grid_experiment(
    setup: PipelineSetup,
    magnitudes=(-1.75, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 1.75),
    direction: str = "same",
    eval_mode: str = "fast",
    trim_s: float = 0.1,
    scenario: Scenario | None = None,
    shift_duration: float = 4.0,
):
    """Paired corrected/traditional runs across a grid of shift magnitudes.

    Returns a list of dicts, one per magnitude, with during-shift mean
    accuracy per axis and mode.
    """
    base = scenario if scenario is not None else gen_hv_scenario(f_psog=setup.stream.f_psog)
    rows = []
    for s in magnitudes:
        shifted = hv_shift_events(base, float(s), direction=direction, duration=shift_duration)
        result = run_experiment(shifted, setup, mode="both", eval_mode=eval_mode, trim_s=trim_s)
        row = {"shift_mm": float(s), "direction": direction}
        for mode in ("corrected", "traditional"):
            report = result.metrics(mode)
            for axis in ("h", "v"):
                vals = report.accuracy_values(axis, during_shift=True)
                row[f"{mode}_acc_{axis}_mean_deg"] = float(np.mean(vals)) if len(vals) else float("nan")
                row[f"{mode}_acc_{axis}_sd_deg"] = float(np.std(vals)) if len(vals) else float("nan")
        rows.append(row)
    return rows
