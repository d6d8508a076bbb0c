"""Desk-scale simulator for hybrid photosensor + camera eye tracking.

The package models a single eye, a fixed camera/illuminator/photosensor
assembly that can translate in its mounting plane, and the processing chain
that keeps gaze estimates usable when that translation happens: high-rate
photosensor sampling, low-rate camera feature tracking, sensor-shift
estimation from the pupil/reflection displacement split, a shift-aware
composite calibration, and multirate fusion of the two streams.
"""

from .calib import CalibGrid, CalibModel, FitError, InversionError, fit, fit_auto, forward, invert
from .config import RunConfig, defaults, load_config, save_config
from .experiments import (
    PipelineSetup,
    Scenario,
    ShiftEvent,
    gen_hv_scenario,
    gen_reading_scenario,
    hv_shift_events,
    run_experiment,
    segment_fixations,
    shift_estimation_sweep,
)
from .fusion import FLAG_EXTRAPOLATED, FLAG_STALE_SHIFT, GazeStream, StreamConfig, correct
from .psog import PhotodiodeParams, PhotosensorLayout, PsogStream, psog_sample
from .scan import ScanSpec, ScanTable, TableInterpolator, load_table, run_scan, save_table
from .scene import (
    EyeState,
    Frame,
    FrustumError,
    SceneConfig,
    SensorPose,
    read_pgm,
    render_frame,
    write_pgm,
)
from .vog import (
    GainModel,
    ShiftTracker,
    VogConfig,
    VogStream,
    estimate_gains,
    estimate_sensor_shift,
    track_features,
)

__version__ = "0.1.0"
