"""Photosensor model tests: electrical elements, window kernels, channel signs."""

import math

import numpy as np
import pytest

from eyeshift.psog import (
    BOLTZMANN_J_PER_K,
    ELECTRON_CHARGE_C,
    NoSignalError,
    PhotodiodeParams,
    PhotosensorLayout,
    PsogStream,
    diode_current,
    photocurrent,
    photodiode_output,
    psog_sample,
)
from eyeshift.scene import EyeState, Frame, SensorPose, render_frame


def _synthetic_frame(scene_cfg, fill):
    img = np.asarray(fill, dtype=float)
    img.flags.writeable = False
    return Frame(scene_cfg.width, scene_cfg.height, img)


def test_photocurrent_is_linear_in_power():
    params = PhotodiodeParams(responsivity=0.5)
    assert photocurrent(2e-6, params) == pytest.approx(1e-6, rel=1e-12)
    assert photocurrent(0.0, params) == 0.0
    with pytest.raises(ValueError):
        photocurrent(-1e-9, params)


def test_diode_current_matches_ideal_diode_oracle():
    params = PhotodiodeParams(bias_voltage=0.1, temperature=300.0)
    vt = BOLTZMANN_J_PER_K * 300.0 / ELECTRON_CHARGE_C
    expect = 1e-12 * math.expm1(0.1 / vt)
    assert diode_current(params) == pytest.approx(expect, rel=1e-12)
    assert diode_current(PhotodiodeParams()) == 0.0  # zero bias, zero current
    # deep reverse bias saturates at minus the reverse saturation current
    assert diode_current(PhotodiodeParams(bias_voltage=-5.0)) == pytest.approx(-1e-12, rel=1e-6)


def test_photodiode_params_validation():
    with pytest.raises(ValueError):
        PhotodiodeParams(responsivity=0.0)
    with pytest.raises(ValueError):
        PhotodiodeParams(temperature=-1.0)


def test_layout_validation():
    with pytest.raises(ValueError):
        PhotosensorLayout(window_centers=((0.0, 0.0),))
    with pytest.raises(ValueError):
        # far-apart windows no longer overlap
        PhotosensorLayout(window_centers=((20.0, 0.0), (-20.0, 0.0), (0.0, 20.0), (0.0, -20.0)))
    with pytest.raises(ValueError):
        PhotosensorLayout(window_size=-1.0)


def test_window_output_matches_direct_gaussian_sum(scene_cfg, layout):
    """Brute-force oracle: loop over all pixels, apply the same window maths."""
    rng = np.random.default_rng(7)
    img = rng.uniform(0.0, 1.0, size=(scene_cfg.height, scene_cfg.width))
    frame = _synthetic_frame(scene_cfg, img)
    center = layout.window_centers[0]
    pitch = scene_cfg.fov / scene_cfg.width
    cx = scene_cfg.width / 2.0 + center[0] / pitch
    cy = scene_cfg.height / 2.0 + center[1] / pitch
    half = (layout.window_size / 2.0) / pitch
    sigma = layout.window_size * layout.sigma_ratio / pitch
    num = den = 0.0
    for r in range(scene_cfg.height):
        for c in range(scene_cfg.width):
            du, dv = c + 0.5 - cx, r + 0.5 - cy
            if abs(du) <= half and abs(dv) <= half:
                w = math.exp(-(du * du + dv * dv) / (2.0 * sigma * sigma))
                num += w * img[r, c]
                den += w
    got = photodiode_output(frame, center, layout, scene_cfg)
    assert got == pytest.approx(num / den, rel=1e-12)


def test_uniform_frame_gives_uniform_outputs_and_zero_channels(scene_cfg, layout):
    frame = _synthetic_frame(scene_cfg, np.full((scene_cfg.height, scene_cfg.width), 0.37))
    sample = psog_sample(frame, layout, scene_cfg)
    assert np.allclose(sample.i_pd, 0.37, atol=1e-12)
    assert sample.i_h == pytest.approx(0.0, abs=1e-12)
    assert sample.i_v == pytest.approx(0.0, abs=1e-12)


def test_neutral_rendered_frame_balances_channels(scene_cfg, layout):
    frame = render_frame(EyeState(), SensorPose(), scene_cfg)
    sample = psog_sample(frame, layout, scene_cfg)
    assert abs(sample.i_h) < 1e-6
    assert abs(sample.i_v) < 1e-6


def test_channel_signs_and_crosstalk(scene_cfg, layout):
    """A nasal rotation darkens the nasal window pair, driving i_h negative;
    pure horizontal motion leaves i_v at the symmetry floor.  A downward
    rotation darkens the lower pair, driving i_v (upper minus lower) positive."""
    f_pos = render_frame(EyeState(theta_h=8.0), SensorPose(), scene_cfg)
    f_neg = render_frame(EyeState(theta_h=-8.0), SensorPose(), scene_cfg)
    s_pos = psog_sample(f_pos, layout, scene_cfg)
    s_neg = psog_sample(f_neg, layout, scene_cfg)
    assert s_pos.i_h < -0.05
    assert s_neg.i_h > 0.05
    assert abs(s_pos.i_v) < 1e-6 and abs(s_neg.i_v) < 1e-6

    s_down = psog_sample(render_frame(EyeState(theta_v=8.0), SensorPose(), scene_cfg), layout, scene_cfg)
    assert s_down.i_v > 0.05
    assert abs(s_down.i_h) < 1e-6


def test_sensor_shift_mimics_eye_rotation_sign(scene_cfg, layout):
    # a +dx pose moves the eye image nasally, the same direction as +theta_h
    s_shift = psog_sample(render_frame(EyeState(), SensorPose(dx=1.5), scene_cfg), layout, scene_cfg)
    s_eye = psog_sample(render_frame(EyeState(theta_h=5.0), SensorPose(), scene_cfg), layout, scene_cfg)
    assert s_shift.i_h * s_eye.i_h > 0


def test_monotone_response_over_working_range(scene_cfg, layout):
    values = []
    for th in (-10.0, -5.0, 0.0, 5.0, 10.0):
        frame = render_frame(EyeState(theta_h=th), SensorPose(), scene_cfg)
        values.append(psog_sample(frame, layout, scene_cfg).i_h)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_window_fully_outside_frame_raises(scene_cfg, layout):
    frame = _synthetic_frame(scene_cfg, np.zeros((scene_cfg.height, scene_cfg.width)))
    with pytest.raises(NoSignalError):
        photodiode_output(frame, (60.0, 0.0), layout, scene_cfg)


def test_partially_cropped_window_stays_normalised(scene_cfg, layout):
    frame = _synthetic_frame(scene_cfg, np.full((scene_cfg.height, scene_cfg.width), 0.8))
    # centre near the frame edge: half the window hangs outside
    got = photodiode_output(frame, (21.0, 0.0), layout, scene_cfg)
    assert got == pytest.approx(0.8, rel=1e-12)


def test_frame_size_mismatch_raises(scene_cfg, layout):
    small = Frame(10, 10, np.zeros((10, 10)))
    with pytest.raises(ValueError):
        psog_sample(small, layout, scene_cfg)


def test_stream_csv_roundtrip(tmp_path, scene_cfg, layout):
    frames = [render_frame(EyeState(theta_h=th), SensorPose(), scene_cfg) for th in (0.0, 3.0)]
    samples = [psog_sample(f, layout, scene_cfg, t=k * 0.001) for k, f in enumerate(frames)]
    stream = PsogStream.from_samples(samples)
    path = tmp_path / "psog.csv"
    stream.write_csv(path, header_comment="roundtrip")
    back = PsogStream.read_csv(path)
    assert np.array_equal(back.t, stream.t)
    assert np.array_equal(back.i_pd, stream.i_pd)
    assert np.array_equal(back.i_h, stream.i_h)
    assert np.array_equal(back.i_v, stream.i_v)


def test_stream_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        PsogStream.read_csv(path)
