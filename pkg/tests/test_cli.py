"""End-to-end command-line exercises, run in-process against temp directories."""

import os

import numpy as np
import pytest

from eyeshift import config as config_mod
from eyeshift.calib import load_model
from eyeshift.cli import MODEL_FILE, SCAN_FILE, _scan_comment, main
from eyeshift.scan import count_rows, save_table
from eyeshift.scene import read_pgm

SMALL_SCAN_INI = """\
[scan]
eye_range = 2.0
eye_step = 1.0
shift_range = 1.0
shift_step = 1.0
"""


def _seed_scan(directory, table) -> None:
    save_table(table, directory / SCAN_FILE, header_comment=_scan_comment(config_mod.defaults()))


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory, scan_table):
    """Artifact directory seeded with the session scan table plus a fitted model."""
    d = tmp_path_factory.mktemp("cli_pipeline")
    _seed_scan(d, scan_table)
    assert main(["--out", str(d), "calibrate"]) == 0
    return d


def test_config_prints_parseable_defaults(capsys):
    assert main(["config"]) == 0
    out = capsys.readouterr().out
    assert config_mod.from_ini(out) == config_mod.defaults()


def test_config_write_roundtrips(tmp_path, capsys):
    path = tmp_path / "cfg.ini"
    assert main(["config", "--write", str(path)]) == 0
    assert config_mod.load_config(path) == config_mod.defaults()


def test_render_writes_image_and_truth_sidecar(tmp_path, capsys):
    rc = main(["--out", str(tmp_path), "render", "--theta-h", "5.0", "--name", "probe"])
    assert rc == 0
    frame = read_pgm(tmp_path / "probe.pgm")
    assert frame.intensities.shape == (240, 320)
    truth = (tmp_path / "probe_truth.txt").read_text()
    assert "theta_h_deg = 5.0" in truth
    assert "pupil_px = " in truth and "glint0_px = " in truth


def test_scan_builds_resumes_and_guards_config(tmp_path, capsys):
    ini = tmp_path / "small.ini"
    ini.write_text(SMALL_SCAN_INI)
    out = tmp_path / "art"
    assert main(["--config", str(ini), "--out", str(out), "scan"]) == 0
    path = out / SCAN_FILE
    assert count_rows(path) == 30  # 2 slices x 5 eye angles x 3 shifts
    complete = path.read_bytes()

    # drop the last 20 data rows and let the command fill them back in
    lines = complete.decode().splitlines(keepends=True)
    path.write_text("".join(lines[:12]))
    assert count_rows(path) == 10
    assert main(["--config", str(ini), "--out", str(out), "scan"]) == 0
    assert path.read_bytes() == complete

    # a scan produced under different geometry must be rejected, not reused
    other = tmp_path / "other.ini"
    other.write_text(SMALL_SCAN_INI + "\n[scene]\nfov = 46.0\n")
    rc = main(["--config", str(other), "--out", str(out), "scan"])
    assert rc == 2
    assert "different configuration" in capsys.readouterr().err


def test_calibrate_writes_model_and_curves(pipeline_dir):
    model = load_model(pipeline_dir / MODEL_FILE)
    assert model.axis("h").eye_domain == (-10.0, 10.0)
    png = (pipeline_dir / "calibration_curves.png").read_bytes()
    assert png.startswith(b"\x89PNG")


def test_calibrate_auto_records_estimated_positions(tmp_path, scan_table, capsys):
    d = tmp_path / "auto"
    d.mkdir()
    _seed_scan(d, scan_table)
    assert main(["--out", str(d), "calibrate", "--auto"]) == 0
    text = (d / "calib_positions.csv").read_text().splitlines()
    assert text[1] == "axis,true_mm,estimated_mm"
    rows = [line.split(",") for line in text[2:]]
    assert len(rows) == 6  # three nominal positions per axis
    for axis, true_mm, est_mm in rows:
        assert abs(float(est_mm) - float(true_mm)) < 0.15
    assert "auto-vs-truth coefficient delta" in capsys.readouterr().out


def test_sweep_reports_small_errors(pipeline_dir, capsys):
    # note the = form: a bare "-1.0,1.0" token would read as an option
    rc = main(["--out", str(pipeline_dir), "sweep", "--shifts=-1.0,1.0"])
    assert rc == 0
    assert (pipeline_dir / "estimation_sweep.png").exists()
    lines = (pipeline_dir / "estimation_sweep.csv").read_text().splitlines()
    assert lines[1] == "axis,true_mm,theta_h,theta_v,estimate_mm,error_mm"
    errs = [abs(float(line.split(",")[-1])) for line in lines[2:]]
    assert len(errs) == 20 and max(errs) < 0.3


def test_run_produces_artifacts_and_is_deterministic(pipeline_dir, capsys):
    argv = ["--out", str(pipeline_dir), "run", "--shift-mm", "1.0"]
    assert main(argv) == 0
    expected = [
        "gaze_corrected.csv",
        "gaze_traditional.csv",
        "fixations_corrected.csv",
        "fixations_traditional.csv",
        "overview_corrected.png",
        "overview_traditional.png",
        "psog.csv",
        "vog.csv",
        "summary.txt",
    ]
    for name in expected:
        assert (pipeline_dir / name).exists(), name
    summary = (pipeline_dir / "summary.txt").read_bytes()
    assert b"[hv/corrected]" in summary and b"[hv/traditional]" in summary
    stdout = capsys.readouterr().out
    assert "run: hv/corrected acc h" in stdout

    assert main(argv) == 0
    assert (pipeline_dir / "summary.txt").read_bytes() == summary


def test_run_threshold_checks_drive_exit_code(pipeline_dir, tmp_path, capsys):
    ini = tmp_path / "limits.ini"
    ini.write_text("[run]\nacc_limit_deg = 0.01\ncross_limit_pct = 0.01\n")
    rc = main(["--config", str(ini), "--out", str(pipeline_dir), "run"])
    stdout = capsys.readouterr().out
    assert rc == 1
    assert "[FAIL]" in stdout and "check: accuracy" in stdout

    ini.write_text("[run]\nacc_limit_deg = 1.0\ncross_limit_pct = 15.0\n")
    rc = main(["--config", str(ini), "--out", str(pipeline_dir), "run"])
    stdout = capsys.readouterr().out
    assert rc == 0
    assert "[PASS]" in stdout and "[FAIL]" not in stdout


def test_run_shift_grid_compares_modes(pipeline_dir, tmp_path, capsys):
    ini = tmp_path / "lowrate.ini"
    ini.write_text("[fusion]\nf_psog = 200.0\n")
    rc = main(["--config", str(ini), "--out", str(pipeline_dir), "run", "--shift-grid=-1.0,1.0"])
    assert rc == 0
    lines = (pipeline_dir / "shift_grid.csv").read_text().splitlines()
    header = lines[1].split(",")
    assert header[0] == "shift_mm"
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    assert len(rows) == 2
    for row in rows:
        assert float(row["traditional_acc_h_mean_deg"]) > float(row["corrected_acc_h_mean_deg"])
    assert (pipeline_dir / "accuracy_vs_shift.png").exists()


def test_unknown_config_file_exits_2(tmp_path, capsys):
    rc = main(["--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path), "config"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
