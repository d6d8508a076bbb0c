"""Command-line interface.

Pipeline stages map to subcommands::

    eyeshift scan        render the signal grid (checkpointed, resumable)
    eyeshift calibrate   fit the composite calibration from the scan table
    eyeshift sweep       sensor-shift estimation accuracy over a shift grid
    eyeshift run         simulate a scenario and report fixation metrics
    eyeshift render      render one frame to PGM with a ground-truth sidecar
    eyeshift config      print or write the INI configuration

Artifacts land in --out (default ``out/``): delimited tables, a text summary
and PNG figures side by side.  Scan tables and calibration models embed a
configuration digest so stale artifacts are rejected instead of silently
reused.  All outputs are deterministic; reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import calib as calib_mod
from . import config as config_mod
from . import report as report_mod
from .experiments import (
    PipelineSetup,
    auto_calibrate,
    calib_grid_from_table,
    gen_hv_scenario,
    gen_reading_scenario,
    hv_shift_events,
    run_experiment,
    shift_estimation_sweep,
    shift_grid_experiment,
)
from .scan import COLUMNS, count_rows, load_table, run_scan, save_table, scan_states
from .scene import EyeState, FrustumError, SensorPose, render_frame, write_pgm
from .vog import estimate_gains

DEFAULT_SHIFT_GRID = "-1.75,-1.5,-1.0,-0.5,0.5,1.0,1.5,1.75"

SCAN_FILE = "scan_table.csv"
MODEL_FILE = "calib_model.txt"


def _load_cfg(args) -> config_mod.RunConfig:
    return config_mod.load_config(args.config) if args.config else config_mod.defaults()


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _scan_comment(cfg) -> str:
    digest = config_mod.config_hash(cfg, ("scene", "photosensor", "scan"))
    return f"eyeshift scan {digest} mode={cfg.scan.mode}"


def _check_scan_header(path, expected: str) -> None:
    with open(path) as fh:
        first = fh.readline().strip()
    if first != f"# {expected}":
        raise ValueError(
            f"{path} was produced under a different configuration "
            f"(header {first!r}, expected {expected!r}); delete it or fix the config"
        )


def _ensure_scan(cfg, out: str, jobs: int, verbose: bool = True):
    """Build or resume the scan table; returns the loaded full table."""
    path = os.path.join(out, SCAN_FILE)
    expected = _scan_comment(cfg)
    total = len(scan_states(cfg.scan))
    if os.path.exists(path):
        _check_scan_header(path, expected)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {expected}\n")
            fh.write(",".join(COLUMNS) + "\n")
    done = count_rows(path)
    if done < total:
        if verbose:
            print(f"scan: rendering rows {done}..{total} -> {path}")
        from .scan import append_rows

        run_scan(
            cfg.scene,
            cfg.layout,
            cfg.scan,
            jobs=jobs,
            skip=done,
            row_sink=lambda rows: append_rows(path, rows),
        )
    elif verbose:
        print(f"scan: table complete ({total} rows) -> {path}")
    table = load_table(path)
    if len(table.data) != total:
        raise ValueError(f"{path} holds {len(table.data)} rows, expected {total}")
    return table


def _build_model(cfg, table, out: str, auto: bool, verbose: bool = True):
    grid = calib_grid_from_table(table, cfg.calib.eye_positions, cfg.calib.sensor_positions)
    digest = config_mod.config_hash(cfg, ("scene", "photosensor", "calibration"))
    if auto:
        gains = estimate_gains(cfg.scene, cfg.vog)
        setup = PipelineSetup(cfg.scene, cfg.layout, cfg.vog, cfg.stream, gains, calib_mod.fit(grid), table)
        model = auto_calibrate(setup, grid)
    else:
        model = calib_mod.fit(grid)
    calib_mod.save_model(model, os.path.join(out, MODEL_FILE), scene_hash=digest)
    if verbose:
        d = model.diagnostics
        print(f"calibrate: forward rms h={d.forward_rms['h']:.3e} v={d.forward_rms['v']:.3e}")
        if d.coeff_delta is not None:
            worst = max(abs(c) for axis in ("h", "v") for c in d.coeff_delta[axis])
            print(f"calibrate: auto-vs-truth coefficient delta {worst:.3e}")
    return model


def _make_setup(cfg, table, model) -> PipelineSetup:
    gains = estimate_gains(cfg.scene, cfg.vog)
    return PipelineSetup(cfg.scene, cfg.layout, cfg.vog, cfg.stream, gains, model, table)


def _build_scenario(cfg):
    run = cfg.run
    if run.scenario == "hv":
        scenario = gen_hv_scenario(f_psog=cfg.stream.f_psog)
    else:
        scenario = gen_reading_scenario(seed=run.seed, f_psog=cfg.stream.f_psog)
    if run.shift_mm != 0.0:
        scenario = hv_shift_events(
            scenario, run.shift_mm, direction=run.shift_axis, duration=run.shift_duration_s
        )
    return scenario


def cmd_config(args) -> int:
    cfg = _load_cfg(args)
    text = config_mod.to_ini(cfg)
    if args.write:
        with open(args.write, "w", encoding="ascii") as fh:
            fh.write(text)
        print(f"config written: {args.write}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_render(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    eye = EyeState(theta_h=args.theta_h, theta_v=args.theta_v)
    pose = SensorPose(dx=args.dx, dy=args.dy)
    frame = render_frame(eye, pose, cfg.scene)
    digest = config_mod.config_hash(cfg, ("scene",))
    pgm_path = os.path.join(out, f"{args.name}.pgm")
    write_pgm(frame, pgm_path, comment=f"eyeshift frame {digest}")
    truth_path = os.path.join(out, f"{args.name}_truth.txt")
    lines = [
        f"theta_h_deg = {args.theta_h!r}",
        f"theta_v_deg = {args.theta_v!r}",
        f"dx_mm = {args.dx!r}",
        f"dy_mm = {args.dy!r}",
        f"pupil_px = {frame.truth.pupil.x!r}, {frame.truth.pupil.y!r}",
    ]
    for k, glint in enumerate(frame.truth.glints):
        lines.append(f"glint{k}_px = {glint.x!r}, {glint.y!r}")
    with open(truth_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"rendered: {pgm_path} (+ {truth_path})")
    return 0


def cmd_scan(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    _ensure_scan(cfg, out, args.jobs)
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    table = _ensure_scan(cfg, out, args.jobs)
    model = _build_model(cfg, table, out, auto=args.auto)
    if args.auto:
        # record what the camera channel thought each nominal position was
        gains = estimate_gains(cfg.scene, cfg.vog)
        setup = PipelineSetup(cfg.scene, cfg.layout, cfg.vog, cfg.stream, gains, model, table)
        from .experiments import vog_estimated_positions

        rows = []
        for axis in ("h", "v"):
            est = vog_estimated_positions(setup, cfg.calib.sensor_positions, axis)
            for true, e in zip(cfg.calib.sensor_positions, est):
                rows.append({"axis": axis, "true_mm": float(true), "estimated_mm": float(e)})
        report_mod.write_sweep_csv(
            rows, os.path.join(out, "calib_positions.csv"), comment=_scan_comment(cfg)
        )
    report_mod.plot_calibration_curves(
        model,
        os.path.join(out, "calibration_curves.png"),
        sensor_values=cfg.calib.sensor_positions,
    )
    print(f"calibrate: model written -> {os.path.join(out, MODEL_FILE)}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    gains = estimate_gains(cfg.scene, cfg.vog)
    table = None
    model = calib_mod.fit(
        calib_grid_from_table(
            _ensure_scan(cfg, out, args.jobs, verbose=False),
            cfg.calib.eye_positions,
            cfg.calib.sensor_positions,
        )
    )
    setup = PipelineSetup(cfg.scene, cfg.layout, cfg.vog, cfg.stream, gains, model, table)
    shifts = tuple(float(s) for s in args.shifts.split(","))
    rows = shift_estimation_sweep(setup, shifts_mm=shifts)
    digest = config_mod.config_hash(cfg, ("scene", "camera"))
    report_mod.write_sweep_csv(
        rows, os.path.join(out, "estimation_sweep.csv"), comment=f"eyeshift sweep {digest}"
    )
    report_mod.plot_estimation_sweep(rows, os.path.join(out, "estimation_sweep.png"))
    for axis in ("h", "v"):
        errs = [abs(r["error_mm"]) for r in rows if r["axis"] == axis]
        print(f"sweep: axis {axis} mean abs error {np.mean(errs):.4f} mm over {len(errs)} points")
    return 0


def _threshold_checks(cfg, result) -> int:
    """Apply configured limits; prints one line per check, returns exit code."""
    run = cfg.run
    failures = 0
    report = result.corrected_metrics or result.traditional_metrics
    if report is None:
        return 0
    if run.acc_limit_deg > 0:
        for axis in ("h", "v"):
            vals = report.accuracy_values(axis)
            mean = float(np.mean(vals)) if len(vals) else float("nan")
            ok = mean <= run.acc_limit_deg
            print(
                f"check: accuracy {axis} mean {mean:.3f} deg "
                f"{'<=' if ok else '>'} {run.acc_limit_deg} deg "
                f"[{'PASS' if ok else 'FAIL'}]"
            )
            failures += 0 if ok else 1
    if run.cross_limit_pct > 0:
        for kind in ("hv", "vh"):
            vals = report.crosstalk_values(kind)
            mean = float(np.mean(vals)) if len(vals) else float("nan")
            ok = mean <= run.cross_limit_pct
            print(
                f"check: crosstalk {kind} mean {mean:.2f} % "
                f"{'<=' if ok else '>'} {run.cross_limit_pct} % "
                f"[{'PASS' if ok else 'FAIL'}]"
            )
            failures += 0 if ok else 1
    return 1 if failures else 0


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    overrides = {}
    if args.scenario:
        overrides["scenario"] = args.scenario
    if args.eval_mode:
        overrides["eval_mode"] = args.eval_mode
    if args.shift_mm is not None:
        overrides["shift_mm"] = args.shift_mm
    if args.shift_axis:
        overrides["shift_axis"] = args.shift_axis
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, run=replace(cfg.run, **overrides))
    out = _outdir(args)
    table = _ensure_scan(cfg, out, args.jobs, verbose=False)
    model_path = os.path.join(out, MODEL_FILE)
    if os.path.exists(model_path):
        model = calib_mod.load_model(model_path)
    else:
        model = _build_model(cfg, table, out, auto=False, verbose=False)
    setup = _make_setup(cfg, table, model)
    digest = config_mod.config_hash(cfg)
    comment = f"eyeshift run {digest}"

    if args.shift_grid is not None:
        magnitudes = tuple(float(s) for s in args.shift_grid.split(","))
        rows = shift_grid_experiment(
            setup,
            magnitudes=magnitudes,
            direction=cfg.run.shift_axis,
            eval_mode=cfg.run.eval_mode,
            trim_s=cfg.run.trim_s,
            shift_duration=cfg.run.shift_duration_s,
        )
        report_mod.write_shift_grid_csv(rows, os.path.join(out, "shift_grid.csv"), comment=comment)
        report_mod.plot_shift_grid(rows, os.path.join(out, "accuracy_vs_shift.png"))
        print(f"run: shift grid over {len(magnitudes)} magnitudes -> {out}")
        return 0

    scenario = _build_scenario(cfg)
    result = run_experiment(
        scenario, setup, mode=args.mode, eval_mode=cfg.run.eval_mode, trim_s=cfg.run.trim_s
    )
    reports = []
    for mode in ("corrected", "traditional"):
        stream = getattr(result, mode)
        if stream is None:
            continue
        stream.write_csv(os.path.join(out, f"gaze_{mode}.csv"), header_comment=comment)
        report = result.metrics(mode)
        reports.append(report)
        report_mod.write_fixation_csv(
            report, os.path.join(out, f"fixations_{mode}.csv"), comment=comment
        )
        report_mod.plot_run_overview(result, os.path.join(out, f"overview_{mode}.png"), mode=mode)
    result.psog_stream.write_csv(os.path.join(out, "psog.csv"), header_comment=comment)
    result.vog_stream.write_csv(os.path.join(out, "vog.csv"), header_comment=comment)
    report_mod.write_summary(reports, os.path.join(out, "summary.txt"), comment=comment)
    for report in reports:
        s = report.summary()
        print(
            f"run: {s['label']}/{s['mode']} acc h {s['acc_h_mean_deg']:.3f} deg, "
            f"v {s['acc_v_mean_deg']:.3f} deg over {s['n_fixations']} fixations"
        )
    print(f"run: artifacts -> {out}")
    return _threshold_checks(cfg, result)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eyeshift",
        description="Hybrid photosensor/camera eye-tracking simulator with sensor-shift correction.",
    )
    parser.add_argument("--config", help="INI configuration file (defaults used when omitted)")
    parser.add_argument("--out", default="out", help="artifact directory (default: out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config", help="print or write the configuration")
    p.add_argument("--write", help="write INI to this path instead of stdout")
    p.set_defaults(func=cmd_config)

    p = sub.add_parser("render", help="render a single frame")
    p.add_argument("--theta-h", type=float, default=0.0, help="horizontal eye angle (deg)")
    p.add_argument("--theta-v", type=float, default=0.0, help="vertical eye angle (deg)")
    p.add_argument("--dx", type=float, default=0.0, help="sensor shift away from nasal (mm)")
    p.add_argument("--dy", type=float, default=0.0, help="sensor shift upward (mm)")
    p.add_argument("--name", default="frame", help="output basename")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("scan", help="render the signal grid (resumable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel render processes")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("calibrate", help="fit the composite calibration")
    p.add_argument("--auto", action="store_true", help="use camera-estimated sensor positions")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="sensor-shift estimation accuracy sweep")
    p.add_argument("--shifts", default=DEFAULT_SHIFT_GRID, help="comma-separated true shifts (mm)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="simulate a scenario and report metrics")
    p.add_argument("--scenario", choices=("hv", "tx"), help="jumping-point or reading-like track")
    p.add_argument(
        "--mode",
        choices=("corrected", "traditional", "both"),
        default="both",
        help="shift-aware, shift-blind, or both on the same streams",
    )
    p.add_argument("--shift-mm", type=float, help="shift event magnitude (0 = none)")
    p.add_argument("--shift-axis", choices=("same", "cross"), help="shift axis vs stimulus phase")
    p.add_argument(
        "--shift-grid",
        nargs="?",
        const=DEFAULT_SHIFT_GRID,
        help="run a grid of shift magnitudes (optional comma list, mm)",
    )
    p.add_argument("--eval-mode", choices=("fast", "exact"), help="table interpolation or per-sample rendering")
    p.add_argument("--seed", type=int, help="seed for the reading-like scenario")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FrustumError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
