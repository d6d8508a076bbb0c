"""Report writers: delimited tables, a text summary and matplotlib figures.

All writers are deterministic (no timestamps, repr() floats) so reruns with
the same configuration produce byte-identical artifacts.  Figures render via
the Agg backend and are saved next to the delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import ExperimentResult, MetricsReport

__all__ = [
    "write_summary",
    "write_fixation_csv",
    "write_shift_grid_csv",
    "write_sweep_csv",
    "plot_run_overview",
    "plot_shift_grid",
    "plot_estimation_sweep",
    "plot_calibration_curves",
]

FIXATION_HEADER = [
    "index",
    "axis",
    "t_start",
    "t_end",
    "acc_h_deg",
    "acc_v_deg",
    "cross_hv_pct",
    "cross_vh_pct",
    "during_shift",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_fixation_csv(report: MetricsReport, path, comment: str = "") -> None:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(FIXATION_HEADER))
    for fm in report.fixations:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    fm.index,
                    fm.axis,
                    fm.t_start,
                    fm.t_end,
                    fm.acc_h,
                    fm.acc_v,
                    fm.cross_hv,
                    fm.cross_vh,
                    fm.during_shift,
                )
            )
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary(reports: list, path, comment: str = "") -> None:
    """Key-value text summary, one block per report."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    for report in reports:
        summary = report.summary()
        lines.append(f"[{summary.pop('label')}/{summary.pop('mode')}]")
        for key, value in summary.items():
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))


def write_shift_grid_csv(rows: list, path, comment: str = "") -> None:
    if not rows:
        raise ValueError("no shift-grid rows to write")
    header = list(rows[0].keys())
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in header))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


# The estimation sweep rows share the dict-per-row shape.
write_sweep_csv = write_shift_grid_csv


def plot_run_overview(result: ExperimentResult, path, mode: str = "corrected") -> None:
    """Truth vs output per axis plus the error trace and active shift."""
    stream = result.corrected if mode == "corrected" else result.traditional
    if stream is None:
        raise ValueError(f"mode {mode!r} was not run")
    t = result.scenario.t
    fig, axes = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
    for ax, truth, out, name in (
        (axes[0], result.truth_h, stream.gaze_h, "horizontal"),
        (axes[1], result.truth_v, stream.gaze_v, "vertical"),
    ):
        ax.plot(t, truth, color="0.3", lw=1.0, label="truth")
        ax.plot(t, out, color="tab:blue", lw=0.8, label=mode)
        ax.set_ylabel(f"{name} (deg)")
        ax.legend(loc="upper right", fontsize=8)
    err = np.hypot(stream.gaze_h - result.truth_h, stream.gaze_v - result.truth_v)
    axes[2].plot(t, err, color="tab:red", lw=0.8, label="error magnitude")
    shift_mag = np.hypot(result.shift_dx, result.shift_dy)
    if np.any(shift_mag > 0):
        ax2 = axes[2].twinx()
        ax2.plot(t, shift_mag, color="tab:green", lw=0.8, ls="--", label="shift (mm)")
        ax2.set_ylabel("shift (mm)")
    axes[2].set_ylabel("error (deg)")
    axes[2].set_xlabel("time (s)")
    axes[2].legend(loc="upper right", fontsize=8)
    fig.suptitle(f"{result.scenario.label} run, {mode} mode")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_shift_grid(rows: list, path) -> None:
    """During-shift accuracy vs shift magnitude, corrected against traditional."""
    shifts = np.asarray([r["shift_mm"] for r in rows])
    order = np.argsort(shifts)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, axis in zip(axes, ("h", "v")):
        for mode, color in (("traditional", "tab:red"), ("corrected", "tab:blue")):
            vals = np.asarray([r[f"{mode}_acc_{axis}_mean_deg"] for r in rows])
            ax.plot(shifts[order], vals[order], "o-", color=color, label=mode)
        ax.set_xlabel("sensor shift (mm)")
        ax.set_title(f"{'horizontal' if axis == 'h' else 'vertical'} accuracy")
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("mean abs error (deg)")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_estimation_sweep(rows: list, path) -> None:
    """Estimated vs true sensor position, one panel per axis."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, axis in zip(axes, ("h", "v")):
        sel = [r for r in rows if r["axis"] == axis]
        true = np.asarray([r["true_mm"] for r in sel])
        est = np.asarray([r["estimate_mm"] for r in sel])
        lim = max(1.0, float(np.max(np.abs(true)))) * 1.1
        ax.plot([-lim, lim], [-lim, lim], color="0.6", lw=0.8)
        ax.plot(true, est, "o", ms=4, alpha=0.6, color="tab:blue")
        ax.set_xlabel("true shift (mm)")
        ax.set_title(f"{'horizontal' if axis == 'h' else 'vertical'} axis")
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("estimated shift (mm)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_calibration_curves(model, path, eye_span: float = 12.0, sensor_values=(-2.0, 0.0, 2.0)) -> None:
    """Forward mapping per axis for a few sensor positions."""
    from .calib import forward

    eye = np.linspace(-eye_span, eye_span, 121)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, axis in zip(axes, ("h", "v")):
        for s in sensor_values:
            ax.plot(eye, forward(model, eye, float(s), axis), label=f"shift {s:+.1f} mm")
        ax.set_xlabel("eye position (deg)")
        ax.set_title(f"{'horizontal' if axis == 'h' else 'vertical'} axis")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    axes[0].set_ylabel("normalized sensor output")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
