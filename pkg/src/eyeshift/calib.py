"""Composite quadratic gaze calibration, aware of the sensor position.

Raw differential photosensor output depends on both the eye rotation ``x_e``
(degrees) and the sensor translation ``x_s`` (mm).  Each axis is modelled as
a quadratic in ``x_e`` whose three coefficients are themselves quadratics in
``x_s``:

    raw(x_e, x_s) = a(x_s) x_e^2 + b(x_s) x_e + c(x_s)
    a(x_s) = a1 x_s^2 + a2 x_s + a3        (b, c analogous)

Nine coefficients per axis, fitted in two least-squares stages: first a
quadratic in ``x_e`` per measured sensor position, then a quadratic in
``x_s`` per coefficient.  With exactly three eye and three sensor positions
both stages interpolate, so a model that generated the grid is recovered
exactly.

Gaze estimation inverts the top-level quadratic at the current sensor
position.  Fitted models must be (weakly) monotone in ``x_e`` across the
sensor domain so the in-domain root is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AxisCalib",
    "CalibModel",
    "CalibGrid",
    "FitDiagnostics",
    "FitError",
    "InversionError",
    "fit",
    "fit_auto",
    "forward",
    "invert",
    "is_extrapolating",
    "save_model",
    "load_model",
]

LINEAR_EPS = 1e-12  # |a| below this counts as a linear model (raw units / deg^2)
_DOMAIN_TOL = 1e-9
_COEFF_NAMES = ("a1", "a2", "a3", "b1", "b2", "b3", "c1", "c2", "c3")


class FitError(ValueError):
    """Raised when the calibration grid cannot support the two-stage fit."""


class InversionError(ValueError):
    """Raised when the top-level quadratic cannot be inverted unambiguously."""


@dataclass(frozen=True)
class AxisCalib:
    """Nine coefficients plus fitted domains for one axis."""

    coeffs: tuple  # (a1, a2, a3, b1, b2, b3, c1, c2, c3)
    eye_domain: tuple
    sensor_domain: tuple

    def __post_init__(self) -> None:
        if len(self.coeffs) != 9:
            raise ValueError("axis model requires nine coefficients")
        if not (self.eye_domain[0] < self.eye_domain[1]):
            raise ValueError("eye domain must be a proper interval")
        if not (self.sensor_domain[0] < self.sensor_domain[1]):
            raise ValueError("sensor domain must be a proper interval")

    def abc(self, x_s):
        """Top-level quadratic coefficients at sensor position(s) ``x_s``."""
        s = np.asarray(x_s, dtype=float)
        a1, a2, a3, b1, b2, b3, c1, c2, c3 = self.coeffs
        return (
            a1 * s * s + a2 * s + a3,
            b1 * s * s + b2 * s + b3,
            c1 * s * s + c2 * s + c3,
        )


@dataclass(frozen=True)
class FitDiagnostics:
    """Residual bookkeeping from a two-stage fit."""

    stage1_rms: dict
    stage2_rms: dict
    forward_rms: dict
    coeff_delta: dict | None = None  # vs a reference fit (auto-calibration only)


@dataclass(frozen=True)
class CalibModel:
    """Calibration for both axes. ``diagnostics`` is fit metadata, not persisted."""

    h: AxisCalib
    v: AxisCalib
    diagnostics: FitDiagnostics | None = field(default=None, compare=False)

    def axis(self, name: str) -> AxisCalib:
        if name not in ("h", "v"):
            raise ValueError(f"axis must be 'h' or 'v', got {name!r}")
        return self.h if name == "h" else self.v


@dataclass(frozen=True)
class CalibGrid:
    """Raw measurements over the (eye position, sensor position) grid, per axis.

    ``raw_h[j, i]`` is the horizontal channel at eye ``eye_positions[i]`` and
    horizontal sensor position ``sensor_positions[j]``; ``raw_v`` analogous for
    the vertical channel and vertical sensor positions.
    """

    eye_positions: tuple
    sensor_positions: tuple
    raw_h: np.ndarray
    raw_v: np.ndarray

    def __post_init__(self) -> None:
        ne, ns = len(self.eye_positions), len(self.sensor_positions)
        for name, raw in (("raw_h", self.raw_h), ("raw_v", self.raw_v)):
            arr = np.asarray(raw, dtype=float)
            if arr.shape != (ns, ne):
                raise ValueError(f"{name} must have shape (n_sensor, n_eye) = ({ns}, {ne})")
        if len(np.unique(self.eye_positions)) < 3:
            raise FitError("eye dimension needs at least three distinct positions")
        if len(np.unique(self.sensor_positions)) < 3:
            raise FitError("sensor dimension needs at least three distinct positions")


def _quadfit(x, y, dimension: str) -> np.ndarray:
    """Least-squares quadratic via a Vandermonde design matrix. Highest power first."""
    x = np.asarray(x, dtype=float)
    if len(np.unique(x)) < 3:
        raise FitError(f"{dimension} dimension needs at least three distinct positions")
    design = np.vander(x, 3)
    coeffs, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return coeffs


def _check_monotone(axis: AxisCalib, sensor_step: float = 0.1) -> None:
    """Reject models whose derivative changes strict sign inside the eye domain.

    A derivative of 2*a*x + b is linear in x, so checking both eye-domain
    endpoints per sensor position suffices.  Flat (zero-derivative) models are
    allowed here and rejected at inversion time instead.
    """
    lo, hi = axis.eye_domain
    s_lo, s_hi = axis.sensor_domain
    n = max(int(round((s_hi - s_lo) / sensor_step)) + 1, 2)
    s = np.linspace(s_lo, s_hi, n)
    a, b, _ = axis.abc(s)
    d = np.concatenate([2.0 * a * lo + b, 2.0 * a * hi + b])
    if (d > LINEAR_EPS).any() and (d < -LINEAR_EPS).any():
        raise FitError("fitted model is not monotone over the eye domain; inversion is ambiguous")


def _fit_axis(eye_positions, sensor_positions, raw, stage1_label, stage2_label):
    raw = np.asarray(raw, dtype=float)
    stage1 = np.array([_quadfit(eye_positions, row, stage1_label) for row in raw])  # (ns, 3)
    stage1_res = [
        float(np.sqrt(np.mean((np.polyval(stage1[j], eye_positions) - raw[j]) ** 2)))
        for j in range(len(sensor_positions))
    ]
    coeffs = []
    stage2_res = []
    for k in range(3):  # a, b, c columns
        ck = _quadfit(sensor_positions, stage1[:, k], stage2_label)
        coeffs.extend(ck)
        stage2_res.append(
            float(np.sqrt(np.mean((np.polyval(ck, sensor_positions) - stage1[:, k]) ** 2)))
        )
    axis = AxisCalib(
        coeffs=tuple(float(c) for c in coeffs),
        eye_domain=(float(min(eye_positions)), float(max(eye_positions))),
        sensor_domain=(float(min(sensor_positions)), float(max(sensor_positions))),
    )
    _check_monotone(axis)
    ee, ss = np.meshgrid(eye_positions, sensor_positions)
    fwd_rms = float(np.sqrt(np.mean((_forward_axis(axis, ee, ss) - raw) ** 2)))
    return axis, stage1_res, stage2_res, fwd_rms


def fit(grid: CalibGrid) -> CalibModel:
    """Two-stage least-squares fit of both axes from a measured grid."""
    h, s1_h, s2_h, fr_h = _fit_axis(
        grid.eye_positions, grid.sensor_positions, grid.raw_h, "eye", "sensor"
    )
    v, s1_v, s2_v, fr_v = _fit_axis(
        grid.eye_positions, grid.sensor_positions, grid.raw_v, "eye", "sensor"
    )
    diag = FitDiagnostics(
        stage1_rms={"h": tuple(s1_h), "v": tuple(s1_v)},
        stage2_rms={"h": tuple(s2_h), "v": tuple(s2_v)},
        forward_rms={"h": fr_h, "v": fr_v},
    )
    return CalibModel(h=h, v=v, diagnostics=diag)


def fit_auto(grid: CalibGrid, estimated_h, estimated_v) -> CalibModel:
    """Fit with camera-estimated sensor positions instead of the nominal ones.

    ``estimated_h``/``estimated_v`` replace ``grid.sensor_positions`` in the
    second stage, one value per grid row.  Diagnostics report the coefficient
    deltas against the ground-truth-position fit of the same grid.
    """
    for name, est in (("estimated_h", estimated_h), ("estimated_v", estimated_v)):
        if len(est) != len(grid.sensor_positions):
            raise FitError(f"{name} must provide one estimate per sensor position")
    h, s1_h, s2_h, fr_h = _fit_axis(grid.eye_positions, estimated_h, grid.raw_h, "eye", "sensor")
    v, s1_v, s2_v, fr_v = _fit_axis(grid.eye_positions, estimated_v, grid.raw_v, "eye", "sensor")
    reference = fit(grid)
    delta = {
        "h": tuple(c - r for c, r in zip(h.coeffs, reference.h.coeffs)),
        "v": tuple(c - r for c, r in zip(v.coeffs, reference.v.coeffs)),
    }
    diag = FitDiagnostics(
        stage1_rms={"h": tuple(s1_h), "v": tuple(s1_v)},
        stage2_rms={"h": tuple(s2_h), "v": tuple(s2_v)},
        forward_rms={"h": fr_h, "v": fr_v},
        coeff_delta=delta,
    )
    return CalibModel(h=h, v=v, diagnostics=diag)


def _forward_axis(axis: AxisCalib, x_e, x_s):
    a, b, c = axis.abc(x_s)
    x = np.asarray(x_e, dtype=float)
    return a * x * x + b * x + c


def forward(model: CalibModel, x_e, x_s, axis: str):
    """Predicted raw output at (x_e, x_s). Out-of-domain inputs extrapolate silently;
    use :func:`is_extrapolating` to flag them."""
    out = _forward_axis(model.axis(axis), x_e, x_s)
    return float(out) if np.isscalar(x_e) and np.isscalar(x_s) else out


def is_extrapolating(model: CalibModel, x_e, x_s, axis: str):
    """True where (x_e, x_s) falls outside the fitted domain."""
    ax = model.axis(axis)
    e = np.asarray(x_e, dtype=float)
    s = np.asarray(x_s, dtype=float)
    out = (
        (e < ax.eye_domain[0] - _DOMAIN_TOL)
        | (e > ax.eye_domain[1] + _DOMAIN_TOL)
        | (s < ax.sensor_domain[0] - _DOMAIN_TOL)
        | (s > ax.sensor_domain[1] + _DOMAIN_TOL)
    )
    return bool(out) if out.ndim == 0 else out


def invert(model: CalibModel, raw, x_s, axis: str):
    """Eye position(s) whose forward value reproduces ``raw`` at sensor position ``x_s``.

    Returns ``(x_e, out_of_range)``.  Root selection: the quadratic root inside
    the eye domain; with ``|a| < LINEAR_EPS`` the model is treated as linear.
    Complex roots yield the vertex-clamped value with the flag set; two real
    roots both outside the domain yield the nearer root clamped, flagged.  Two
    distinct roots both inside the domain mean a non-monotone model and raise
    :class:`InversionError`, as does a degenerate a = b = 0 model.
    """
    ax = model.axis(axis)
    scalar = np.isscalar(raw) and np.isscalar(x_s)
    raw_arr, s_arr = np.broadcast_arrays(
        np.asarray(raw, dtype=float), np.asarray(x_s, dtype=float)
    )
    a, b, c = ax.abc(s_arr)
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    y = np.atleast_1d(c - raw_arr)  # solve a x^2 + b x + y = 0
    lo, hi = ax.eye_domain
    tol = _DOMAIN_TOL * max(1.0, hi - lo)

    x = np.empty_like(y)
    flag = np.zeros(y.shape, dtype=bool)

    linear = np.abs(a) < LINEAR_EPS
    if np.any(linear & (np.abs(b) < LINEAR_EPS)):
        raise InversionError("model is flat (a = 0 and b = 0): raw carries no eye information")
    with np.errstate(divide="ignore", invalid="ignore"):
        x_lin = -y / b
    x[linear] = x_lin[linear]

    quad = ~linear
    if quad.any():
        aq, bq, yq = a[quad], b[quad], y[quad]
        disc = bq * bq - 4.0 * aq * yq
        neg = disc < 0.0
        # numerically stable root pair: q = -(b + sign(b) sqrt(disc)) / 2
        sq = np.sqrt(np.where(neg, 0.0, disc))
        sign_b = np.where(bq >= 0.0, 1.0, -1.0)
        q = -(bq + sign_b * sq) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / aq
            r2 = np.where(q != 0.0, yq / q, -bq / (2.0 * aq))
        in1 = (r1 >= lo - tol) & (r1 <= hi + tol)
        in2 = (r2 >= lo - tol) & (r2 <= hi + tol)
        both = in1 & in2 & (np.abs(r1 - r2) > tol)
        if np.any(both & ~neg):
            raise InversionError(
                "both quadratic roots fall inside the eye domain: model is not monotone"
            )
        vertex = -bq / (2.0 * aq)
        nearer = np.where(
            np.abs(r1 - np.clip(r1, lo, hi)) <= np.abs(r2 - np.clip(r2, lo, hi)), r1, r2
        )
        xq = np.where(in1, r1, np.where(in2, r2, np.clip(nearer, lo, hi)))
        xq = np.where(neg, np.clip(vertex, lo, hi), xq)
        fq = neg | (~in1 & ~in2)
        x[quad] = xq
        flag[quad] = fq

    # out-of-domain linear solutions get clamped and flagged too
    lin_out = linear & ((x < lo - tol) | (x > hi + tol))
    x[lin_out] = np.clip(x[lin_out], lo, hi)
    flag |= lin_out

    if scalar:
        return float(x[0]), bool(flag[0])
    return x.reshape(raw_arr.shape), flag.reshape(raw_arr.shape)


MODEL_FORMAT = "eyeshift-calib v1"


def save_model(model: CalibModel, path, scene_hash: str = "") -> None:
    """Persist coefficients and domains as flat key-value text with a versioned header."""
    lines = [f"# {MODEL_FORMAT} scene={scene_hash}"]
    for axis_name in ("h", "v"):
        ax = model.axis(axis_name)
        for name, value in zip(_COEFF_NAMES, ax.coeffs):
            lines.append(f"{axis_name}.{name} {value!r}")
        lines.append(f"{axis_name}.eye_lo {ax.eye_domain[0]!r}")
        lines.append(f"{axis_name}.eye_hi {ax.eye_domain[1]!r}")
        lines.append(f"{axis_name}.sensor_lo {ax.sensor_domain[0]!r}")
        lines.append(f"{axis_name}.sensor_hi {ax.sensor_domain[1]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> CalibModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# {MODEL_FORMAT}"):
        raise ValueError(f"unrecognised calibration file format (wanted '{MODEL_FORMAT}')")
    values: dict[str, float] = {}
    for line in lines[1:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition(" ")
        values[key] = float(val)
    axes = {}
    for axis_name in ("h", "v"):
        try:
            coeffs = tuple(values[f"{axis_name}.{n}"] for n in _COEFF_NAMES)
            eye = (values[f"{axis_name}.eye_lo"], values[f"{axis_name}.eye_hi"])
            sensor = (values[f"{axis_name}.sensor_lo"], values[f"{axis_name}.sensor_hi"])
        except KeyError as err:
            raise ValueError(f"calibration file is missing {err.args[0]!r}") from None
        axes[axis_name] = AxisCalib(coeffs=coeffs, eye_domain=eye, sensor_domain=sensor)
    return CalibModel(h=axes["h"], v=axes["v"])
