"""INI-backed configuration for the full toolkit.

One ``RunConfig`` aggregates every tunable: scene geometry, photosensor
layout, camera-channel processing, fusion rates, scan-table extent,
calibration grid and run/report options.  The INI schema is typed per key,
round-trips losslessly (repr floats) and hashes deterministically so
artifacts (scan tables, calibration models) can be checked for compatibility
with the configuration that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

from .fusion import StreamConfig
from .psog import PhotosensorLayout
from .scan import ScanSpec
from .scene import SceneConfig
from .vog import VogConfig

__all__ = [
    "CalibSpec",
    "RunSpec",
    "RunConfig",
    "defaults",
    "to_ini",
    "from_ini",
    "load_config",
    "save_config",
    "config_hash",
]


@dataclass(frozen=True)
class CalibSpec:
    """Calibration grid: eye fixation angles crossed with nominal sensor offsets."""

    eye_positions: tuple = (-10.0, 0.0, 10.0)
    sensor_positions: tuple = (-2.0, 0.0, 2.0)

    def __post_init__(self) -> None:
        for name in ("eye_positions", "sensor_positions"):
            vals = getattr(self, name)
            if len(vals) < 3 or len(set(vals)) != len(vals):
                raise ValueError(f"{name} needs at least 3 distinct values")


@dataclass(frozen=True)
class RunSpec:
    """Run/report options.  Limits of 0 disable the corresponding exit-code check."""

    scenario: str = "hv"
    eval_mode: str = "fast"
    trim_s: float = 0.1
    seed: int = 0
    shift_mm: float = 0.0
    shift_axis: str = "same"  # 'same' or 'cross' relative to the stimulus phase
    shift_duration_s: float = 4.0
    acc_limit_deg: float = 0.0
    cross_limit_pct: float = 0.0

    def __post_init__(self) -> None:
        if self.scenario not in ("hv", "tx"):
            raise ValueError("scenario must be 'hv' or 'tx'")
        if self.eval_mode not in ("fast", "exact"):
            raise ValueError("eval_mode must be 'fast' or 'exact'")
        if self.shift_axis not in ("same", "cross"):
            raise ValueError("shift_axis must be 'same' or 'cross'")
        if self.trim_s < 0 or self.shift_duration_s <= 0:
            raise ValueError("trim_s must be >= 0 and shift_duration_s > 0")
        if self.acc_limit_deg < 0 or self.cross_limit_pct < 0:
            raise ValueError("limits must be >= 0 (0 disables the check)")


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = SceneConfig()
    layout: PhotosensorLayout = PhotosensorLayout()
    vog: VogConfig = VogConfig()
    stream: StreamConfig = StreamConfig()
    scan: ScanSpec = ScanSpec()
    calib: CalibSpec = CalibSpec()
    run: RunSpec = RunSpec()


# section name -> (RunConfig field, {key: kind}); kinds drive parse/format
_SCHEMA = {
    "scene": (
        "scene",
        {
            "eyeball_radius": "float",
            "cornea_radius": "float",
            "cornea_center_offset": "float",
            "iris_radius": "float",
            "camera_distance": "float",
            "camera_offset_v": "float",
            "light_positions": "points3",
            "fov": "float",
            "width": "int",
            "height": "int",
            "reflect_pupil": "float",
            "reflect_iris": "float",
            "reflect_sclera": "float",
            "reflect_glint": "float",
            "glint_sigma_px": "float",
        },
    ),
    "photosensor": (
        "layout",
        {"window_centers": "points2", "window_size": "float", "sigma_ratio": "float"},
    ),
    "camera": (
        "vog",
        {
            "pupil_threshold": "float",
            "glint_threshold": "float",
            "min_pupil_px": "int",
            "min_glint_px": "int",
            "max_shift_mm": "float",
            "eye_sweep_deg": "floats",
            "pose_sweep_mm": "floats",
        },
    ),
    "fusion": (
        "stream",
        {
            "f_psog": "float",
            "f_vog": "float",
            "ma_window": "int",
            "shift_gate_mm": "float",
            "smooth_psog": "bool",
            "smooth_vog": "bool",
        },
    ),
    "scan": (
        "scan",
        {
            "eye_range": "float",
            "eye_step": "float",
            "shift_range": "float",
            "shift_step": "float",
            "mode": "str",
        },
    ),
    "calibration": (
        "calib",
        {"eye_positions": "floats", "sensor_positions": "floats"},
    ),
    "run": (
        "run",
        {
            "scenario": "str",
            "eval_mode": "str",
            "trim_s": "float",
            "seed": "int",
            "shift_mm": "float",
            "shift_axis": "str",
            "shift_duration_s": "float",
            "acc_limit_deg": "float",
            "cross_limit_pct": "float",
        },
    ),
}


def _format_value(value, kind: str) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "str":
        return str(value)
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("points2", "points3"):
        return "; ".join(", ".join(repr(float(c)) for c in pt) for pt in value)
    raise ValueError(f"unknown value kind {kind!r}")


def _parse_value(text: str, kind: str):
    text = text.strip()
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    if kind == "bool":
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "str":
        return text
    if kind == "floats":
        return tuple(float(v) for v in text.split(",")) if text else ()
    if kind in ("points2", "points3"):
        dim = 2 if kind == "points2" else 3
        points = []
        for chunk in text.split(";"):
            coords = tuple(float(v) for v in chunk.split(","))
            if len(coords) != dim:
                raise ValueError(f"expected {dim} coordinates per point, got {chunk.strip()!r}")
            points.append(coords)
        return tuple(points)
    raise ValueError(f"unknown value kind {kind!r}")


def to_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    for section, (attr, keys) in _SCHEMA.items():
        obj = getattr(cfg, attr)
        parser[section] = {key: _format_value(getattr(obj, key), kind) for key, kind in keys.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> RunConfig:
    """Parse an INI document; unspecified sections/keys keep their defaults."""
    parser = configparser.ConfigParser()
    parser.read_string(text)
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        attr, keys = _SCHEMA[section]
        overrides = {}
        for key, raw in parser[section].items():
            if key not in keys:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            overrides[key] = _parse_value(raw, keys[key])
        if overrides:
            cfg = replace(cfg, **{attr: replace(getattr(cfg, attr), **overrides)})
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return from_ini(fh.read())


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(to_ini(cfg))


def defaults() -> RunConfig:
    return RunConfig()


def config_hash(cfg: RunConfig, sections=None) -> str:
    """Short stable digest of the named sections (all of them by default).

    Artifact writers embed this so loaders can detect configuration drift.
    """
    if sections is None:
        sections = tuple(_SCHEMA)
    unknown = set(sections) - set(_SCHEMA)
    if unknown:
        raise ValueError(f"unknown sections: {sorted(unknown)}")
    lines = []
    for section in sorted(sections):
        attr, keys = _SCHEMA[section]
        obj = getattr(cfg, attr)
        for key, kind in sorted(keys.items()):
            lines.append(f"{section}.{key}={_format_value(getattr(obj, key), kind)}")
    digest = hashlib.sha256("\n".join(lines).encode("ascii")).hexdigest()
    return digest[:12]


def _check_fields_covered() -> None:
    # every public dataclass field must appear in the schema, so nothing
    # silently escapes the config file and the hash
    for section, (attr, keys) in _SCHEMA.items():
        obj = getattr(RunConfig(), attr)
        declared = {f.name for f in fields(obj)}
        missing = declared - set(keys)
        if missing:
            raise RuntimeError(f"config schema for [{section}] misses fields {sorted(missing)}")


_check_fields_covered()
