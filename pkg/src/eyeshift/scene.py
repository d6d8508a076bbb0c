"""Analytic rendering of a simplified eye scene for photosensor/video gaze tracking.

World frame (millimetres), anchored at the eyeball rotation centre:

* ``+x`` points nasally (left-eye convention),
* ``+y`` points down,
* ``+z`` points out of the eye toward the camera.

The camera is a pinhole with a fixed orientation, looking along ``-z`` with
its image axes aligned to world ``x``/``y``.  Image coordinates therefore grow
nasally and downward, and a positive horizontal eye rotation moves the pupil
image toward larger pixel ``x``.

The sensor assembly (camera plus both illuminators) is rigid.  A pose of
``dx > 0`` translates the whole assembly away from the nasal side (world
``-x``); ``dy > 0`` translates it upward (world ``-y``).  Eye rotations use
the opposite-handed convention: ``theta_h > 0`` is nasal, ``theta_v > 0`` is
downward.

The eye itself is two spheres: the eyeball (pupil and iris painted as discs
around the gaze axis, sclera elsewhere) and a smaller corneal sphere whose
centre sits slightly in front of the rotation centre and rotates with the
eye.  Each illuminator produces one glint, modelled as the virtual image of
a distant source in a convex mirror: a point half a corneal radius behind
the corneal surface along the source-to-centre axis, splatted into the
image as an additive Gaussian spot.  Refraction, eyelids and photometric
falloff are deliberately out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "EyeState",
    "SensorPose",
    "SceneConfig",
    "Frame",
    "FrameTruth",
    "ProjectedPoint",
    "FrustumError",
    "gaze_direction",
    "camera_center",
    "project_point",
    "pupil_center_px",
    "corneal_reflection_px",
    "render_frame",
    "write_pgm",
    "read_pgm",
]


class FrustumError(ValueError):
    """Raised when the configured geometry puts the eye outside the camera frustum."""


@dataclass(frozen=True)
class EyeState:
    """Eye rotation (degrees) and pupil radius (mm).

    Positive ``theta_h`` is a nasal rotation, positive ``theta_v`` is downward.
    """

    theta_h: float = 0.0
    theta_v: float = 0.0
    pupil_radius: float = 2.0

    def __post_init__(self) -> None:
        if not (abs(self.theta_h) <= 45.0 and abs(self.theta_v) <= 45.0):
            raise ValueError(f"eye rotation out of range (|theta| <= 45 deg): {self}")
        if not (0.5 < self.pupil_radius < 5.0):
            raise ValueError(f"pupil radius must lie in (0.5, 5.0) mm: {self.pupil_radius}")


@dataclass(frozen=True)
class SensorPose:
    """Rigid in-plane translation of the sensor assembly, in mm.

    ``dx > 0`` moves the assembly away from the nasal side, ``dy > 0`` moves it up.
    """

    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self) -> None:
        if not (abs(self.dx) <= 5.0 and abs(self.dy) <= 5.0):
            raise ValueError(f"sensor translation out of range (|d| <= 5 mm): {self}")


@dataclass(frozen=True)
class SceneConfig:
    """Geometry, photometry and camera intrinsics for the rendered scene.

    Distances in mm.  ``camera_distance`` is measured from the neutral pupil
    centre (the front of the eye), not from the rotation centre.  Light
    positions are world-frame points at neutral pose; they translate with the
    camera.  The default placement is symmetric about both image axes so that
    a neutral eye produces a fully mirror-symmetric frame.
    """

    eyeball_radius: float = 12.0
    cornea_radius: float = 7.8
    cornea_center_offset: float = 5.0
    iris_radius: float = 6.0
    camera_distance: float = 50.0
    camera_offset_v: float = 0.0
    light_positions: tuple = ((-14.0, 0.0, 42.0), (14.0, 0.0, 42.0))
    fov: float = 45.0
    width: int = 320
    height: int = 240
    reflect_pupil: float = 0.05
    reflect_iris: float = 0.45
    reflect_sclera: float = 0.90
    reflect_glint: float = 1.0
    glint_sigma_px: float = 2.5

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if not (10.0 < self.fov < 90.0):
            raise ValueError(f"field of view out of range (10, 90) deg: {self.fov}")
        if not (self.reflect_pupil < self.reflect_iris < self.reflect_sclera < self.reflect_glint):
            raise ValueError("reflectances must be ordered pupil < iris < sclera < glint")
        if self.eyeball_radius <= 0 or self.cornea_radius <= 0 or self.camera_distance <= 0:
            raise ValueError("radii and camera distance must be positive")
        if self.iris_radius >= self.eyeball_radius:
            raise ValueError("iris radius must be smaller than the eyeball radius")
        if len(self.light_positions) < 1:
            raise ValueError("at least one illuminator is required")

    @property
    def focal_px(self) -> float:
        """Pinhole focal length in pixels, set by the horizontal field of view."""
        return (self.width / 2.0) / math.tan(math.radians(self.fov) / 2.0)

    @property
    def deg_per_px(self) -> float:
        """Angular pitch of one pixel (degrees of visual field per pixel)."""
        return self.fov / self.width

    @property
    def camera_z(self) -> float:
        """World z of the camera pinhole (distance is taken from the neutral pupil)."""
        return self.eyeball_radius + self.camera_distance


class ProjectedPoint(NamedTuple):
    """Continuous pixel coordinates of a projected point. Pixel (c, r) has centre (c+0.5, r+0.5)."""

    x: float
    y: float
    in_frame: bool


@dataclass(frozen=True)
class FrameTruth:
    """Ground-truth annotations attached to a rendered frame."""

    pupil: ProjectedPoint
    glints: tuple


@dataclass
class Frame:
    """A rendered grayscale frame with intensities in [0, 1]. Treat as immutable."""

    width: int
    height: int
    intensities: np.ndarray
    truth: FrameTruth | None = field(default=None)


def gaze_direction(eye: EyeState) -> np.ndarray:
    """Unit gaze vector: horizontal rotation applied first, then vertical."""
    th = math.radians(eye.theta_h)
    tv = math.radians(eye.theta_v)
    return np.array([math.sin(th), math.cos(th) * math.sin(tv), math.cos(th) * math.cos(tv)])


def assembly_translation(pose: SensorPose) -> np.ndarray:
    """World-frame translation of the camera/illuminator assembly for a pose."""
    # pose dx is positive away from the nose (+x nasal), pose dy positive upward (+y down)
    return np.array([-pose.dx, -pose.dy, 0.0])


def camera_center(pose: SensorPose, cfg: SceneConfig) -> np.ndarray:
    base = np.array([0.0, cfg.camera_offset_v, cfg.camera_z])
    return base + assembly_translation(pose)


def light_positions(pose: SensorPose, cfg: SceneConfig) -> np.ndarray:
    """Illuminator positions for a pose; lights ride with the camera."""
    return np.asarray(cfg.light_positions, dtype=float) + assembly_translation(pose)


def project_point(point, pose: SensorPose, cfg: SceneConfig) -> ProjectedPoint:
    """Pinhole projection of a world point into continuous pixel coordinates."""
    p = np.asarray(point, dtype=float)
    cam = camera_center(pose, cfg)
    depth = cam[2] - p[2]
    if depth <= 0:
        raise FrustumError(f"point {p} is not in front of the camera")
    f = cfg.focal_px
    px = cfg.width / 2.0 + f * (p[0] - cam[0]) / depth
    py = cfg.height / 2.0 + f * (p[1] - cam[1]) / depth
    in_frame = bool(0.0 <= px < cfg.width and 0.0 <= py < cfg.height)
    return ProjectedPoint(px, py, in_frame)


def pupil_center_px(eye: EyeState, pose: SensorPose, cfg: SceneConfig) -> ProjectedPoint:
    """Projection of the pupil centre (the point of the eyeball sphere on the gaze axis)."""
    return project_point(cfg.eyeball_radius * gaze_direction(eye), pose, cfg)


def _glint_point(eye: EyeState, pose: SensorPose, cfg: SceneConfig, index: int) -> np.ndarray:
    """Virtual image of illuminator ``index`` in the corneal convex mirror.

    For a source far from a convex mirror of radius R the image sits R/2 behind
    the surface along the source-to-centre axis, i.e. at centre + (R/2) * u with
    u the unit vector from the corneal centre toward the source.
    """
    cornea_c = cfg.cornea_center_offset * gaze_direction(eye)
    light = light_positions(pose, cfg)[index]
    u = light - cornea_c
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError("illuminator coincides with the corneal centre")
    return cornea_c + (cfg.cornea_radius / 2.0) * (u / norm)


def corneal_reflection_px(eye: EyeState, pose: SensorPose, cfg: SceneConfig, light_index: int = 0) -> ProjectedPoint:
    """Projection of one corneal glint."""
    return project_point(_glint_point(eye, pose, cfg, light_index), pose, cfg)


@lru_cache(maxsize=8)
def _pixel_rays(cfg: SceneConfig) -> np.ndarray:
    """Unit ray directions through every pixel centre, camera frame == world axes."""
    f = cfg.focal_px
    u = np.arange(cfg.width) + 0.5 - cfg.width / 2.0
    v = np.arange(cfg.height) + 0.5 - cfg.height / 2.0
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([uu, vv, np.full_like(uu, -f)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs


def _smooth01(x: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def render_frame(eye: EyeState, pose: SensorPose, cfg: SceneConfig) -> Frame:
    """Render the scene for one eye state and sensor pose.

    Region reflectances are flat; boundaries are blended over roughly one
    pixel.  Rays that miss the eyeball get the sclera value (a matte surround
    standing in for skin of similar brightness keeps frame edges out of the
    differential photosensor signal).  Raises :class:`FrustumError` when the
    eye centre does not project into the frame.
    """
    R = cfg.eyeball_radius
    gaze = gaze_direction(eye)
    cam = camera_center(pose, cfg)

    if not project_point((0.0, 0.0, 0.0), pose, cfg).in_frame:
        raise FrustumError("eye is outside the camera frustum for this configuration")

    dirs = _pixel_rays(cfg)
    b = dirs @ cam
    disc = b * b - (cam @ cam - R * R)
    hit = disc > 0.0
    t = -b - np.sqrt(np.where(hit, disc, 0.0))
    hit &= t > 0.0

    p = cam + t[..., None] * dirs
    cos_alpha = np.clip((p @ gaze) / R, -1.0, 1.0)
    alpha = np.arccos(cos_alpha)

    alpha_pupil = math.asin(min(eye.pupil_radius / R, 1.0))
    alpha_iris = math.asin(min(cfg.iris_radius / R, 1.0))
    # ~1 px of anti-alias blend, expressed as arc length on the eyeball surface
    blend_mm = cfg.camera_distance / cfg.focal_px

    s_pupil = R * (alpha - alpha_pupil)
    s_iris = R * (alpha - alpha_iris)
    val = (
        cfg.reflect_pupil
        + (cfg.reflect_iris - cfg.reflect_pupil) * _smooth01(s_pupil / blend_mm + 0.5)
        + (cfg.reflect_sclera - cfg.reflect_iris) * _smooth01(s_iris / blend_mm + 0.5)
    )
    img = np.where(hit, val, cfg.reflect_sclera)

    pupil_truth = project_point(R * gaze, pose, cfg)
    glints = []
    sigma = cfg.glint_sigma_px
    for i in range(len(cfg.light_positions)):
        gp = project_point(_glint_point(eye, pose, cfg, i), pose, cfg)
        glints.append(gp)
        _splat_glint(img, gp.x, gp.y, sigma, cfg.reflect_glint)

    np.clip(img, 0.0, 1.0, out=img)
    img.flags.writeable = False
    return Frame(cfg.width, cfg.height, img, FrameTruth(pupil_truth, tuple(glints)))


def _splat_glint(img: np.ndarray, px: float, py: float, sigma: float, amp: float) -> None:
    """Add one Gaussian glint spot in place, restricted to a +/-4 sigma patch."""
    h, w = img.shape
    reach = 4.0 * sigma
    c0 = max(int(math.floor(px - reach)), 0)
    c1 = min(int(math.ceil(px + reach)) + 1, w)
    r0 = max(int(math.floor(py - reach)), 0)
    r1 = min(int(math.ceil(py + reach)) + 1, h)
    if c0 >= c1 or r0 >= r1:
        return
    cols = np.arange(c0, c1) + 0.5 - px
    rows = np.arange(r0, r1) + 0.5 - py
    dd = rows[:, None] ** 2 + cols[None, :] ** 2
    img[r0:r1, c0:c1] += amp * np.exp(-dd / (2.0 * sigma * sigma))


def write_pgm(frame: Frame, path, comment: str | None = None) -> None:
    """Dump a frame as binary 8-bit PGM (values round(v * 255))."""
    data = np.round(frame.intensities * 255.0).astype(np.uint8)
    header = "P5\n"
    if comment:
        header += f"# {comment}\n"
    header += f"{frame.width} {frame.height}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> Frame:
    """Read a binary 8-bit PGM written by :func:`write_pgm` back into a frame."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise ValueError("not a binary PGM file")
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(blob) and blob[i : i + 1].isspace():
            i += 1
        if blob[i : i + 1] == b"#":
            while i < len(blob) and blob[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(blob) and not blob[i : i + 1].isspace():
            i += 1
        tokens.append(blob[start:i])
    i += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError("only 8-bit PGM frames are supported")
    data = np.frombuffer(blob[i : i + width * height], dtype=np.uint8)
    if data.size != width * height:
        raise ValueError("truncated PGM payload")
    img = data.reshape(height, width).astype(float) / 255.0
    img.flags.writeable = False
    return Frame(width, height, img)
