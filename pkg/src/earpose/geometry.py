"""Angle arithmetic, world conventions and the pixel-to-bearing camera model.

World frame is east-north-up. Cardinal angles are compass degrees,
clockwise from north. The off-stalk angle is the tilt from world vertical:
0 is straight up, 180 straight down. Everything outside numeric kernels is
in degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POLE_EPS = 1e-9

PROJECTIONS = ("linear", "pinhole")


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite angle: {v!r}")


def wrap_signed(a: float) -> float:
    """Wrap degrees into (-180, 180]."""
    _check_finite(a)
    r = math.fmod(a, 360.0)
    if r > 180.0:
        r -= 360.0
    elif r <= -180.0:
        r += 360.0
    return r


def wrap_unsigned(a: float) -> float:
    """Wrap degrees into [0, 360)."""
    _check_finite(a)
    r = math.fmod(a, 360.0)
    if r < 0.0:
        r += 360.0
    if r >= 360.0:
        r = 0.0
    return r


def wrap_axial(a: float) -> float:
    """Wrap degrees into [0, 180) -- for axes with no preferred sign."""
    _check_finite(a)
    r = math.fmod(a, 180.0)
    if r < 0.0:
        r += 180.0
    if r >= 180.0:
        r = 0.0
    return r


def circ_diff(a: float, b: float) -> float:
    """Signed shortest arc from ``b`` to ``a`` in (-180, 180]."""
    _check_finite(a, b)
    return wrap_signed(a - b)


def axial_diff(a: float, b: float) -> float:
    """Signed difference of two axes (mod 180) in (-90, 90]."""
    _check_finite(a, b)
    r = math.fmod(a - b, 180.0)
    if r > 90.0:
        r -= 180.0
    elif r <= -90.0:
        r += 180.0
    return r


@dataclass(frozen=True)
class CameraConfig:
    """Level camera looking horizontally along compass ``heading``.

    ``projection`` selects how a pixel column maps to a horizontal angle:
    ``"linear"`` divides the offset by the image width and scales by the
    field of view, ``"pinhole"`` uses the exact perspective relation.
    """

    image_width: int = 1280
    image_height: int = 720
    hfov: float = 90.0
    heading: float = 90.0
    projection: str = "linear"

    def __post_init__(self):
        if not (self.image_width > 0 and self.image_height > 0):
            raise ValueError("image dimensions must be positive")
        if not (0.0 < self.hfov < 180.0):
            raise ValueError(f"hfov must lie in (0, 180), got {self.hfov}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        _check_finite(self.heading)

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(math.radians(self.hfov / 2.0))

    @property
    def vfov(self) -> float:
        if self.projection == "linear":
            return self.hfov * self.image_height / self.image_width
        return 2.0 * math.degrees(math.atan((self.image_height / 2.0) / self.focal_px))

    def with_heading(self, heading: float) -> "CameraConfig":
        return CameraConfig(self.image_width, self.image_height, self.hfov,
                            heading, self.projection)


@dataclass(frozen=True)
class EarAngles:
    """Cardinal (compass, [0, 360)) and off-stalk ([0, 180]) angles."""

    cardinal: float
    off_stalk: float

    def __post_init__(self):
        _check_finite(self.cardinal, self.off_stalk)
        if not (0.0 <= self.off_stalk <= 180.0):
            raise ValueError(f"off_stalk must lie in [0, 180], got {self.off_stalk}")


def x_to_camera_angle(x_center: float, cam: CameraConfig) -> float:
    """Horizontal angle of a pixel column from the optical axis, right positive."""
    _check_finite(x_center)
    if not (0.0 <= x_center <= cam.image_width):
        raise ValueError(f"x_center {x_center} outside image width {cam.image_width}")
    if cam.projection == "linear":
        return (x_center / cam.image_width - 0.5) * cam.hfov
    return math.degrees(math.atan((x_center - cam.image_width / 2.0) / cam.focal_px))


def y_to_elevation(y_center: float, cam: CameraConfig) -> float:
    """Vertical angle of a pixel row above the optical axis (up positive).

    Only used by the pinhole perspective correction; square pixels assumed.
    """
    _check_finite(y_center)
    v = cam.image_height / 2.0 - y_center
    if cam.projection == "linear":
        return v / cam.image_width * cam.hfov
    return math.degrees(math.atan(v / cam.focal_px))


def observation_bearing(theta1: float, cam: CameraConfig) -> float:
    """Compass bearing from camera to target given its off-axis angle."""
    _check_finite(theta1)
    return wrap_unsigned(cam.heading + theta1)


def direction_from_angles(angles: EarAngles) -> np.ndarray:
    """Unit east-north-up vector for an ear orientation."""
    phi = math.radians(angles.cardinal)
    psi = math.radians(angles.off_stalk)
    return np.array([math.sin(phi) * math.sin(psi),
                     math.cos(phi) * math.sin(psi),
                     math.cos(psi)])


def angles_from_direction(d) -> EarAngles:
    """Inverse of :func:`direction_from_angles`.

    At the poles (``sin(off_stalk) < 1e-9``) the cardinal is undefined and
    reported as 0; use :func:`cardinal_defined` to check.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (3,) or not np.all(np.isfinite(d)):
        raise ValueError("direction must be a finite 3-vector")
    if abs(float(np.dot(d, d)) - 1.0) > 2e-6:
        raise ValueError(f"direction is not unit length (|d| = {np.linalg.norm(d):.9g})")
    x, y, z = (float(c) for c in d)
    psi = math.degrees(math.acos(min(1.0, max(-1.0, z))))
    if math.hypot(x, y) < POLE_EPS:
        return EarAngles(0.0, psi)
    return EarAngles(wrap_unsigned(math.degrees(math.atan2(x, y))), psi)


def cardinal_defined(d, eps: float = POLE_EPS) -> bool:
    d = np.asarray(d, dtype=float)
    return math.hypot(d[0], d[1]) >= eps


def horizontal_right(bearing: float) -> np.ndarray:
    """Image-right direction of a level camera looking along ``bearing``."""
    b = math.radians(bearing)
    return np.array([math.cos(b), -math.sin(b), 0.0])


def line_of_sight(bearing: float, elevation: float = 0.0) -> np.ndarray:
    b = math.radians(bearing)
    e = math.radians(elevation)
    return np.array([math.sin(b) * math.cos(e), math.cos(b) * math.cos(e), math.sin(e)])


def view_basis(bearing: float, elevation: float = 0.0):
    """(right, up) unit vectors spanning the plane perpendicular to a ray.

    ``right`` stays horizontal (level camera); ``up`` equals world up for a
    horizontal ray and tilts back as the ray rises.
    """
    b = math.radians(bearing)
    e = math.radians(elevation)
    right = np.array([math.cos(b), -math.sin(b), 0.0])
    # right x line_of_sight, expanded
    up = np.array([-math.sin(b) * math.sin(e), -math.cos(b) * math.sin(e), math.cos(e)])
    return right, up


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def pixel_ray(x: float, y: float, cam: CameraConfig, heading: float | None = None) -> np.ndarray:
    """World direction (not normalised) of the pinhole ray through a pixel."""
    heading = cam.heading if heading is None else heading
    h = math.radians(heading)
    forward = np.array([math.sin(h), math.cos(h), 0.0])
    right = np.array([math.cos(h), -math.sin(h), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    u = x - cam.image_width / 2.0
    v = cam.image_height / 2.0 - y
    return u * right + v * up + cam.focal_px * forward


def image_angle_to_view_angle(theta2: float, x: float, y: float, cam: CameraConfig,
                              heading: float | None = None):
    """Re-express an image-plane angle in the frame perpendicular to its ray.

    A pinhole camera stretches off-axis image directions; the fusion model
    assumes the apparent angle is measured perpendicular to the line of
    sight. The back-projection plane of the image line through ``(x, y)``
    is the same in both descriptions, so the conversion is exact.

    Returns ``(theta2_view, bearing, elevation)`` in degrees.
    """
    heading = cam.heading if heading is None else heading
    ray = pixel_ray(x, y, cam, heading)
    h = math.radians(heading)
    right = np.array([math.cos(h), -math.sin(h), 0.0])
    t = math.radians(theta2)
    image_dir = math.sin(t) * right + math.cos(t) * np.array([0.0, 0.0, 1.0])
    normal = _cross(ray, image_dir)

    bearing = wrap_unsigned(math.degrees(math.atan2(ray[0], ray[1])))
    elevation = math.degrees(math.atan2(ray[2], math.hypot(ray[0], ray[1])))
    r_hat, u_hat = view_basis(bearing, elevation)
    theta_view = math.degrees(math.atan2(-float(normal @ u_hat), float(normal @ r_hat)))
    return wrap_signed(theta_view), bearing, elevation
