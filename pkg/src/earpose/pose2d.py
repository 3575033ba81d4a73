"""Apparent 2D ear angle from keypoints or from a mask outline.

Image coordinates have their origin top-left with y pointing down. Apparent
angles are measured clockwise from image-up: 0 is an ear pointing up in the
image, +90 pointing right, 180 pointing down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (DegenerateConic, DegenerateKeypoints, MissingKeypoint,
                         NearCircular, TooFewPoints)
from .geometry import wrap_axial, wrap_signed

MIN_KP_SEPARATION = 4.0
MIN_AXIS_RATIO = 1.05


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    visibility: int = 2

    def __post_init__(self):
        if self.visibility not in (0, 1, 2):
            raise ValueError(f"visibility must be 0, 1 or 2, got {self.visibility}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")


@dataclass(frozen=True)
class EllipseFit:
    center: tuple
    semi_major: float
    semi_minor: float
    axis_angle: float  # clockwise from image-up, [0, 180)


@dataclass(frozen=True)
class ApparentAngle:
    theta2: float
    sign_known: bool


def keypoint_angle(node: Keypoint, tip: Keypoint,
                   min_separation: float = MIN_KP_SEPARATION) -> ApparentAngle:
    """Angle of the node->tip vector, clockwise from image-up."""
    if node.visibility == 0 or tip.visibility == 0:
        raise MissingKeypoint("node and tip must both be labeled (visibility >= 1)")
    dx = tip.x - node.x
    dy = tip.y - node.y
    if math.hypot(dx, dy) < min_separation:
        raise DegenerateKeypoints(
            f"keypoints {math.hypot(dx, dy):.3g} px apart, need >= {min_separation}")
    return ApparentAngle(wrap_signed(math.degrees(math.atan2(dx, -dy))), True)


def _conic_to_geometry(coef):
    a, b, c, d, e, f = coef
    # major axis follows the eigenvector of the smaller quadratic-form eigenvalue
    q = np.array([[a, b / 2.0], [b / 2.0, c]])
    if np.trace(q) < 0:
        q = -q
        a, b, c, d, e, f = (-v for v in coef)
    evals, evecs = np.linalg.eigh(q)
    if evals[0] <= 0:
        raise DegenerateConic("conic is not an ellipse")
    center = np.linalg.solve(2.0 * q, -np.array([d, e]))
    f0 = f + 0.5 * (d * center[0] + e * center[1])
    if f0 >= 0:
        raise DegenerateConic("imaginary ellipse")
    semi = np.sqrt(-f0 / evals)
    vx, vy = evecs[:, 0]
    angle = wrap_axial(math.degrees(math.atan2(vx, -vy)))
    return (float(center[0]), float(center[1])), float(semi[0]), float(semi[1]), angle


def fit_ellipse_direct(points, min_axis_ratio: float = MIN_AXIS_RATIO) -> EllipseFit:
    """Constrained algebraic ellipse fit of a point set.

    Minimises the algebraic distance of ``a x^2 + b xy + c y^2 + d x + e y + f``
    subject to ``4ac - b^2 = 1``, splitting the scatter matrix into quadratic
    and linear blocks so only a 3x3 eigenproblem is solved. Points are
    centred and scaled before fitting.

    Raises
    ------
    TooFewPoints
        Fewer than six points.
    DegenerateConic
        Collinear or otherwise degenerate input.
    NearCircular
        Axis ratio below ``min_axis_ratio``; orientation is meaningless.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if len(pts) < 6:
        raise TooFewPoints(f"need at least 6 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    mean = pts.mean(axis=0)
    scale = np.sqrt(((pts - mean) ** 2).sum(axis=1).mean())
    if scale == 0:
        raise DegenerateConic("all points coincide")
    x = (pts[:, 0] - mean[0]) / scale
    y = (pts[:, 1] - mean[1]) / scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    if np.linalg.cond(s3) > 1e12:
        raise DegenerateConic("points are collinear")
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    # premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]]
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m)
    evecs = np.real(evecs)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if len(ok) == 0:
        raise DegenerateConic("no elliptical solution")
    a1 = evecs[:, ok[np.argmin(np.abs(np.real(evals[ok])))]]
    coef = np.concatenate([a1, t @ a1])

    try:
        (cx, cy), s_major, s_minor, angle = _conic_to_geometry(coef)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConic(str(exc)) from exc
    if s_minor <= 0 or not math.isfinite(s_major):
        raise DegenerateConic("degenerate axes")
    if s_major / s_minor < min_axis_ratio:
        raise NearCircular(f"axis ratio {s_major / s_minor:.4f} < {min_axis_ratio}")
    return EllipseFit(center=(float(cx * scale + mean[0]), float(cy * scale + mean[1])),
                      semi_major=float(s_major * scale),
                      semi_minor=float(s_minor * scale),
                      axis_angle=angle)


def ellipse_apparent_angle(fit: EllipseFit) -> ApparentAngle:
    return ApparentAngle(wrap_axial(fit.axis_angle), False)
