"""Fuse per-frame (bearing, apparent angle) observations into a 3D direction.

Each observation says the ear direction ``d`` lies in a plane through the
origin: the plane spanned by the line of sight and the apparent image
direction. Its normal is ``cos(theta2) * right - sin(theta2) * up``. With
several bearings the planes meet in a single line; noisy planes are
intersected in the least-squares sense by taking the eigenvector of the
smallest eigenvalue of ``sum w n n^T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (IllConditioned, SkippedForPlot, TooFewObservations,
                         UnderconstrainedBearing)
from .geometry import (EarAngles, angles_from_direction, direction_from_angles,
                       view_basis, wrap_signed, wrap_unsigned)

CARDINAL_UNDEFINED = "cardinal_undefined"
SIGN_AMBIGUOUS = "sign_ambiguous"
FLAGS = (CARDINAL_UNDEFINED, SIGN_AMBIGUOUS)


@dataclass(frozen=True)
class Observation:
    bearing: float
    theta2: float
    weight: float = 1.0
    sign_known: bool = True
    frame_index: int = 0
    elevation: float = 0.0


@dataclass(frozen=True)
class FusionParams:
    min_spread: float = 5.0
    eps_cond: float = 1e-3
    psi_min: float = 2.0
    jacobi_tol: float = 1e-12
    max_sweeps: int = 50


@dataclass(frozen=True)
class EarEstimate:
    angles: EarAngles
    direction: tuple
    residual_deg: float
    n_obs: int
    bearing_spread_deg: float
    eig_ratio: float
    flags: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class TanPlaneLine:
    normal: tuple
    offset: float


def forward_apparent_angle(angles: EarAngles, bearing: float, elevation: float = 0.0) -> float:
    """Apparent clockwise-from-up angle of an ear seen along ``bearing``."""
    d = direction_from_angles(angles)
    right, up = view_basis(bearing, elevation)
    return wrap_signed(math.degrees(math.atan2(float(d @ right), float(d @ up))))


def constraint_normal(bearing: float, theta2: float, elevation: float = 0.0) -> np.ndarray:
    right, up = view_basis(bearing, elevation)
    t = math.radians(theta2)
    return math.cos(t) * right - math.sin(t) * up


def apparent_direction(bearing: float, theta2: float, elevation: float = 0.0) -> np.ndarray:
    """3D unit vector of the observed node->tip direction in the view plane."""
    right, up = view_basis(bearing, elevation)
    t = math.radians(theta2)
    return math.sin(t) * right + math.cos(t) * up


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 50):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.

    Returns eigenvalues in ascending order and the matching eigenvectors as
    columns. Iteration stops once the off-diagonal Frobenius norm falls
    below ``tol`` times the matrix norm.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, rtol=0, atol=1e-12 * (1 + np.abs(a).max())):
        raise ValueError("matrix must be square and symmetric")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    scale = math.sqrt(float((a * a).sum()))
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        # summed directly: |A|^2 - |diag A|^2 cancels catastrophically
        off = math.sqrt(float((np.triu(a, 1) ** 2).sum() * 2.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                g = np.eye(n)
                g[p, p] = g[q, q] = c
                g[p, q] = s
                g[q, p] = -s
                a = g.T @ a @ g
                a[p, q] = a[q, p] = 0.0
                v = v @ g
    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order], v[:, order]


def bearing_spread(bearings) -> float:
    """Smallest arc (degrees) containing every bearing."""
    b = sorted(wrap_unsigned(float(x)) for x in bearings)
    if len(b) < 2:
        return 0.0
    gaps = [b[i + 1] - b[i] for i in range(len(b) - 1)]
    gaps.append(b[0] + 360.0 - b[-1])
    return 360.0 - max(gaps)


def _valid(o):
    return (math.isfinite(o.bearing) and math.isfinite(o.theta2)
            and math.isfinite(o.elevation) and o.weight > 0 and math.isfinite(o.weight))


def estimate_direction(observations, params: FusionParams | None = None) -> EarEstimate:
    """Least-squares intersection of the observation planes.

    Raises
    ------
    TooFewObservations
        Fewer than two usable observations.
    UnderconstrainedBearing
        Bearings span less than ``params.min_spread`` degrees.
    IllConditioned
        The second-smallest eigenvalue is below ``eps_cond`` of the trace,
        so the planes do not pin down a single line.
    """
    params = params or FusionParams()
    obs = [o for o in observations if _valid(o)]
    if len(obs) < 2:
        raise TooFewObservations(f"need >= 2 observations, got {len(obs)}")
    spread = bearing_spread([o.bearing for o in obs])
    if spread < params.min_spread:
        raise UnderconstrainedBearing(
            f"bearings span {spread:.3g} deg, need >= {params.min_spread}")

    b = np.radians([o.bearing for o in obs])
    e = np.radians([o.elevation for o in obs])
    t = np.radians([o.theta2 for o in obs])
    right = np.column_stack([np.cos(b), -np.sin(b), np.zeros_like(b)])
    up = np.column_stack([-np.sin(b) * np.sin(e), -np.cos(b) * np.sin(e), np.cos(e)])
    normals = np.cos(t)[:, None] * right - np.sin(t)[:, None] * up
    apparent = np.sin(t)[:, None] * right + np.cos(t)[:, None] * up
    w = np.array([o.weight for o in obs])
    m = (normals * w[:, None]).T @ normals
    evals, evecs = jacobi_eigh(m, params.jacobi_tol, params.max_sweeps)
    evals = np.clip(evals, 0.0, None)
    trace = float(evals.sum())
    if trace <= 0 or evals[1] / trace < params.eps_cond:
        raise IllConditioned(
            f"second eigenvalue ratio {evals[1] / trace if trace > 0 else 0:.3g} < {params.eps_cond}")

    d = evecs[:, 0] / np.linalg.norm(evecs[:, 0])
    flags = set()
    known = np.array([o.sign_known for o in obs])
    score = float((w[known] * (apparent[known] @ d)).sum())
    if not known.any() or abs(score) < 1e-9:
        flags.add(SIGN_AMBIGUOUS)
        # first non-zero component positive, starting from up
        for c in (d[2], d[1], d[0]):
            if c != 0.0:
                if c < 0:
                    d = -d
                break
    elif score < 0:
        d = -d

    angles = angles_from_direction(d)
    if angles.off_stalk < params.psi_min or angles.off_stalk > 180.0 - params.psi_min:
        flags.add(CARDINAL_UNDEFINED)

    rms = math.sqrt(float(w @ (normals @ d) ** 2) / float(w.sum()))
    residual = math.degrees(math.asin(min(1.0, rms)))
    eig_ratio = float(evals[0] / evals[1]) if evals[1] > 0 else float("inf")
    return EarEstimate(angles=angles, direction=tuple(float(c) for c in d),
                       residual_deg=residual, n_obs=len(obs),
                       bearing_spread_deg=spread, eig_ratio=eig_ratio,
                       flags=frozenset(flags))


def tan_plane_line(bearing: float, theta2: float) -> TanPlaneLine:
    """Observation as a straight line in the horizontal tan-plane.

    A point ``P`` in the tan-plane stands for the upward direction with
    cardinal ``atan2(P_east, P_north)`` and off-stalk ``atan(|P|)``.
    """
    if abs(abs(wrap_signed(theta2)) - 90.0) < 1e-6:
        raise SkippedForPlot(f"theta2 = {theta2} has no finite tan-plane line")
    r = math.radians(bearing)
    return TanPlaneLine(normal=(math.cos(r), -math.sin(r)),
                        offset=math.tan(math.radians(theta2)))


def tan_plane_point(angles: EarAngles):
    """Tan-plane point of an orientation, mirrored to the upper hemisphere."""
    d = direction_from_angles(angles)
    if d[2] < 0:
        d = -d
    if d[2] < 1e-12:
        raise SkippedForPlot("horizontal direction has no finite tan-plane point")
    return float(d[0] / d[2]), float(d[1] / d[2])
