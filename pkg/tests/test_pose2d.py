import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from earpose.exceptions import (DegenerateConic, DegenerateKeypoints, MissingKeypoint,
                                NearCircular, TooFewPoints)
from earpose.geometry import axial_diff
from earpose.pose2d import (Keypoint, ellipse_apparent_angle, fit_ellipse_direct,
                            keypoint_angle)


def ellipse_points(cx, cy, a, b, angle_deg, n=40, start=0.0, stop=2 * math.pi):
    """Points of an ellipse whose major axis is ``angle_deg`` clockwise from image-up."""
    r = math.radians(angle_deg)
    u = np.array([math.sin(r), -math.cos(r)])
    v = np.array([math.cos(r), math.sin(r)])
    t = np.linspace(start, stop, n, endpoint=False)
    return np.array([cx, cy]) + np.outer(a * np.cos(t), u) + np.outer(b * np.sin(t), v)


@pytest.mark.parametrize("tip, expected", [((0, -10), 0.0), ((10, 0), 90.0), ((0, 10), 180.0),
                                           ((-10, 0), -90.0), ((10, -10), 45.0)])
def test_keypoint_angle_directions(tip, expected):
    a = keypoint_angle(Keypoint(0, 0), Keypoint(*tip))
    assert a.theta2 == pytest.approx(expected)
    assert a.sign_known


def test_keypoint_angle_errors():
    with pytest.raises(DegenerateKeypoints):
        keypoint_angle(Keypoint(0, 0), Keypoint(1, 1))
    with pytest.raises(MissingKeypoint):
        keypoint_angle(Keypoint(0, 0, 0), Keypoint(0, -20))
    # partially occluded keypoints are still usable
    assert keypoint_angle(Keypoint(0, 0, 1), Keypoint(0, -20, 1)).theta2 == 0.0
    with pytest.raises(ValueError):
        Keypoint(0, 0, 3)


@pytest.mark.parametrize("angle", [0.0, 30.0, 90.0, 135.0, 179.0])
def test_ellipse_exact_recovery(angle):
    pts = ellipse_points(300.0, 200.0, 60.0, 20.0, angle)
    fit = fit_ellipse_direct(pts)
    assert fit.center[0] == pytest.approx(300.0, rel=1e-6)
    assert fit.center[1] == pytest.approx(200.0, rel=1e-6)
    assert fit.semi_major == pytest.approx(60.0, rel=1e-6)
    assert fit.semi_minor == pytest.approx(20.0, rel=1e-6)
    assert abs(axial_diff(fit.axis_angle, angle)) < 1e-6
    assert 0.0 <= fit.axis_angle < 180.0


@settings(max_examples=60, deadline=None)
@given(st.floats(-500, 500), st.floats(-500, 500), st.floats(5, 200), st.floats(1.5, 8),
       st.floats(0, 180))
def test_ellipse_recovery_property(cx, cy, a, ratio, angle):
    b = a / ratio
    fit = fit_ellipse_direct(ellipse_points(cx, cy, a, b, angle, n=30))
    assert fit.semi_major == pytest.approx(a, rel=1e-6)
    assert fit.semi_minor == pytest.approx(b, rel=1e-6)
    assert abs(axial_diff(fit.axis_angle, angle)) < 1e-5


def test_ellipse_from_partial_arc():
    pts = ellipse_points(0.0, 0.0, 50.0, 15.0, 70.0, n=25, stop=math.pi)
    fit = fit_ellipse_direct(pts)
    assert abs(axial_diff(fit.axis_angle, 70.0)) < 1e-6


def test_ellipse_noise_angle_within_half_degree():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        angle = rng.uniform(0, 180)
        pts = ellipse_points(100, 100, 40, 40 / 1.5, angle, n=48)
        pts = pts + rng.normal(0, 0.1, pts.shape)
        worst = max(worst, abs(axial_diff(fit_ellipse_direct(pts).axis_angle, angle)))
    assert worst < 0.5


def test_circle_is_near_circular():
    with pytest.raises(NearCircular):
        fit_ellipse_direct(ellipse_points(0, 0, 30, 30, 0))
    with pytest.raises(NearCircular):
        fit_ellipse_direct(ellipse_points(0, 0, 30, 29.5, 45))


def test_degenerate_inputs():
    with pytest.raises(TooFewPoints):
        fit_ellipse_direct(ellipse_points(0, 0, 30, 10, 0, n=5))
    line = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(DegenerateConic):
        fit_ellipse_direct(line)
    with pytest.raises(DegenerateConic):
        fit_ellipse_direct(np.ones((8, 2)))
    with pytest.raises(ValueError):
        fit_ellipse_direct(np.zeros((8, 3)))


def test_ellipse_apparent_angle_is_axial():
    fit = fit_ellipse_direct(ellipse_points(0, 0, 30, 10, 150))
    a = ellipse_apparent_angle(fit)
    assert not a.sign_known
    assert a.theta2 == pytest.approx(150.0)
