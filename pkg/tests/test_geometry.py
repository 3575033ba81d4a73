import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from earpose.geometry import (CameraConfig, EarAngles, angles_from_direction, axial_diff,
                              cardinal_defined, circ_diff, direction_from_angles,
                              image_angle_to_view_angle, observation_bearing, pixel_ray,
                              view_basis, wrap_axial, wrap_signed, wrap_unsigned,
                              x_to_camera_angle)

finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize("a, expected", [(190, -170), (-180, 180), (720, 0), (180, 180),
                                         (-190, 170), (0, 0)])
def test_wrap_signed_examples(a, expected):
    assert wrap_signed(a) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a, b, expected", [(350, 10, -20), (10, 350, 20), (170, -170, -20)])
def test_circ_diff_examples(a, b, expected):
    assert circ_diff(a, b) == pytest.approx(expected, abs=1e-12)


@given(finite)
def test_wrap_signed_range_and_idempotent(a):
    w = wrap_signed(a)
    assert -180.0 < w <= 180.0
    assert wrap_signed(w) == w
    assert math.isclose(math.cos(math.radians(w)), math.cos(math.radians(a)), abs_tol=1e-9)


@given(finite)
def test_wrap_unsigned_and_axial_ranges(a):
    assert 0.0 <= wrap_unsigned(a) < 360.0
    assert 0.0 <= wrap_axial(a) < 180.0
    assert wrap_unsigned(wrap_unsigned(a)) == wrap_unsigned(a)


@given(finite, finite)
def test_circ_diff_antisymmetric(a, b):
    d1, d2 = circ_diff(a, b), circ_diff(b, a)
    if d1 == 180.0:
        assert d2 == 180.0
    else:
        assert d1 == pytest.approx(-d2, abs=1e-6)


def test_axial_diff():
    assert axial_diff(179, -179) == pytest.approx(-2.0)
    assert axial_diff(10, 190) == pytest.approx(0.0)
    assert -90 < axial_diff(45, 136) <= 90


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        wrap_signed(bad)
    with pytest.raises(ValueError):
        circ_diff(bad, 0.0)


def test_camera_angle_examples():
    lin = CameraConfig(1280, 720, 90.0, 90.0, "linear")
    pin = CameraConfig(1280, 720, 90.0, 90.0, "pinhole")
    assert x_to_camera_angle(640, lin) == 0.0
    assert x_to_camera_angle(1280, lin) == pytest.approx(45.0)
    assert x_to_camera_angle(960, pin) == pytest.approx(26.565051177, abs=1e-6)
    assert x_to_camera_angle(1280, pin) == pytest.approx(45.0)
    with pytest.raises(ValueError):
        x_to_camera_angle(1281, lin)
    with pytest.raises(ValueError):
        x_to_camera_angle(-1, pin)


def test_camera_config_validation():
    for kw in (dict(hfov=0), dict(hfov=180), dict(image_width=0), dict(projection="fisheye")):
        with pytest.raises(ValueError):
            CameraConfig(**kw)


def test_projection_modes_agree_for_narrow_fov():
    lin = CameraConfig(1280, 720, 10.0, 0.0, "linear")
    pin = CameraConfig(1280, 720, 10.0, 0.0, "pinhole")
    xs = np.linspace(0, 1280, 257)
    diffs = [abs(x_to_camera_angle(x, lin) - x_to_camera_angle(x, pin)) for x in xs]
    assert max(diffs) <= 0.05


@pytest.mark.parametrize("projection", ["linear", "pinhole"])
def test_camera_angle_strictly_increasing(projection):
    cam = CameraConfig(1280, 720, 90.0, 0.0, projection)
    vals = [x_to_camera_angle(x, cam) for x in np.linspace(0, 1280, 101)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("theta1, heading, expected", [(0, 90, 90), (-45, 30, 345),
                                                       (22.5, 350, 12.5)])
def test_observation_bearing(theta1, heading, expected):
    cam = CameraConfig(heading=heading)
    b = observation_bearing(theta1, cam)
    assert b == pytest.approx(expected)
    assert circ_diff(b, heading) == pytest.approx(theta1)


def test_direction_examples():
    assert np.allclose(direction_from_angles(EarAngles(123, 0)), [0, 0, 1])
    assert np.allclose(direction_from_angles(EarAngles(90, 90)), [1, 0, 0], atol=1e-15)
    d = direction_from_angles(EarAngles(40, 60))
    assert np.allclose(d, [0.5567, 0.6634, 0.5000], atol=5e-5)


def test_angles_from_direction_examples():
    a = angles_from_direction([0, 0, 1])
    assert (a.cardinal, a.off_stalk) == (0.0, 0.0)
    assert not cardinal_defined([0, 0, 1])
    a = angles_from_direction([0, -1, 0])
    assert a.cardinal == pytest.approx(180.0) and a.off_stalk == pytest.approx(90.0)
    with pytest.raises(ValueError):
        angles_from_direction([0, 0, 2])
    with pytest.raises(ValueError):
        angles_from_direction([0, 1])


@given(st.floats(0, 359.999), st.floats(0.01, 179.99))
def test_round_trip(phi, psi):
    a = angles_from_direction(direction_from_angles(EarAngles(phi, psi)))
    assert abs(circ_diff(a.cardinal, phi)) < 1e-9
    assert a.off_stalk == pytest.approx(psi, abs=1e-9)


def test_ear_angles_validation():
    with pytest.raises(ValueError):
        EarAngles(0.0, 181.0)
    with pytest.raises(ValueError):
        EarAngles(float("nan"), 10.0)


@given(st.floats(0, 360), st.floats(-60, 60))
def test_view_basis_orthonormal(bearing, elevation):
    right, up = view_basis(bearing, elevation)
    b, e = math.radians(bearing), math.radians(elevation)
    ray = np.array([math.sin(b) * math.cos(e), math.cos(b) * math.cos(e), math.sin(e)])
    assert abs(right @ up) < 1e-12 and abs(right @ ray) < 1e-12 and abs(up @ ray) < 1e-12
    assert np.linalg.norm(right) == pytest.approx(1) and np.linalg.norm(up) == pytest.approx(1)
    assert up[2] >= 0


def test_view_angle_on_axis_is_unchanged():
    cam = CameraConfig(projection="pinhole", heading=30.0)
    t, b, e = image_angle_to_view_angle(25.0, 640, 360, cam)
    assert t == pytest.approx(25.0) and b == pytest.approx(30.0) and e == pytest.approx(0.0)


def test_view_angle_preserves_back_projection_plane():
    # the plane through the ray spanned by an image direction must equal the
    # plane spanned by the corrected view-frame direction
    cam = CameraConfig(projection="pinhole", heading=70.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y, theta = rng.uniform(0, 1280), rng.uniform(0, 720), rng.uniform(-180, 180)
        t, b, e = image_angle_to_view_angle(theta, x, y, cam)
        ray = pixel_ray(x, y, cam)
        right, up = view_basis(b, e)
        assert np.allclose(ray / np.linalg.norm(ray), np.cross(up, right), atol=1e-12)
        h = math.radians(cam.heading)
        img = (math.sin(math.radians(theta)) * np.array([math.cos(h), -math.sin(h), 0])
               + math.cos(math.radians(theta)) * np.array([0, 0, 1.0]))
        view = math.sin(math.radians(t)) * right + math.cos(math.radians(t)) * up
        n1, n2 = np.cross(ray, img), np.cross(ray, view)
        n1, n2 = n1 / np.linalg.norm(n1), n2 / np.linalg.norm(n2)
        assert np.allclose(n1, n2, atol=1e-9)
