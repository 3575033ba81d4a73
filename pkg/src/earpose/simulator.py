"""Synthetic crop row and camera pass with exact ground truth.

Ears are static line segments placed along a straight row. A level pinhole
camera travels parallel to the row at constant speed and looks sideways at
it; every frame emits the detections a perfect-but-noisy detector would
produce. All randomness comes from Philox streams keyed by
``(seed, entity, ear, frame)``, so adding an ear or a frame never perturbs
the draws of any other.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .formats import DetectionRecord, FrameRecord
from .geometry import CameraConfig, EarAngles, direction_from_angles, wrap_unsigned
from .pose2d import Keypoint
from .tracker import BBox

_FIELD, _DETECT, _CLUTTER = 1, 2, 3
CLUTTER_ID = -1


def _rng(seed, *key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


@dataclass(frozen=True)
class SimNoise:
    theta2_sigma: float = 3.0
    bbox_center_sigma: float = 2.0
    bbox_size_sigma: float = 2.0
    keypoint_sigma: float = 0.5
    outline_sigma: float = 1.5
    conf_low: float = 0.5
    conf_high: float = 0.95
    miss_rate: float = 0.05
    clutter_rate: float = 0.1

    @classmethod
    def none(cls):
        return cls(theta2_sigma=0.0, bbox_center_sigma=0.0, bbox_size_sigma=0.0,
                   keypoint_sigma=0.0, outline_sigma=0.0, conf_low=0.9, conf_high=0.9,
                   miss_rate=0.0, clutter_rate=0.0)

    def validate(self):
        for f in ("theta2_sigma", "bbox_center_sigma", "bbox_size_sigma",
                  "keypoint_sigma", "outline_sigma"):
            if not getattr(self, f) >= 0:
                raise ValueError(f"noise.{f} must be >= 0")
        for f in ("miss_rate", "clutter_rate"):
            if not 0.0 <= getattr(self, f) <= 1.0:
                raise ValueError(f"noise.{f} must lie in [0, 1]")
        if not 0.0 <= self.conf_low <= self.conf_high <= 1.0:
            raise ValueError("need 0 <= conf_low <= conf_high <= 1")


@dataclass(frozen=True)
class Occlusion:
    ear_id: int
    start: int
    end: int  # inclusive
    partial: bool = False

    def covers(self, ear_id, frame):
        return ear_id == self.ear_id and self.start <= frame <= self.end


@dataclass(frozen=True)
class SimConfig:
    n_ears: int = 50
    row_heading: float = 0.0
    ear_spacing: float = 0.3
    lateral_offset: float = 0.76
    mount_yaw: float = 90.0
    camera_height: float = 1.35
    ear_height_band: tuple = (1.2, 1.5)
    ear_length: float = 0.2
    ear_width: float = 0.05
    cardinal_range: tuple = (0.0, 360.0)
    off_stalk_range: tuple = (20.0, 160.0)
    speed: float = 0.25
    fps: float = 10.0
    image_width: int = 1280
    image_height: int = 720
    hfov: float = 90.0
    projection: str = "pinhole"
    outline_points: int = 24
    noise: SimNoise = field(default_factory=SimNoise)
    occlusions: tuple = ()
    seed: int = 0

    def camera(self) -> CameraConfig:
        return CameraConfig(self.image_width, self.image_height, self.hfov,
                            wrap_unsigned(self.row_heading + self.mount_yaw), self.projection)

    def validate(self):
        if self.n_ears < 1:
            raise ValueError("n_ears must be >= 1")
        for f in ("ear_spacing", "lateral_offset", "ear_length", "ear_width", "speed", "fps"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be positive")
        lo, hi = self.ear_height_band
        if not lo <= hi:
            raise ValueError("ear_height_band must be (low, high)")
        if not 0.0 <= self.off_stalk_range[0] <= self.off_stalk_range[1] <= 180.0:
            raise ValueError("off_stalk_range must lie within [0, 180]")
        if self.outline_points < 6:
            raise ValueError("outline_points must be >= 6")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.noise.validate()
        self.camera()

    def to_dict(self):
        d = asdict(self)
        d["occlusions"] = [asdict(o) for o in self.occlusions]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown simulation keys {sorted(unknown)}")
        if "noise" in d:
            d["noise"] = SimNoise(**d["noise"])
        if "occlusions" in d:
            d["occlusions"] = tuple(Occlusion(**o) for o in d["occlusions"])
        for k in ("ear_height_band", "cardinal_range", "off_stalk_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class SimEar:
    ear_id: int
    position: tuple  # east, north, height (m)
    truth: EarAngles
    length: float = 0.2
    row_class: str = "near"


@dataclass
class SimTruth:
    provenance: list  # per frame: ear id per emitted detection, CLUTTER_ID for clutter
    angles: dict  # ear id -> EarAngles
    labels: list  # per frame: [(ear_id, clean DetectionRecord)]
    ideal_track: dict  # ear id -> ideal track id

    def matches(self, assignments):
        """Per-frame ``{ear_id: track_id}`` given per-frame assigned ids."""
        out = []
        for prov, ids in zip(self.provenance, assignments):
            out.append({e: t for e, t in zip(prov, ids) if e != CLUTTER_ID and t is not None})
        return out


def _unit(deg):
    r = math.radians(deg)
    return np.array([math.sin(r), math.cos(r), 0.0])


def gen_field(config: SimConfig):
    """Ears at ``ear_spacing`` intervals along the row with random truth."""
    config.validate()
    along = _unit(config.row_heading)
    side = _unit(config.row_heading + config.mount_yaw)
    ears = []
    for i in range(config.n_ears):
        rng = _rng(config.seed, _FIELD, i)
        phi = rng.uniform(*config.cardinal_range) % 360.0
        psi = rng.uniform(*config.off_stalk_range)
        height = rng.uniform(*config.ear_height_band)
        p = i * config.ear_spacing * along + config.lateral_offset * side
        ears.append(SimEar(i, (float(p[0]), float(p[1]), float(height)),
                           EarAngles(float(phi), float(psi)), config.ear_length))
    return ears


class _Projector:
    def __init__(self, cam: CameraConfig, position):
        h = math.radians(cam.heading)
        self.forward = np.array([math.sin(h), math.cos(h), 0.0])
        self.right = np.array([math.cos(h), -math.sin(h), 0.0])
        self.pos = np.asarray(position, dtype=float)
        self.f = cam.focal_px
        self.cx = cam.image_width / 2.0
        self.cy = cam.image_height / 2.0

    def depth(self, p):
        return float((np.asarray(p) - self.pos) @ self.forward)

    def __call__(self, p):
        rel = np.asarray(p, dtype=float) - self.pos
        z = float(rel @ self.forward)
        return np.array([self.cx + self.f * float(rel @ self.right) / z,
                         self.cy - self.f * float(rel[2]) / z])


def _rotate(p, center, delta_deg):
    # clockwise on screen (y down) by delta
    r = math.radians(delta_deg)
    c, s = math.cos(r), math.sin(r)
    v = p - center
    return center + np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _image_angle(node, tip):
    return math.degrees(math.atan2(tip[0] - node[0], -(tip[1] - node[1])))


def _ellipse(center, semi_a, semi_b, angle_deg, n):
    r = math.radians(angle_deg)
    u = np.array([math.sin(r), -math.cos(r)])
    v = np.array([-u[1], u[0]])
    t = 2.0 * np.pi * np.arange(n) / n
    return center + np.outer(semi_a * np.cos(t), u) + np.outer(semi_b * np.sin(t), v), u, v


def camera_path(config: SimConfig):
    """Along-row camera positions (m) for every frame."""
    half_view = config.lateral_offset * math.tan(math.radians(config.hfov / 2.0))
    step = config.speed / config.fps
    # half-step offset: with spacing a multiple of the step, an ear would
    # otherwise sit exactly on the field-of-view edge and its visibility
    # would hinge on rounding
    start = -half_view - 0.5 * step
    end = (config.n_ears - 1) * config.ear_spacing + half_view + step
    n = int(math.ceil((end - start) / step)) + 1
    return start + step * np.arange(n)


def simulate_pass(field_ears, config: SimConfig):
    """Render every frame of one camera pass.

    Returns ``(frames, truth)`` where ``frames`` is a list of
    :class:`FrameRecord` in frame order.
    """
    config.validate()
    cam = config.camera()
    noise = config.noise
    along = _unit(config.row_heading)
    positions = np.array([e.position for e in field_ears], dtype=float)
    directions = np.array([direction_from_angles(e.truth) for e in field_ears])
    half_fov = config.hfov / 2.0
    occl = config.occlusions

    frames, provenance, labels = [], [], []
    for k, s in enumerate(camera_path(config)):
        cam_pos = s * along + np.array([0.0, 0.0, config.camera_height])
        proj = _Projector(cam, cam_pos)
        rel = positions - cam_pos
        z = rel @ proj.forward
        x = rel @ proj.right
        theta1 = np.degrees(np.arctan2(x, z))
        visible = np.flatnonzero((z > 0) & (np.abs(theta1) <= half_fov))

        dets, prov, labs = [], [], []
        for i in visible:
            ear = field_ears[i]
            hidden = [o for o in occl if o.covers(ear.ear_id, k)]
            if any(not o.partial for o in hidden):
                continue
            vis = 1 if hidden else 2
            mid = positions[i]
            half = 0.5 * ear.length * directions[i]
            mid_px = proj(mid)
            node_px = proj(mid - half)
            tip_px = proj(mid + half)
            depth = proj.depth(mid)
            w_img = proj.f * config.ear_width / depth
            length_px = float(np.hypot(*(tip_px - node_px)))
            semi_a = length_px / 2.0 + w_img / 2.0
            semi_b = w_img / 2.0
            axis = _image_angle(node_px, tip_px)
            _, u, v = _ellipse(mid_px, semi_a, semi_b, axis, 0)
            hx = math.hypot(semi_a * u[0], semi_b * v[0])
            hy = math.hypot(semi_a * u[1], semi_b * v[1])

            clean = DetectionRecord(
                BBox(float(mid_px[0] - hx), float(mid_px[1] - hy), float(2 * hx), float(2 * hy)),
                1.0, "near",
                Keypoint(float(tip_px[0]), float(tip_px[1]), vis),
                Keypoint(float(node_px[0]), float(node_px[1]), vis))
            labs.append((ear.ear_id, clean))

            rng = _rng(config.seed, _DETECT, ear.ear_id, k)
            draws = rng.standard_normal(12)
            miss = rng.random()
            conf = rng.uniform(noise.conf_low, noise.conf_high)
            jitter = rng.standard_normal((config.outline_points, 2))
            if miss < noise.miss_rate:
                continue

            delta = noise.theta2_sigma * draws[0]
            node_n = _rotate(node_px, mid_px, delta) + noise.keypoint_sigma * draws[1:3]
            tip_n = _rotate(tip_px, mid_px, delta) + noise.keypoint_sigma * draws[3:5]
            outline, _, _ = _ellipse(mid_px, semi_a, semi_b,
                                     axis + noise.theta2_sigma * draws[5],
                                     config.outline_points)
            outline = outline + noise.outline_sigma * jitter
            cxy = mid_px + noise.bbox_center_sigma * draws[6:8]
            cxy = np.clip(cxy, [0.0, 0.0], [cam.image_width, cam.image_height])
            bw = max(1.0, 2 * hx + noise.bbox_size_sigma * draws[8])
            bh = max(1.0, 2 * hy + noise.bbox_size_sigma * draws[9])
            dets.append(DetectionRecord(
                BBox(float(cxy[0] - bw / 2), float(cxy[1] - bh / 2), float(bw), float(bh)),
                float(conf), "near",
                Keypoint(float(tip_n[0]), float(tip_n[1]), vis),
                Keypoint(float(node_n[0]), float(node_n[1]), vis),
                tuple(map(tuple, outline.tolist()))))
            prov.append(ear.ear_id)

        crng = _rng(config.seed, _CLUTTER, k)
        if crng.random() < noise.clutter_rate:
            dets.append(_clutter(crng, cam))
            prov.append(CLUTTER_ID)

        frames.append(FrameRecord(k, k / config.fps, None, tuple(dets)))
        provenance.append(prov)
        labels.append(labs)

    truth = SimTruth(provenance=provenance,
                     angles={e.ear_id: e.truth for e in field_ears},
                     labels=labels,
                     ideal_track={e.ear_id: e.ear_id for e in field_ears})
    return frames, truth


def _clutter(rng, cam):
    w, h = rng.uniform(15, 40, size=2)
    x = rng.uniform(0, cam.image_width - w)
    y = rng.uniform(0, cam.image_height - h)
    conf = rng.uniform(0.25, 0.6)
    node = Keypoint(float(x + w / 2), float(y + h), 1)
    tip = Keypoint(float(x + w / 2), float(y), 1)
    return DetectionRecord(BBox(float(x), float(y), float(w), float(h)), float(conf), "far",
                           tip, node)


def simulate(config: SimConfig):
    """Convenience: generate a field and render one pass over it."""
    ears = gen_field(config)
    frames, truth = simulate_pass(ears, config)
    return ears, frames, truth


def with_noise(config: SimConfig, **changes) -> SimConfig:
    return replace(config, noise=replace(config.noise, **changes))
