"""Detection streams, ground-truth / estimate / id-map CSVs.

A detection stream is UTF-8 text with one JSON frame object per line::

    {"frame":0,"time_s":0.0,"heading_deg":null,"detections":[
        {"bbox":[x,y,w,h],"conf":0.9,"class":"near",
         "keypoints":{"tip":[x,y,v],"node":[x,y,v]},
         "outline":[[x,y],...]}]}

``keypoints`` and ``outline`` are optional. Encoding is canonical: compact
separators, fixed key order, floats in ``repr`` form, so decoding and
re-encoding canonical input reproduces it byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .exceptions import FrameOrderError, StreamFormatError
from .pose2d import Keypoint
from .tracker import BBox

CLASSES = ("near", "far")

GT_HEADER = ["ear_id", "cardinal_deg", "offstalk_deg", "measurer"]
ESTIMATE_HEADER = ["track_id", "cardinal_deg", "offstalk_deg", "residual_deg",
                   "n_obs", "bearing_spread_deg", "flags"]
IDMAP_HEADER = ["predicted_id", "canonical_id"]
ASSIGNMENT_HEADER = ["frame", "det_index", "track_id"]
PROVENANCE_HEADER = ["frame", "det_index", "ear_id"]
FAILURE_HEADER = ["track_id", "n_obs", "reason"]
OBSERVATION_HEADER = ["track_id", "frame", "bearing_deg", "theta2_deg", "elevation_deg",
                      "weight", "sign_known"]


@dataclass(frozen=True)
class DetectionRecord:
    bbox: BBox
    conf: float
    cls: str = "near"
    tip: Keypoint | None = None
    node: Keypoint | None = None
    outline: tuple | None = None

    @property
    def has_keypoints(self):
        return self.tip is not None and self.node is not None


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    time_s: float
    heading_deg: float | None
    detections: tuple


def _num(v, line, fld):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise StreamFormatError(line, fld, f"expected a finite number, got {v!r}")
    return v


def _keypoint(raw, line, fld):
    if not isinstance(raw, list) or len(raw) != 3:
        raise StreamFormatError(line, fld, "expected [x, y, v]")
    x, y = (_num(c, line, fld) for c in raw[:2])
    v = raw[2]
    if isinstance(v, bool) or v not in (0, 1, 2):
        raise StreamFormatError(line, fld, f"visibility must be 0, 1 or 2, got {v!r}")
    return Keypoint(float(x), float(y), int(v))


def _detection(raw, line, k):
    pre = f"detections[{k}]"
    if not isinstance(raw, dict):
        raise StreamFormatError(line, pre, "expected an object")
    box = raw.get("bbox")
    if not isinstance(box, list) or len(box) != 4:
        raise StreamFormatError(line, pre + ".bbox", "expected [x, y, w, h]")
    x, y, w, h = (float(_num(c, line, pre + ".bbox")) for c in box)
    if w <= 0 or h <= 0:
        raise StreamFormatError(line, pre + ".bbox", "width and height must be positive")
    conf = _num(raw.get("conf"), line, pre + ".conf")
    if not 0.0 <= conf <= 1.0:
        raise StreamFormatError(line, pre + ".conf", f"confidence {conf} outside [0, 1]")
    cls = raw.get("class")
    if cls not in CLASSES:
        raise StreamFormatError(line, pre + ".class", f"expected one of {CLASSES}, got {cls!r}")
    tip = node = None
    if raw.get("keypoints") is not None:
        kp = raw["keypoints"]
        if not isinstance(kp, dict) or "tip" not in kp or "node" not in kp:
            raise StreamFormatError(line, pre + ".keypoints", "expected {tip, node}")
        tip = _keypoint(kp["tip"], line, pre + ".keypoints.tip")
        node = _keypoint(kp["node"], line, pre + ".keypoints.node")
    outline = None
    if raw.get("outline") is not None:
        pts = raw["outline"]
        if not isinstance(pts, list) or len(pts) < 6:
            raise StreamFormatError(line, pre + ".outline", "expected >= 6 [x, y] points")
        out = []
        for p in pts:
            if not isinstance(p, list) or len(p) != 2:
                raise StreamFormatError(line, pre + ".outline", "expected [x, y] points")
            out.append((float(_num(p[0], line, pre + ".outline")),
                        float(_num(p[1], line, pre + ".outline"))))
        outline = tuple(out)
    unknown = set(raw) - {"bbox", "conf", "class", "keypoints", "outline"}
    if unknown:
        raise StreamFormatError(line, pre, f"unknown fields {sorted(unknown)}")
    return DetectionRecord(BBox(x, y, w, h), float(conf), cls, tip, node, outline)


def decode_frame(text, line=1) -> FrameRecord:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(line, "<json>", str(exc)) from None
    if not isinstance(raw, dict):
        raise StreamFormatError(line, "<root>", "expected an object")
    frame = raw.get("frame")
    if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
        raise StreamFormatError(line, "frame", f"expected a non-negative integer, got {frame!r}")
    time_s = float(_num(raw.get("time_s"), line, "time_s"))
    heading = raw.get("heading_deg")
    if heading is not None:
        heading = float(_num(heading, line, "heading_deg"))
    dets = raw.get("detections")
    if not isinstance(dets, list):
        raise StreamFormatError(line, "detections", "expected a list")
    return FrameRecord(frame, time_s, heading,
                       tuple(_detection(d, line, k) for k, d in enumerate(dets)))


def decode_stream(data):
    """Yield validated :class:`FrameRecord` objects from stream text or bytes."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    last = None
    for lineno, text in enumerate(data.splitlines(), start=1):
        if not text.strip():
            continue
        rec = decode_frame(text, lineno)
        if last is not None and rec.frame <= last:
            raise FrameOrderError(f"line {lineno}: frame {rec.frame} does not follow {last}")
        last = rec.frame
        yield rec


def read_stream(path):
    with open(path, "rb") as fh:
        return list(decode_stream(fh.read()))


def _detection_obj(d: DetectionRecord):
    obj = {"bbox": d.bbox.as_list(), "conf": d.conf, "class": d.cls}
    if d.has_keypoints:
        obj["keypoints"] = {"tip": [d.tip.x, d.tip.y, d.tip.visibility],
                            "node": [d.node.x, d.node.y, d.node.visibility]}
    if d.outline is not None:
        obj["outline"] = [list(p) for p in d.outline]
    return obj


def encode_frame(rec: FrameRecord) -> str:
    obj = {"frame": rec.frame, "time_s": rec.time_s, "heading_deg": rec.heading_deg,
           "detections": [_detection_obj(d) for d in rec.detections]}
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def encode_stream(frames) -> bytes:
    return "".join(encode_frame(f) + "\n" for f in frames).encode("utf-8")


def write_stream(path, frames):
    with open(path, "wb") as fh:
        fh.write(encode_stream(frames))


# -- CSV helpers -----------------------------------------------------------

def fmt(v, digits=6):
    """Fixed-precision float formatting so CSV output is stable."""
    if isinstance(v, float):
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        s = f"{v:.{digits}f}"
        return "0." + "0" * digits if s == "-0." + "0" * digits else s
    return str(v)


def write_csv(path_or_buf, header, rows):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()


def read_csv(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(header) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


def read_ground_truth(path):
    """``{ear_id: (cardinal_deg, offstalk_deg)}``; repeated measurements are
    averaged per ear (cardinal circularly)."""
    rows = read_csv(path, GT_HEADER)
    by_ear = {}
    for lineno, r in enumerate(rows, start=2):
        try:
            phi, psi = float(r["cardinal_deg"]), float(r["offstalk_deg"])
        except ValueError:
            raise StreamFormatError(lineno, "cardinal_deg/offstalk_deg", "not a number") from None
        if not (0.0 <= phi < 360.0 and 0.0 <= psi <= 180.0):
            raise StreamFormatError(lineno, "cardinal_deg/offstalk_deg", "angle out of range")
        by_ear.setdefault(r["ear_id"], []).append((phi, psi))
    out = {}
    for ear, vals in by_ear.items():
        s = sum(math.sin(math.radians(p)) for p, _ in vals)
        c = sum(math.cos(math.radians(p)) for p, _ in vals)
        phi = math.degrees(math.atan2(s, c)) % 360.0
        out[ear] = (phi, sum(q for _, q in vals) / len(vals))
    return out


def read_id_map(path):
    return {int(r["predicted_id"]): r["canonical_id"] for r in read_csv(path, IDMAP_HEADER)}
