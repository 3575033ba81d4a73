import json

import pytest

from earpose.exceptions import FrameOrderError, StreamFormatError
from earpose.formats import (GT_HEADER, IDMAP_HEADER, decode_stream, encode_stream, fmt,
                             read_ground_truth, read_id_map, read_stream, write_csv,
                             write_stream)
from earpose.simulator import SimConfig, simulate

GOOD = {"frame": 0, "time_s": 0.0, "heading_deg": None,
        "detections": [{"bbox": [10, 20, 30, 40], "conf": 0.9, "class": "near",
                        "keypoints": {"tip": [25, 20, 2], "node": [25, 60, 1]}}]}


def line(obj):
    return json.dumps(obj) + "\n"


def test_empty_input():
    assert list(decode_stream(b"")) == []
    assert list(decode_stream("\n\n")) == []


def test_single_frame():
    (rec,) = decode_stream(line(GOOD).encode())
    assert rec.frame == 0 and rec.heading_deg is None
    (d,) = rec.detections
    assert d.has_keypoints and d.tip.visibility == 2 and d.node.visibility == 1
    assert d.bbox.center == (25.0, 40.0)
    assert d.outline is None


def test_round_trip_simulator_output_is_byte_stable():
    _, frames, _ = simulate(SimConfig(n_ears=4, seed=5))
    data = encode_stream(frames)
    assert encode_stream(decode_stream(data)) == data
    assert list(decode_stream(data)) == frames


def test_file_round_trip(tmp_path):
    _, frames, _ = simulate(SimConfig(n_ears=2, seed=5))
    write_stream(tmp_path / "s.jsonl", frames)
    assert read_stream(tmp_path / "s.jsonl") == frames


@pytest.mark.parametrize("mutate, field", [
    (lambda o: o.update(frame=-1), "frame"),
    (lambda o: o.update(frame=1.5), "frame"),
    (lambda o: o.update(time_s="x"), "time_s"),
    (lambda o: o["detections"][0].update(conf=1.5), "detections[0].conf"),
    (lambda o: o["detections"][0].update(bbox=[1, 2, 3]), "detections[0].bbox"),
    (lambda o: o["detections"][0].update(bbox=[1, 2, 0, 3]), "detections[0].bbox"),
    (lambda o: o["detections"][0].update({"class": "weed"}), "detections[0].class"),
    (lambda o: o["detections"][0]["keypoints"].update(tip=[1, 2, 5]),
     "detections[0].keypoints.tip"),
    (lambda o: o["detections"][0].update(outline=[[0, 0]] * 5), "detections[0].outline"),
    (lambda o: o["detections"][0].update(extra=1), "detections[0]"),
])
def test_schema_violations_name_line_and_field(mutate, field):
    bad = json.loads(json.dumps(GOOD))
    bad["frame"] = 1
    mutate(bad)
    data = line(GOOD) + line(bad)
    with pytest.raises(StreamFormatError) as exc:
        list(decode_stream(data))
    assert exc.value.line == 2
    assert exc.value.field == field
    assert "line 2" in str(exc.value)


def test_malformed_json():
    with pytest.raises(StreamFormatError) as exc:
        list(decode_stream(line(GOOD) + "{not json\n"))
    assert exc.value.line == 2


def test_frames_must_increase():
    with pytest.raises(FrameOrderError):
        list(decode_stream(line(GOOD) + line(GOOD)))


def test_fmt():
    assert fmt(1.0) == "1.000000"
    assert fmt(-0.0000001) == "0.000000"
    assert fmt(3) == "3"
    assert fmt("x") == "x"
    assert fmt(float("nan")) == "nan"


def test_ground_truth_averages_measurers(tmp_path):
    p = tmp_path / "gt.csv"
    write_csv(p, GT_HEADER, [["a", 350.0, 80.0, "m1"], ["a", 10.0, 100.0, "m2"],
                             ["b", 45.0, 30.0, "m1"]])
    gt = read_ground_truth(p)
    assert gt["a"][0] == pytest.approx(0.0, abs=1e-9) or gt["a"][0] == pytest.approx(360.0)
    assert gt["a"][1] == pytest.approx(90.0)
    assert gt["b"] == pytest.approx((45.0, 30.0))


def test_ground_truth_rejects_out_of_range(tmp_path):
    p = tmp_path / "gt.csv"
    write_csv(p, GT_HEADER, [["a", 360.0, 80.0, "m1"]])
    with pytest.raises(StreamFormatError):
        read_ground_truth(p)
    p.write_text("ear_id,cardinal_deg\n1,2\n")
    with pytest.raises(ValueError):
        read_ground_truth(p)


def test_id_map(tmp_path):
    p = tmp_path / "map.csv"
    write_csv(p, IDMAP_HEADER, [[3, "ear-1"], [7, "ear-1"]])
    assert read_id_map(p) == {3: "ear-1", 7: "ear-1"}
