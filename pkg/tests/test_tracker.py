import sys
from pathlib import Path

import numpy as np
import pytest

from earpose.exceptions import FrameOrderError
from earpose.formats import DetectionRecord
from earpose.tracker import BBox, Tracker, TrackerParams, iou, predict_box, solve_assignment

sys.path.insert(0, str(Path(__file__).parent))
from oracles import brute_force_assignment  # noqa: E402


def det(x, y, w=40, h=60, cls="near"):
    return DetectionRecord(BBox(x, y, w, h), 0.9, cls)


def run(tracker, frames):
    return [tracker.step(dets, k) for k, dets in frames]


def moving_ear(n_frames, gap_start=None, gap_len=0, x0=1000.0, vx=-5.0):
    frames = []
    for k in range(n_frames):
        in_gap = gap_start is not None and gap_start <= k < gap_start + gap_len
        frames.append((k, [] if in_gap else [det(x0 + vx * k, 300.0)]))
    return frames


# -- boxes -------------------------------------------------------------------

def test_iou_basic():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 5, 5)) == 0.0
    assert iou(a, BBox(5, 0, 10, 10)) == pytest.approx(50 / 150)


def test_bbox_validation():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 10)


def test_predict_box_clamps_inside_image():
    from earpose.tracker import TrackState
    t = TrackState(id=1, bbox=BBox(10, 10, 20, 20), velocity=(-50.0, 0.0))
    b = predict_box(t, 5, 640, 480)
    assert b.x + b.w >= 1.0
    b = predict_box(t, 5)
    assert b.x == pytest.approx(10 - 250)


# -- assignment --------------------------------------------------------------

def test_solve_assignment_simple():
    cost = np.array([[0.1, 0.9], [0.8, 0.2]])
    assert solve_assignment(cost) == [(0, 0), (1, 1)]
    assert solve_assignment(cost, [[True, False], [False, True]]) == [(0, 1), (1, 0)]
    assert solve_assignment(np.zeros((0, 3))) == []


def test_solve_assignment_prefers_cardinality():
    # taking the cheap cell (0,0) would leave row 1 unmatched
    cost = np.array([[0.0, 0.5], [0.1, 10.0]])
    forbidden = np.array([[False, False], [False, True]])
    assert solve_assignment(cost, forbidden) == [(0, 1), (1, 0)]


def test_solve_assignment_tie_break_is_lexicographic():
    assert solve_assignment(np.ones((3, 3))) == [(0, 0), (1, 1), (2, 2)]


def test_solve_assignment_matches_brute_force():
    rng = np.random.default_rng(5)
    for k in range(60):
        n, m = rng.integers(1, 6, size=2)
        cost = rng.integers(0, 3, (n, m)).astype(float) if k % 2 else rng.random((n, m))
        forbidden = rng.random((n, m)) < 0.35
        _, _, pairs = brute_force_assignment(cost.tolist(), forbidden.tolist())
        assert solve_assignment(cost, forbidden) == pairs


def test_solve_assignment_validation():
    with pytest.raises(ValueError):
        solve_assignment(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        solve_assignment(np.ones((2, 2)), np.zeros((3, 2), dtype=bool))
    with pytest.raises(ValueError):
        solve_assignment(np.array([[np.nan]]))
    # non-finite costs are fine where forbidden
    assert solve_assignment(np.array([[np.inf, 1.0]]), [[True, False]]) == [(0, 1)]


# -- lifecycle ---------------------------------------------------------------

def test_single_ear_keeps_one_id():
    ids = run(Tracker(), moving_ear(30))
    assert {i[0] for i in ids} == {1}


def test_confirmation_needs_min_hits():
    tr = Tracker(TrackerParams(min_hits=3))
    run(tr, moving_ear(2))
    assert tr.confirmed_ids() == []
    tr.step([det(990.0, 300.0)], 2)
    assert tr.confirmed_ids() == [1]


@pytest.mark.parametrize("max_age", [1, 5, 30])
def test_gap_up_to_max_age_preserves_id(max_age):
    frames = moving_ear(20 + max_age, gap_start=10, gap_len=max_age, vx=-2.0)
    ids = [i for _, dets in zip(frames, run(Tracker(TrackerParams(max_age=max_age)), frames))
           for i in dets]
    assert set(ids) == {1}


@pytest.mark.parametrize("max_age", [1, 5, 30])
def test_gap_beyond_max_age_starts_new_id(max_age):
    frames = moving_ear(21 + max_age, gap_start=10, gap_len=max_age + 1, vx=-2.0)
    out = run(Tracker(TrackerParams(max_age=max_age)), frames)
    before = {i for k, ids in enumerate(out) if k < 10 for i in ids}
    after = {i for k, ids in enumerate(out) if k >= 11 + max_age for i in ids}
    assert before == {1} and after == {2}


def test_dead_confirmed_tracks_still_reported():
    frames = moving_ear(30, gap_start=10, gap_len=12, vx=-2.0)
    tr = Tracker(TrackerParams(max_age=5))
    run(tr, frames)
    assert tr.confirmed_ids() == [1, 2]


def test_two_ears_and_clutter():
    frames = []
    for k in range(15):
        frames.append((k, [det(800 - 4 * k, 300), det(400 - 4 * k, 320),
                           det(50, 50, 10, 10, cls="far")]))
    out = run(Tracker(), frames)
    assert all(ids == [1, 2, None] for ids in out)


def test_deterministic_replay():
    rng = np.random.default_rng(3)
    frames = []
    for k in range(40):
        dets = [det(900 - 6 * k + rng.normal(0, 2), 300 + rng.normal(0, 2)),
                det(500 - 6 * k + rng.normal(0, 2), 280 + rng.normal(0, 2))]
        if k % 7 == 3:
            dets.pop(0)
        frames.append((k, dets))
    a = run(Tracker(), frames)
    b = run(Tracker(), frames)
    assert a == b


def test_frame_order_enforced():
    tr = Tracker()
    tr.step([det(10, 10)], 5)
    with pytest.raises(FrameOrderError):
        tr.step([det(10, 10)], 5)


def test_skipped_frame_indices_count_as_elapsed_time():
    tr = Tracker(TrackerParams(max_age=3))
    tr.step([det(500, 300)], 0)
    # frames 1-3 missed: gap of 3 = max_age keeps the id
    assert tr.step([det(500, 300)], 4) == [1]
    # frames 5-8 missed: gap of 4 > max_age
    assert tr.step([det(500, 300)], 9) == [2]


def test_params_validation():
    with pytest.raises(ValueError):
        TrackerParams(iou_gate=1.5)
    with pytest.raises(ValueError):
        TrackerParams(min_hits=0)
