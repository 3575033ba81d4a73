"""Motion-only multi-object tracker for ear detections.

SORT-style: constant-velocity prediction, IoU gating, optimal assignment and
a tentative/confirmed/dead lifecycle. There is no appearance model, so all
association is by box overlap after motion prediction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import FrameOrderError

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width and height must be positive, got {self.w}x{self.h}")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self):
        return self.w * self.h

    def as_list(self):
        return [self.x, self.y, self.w, self.h]


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class TrackerParams:
    iou_gate: float = 0.1
    min_hits: int = 3
    max_age: int = 30
    velocity_smoothing: float = 0.5
    box_smoothing: float = 0.0
    tracked_class: str | None = "near"
    image_width: float | None = None
    image_height: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.iou_gate <= 1.0:
            raise ValueError("iou_gate must lie in [0, 1]")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")
        if self.max_age < 0:
            raise ValueError("max_age must be >= 0")
        if not 0.0 <= self.velocity_smoothing <= 1.0:
            raise ValueError("velocity_smoothing must lie in [0, 1]")
        if not 0.0 <= self.box_smoothing <= 1.0:
            raise ValueError("box_smoothing must lie in [0, 1]")


@dataclass
class TrackState:
    id: int
    bbox: BBox
    velocity: tuple = (0.0, 0.0)
    hits: int = 1
    time_since_update: int = 0
    status: str = TENTATIVE
    last_frame: int = 0


def predict_box(track: TrackState, frames: int, image_width=None, image_height=None) -> BBox:
    """Constant-velocity extrapolation by ``frames``.

    When image dimensions are given the box is clamped so at least one pixel
    of it stays inside the image.
    """
    b = track.bbox
    x = b.x + track.velocity[0] * frames
    y = b.y + track.velocity[1] * frames
    if image_width is not None:
        x = min(max(x, 1.0 - b.w), image_width - 1.0)
    if image_height is not None:
        y = min(max(y, 1.0 - b.h), image_height - 1.0)
    return BBox(x, y, b.w, b.h)


def _tol(total):
    return 1e-9 * (1.0 + abs(total))


def _optimum(cost, allowed):
    """(cardinality, total cost) of the best matching on a dense block."""
    n, m = cost.shape
    if n == 0 or m == 0 or not allowed.any():
        return 0, 0.0
    vals = cost[allowed]
    lo = vals.min()
    span = vals.max() - lo
    # each forbidden cell costs more than any full set of allowed ones, so
    # the solver maximises cardinality first and then minimises cost
    big = (span + 1.0) * (min(n, m) + 1)
    shifted = np.where(allowed, cost - lo + 1.0, big)
    rows, cols = linear_sum_assignment(shifted)
    keep = allowed[rows, cols]
    return int(keep.sum()), float(cost[rows[keep], cols[keep]].sum())


def _solve_component(cost, allowed):
    n_rows, _ = cost.shape
    card, best = _optimum(cost, allowed)
    pairs = []
    free_rows = list(range(n_rows))
    free_cols = list(range(cost.shape[1]))
    fixed_cost = 0.0
    for r in range(n_rows):
        free_rows.remove(r)
        chosen = None
        for c in free_cols:
            if not allowed[r, c]:
                continue
            cols_left = [k for k in free_cols if k != c]
            sub_card, sub_cost = _optimum(cost[np.ix_(free_rows, cols_left)],
                                          allowed[np.ix_(free_rows, cols_left)])
            total = fixed_cost + cost[r, c] + sub_cost
            if len(pairs) + 1 + sub_card == card and abs(total - best) <= _tol(best):
                chosen = c
                break
        if chosen is not None:
            pairs.append((r, chosen))
            fixed_cost += cost[r, chosen]
            free_cols.remove(chosen)
    return pairs


def solve_assignment(cost, forbidden=None):
    """Minimum-cost maximum-cardinality matching avoiding forbidden cells.

    Among all optimal matchings the lexicographically smallest sorted
    sequence of ``(row, col)`` pairs is returned, which makes the result
    independent of solver internals.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = cost.shape
    allowed = np.ones((n, m), dtype=bool) if forbidden is None else ~np.asarray(forbidden, dtype=bool)
    if allowed.shape != (n, m):
        raise ValueError("forbidden must match cost shape")
    if not np.all(np.isfinite(cost[allowed])):
        raise ValueError("costs must be finite where not forbidden")

    # connected components of the bipartite allowed graph are independent
    # sub-problems; with IoU gating they are almost always 1x1
    parent = list(range(n + m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for r, c in zip(*np.nonzero(allowed)):
        a, b = find(int(r)), find(n + int(c))
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups = {}
    for i in range(n + m):
        groups.setdefault(find(i), []).append(i)

    pairs = []
    for members in groups.values():
        rows = [i for i in members if i < n]
        cols = [i - n for i in members if i >= n]
        if not rows or not cols:
            continue
        block = np.ix_(rows, cols)
        for r, c in _solve_component(cost[block], allowed[block]):
            pairs.append((rows[r], cols[c]))
    return sorted(pairs)


@dataclass
class Tracker:
    """Frame-sequential tracker; call :meth:`step` once per frame."""

    params: TrackerParams = field(default_factory=TrackerParams)
    tracks: list = field(default_factory=list)
    next_id: int = 1
    last_frame: int | None = None

    def alive(self):
        return [t for t in self.tracks if t.status != DEAD]

    def step(self, detections, frame_index):
        """Associate one frame of detections.

        ``detections`` is a sequence of objects with ``bbox`` (a :class:`BBox`)
        and ``cls`` attributes. Returns a list with the assigned track id for
        each detection, or ``None`` for detections that are not tracked.
        """
        if self.last_frame is not None and frame_index <= self.last_frame:
            raise FrameOrderError(
                f"frame {frame_index} does not follow frame {self.last_frame}")
        self.last_frame = frame_index
        p = self.params

        det_idx = [i for i, d in enumerate(detections)
                   if p.tracked_class is None or d.cls == p.tracked_class]
        # tracks that missed more than max_age frames die even when the
        # missing frames were never stepped through
        for t in self.alive():
            if frame_index - t.last_frame - 1 > p.max_age:
                t.time_since_update = frame_index - t.last_frame - 1
                t.status = DEAD
        live = self.alive()
        predicted = [predict_box(t, frame_index - t.last_frame, p.image_width, p.image_height)
                     for t in live]
        cost = np.ones((len(live), len(det_idx)))
        for i, pb in enumerate(predicted):
            for j, k in enumerate(det_idx):
                cost[i, j] = 1.0 - iou(pb, detections[k].bbox)
        forbidden = (1.0 - cost) < p.iou_gate
        if p.iou_gate == 0.0:
            forbidden = cost >= 1.0
        matches = solve_assignment(cost, forbidden)

        assigned = [None] * len(detections)
        matched_tracks = set()
        for i, j in matches:
            track = live[i]
            k = det_idx[j]
            self._update(track, predicted[i], detections[k].bbox, frame_index)
            assigned[k] = track.id
            matched_tracks.add(i)

        for i, track in enumerate(live):
            if i in matched_tracks:
                continue
            track.time_since_update = frame_index - track.last_frame
            if track.time_since_update > p.max_age:
                track.status = DEAD

        matched_dets = {j for _, j in matches}
        for j, k in enumerate(det_idx):
            if j in matched_dets:
                continue
            track = TrackState(id=self.next_id, bbox=detections[k].bbox, last_frame=frame_index)
            if track.hits >= p.min_hits:
                track.status = CONFIRMED
            self.next_id += 1
            self.tracks.append(track)
            assigned[k] = track.id
        return assigned

    def _update(self, track, predicted, det_box, frame_index):
        p = self.params
        dt = frame_index - track.last_frame
        s = p.box_smoothing
        new_box = BBox(s * predicted.x + (1 - s) * det_box.x,
                       s * predicted.y + (1 - s) * det_box.y,
                       s * predicted.w + (1 - s) * det_box.w,
                       s * predicted.h + (1 - s) * det_box.h)
        (ox, oy), (nx, ny) = track.bbox.center, new_box.center
        meas = ((nx - ox) / dt, (ny - oy) / dt)
        a = p.velocity_smoothing
        track.velocity = (a * track.velocity[0] + (1 - a) * meas[0],
                          a * track.velocity[1] + (1 - a) * meas[1])
        track.bbox = new_box
        track.hits += 1
        track.time_since_update = 0
        track.last_frame = frame_index
        if track.status == TENTATIVE and track.hits >= p.min_hits:
            track.status = CONFIRMED

    def confirmed_ids(self):
        return sorted(t.id for t in self.tracks if t.status == CONFIRMED or
                      (t.status == DEAD and t.hits >= self.params.min_hits))
