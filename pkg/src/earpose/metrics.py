"""Evaluation: detection PR/AP, angle error statistics, ID switches and the
temporal off-stalk summary."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import axial_diff, circ_diff, wrap_axial, wrap_unsigned
from .pose2d import ApparentAngle
from .tracker import iou


@dataclass(frozen=True)
class PRCurve:
    points: tuple  # ((recall, precision), ...) in confidence order
    ap: float
    n_truths: int


@dataclass(frozen=True)
class AngleErrorStats:
    mae: float
    rmse: float
    r2: float
    n: int


@dataclass(frozen=True)
class TrackingErrorReport:
    switches: int
    ears_affected: int
    observations: int
    frames: int


def _signed_error(pred, truth, modulus):
    if modulus == 360:
        return circ_diff(pred, truth)
    if modulus == 180:
        return axial_diff(pred, truth)
    if modulus is None:
        return pred - truth
    raise ValueError(f"modulus must be 360, 180 or None, got {modulus!r}")


def _center_truths(truths, modulus):
    """Unwrap truths to the representative nearest their circular mean."""
    t = np.asarray(truths, dtype=float)
    if modulus is None or len(t) == 0:
        return t
    k = 360.0 / modulus
    rad = np.radians(t * k)
    c, s = np.cos(rad).mean(), np.sin(rad).mean()
    if math.hypot(c, s) < 1e-12:
        mean = 0.0
    else:
        mean = math.degrees(math.atan2(s, c)) / k
    return np.array([mean + _signed_error(x, mean, modulus) for x in t])


def _stats(errors, truths, moduli):
    e = np.asarray(errors, dtype=float)
    if len(e) == 0:
        raise ValueError("no pairs to evaluate")
    mae = float(np.abs(e).mean())
    rmse = float(math.sqrt(float((e * e).mean())))
    ss_res = float((e * e).sum())
    if len(set(moduli)) == 1:
        t = _center_truths(truths, moduli[0])
    else:
        t = np.array([_center_truths([x], m)[0] for x, m in zip(truths, moduli)])
    ss_tot = float(((t - t.mean()) ** 2).sum())
    # r^2 is undefined when the truths do not vary (up to rounding)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-12 * len(t) else float("nan")
    return AngleErrorStats(mae=mae, rmse=rmse, r2=r2, n=len(e))


def circ_error_stats(pairs, modulus=360) -> AngleErrorStats:
    """MAE, RMSE and r^2 of (predicted, truth) angle pairs.

    ``modulus`` is 360 for directed angles, 180 for axes whose sign is
    unknowable and ``None`` for bounded non-circular angles such as the
    off-stalk angle. r^2 uses truths unwrapped around their circular mean
    and predictions unwrapped to the representative nearest their truth, so
    it is unchanged by a common rotation of all angles.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("circ_error_stats needs at least one pair")
    errors = [_signed_error(p, t, modulus) for p, t in pairs]
    return _stats(errors, [t for _, t in pairs], [modulus] * len(pairs))


def detection_pr_ap(detections, truths, iou_threshold=0.5) -> PRCurve:
    """All-point interpolated average precision for one class.

    Parameters
    ----------
    detections : list of list of (BBox, confidence)
        Detections per image.
    truths : list of list of BBox
        Ground-truth boxes per image, aligned with ``detections``.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    if len(detections) != len(truths):
        raise ValueError("detections and truths must cover the same images")
    n_truths = sum(len(t) for t in truths)
    if n_truths == 0:
        raise ValueError("average precision is undefined without ground truth")

    flat = [(conf, img, k, box) for img, dets in enumerate(detections)
            for k, (box, conf) in enumerate(dets)]
    order = sorted(range(len(flat)), key=lambda i: -flat[i][0])
    used = [set() for _ in truths]
    tp = 0
    exact = []
    for rank, i in enumerate(order, start=1):
        _, img, _, box = flat[i]
        best, best_iou = None, -1.0
        for j, t in enumerate(truths[img]):
            if j in used[img]:
                continue
            v = iou(box, t)
            if v >= iou_threshold and v > best_iou:
                best, best_iou = j, v
        if best is not None:
            used[img].add(best)
            tp += 1
        exact.append((Fraction(tp, n_truths), Fraction(tp, rank)))

    # recall and precision are ratios of counts, so the area is summed
    # exactly and rounded once
    ap = Fraction(0)
    envelope = Fraction(0)
    # sweep from the right so the envelope is the running maximum
    for k in range(len(exact) - 1, -1, -1):
        envelope = max(envelope, exact[k][1])
        prev_recall = exact[k - 1][0] if k > 0 else 0
        ap += (exact[k][0] - prev_recall) * envelope
    points = [(float(r), float(p)) for r, p in exact]
    ap = float(ap)
    return PRCurve(points=tuple(points), ap=ap, n_truths=n_truths)


def tracking_errors(matches, id_map=None) -> TrackingErrorReport:
    """Count ID switches per ground-truth ear.

    ``matches`` is a frame-ordered sequence of dicts mapping ground-truth
    ear id to the predicted track id matched in that frame. ``id_map``
    optionally renames predicted ids before counting.
    """
    id_map = id_map or {}
    last = {}
    switched = {}
    switches = 0
    observations = 0
    frames = 0
    for frame in matches:
        frames += 1
        for gt, pred in frame.items():
            if pred is None:
                continue
            pred = id_map.get(pred, pred)
            observations += 1
            if gt in last and last[gt] != pred:
                switches += 1
                switched[gt] = True
            last[gt] = pred
    return TrackingErrorReport(switches=switches, ears_affected=len(switched),
                               observations=observations, frames=frames)


def pose2d_eval(predicted, labeled, iou_threshold=0.5) -> AngleErrorStats:
    """2D apparent-angle error against labels.

    Parameters
    ----------
    predicted : list of list of (BBox, confidence, ApparentAngle or None)
        Predictions per frame.
    labeled : list of list of (BBox, float)
        Labeled boxes and keypoint angles per frame.

    For each label the highest-confidence prediction overlapping it with
    IoU above ``iou_threshold`` is compared; predictions without an angle
    are ignored. Angles whose sign is unknown are compared modulo 180.
    """
    errors, truths, moduli = [], [], []
    for preds, labels in zip(predicted, labeled):
        for lbox, langle in labels:
            best = None
            for box, conf, angle in preds:
                if angle is None or iou(box, lbox) <= iou_threshold:
                    continue
                if best is None or conf > best[0]:
                    best = (conf, angle)
            if best is None:
                continue
            angle: ApparentAngle = best[1]
            if angle.sign_known:
                errors.append(circ_diff(angle.theta2, langle))
                truths.append(langle)
                moduli.append(360)
            else:
                errors.append(axial_diff(angle.theta2, langle))
                truths.append(wrap_axial(langle))
                moduli.append(180)
    if not errors:
        raise ValueError("no labeled ear was matched by a prediction")
    return _stats(errors, truths, moduli)


@dataclass(frozen=True)
class TemporalRow:
    date: str
    mean_off_stalk: float
    std_off_stalk: float
    n: int
    fraction_down: float


def temporal_summary(runs):
    """Per-date mean and population std of the off-stalk angle.

    ``runs`` is an iterable of ``(iso_date, estimates)``; empty runs are
    skipped with a warning. Rows are sorted by date.
    """
    rows = []
    for date, estimates in runs:
        psi = np.array([e.angles.off_stalk for e in estimates], dtype=float)
        if len(psi) == 0:
            warnings.warn(f"run {date} has no estimates; skipped", stacklevel=2)
            continue
        rows.append(TemporalRow(date=str(date), mean_off_stalk=float(psi.mean()),
                                std_off_stalk=float(psi.std()), n=len(psi),
                                fraction_down=float((psi > 90.0).mean())))
    return sorted(rows, key=lambda r: r.date)


def wrap_for_modulus(angle, modulus):
    if modulus == 180:
        return wrap_axial(angle)
    if modulus == 360:
        return wrap_unsigned(angle)
    return angle


def matches_from_assignments(assignments, provenance, ignore=(-1,)):
    """Per-frame ``{ear_id: track_id}`` from two detection-indexed logs.

    Both arguments are iterables of ``(frame, det_index, id)``; unassigned
    detections carry ``None`` as track id and ignored ears (clutter) are
    dropped.
    """
    tracks = {(f, k): t for f, k, t in assignments}
    per_frame = {}
    for f, k, ear in provenance:
        per_frame.setdefault(f, {})
        if ear in ignore:
            continue
        t = tracks.get((f, k))
        if t is not None:
            per_frame[f][ear] = t
    return [per_frame[f] for f in sorted(per_frame)]


def majority_id_map(assignments, provenance, ignore=(-1,)):
    """Map each predicted track to the ground-truth ear it covers most often.

    This is the hand correction behind the perfect-tracking protocol done
    automatically: ties go to the smallest ear id.
    """
    ears = {(f, k): e for f, k, e in provenance}
    votes = {}
    for f, k, t in assignments:
        e = ears.get((f, k))
        if t is None or e is None or e in ignore:
            continue
        votes.setdefault(t, {}).setdefault(e, 0)
        votes[t][e] += 1
    return {t: min(v.items(), key=lambda kv: (-kv[1], str(kv[0])))[0]
            for t, v in votes.items()}
