"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
error, 3 finished but some tracks failed to fuse (partial success).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import __version__
from .exceptions import EarPoseError
from .formats import (ASSIGNMENT_HEADER, ESTIMATE_HEADER, FAILURE_HEADER, GT_HEADER,
                      OBSERVATION_HEADER, PROVENANCE_HEADER, FrameRecord, read_csv,
                      read_ground_truth, read_id_map, read_stream, write_csv, write_stream)
from .fusion import Observation
from .geometry import EarAngles
from .metrics import (circ_error_stats, detection_pr_ap, majority_id_map,
                      matches_from_assignments, pose2d_eval, temporal_summary,
                      tracking_errors)
from .pipeline import RunConfig, apparent_angle, run_pipeline
from .pose2d import keypoint_angle
from .report import polar_report, pr_report, temporal_report, write_report
from .simulator import SimConfig, simulate, with_noise
from .tracker import Tracker

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for bad data here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _id(v):
    """CSV id cell -> int when it looks like one, else the string."""
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        return v


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None


# -- run configuration -----------------------------------------------------

def _run_config(args) -> RunConfig:
    """Defaults <- config file <- command-line flags."""
    try:
        cfg = RunConfig.from_dict(_load_json(args.config)) if args.config else RunConfig()
        cam = {k: v for k, v in (("hfov", args.hfov), ("heading", args.heading),
                                 ("projection", args.projection),
                                 ("image_width", args.image_width),
                                 ("image_height", args.image_height)) if v is not None}
        trk = {k: v for k, v in (("iou_gate", args.iou_gate), ("min_hits", args.min_hits),
                                 ("max_age", args.max_age)) if v is not None}
        fus = {k: v for k, v in (("min_spread", args.min_spread),
                                 ("eps_cond", args.eps_cond)) if v is not None}
        top = {k: v for k, v in (("pose_source", args.pose_source),
                                 ("bearing_source", args.bearing_source),
                                 ("weighting", args.weighting)) if v is not None}
        if args.perspective_correction is not None:
            top["perspective_correction"] = args.perspective_correction == "on"
        return replace(cfg, camera=replace(cfg.camera, **cam),
                       tracker=replace(cfg.tracker, **trk),
                       fusion=replace(cfg.fusion, **fus), **top)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid run configuration: {exc}") from None


def _add_run_flags(p):
    p.add_argument("--config", help="run configuration JSON")
    g = p.add_argument_group("camera")
    g.add_argument("--hfov", type=float)
    g.add_argument("--heading", type=float, help="compass heading of the optical axis")
    g.add_argument("--projection", choices=("linear", "pinhole"))
    g.add_argument("--image-width", type=int)
    g.add_argument("--image-height", type=int)
    g = p.add_argument_group("tracker")
    g.add_argument("--iou-gate", type=float)
    g.add_argument("--min-hits", type=int)
    g.add_argument("--max-age", type=int)
    g = p.add_argument_group("fusion")
    g.add_argument("--min-spread", type=float)
    g.add_argument("--eps-cond", type=float)
    g.add_argument("--pose-source", choices=("auto", "keypoints", "outline"))
    g.add_argument("--bearing-source", choices=("bbox", "node"))
    g.add_argument("--weighting", choices=("confidence", "uniform"))
    g.add_argument("--perspective-correction", choices=("on", "off"))


# -- subcommands -----------------------------------------------------------

def cmd_simulate(args):
    try:
        cfg = SimConfig.from_dict(_load_json(args.config)) if args.config else SimConfig()
        top = {k: v for k, v in (("n_ears", args.n_ears), ("seed", args.seed),
                                 ("projection", args.projection)) if v is not None}
        cfg = replace(cfg, **top)
        if args.noiseless:
            cfg = replace(cfg, noise=type(cfg.noise).none())
        if args.theta2_sigma is not None:
            cfg = with_noise(cfg, theta2_sigma=args.theta2_sigma)
        if args.bbox_sigma is not None:
            cfg = with_noise(cfg, bbox_center_sigma=args.bbox_sigma,
                             bbox_size_sigma=args.bbox_sigma)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid simulation config: {exc}") from None

    ears, frames, truth = simulate(cfg)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    write_stream(os.path.join(out, "stream.jsonl"), frames)
    labels = [FrameRecord(f.frame, f.time_s, f.heading_deg, tuple(d for _, d in labs))
              for f, labs in zip(frames, truth.labels)]
    write_stream(os.path.join(out, "labels.jsonl"), labels)
    write_csv(os.path.join(out, "truth.csv"), GT_HEADER,
              ([e.ear_id, e.truth.cardinal, e.truth.off_stalk, "sim"] for e in ears))
    write_csv(os.path.join(out, "provenance.csv"), PROVENANCE_HEADER,
              ([f.frame, k, ear] for f, prov in zip(frames, truth.provenance)
               for k, ear in enumerate(prov)))
    run = RunConfig(camera=cfg.camera())
    with open(os.path.join(out, "run_config.json"), "w", encoding="utf-8") as fh:
        json.dump(run.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "sim_config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_det = sum(len(f.detections) for f in frames)
    print(f"simulated {len(ears)} ears, {len(frames)} frames, {n_det} detections -> {out}")
    return EXIT_OK


def cmd_track(args):
    cfg = _run_config(args)
    frames = read_stream(args.stream)
    tracker = Tracker(cfg.tracker_params())
    rows = []
    for rec in frames:
        ids = tracker.step(rec.detections, rec.frame)
        rows.extend([rec.frame, k, "" if t is None else t] for k, t in enumerate(ids))
    write_csv(args.out, ASSIGNMENT_HEADER, rows)
    print(f"{len(frames)} frames, {len(tracker.confirmed_ids())} confirmed tracks")
    return EXIT_OK


def cmd_estimate(args):
    cfg = _run_config(args)
    frames = read_stream(args.stream)
    id_map = read_id_map(args.id_map) if args.id_map else None
    res = run_pipeline(frames, cfg, id_map)
    write_csv(args.out, ESTIMATE_HEADER, res.estimate_rows())
    if args.failures_out:
        write_csv(args.failures_out, FAILURE_HEADER, res.failure_rows())
    if args.observations_out:
        write_csv(args.observations_out, OBSERVATION_HEADER, res.observation_rows())
    if args.assignments_out:
        write_csv(args.assignments_out, ASSIGNMENT_HEADER, res.assignment_rows())
    print(f"{len(res.estimates)} estimates, {len(res.failures)} failures")
    for tid, n, reason in res.failures:
        print(f"  track {tid}: {reason} ({n} observations)", file=sys.stderr)
    for reason, n in sorted(res.skipped.items()):
        print(f"  skipped {n} detections: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if res.failures else EXIT_OK


def cmd_eval_detect(args):
    preds = read_stream(args.stream)
    labels = {f.frame: f for f in read_stream(args.labels)}
    frames = sorted(set(labels) | {f.frame for f in preds})
    by_frame = {f.frame: f for f in preds}
    cls = None if args.cls == "any" else args.cls
    dets, truths = [], []
    for k in frames:
        p = by_frame.get(k)
        lab = labels.get(k)
        dets.append([(d.bbox, d.conf) for d in (p.detections if p else ())
                     if d.conf >= args.min_conf and (cls is None or d.cls == cls)])
        truths.append([d.bbox for d in (lab.detections if lab else ())
                       if cls is None or d.cls == cls])
    curve = detection_pr_ap(dets, truths, args.iou)
    print(f"AP@{args.iou:g} = {curve.ap:.4f} over {curve.n_truths} labeled ears")
    if args.out:
        rep = pr_report(curve)
        write_csv(args.out, rep.header, rep.rows)
    return EXIT_OK


def cmd_eval_pose2d(args):
    preds = {f.frame: f for f in read_stream(args.stream)}
    predicted, labeled = [], []
    skipped = unlabeled = 0
    for lab in read_stream(args.labels):
        p = preds.get(lab.frame)
        row = []
        for d in (p.detections if p else ()):
            try:
                row.append((d.bbox, d.conf, apparent_angle(d, args.pose_source)))
            except EarPoseError:
                skipped += 1
        predicted.append(row)
        row = []
        for d in lab.detections:
            try:
                row.append((d.bbox, keypoint_angle(d.node, d.tip).theta2))
            except EarPoseError:  # unlabeled or too foreshortened to define an angle
                unlabeled += 1
        labeled.append(row)
    stats = pose2d_eval(predicted, labeled, args.iou)
    print(f"pose source {args.pose_source}: MAE {stats.mae:.3f} deg, "
          f"RMSE {stats.rmse:.3f} deg, n {stats.n}, skipped {skipped}, "
          f"unusable labels {unlabeled}")
    return EXIT_OK


def _read_log(path, header, value_col):
    return [(int(r["frame"]), int(r["det_index"]), _id(r[value_col]))
            for r in read_csv(path, header)]


def cmd_eval_track(args):
    assignments = _read_log(args.assignments, ASSIGNMENT_HEADER, "track_id")
    provenance = _read_log(args.provenance, PROVENANCE_HEADER, "ear_id")
    id_map = read_id_map(args.id_map) if args.id_map else None
    rep = tracking_errors(matches_from_assignments(assignments, provenance), id_map)
    print(f"{rep.switches} tracking errors affecting {rep.ears_affected} ears over "
          f"{rep.observations} ear observations from {rep.frames} frames")
    return EXIT_OK


def cmd_eval_3d(args):
    truth = read_ground_truth(args.truth)
    if args.id_map:
        id_map = {str(k): v for k, v in read_id_map(args.id_map).items()}
    elif args.assignments and args.provenance:
        m = majority_id_map(_read_log(args.assignments, ASSIGNMENT_HEADER, "track_id"),
                            _read_log(args.provenance, PROVENANCE_HEADER, "ear_id"))
        id_map = {str(k): str(v) for k, v in m.items()}
    else:
        id_map = {}
    best = {}
    for r in read_csv(args.estimates, ESTIMATE_HEADER):
        ear = id_map.get(r["track_id"], r["track_id"])
        if ear not in truth:
            continue
        # two fragments of one ear: keep the better-supported estimate
        if ear not in best or int(r["n_obs"]) > int(best[ear]["n_obs"]):
            best[ear] = r
    if not best:
        raise EarPoseError("no estimate could be matched to a ground-truth ear")
    card, psi, rows = [], [], []
    for ear in sorted(best, key=lambda e: (len(e), e)):
        r = best[ear]
        phi_t, psi_t = truth[ear]
        phi_p, psi_p = float(r["cardinal_deg"]), float(r["offstalk_deg"])
        if "cardinal_undefined" not in r["flags"].split("|"):
            card.append((phi_p, phi_t))
        psi.append((psi_p, psi_t))
        rows.append([ear, r["track_id"], phi_p, phi_t, psi_p, psi_t])
    c = circ_error_stats(card) if card else None
    s = circ_error_stats(psi, modulus=None)
    if c:
        print(f"cardinal: MAE {c.mae:.3f} deg, RMSE {c.rmse:.3f} deg, r2 {c.r2:.4f}, n {c.n}")
    print(f"off-stalk: MAE {s.mae:.3f} deg, RMSE {s.rmse:.3f} deg, r2 {s.r2:.4f}, n {s.n}")
    print(f"matched {len(best)} of {len(truth)} ground-truth ears")
    if args.out:
        write_csv(args.out, ["ear_id", "track_id", "cardinal_pred", "cardinal_truth",
                             "offstalk_pred", "offstalk_truth"], rows)
    return EXIT_OK


def _read_estimates(path):
    return {r["track_id"]: r for r in read_csv(path, ESTIMATE_HEADER)}


def cmd_report(args):
    prefix = args.out
    if args.kind == "polar":
        if not args.observations:
            raise UsageError("polar report needs --observations")
        obs = {}
        for r in read_csv(args.observations, OBSERVATION_HEADER):
            obs.setdefault(r["track_id"], []).append(Observation(
                bearing=float(r["bearing_deg"]), theta2=float(r["theta2_deg"]),
                weight=float(r["weight"]), sign_known=r["sign_known"] == "1",
                frame_index=int(r["frame"]), elevation=float(r["elevation_deg"])))
        est = _read_estimates(args.estimates) if args.estimates else {}
        ids = [args.track_id] if args.track_id else sorted(obs, key=lambda t: (len(t), t))
        if not ids:
            raise EarPoseError("no observations to plot")
        for tid in ids:
            if tid not in obs and tid not in est:
                raise EarPoseError(f"unknown track id {tid!r}")
            e = est.get(tid)
            angles = EarAngles(float(e["cardinal_deg"]), float(e["offstalk_deg"])) if e else None
            rep = polar_report(obs.get(tid, []), angles, title=f"track {tid}")
            base = prefix if args.track_id else f"{prefix}_{tid}"
            write_report(rep, base + ".svg", base + ".csv")
        print(f"wrote {len(ids)} polar report(s)")
    elif args.kind == "pr":
        if not (args.stream and args.labels):
            raise UsageError("pr report needs --stream and --labels")
        preds = {f.frame: f for f in read_stream(args.stream)}
        dets, truths = [], []
        for lab in read_stream(args.labels):
            p = preds.get(lab.frame)
            dets.append([(d.bbox, d.conf) for d in (p.detections if p else ())
                         if d.cls == "near"])
            truths.append([d.bbox for d in lab.detections if d.cls == "near"])
        rep = pr_report(detection_pr_ap(dets, truths, args.iou))
        write_report(rep, prefix + ".svg", prefix + ".csv")
        print(f"wrote {prefix}.svg")
    else:
        if not args.run:
            raise UsageError("temporal report needs at least one --run DATE=ESTIMATES.csv")
        runs = []
        for spec in args.run:
            date, sep, path = spec.partition("=")
            if not sep:
                raise UsageError(f"--run expects DATE=PATH, got {spec!r}")
            runs.append((date, [_EstimateRow(float(r["offstalk_deg"]))
                                for r in read_csv(path, ESTIMATE_HEADER)]))
        rep = temporal_report(temporal_summary(runs))
        write_report(rep, prefix + ".svg", prefix + ".csv")
        print(f"wrote {prefix}.svg")
    return EXIT_OK


class _EstimateRow:
    """Just enough of an estimate for the temporal summary."""

    def __init__(self, off_stalk):
        self.angles = EarAngles(0.0, off_stalk)


# -- entry point -----------------------------------------------------------

def build_parser():
    p = _Parser(prog="earpose", description="3D ear orientation from 2D detection streams")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a synthetic pass with ground truth")
    s.add_argument("--config", help="simulation configuration JSON")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--n-ears", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--projection", choices=("linear", "pinhole"))
    s.add_argument("--theta2-sigma", type=float)
    s.add_argument("--bbox-sigma", type=float)
    s.add_argument("--noiseless", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("track", help="assign track ids to detections")
    s.add_argument("stream")
    s.add_argument("--out", required=True, help="assignments CSV")
    _add_run_flags(s)
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("estimate", help="track and fuse every ear")
    s.add_argument("stream")
    s.add_argument("--out", required=True, help="estimates CSV")
    s.add_argument("--id-map", help="predicted_id,canonical_id CSV applied before fusion")
    s.add_argument("--failures-out")
    s.add_argument("--observations-out")
    s.add_argument("--assignments-out")
    _add_run_flags(s)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("eval-detect", help="precision-recall and AP")
    s.add_argument("stream")
    s.add_argument("--labels", required=True)
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--min-conf", type=float, default=0.0)
    s.add_argument("--class", dest="cls", default="near", choices=("near", "far", "any"))
    s.add_argument("--out", help="PR points CSV")
    s.set_defaults(func=cmd_eval_detect)

    s = sub.add_parser("eval-pose2d", help="2D apparent-angle error")
    s.add_argument("stream")
    s.add_argument("--labels", required=True)
    s.add_argument("--pose-source", default="auto", choices=("auto", "keypoints", "outline"))
    s.add_argument("--iou", type=float, default=0.5)
    s.set_defaults(func=cmd_eval_pose2d)

    s = sub.add_parser("eval-track", help="count ID switches")
    s.add_argument("--assignments", required=True)
    s.add_argument("--provenance", required=True)
    s.add_argument("--id-map")
    s.set_defaults(func=cmd_eval_track)

    s = sub.add_parser("eval-3d", help="cardinal and off-stalk error against ground truth")
    s.add_argument("estimates")
    s.add_argument("--truth", required=True)
    s.add_argument("--id-map")
    s.add_argument("--assignments", help="with --provenance: derive the id map by majority")
    s.add_argument("--provenance")
    s.add_argument("--out", help="per-ear error CSV")
    s.set_defaults(func=cmd_eval_3d)

    s = sub.add_parser("report", help="SVG chart plus companion CSV")
    s.add_argument("kind", choices=("polar", "pr", "temporal"))
    s.add_argument("--out", required=True, help="output path prefix (no extension)")
    s.add_argument("--observations", help="polar: observations CSV")
    s.add_argument("--estimates", help="polar: estimates CSV")
    s.add_argument("--track-id", help="polar: plot a single track")
    s.add_argument("--stream", help="pr: detection stream")
    s.add_argument("--labels", help="pr: label stream")
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--run", action="append", metavar="DATE=ESTIMATES.csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version, usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"earpose: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EarPoseError, ValueError, KeyError, OSError) as exc:
        print(f"earpose: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
