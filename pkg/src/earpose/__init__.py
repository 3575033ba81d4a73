"""Multi-view 3D orientation of maize ears from per-frame 2D detections."""

__version__ = "0.1.0"

from .exceptions import (DegenerateConic, DegenerateKeypoints, EarPoseError,  # noqa: E402
                         IllConditioned, MissingKeypoint, NearCircular, SkippedForPlot,
                         TooFewObservations, TooFewPoints, UnderconstrainedBearing)
from .geometry import (CameraConfig, EarAngles, angles_from_direction,  # noqa: E402
                       circ_diff, direction_from_angles, observation_bearing,
                       wrap_signed, x_to_camera_angle)
from .pose2d import (ApparentAngle, EllipseFit, Keypoint, ellipse_apparent_angle,  # noqa: E402
                     fit_ellipse_direct, keypoint_angle)
from .tracker import BBox, Tracker, TrackerParams, iou, solve_assignment  # noqa: E402
from .fusion import (EarEstimate, FusionParams, Observation, constraint_normal,  # noqa: E402
                     estimate_direction, forward_apparent_angle, tan_plane_line)
from .metrics import (circ_error_stats, detection_pr_ap, pose2d_eval,  # noqa: E402
                      temporal_summary, tracking_errors)
from .formats import DetectionRecord, FrameRecord, decode_stream, encode_stream  # noqa: E402
from .pipeline import RunConfig, fuse_with_known_ids, run_pipeline  # noqa: E402
from .simulator import SimConfig, SimNoise, Occlusion, gen_field, simulate, simulate_pass  # noqa: E402
from .estimators import (EarOrientationEstimator, EarPosePipeline, EarTracker,  # noqa: E402
                         EllipsePoseEstimator)

__all__ = [
    "ApparentAngle", "BBox", "CameraConfig", "DegenerateConic", "DegenerateKeypoints",
    "DetectionRecord", "EarAngles", "EarEstimate", "EarOrientationEstimator",
    "EarPoseError", "EarPosePipeline", "EarTracker", "EllipseFit", "EllipsePoseEstimator",
    "FrameRecord", "FusionParams", "IllConditioned", "Keypoint", "MissingKeypoint",
    "NearCircular", "Observation", "Occlusion", "RunConfig", "SimConfig", "SimNoise",
    "SkippedForPlot", "TooFewObservations", "TooFewPoints", "Tracker", "TrackerParams",
    "UnderconstrainedBearing", "angles_from_direction", "circ_diff", "circ_error_stats",
    "constraint_normal", "decode_stream", "detection_pr_ap", "direction_from_angles",
    "ellipse_apparent_angle", "encode_stream", "estimate_direction", "fit_ellipse_direct",
    "forward_apparent_angle", "fuse_with_known_ids", "gen_field", "iou", "keypoint_angle",
    "observation_bearing", "pose2d_eval", "run_pipeline", "simulate", "simulate_pass",
    "solve_assignment", "tan_plane_line", "temporal_summary", "tracking_errors",
    "wrap_signed", "x_to_camera_angle",
]
