"""Exception hierarchy.

Every error carries a short ``reason`` code so that per-track failures can
be written to CSV from a closed vocabulary.
"""


class EarPoseError(ValueError):
    reason = "error"


class DegenerateKeypoints(EarPoseError):
    reason = "degenerate_keypoints"


class MissingKeypoint(EarPoseError):
    reason = "missing_keypoint"


class TooFewPoints(EarPoseError):
    reason = "too_few_points"


class DegenerateConic(EarPoseError):
    reason = "degenerate_conic"


class NearCircular(EarPoseError):
    reason = "near_circular"


class TooFewObservations(EarPoseError):
    reason = "too_few_observations"


class UnderconstrainedBearing(EarPoseError):
    reason = "underconstrained_bearing"


class IllConditioned(EarPoseError):
    reason = "ill_conditioned"


class SkippedForPlot(EarPoseError):
    reason = "skipped_for_plot"


class FrameOrderError(EarPoseError):
    reason = "frame_order"


class StreamFormatError(EarPoseError):
    """Malformed record in a detection stream."""

    reason = "stream_format"

    def __init__(self, line, field, message):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field '{field}': {message}")


#: reason codes that may appear in the ``reason`` column of a failures CSV
FAILURE_REASONS = (
    TooFewObservations.reason,
    UnderconstrainedBearing.reason,
    IllConditioned.reason,
)
