"""scikit-learn style wrappers around the functional core.

The wrappers hold configuration in ``__init__`` (so ``get_params`` /
``set_params`` / ``clone`` work) and write fitted state to attributes with a
trailing underscore.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observations, check_points
from .fusion import FusionParams, Observation, estimate_direction, forward_apparent_angle
from .geometry import CameraConfig, circ_diff
from .pipeline import RunConfig, run_pipeline
from .pose2d import fit_ellipse_direct
from .tracker import Tracker, TrackerParams


class EarOrientationEstimator(BaseEstimator):
    """Fuse one ear's (bearing, apparent angle) observations into 3D angles.

    Parameters
    ----------
    min_spread : float
        Smallest accepted circular spread of bearings, degrees.
    eps_cond : float
        Conditioning threshold on the second-smallest eigenvalue / trace.
    psi_min : float
        Off-stalk angles within this many degrees of a pole get the
        ``cardinal_undefined`` flag.

    Attributes
    ----------
    cardinal_, off_stalk_ : float
        Estimated angles in degrees.
    direction_ : ndarray of shape (3,)
        Unit east-north-up direction.
    residual_deg_, eig_ratio_ : float
        Fit diagnostics.
    flags_ : frozenset of str
    """

    def __init__(self, min_spread=5.0, eps_cond=1e-3, psi_min=2.0):
        self.min_spread = min_spread
        self.eps_cond = eps_cond
        self.psi_min = psi_min

    def fit(self, X, y=None, sample_weight=None, sign_known=None):
        """X columns: bearing, theta2[, elevation] in degrees."""
        X, w, s = check_observations(X, sample_weight, sign_known)
        obs = [Observation(bearing=float(b), theta2=float(t), weight=float(wi),
                           sign_known=bool(si), frame_index=k, elevation=float(e))
               for k, ((b, t, e), wi, si) in enumerate(zip(X, w, s))]
        params = FusionParams(min_spread=self.min_spread, eps_cond=self.eps_cond,
                              psi_min=self.psi_min)
        est = estimate_direction(obs, params)
        self.estimate_ = est
        self.direction_ = np.array(est.direction)
        self.cardinal_ = est.angles.cardinal
        self.off_stalk_ = est.angles.off_stalk
        self.residual_deg_ = est.residual_deg
        self.eig_ratio_ = est.eig_ratio
        self.flags_ = est.flags
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Apparent angle the fitted ear would show at each bearing."""
        check_is_fitted(self, "estimate_")
        X, _, _ = check_observations(X)
        return np.array([forward_apparent_angle(self.estimate_.angles, b, e)
                         for b, _, e in X])

    def score(self, X, y=None):
        """Negative RMS angular residual; ``y`` defaults to the theta2 column."""
        pred = self.predict(X)
        obs = np.asarray(X, dtype=float)[:, 1] if y is None else np.asarray(y, dtype=float)
        err = np.array([circ_diff(p, o) for p, o in zip(pred, obs)])
        return -math.sqrt(float((err ** 2).mean()))


class EllipsePoseEstimator(TransformerMixin, BaseEstimator):
    """Direct least-squares ellipse fit of one outline.

    ``transform`` expresses points in the fitted ellipse frame: column 0
    along the major axis, column 1 along the minor axis, both in pixels.
    """

    def __init__(self, min_axis_ratio=1.05):
        self.min_axis_ratio = min_axis_ratio

    def fit(self, X, y=None):
        pts = check_points(X, min_points=6)
        fit = fit_ellipse_direct(pts, self.min_axis_ratio)
        self.center_ = np.array(fit.center)
        self.semi_major_ = fit.semi_major
        self.semi_minor_ = fit.semi_minor
        self.axis_angle_ = fit.axis_angle
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "axis_angle_")
        pts = check_points(X, min_points=1)
        r = math.radians(self.axis_angle_)
        major = np.array([math.sin(r), -math.cos(r)])
        minor = np.array([-major[1], major[0]])
        rel = pts - self.center_
        return np.column_stack([rel @ major, rel @ minor])


class EarTracker(BaseEstimator):
    """IoU tracker over a sequence of :class:`~earpose.formats.FrameRecord`.

    Attributes
    ----------
    assignments_ : list of list
        Track id (or ``None``) per detection, per frame.
    confirmed_ids_ : list of int
    """

    def __init__(self, iou_gate=0.1, min_hits=3, max_age=30, velocity_smoothing=0.5,
                 box_smoothing=0.0, tracked_class="near", image_width=None, image_height=None):
        self.iou_gate = iou_gate
        self.min_hits = min_hits
        self.max_age = max_age
        self.velocity_smoothing = velocity_smoothing
        self.box_smoothing = box_smoothing
        self.tracked_class = tracked_class
        self.image_width = image_width
        self.image_height = image_height

    def _params(self):
        return TrackerParams(**self.get_params())

    def fit(self, X, y=None):
        tracker = Tracker(self._params())
        self.assignments_ = [tracker.step(f.detections, f.frame) for f in X]
        self.confirmed_ids_ = tracker.confirmed_ids()
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).assignments_


class EarPosePipeline(BaseEstimator):
    """Detection stream -> per-track cardinal and off-stalk angles.

    ``predict`` returns an array of shape (n_tracks, 2) holding
    [cardinal, off_stalk] for the tracks in ``track_ids_``.
    """

    def __init__(self, camera=None, tracker=None, fusion=None, pose_source="auto",
                 bearing_source="bbox", weighting="confidence", perspective_correction=None):
        self.camera = camera
        self.tracker = tracker
        self.fusion = fusion
        self.pose_source = pose_source
        self.bearing_source = bearing_source
        self.weighting = weighting
        self.perspective_correction = perspective_correction

    def run_config(self) -> RunConfig:
        return RunConfig(camera=self.camera or CameraConfig(),
                         tracker=self.tracker or TrackerParams(),
                         fusion=self.fusion or FusionParams(),
                         pose_source=self.pose_source, bearing_source=self.bearing_source,
                         weighting=self.weighting,
                         perspective_correction=self.perspective_correction)

    def fit(self, X, y=None, id_map=None):
        res = run_pipeline(list(X), self.run_config(), id_map)
        self.result_ = res
        self.track_ids_ = [tid for tid, _ in res.estimates]
        self.estimates_ = dict(res.estimates)
        self.failures_ = list(res.failures)
        return self

    def predict(self, X=None):
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "result_")
        return np.array([[self.estimates_[t].angles.cardinal, self.estimates_[t].angles.off_stalk]
                         for t in self.track_ids_]).reshape(-1, 2)
