"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length


def check_observations(X, sample_weight=None, sign_known=None):
    """Validate an (n, 2) or (n, 3) array of [bearing, theta2, elevation].

    Returns ``(X, weights, sign_known)`` with elevation filled in as zero,
    unit weights and all signs known when not supplied.
    """
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] not in (2, 3):
        raise ValueError(f"expected 2 or 3 columns [bearing, theta2, elevation], got {X.shape[1]}")
    if X.shape[1] == 2:
        X = np.column_stack([X, np.zeros(len(X))])
    n = len(X)
    if sample_weight is None:
        w = np.ones(n)
    else:
        w = check_array(sample_weight, ensure_2d=False, dtype=np.float64)
        check_consistent_length(X, w)
        if np.any(w <= 0):
            raise ValueError("sample weights must be positive")
    if sign_known is None:
        s = np.ones(n, dtype=bool)
    else:
        s = np.asarray(sign_known, dtype=bool).ravel()
        check_consistent_length(X, s)
    return X, w, s


def check_points(points, min_points=5):
    """Validate a 2D point cloud of shape (n, 2)."""
    pts = check_array(points, dtype=np.float64, ensure_min_samples=min_points)
    if pts.shape[1] != 2:
        raise ValueError(f"points must have two columns, got {pts.shape[1]}")
    return pts


def check_boxes(X):
    """Validate an (n, 4) array of [x, y, w, h] boxes, optionally with a
    fifth confidence column."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] not in (4, 5):
        raise ValueError(f"boxes need 4 or 5 columns, got {X.shape[1]}")
    if np.any(X[:, 2:4] <= 0):
        raise ValueError("box width and height must be positive")
    return X
