"""Online localization: match observations to grid positions via alignment.

The estimator follows the scikit-learn protocol: construct with the source
dataset (simulated radio map or extended plan coordinates), ``fit`` on
calibration fingerprints with known positions, ``predict`` positions for a
batch of RSS observations.  Walking mode adds trajectory-forced neighbor
sets and centroid smoothing of outlier fixes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import alignment, lle
from .errors import ConfigurationError, StructuralError
from .validation import check_array, check_choice, check_positive_int

DEFAULT_EMBEDDING_DIM = 3
OUTLIER_STEP_FACTOR = 3.0


@dataclass(frozen=True)
class LocalizationResult:
    """Per-observation outcome of one localization call.

    ``positions`` are the final estimates (walking mode: after smoothing);
    ``matched_indices`` are original grid indices of the nearest embedded
    source row; ``smoothed`` flags observations replaced by a neighbor
    centroid.
    """

    positions: np.ndarray
    matched_indices: np.ndarray
    embedding_distances: np.ndarray
    smoothed: np.ndarray

    @property
    def n_observations(self) -> int:
        return len(self.positions)


def boost_trajectory_weights(
    dest_neighbors: np.ndarray, n_observations: int, n_calibration: int
) -> np.ndarray:
    """Force each observation's temporal predecessor/successor into its neighbor set.

    Destination rows are [calibration (C) | observations (O)]; observation t
    sits at row C + t.  Forced indices evict the farthest non-trajectory
    neighbors (tail of the ascending list).  Membership only; weights are
    still solved in closed form afterwards.
    """
    nbrs = np.array(dest_neighbors, dtype=int, copy=True)
    c = n_calibration
    o = n_observations
    if nbrs.shape[0] != c + o:
        raise StructuralError(
            f"neighbor sets have {nbrs.shape[0]} rows, expected C+O = {c + o}"
        )
    if o < 2:
        return nbrs
    for t in range(o):
        row = c + t
        forced = [c + t - 1] if t > 0 else []
        if t < o - 1:
            forced.append(c + t + 1)
        present = set(nbrs[row])
        for f in forced:
            if f in present:
                continue
            # farthest non-trajectory entry = last entry not itself forced
            for slot in range(nbrs.shape[1] - 1, -1, -1):
                if nbrs[row, slot] not in forced and nbrs[row, slot] != f:
                    present.discard(int(nbrs[row, slot]))
                    nbrs[row, slot] = f
                    present.add(f)
                    break
    return nbrs


def smooth_outliers(positions, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Replace trajectory outliers by the midpoint of their temporal neighbors.

    Position t is an outlier iff its distance to BOTH t-1 and t+1 exceeds
    ``threshold``.  One left-to-right pass against the original values, so
    replacements never cascade.  Endpoints are never replaced.  Returns
    (smoothed positions, outlier flags).
    """
    original = check_array(positions, name="positions", ndim=2)
    threshold = float(threshold)
    out = original.copy()
    flags = np.zeros(len(original), dtype=bool)
    for t in range(1, len(original) - 1):
        d_prev = np.linalg.norm(original[t] - original[t - 1])
        d_next = np.linalg.norm(original[t] - original[t + 1])
        if d_prev > threshold and d_next > threshold:
            out[t] = 0.5 * (original[t - 1] + original[t + 1])
            flags[t] = True
    return out, flags


def default_outlier_threshold(positions: np.ndarray) -> float:
    """Scale-free outlier cutoff: 3x the median inter-fix step distance."""
    if len(positions) < 2:
        return 0.0
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    return OUTLIER_STEP_FACTOR * float(np.median(steps))


class ManifoldAlignmentLocalizer(BaseEstimator):
    """Locate RSS observations by aligning them with a source dataset.

    Parameters
    ----------
    source_points : (S, K) array
        Source dataset in grid order: simulated radio map RSS vectors or
        extended plan coordinates.
    source_positions : (S, 2) array
        Grid positions, same order as ``source_points``.
    n_neighbors : int or None
        Neighbor count for both LLE graphs; None selects 11% of each
        dataset's size (minimum 2).  The destination count is clamped to
        C + O - 1.
    n_components : int
        Embedding dimension (columns of the aligned embedding).
    ridge : float
        Relative regularization of the weight solves.
    mode : "stationary" or "walking"
        Walking assumes temporally ordered observations and enables
        trajectory neighbor forcing plus outlier smoothing.
    outlier_threshold_m : float or None
        Absolute smoothing cutoff; None derives 3x the median step.
    zero_tol : float
        Relative eigenvalue threshold below which eigenvectors are
        considered trivial and skipped.
    source_laplacian : (S, S) array or None
        Precomputed source Laplacian in grid order; skips recomputation
        when sweeping many calibration subsets of one environment.
    """

    def __init__(
        self,
        source_points=None,
        source_positions=None,
        n_neighbors=None,
        n_components=DEFAULT_EMBEDDING_DIM,
        ridge=lle.DEFAULT_RIDGE,
        mode="stationary",
        outlier_threshold_m=None,
        zero_tol=alignment.ZERO_EIGENVALUE_TOL,
        source_laplacian=None,
    ):
        self.source_points = source_points
        self.source_positions = source_positions
        self.n_neighbors = n_neighbors
        self.n_components = n_components
        self.ridge = ridge
        self.mode = mode
        self.outlier_threshold_m = outlier_threshold_m
        self.zero_tol = zero_tol
        self.source_laplacian = source_laplacian

    def fit(self, X, y):
        """Offline phase: pair calibration fingerprints with grid positions.

        X are the calibration RSS vectors (C, K); y the matching positions
        (C, 2), each equal to a grid position exactly.
        """
        if self.source_points is None or self.source_positions is None:
            raise ConfigurationError("source_points and source_positions are required")
        check_choice(self.mode, name="mode", choices=("stationary", "walking"))
        src = check_array(self.source_points, name="source_points", ndim=2)
        src_pos = check_array(self.source_positions, name="source_positions", shape=(len(src), 2))
        calib = check_array(X, name="calibration_rss", ndim=2)
        calib_pos = check_array(y, name="calibration_positions", shape=(len(calib), 2))
        if calib.shape[1] != src.shape[1]:
            raise StructuralError(
                f"calibration vectors have {calib.shape[1]} entries, source has {src.shape[1]}"
            )
        self.n_components_ = check_positive_int(self.n_components, name="n_components")
        self.source_points_ = src
        self.source_positions_ = src_pos
        self.calibration_rss_ = calib
        self.indexing_ = alignment.pair_indices(src_pos, calib_pos)
        n_src = self.n_neighbors or lle.default_n_neighbors(len(src))
        if self.source_laplacian is not None:
            lap = check_array(self.source_laplacian, name="source_laplacian", shape=(len(src), len(src)))
        else:
            lap = lle.laplacian_from_points(src, n_src, ridge=self.ridge)
        perm = self.indexing_.perm
        self.source_laplacian_aligned_ = lap[np.ix_(perm, perm)]
        return self

    def _check_fitted(self):
        if not hasattr(self, "indexing_"):
            raise NotFittedError(
                "This ManifoldAlignmentLocalizer instance is not fitted yet; call fit first"
            )

    def localize(self, observations) -> LocalizationResult:
        """Online phase: embed [calibration | observations] jointly with the source."""
        self._check_fitted()
        obs = check_array(observations, name="observations", ndim=2)
        k = self.source_points_.shape[1]
        if obs.shape[1] != k:
            raise StructuralError(f"observations have {obs.shape[1]} entries, expected {k}")
        idx = self.indexing_
        n_cal = idx.n_paired
        n_obs = len(obs)
        dest = np.vstack([self.calibration_rss_, obs])
        n_dest = self.n_neighbors or lle.default_n_neighbors(len(dest))
        n_dest = min(n_dest, len(dest) - 1)
        nbrs = lle.find_neighbors(dest, n_dest)
        if self.mode == "walking":
            nbrs = boost_trajectory_weights(nbrs, n_observations=n_obs, n_calibration=n_cal)
        dest_lap = lle.build_laplacian(lle.compute_weights(dest, nbrs, ridge=self.ridge))
        lam_x, lam_y = alignment.mixing_weights(idx.n_source, n_cal, n_obs)
        joint = alignment.assemble_joint_laplacian(
            self.source_laplacian_aligned_, dest_lap, idx, lam_x, lam_y
        )
        emb = alignment.compute_embedding(joint, self.n_components_, zero_tol=self.zero_tol)
        source_rows = emb.source_rows
        obs_rows = emb.observation_rows
        orig_idx = idx.perm
        matched = np.empty(n_obs, dtype=int)
        dists = np.empty(n_obs)
        for t in range(n_obs):
            d = np.linalg.norm(source_rows - obs_rows[t], axis=1)
            # ties resolve toward the lower original grid index
            best = np.lexsort((orig_idx, d))[0]
            matched[t] = orig_idx[best]
            dists[t] = d[best]
        positions = self.source_positions_[matched]
        flags = np.zeros(n_obs, dtype=bool)
        if self.mode == "walking" and n_obs >= 3:
            threshold = self.outlier_threshold_m
            if threshold is None:
                threshold = default_outlier_threshold(positions)
            positions, flags = smooth_outliers(positions, threshold)
        return LocalizationResult(
            positions=positions,
            matched_indices=matched,
            embedding_distances=dists,
            smoothed=flags,
        )

    def predict(self, X) -> np.ndarray:
        """Estimated (x, y) per observation row of X."""
        return self.localize(X).positions


def localize(
    source_points,
    source_positions,
    calibration_rss,
    calibration_positions,
    observations,
    **params,
) -> LocalizationResult:
    """One-call pipeline: fit a localizer on calibration data, localize a batch."""
    est = ManifoldAlignmentLocalizer(
        source_points=source_points, source_positions=source_positions, **params
    )
    est.fit(calibration_rss, calibration_positions)
    return est.localize(observations)
