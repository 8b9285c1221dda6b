"""Radio-map estimation from localized observations.

An observation directory buffers up to ``n_acc`` RSS readings per grid
position; once full, a position's estimate is the buffer mean.  Finalizing
blends in calibration fingerprints verbatim and flags everything else
unfilled.  Metrics compare the blended map against ground truth and a
baseline map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .validation import check_array, check_positive_int

DEFAULT_N_ACC = 20

PROVENANCE_CALIBRATED = "calibrated"
PROVENANCE_ESTIMATED = "estimated"
PROVENANCE_UNFILLED = "unfilled"


class ObservationDirectory:
    """Bounded per-position buffers of RSS readings (first-n policy)."""

    def __init__(self, grid_positions, n_aps: int, n_acc: int = DEFAULT_N_ACC):
        self.grid_positions = check_array(grid_positions, name="grid_positions", ndim=2)
        self.n_aps = check_positive_int(n_aps, name="n_aps")
        self.n_acc = check_positive_int(n_acc, name="n_acc")
        self._index = {tuple(p): i for i, p in enumerate(self.grid_positions)}
        self._buffers: list[list[np.ndarray]] = [[] for _ in range(len(self.grid_positions))]

    @property
    def n_points(self) -> int:
        return len(self.grid_positions)

    def position_index(self, position) -> int:
        key = tuple(np.asarray(position, dtype=float))
        if key not in self._index:
            raise StructuralError(f"position {key} is not a grid position")
        return self._index[key]

    def record(self, position, rss) -> "ObservationDirectory":
        """Append one reading; silently ignored once the buffer holds n_acc."""
        i = self.position_index(position)
        rss = check_array(rss, name="rss", shape=(self.n_aps,))
        if len(self._buffers[i]) < self.n_acc:
            self._buffers[i].append(rss.copy())
        return self

    def count(self, position) -> int:
        return len(self._buffers[self.position_index(position)])

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(b) for b in self._buffers], dtype=int)

    def buffer(self, i: int) -> np.ndarray:
        return np.array(self._buffers[i]) if self._buffers[i] else np.empty((0, self.n_aps))

    def is_complete(self) -> bool:
        return bool(np.all(self.counts >= self.n_acc))


@dataclass(frozen=True)
class EstimatedRadioMap:
    """Blended map: calibration verbatim, full buffers averaged, rest unfilled.

    Unfilled rows hold NaN in ``rss``; consumers substitute a baseline.
    """

    positions: np.ndarray
    rss: np.ndarray
    provenance: np.ndarray
    counts: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class MapMetrics:
    rms_estimated_db: float
    rms_overall_db: float
    improvement_pct: float


def record_observation(directory: ObservationDirectory, position, rss) -> ObservationDirectory:
    """Functional-style alias for :meth:`ObservationDirectory.record`."""
    return directory.record(position, rss)


def snap_to_grid(positions, grid_positions) -> np.ndarray:
    """Nearest grid position per row; exact ties go to the lower grid index.

    Walking-mode smoothing can emit midpoints between grid points; recording
    requires on-grid positions.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    grid_positions = check_array(grid_positions, name="grid_positions", ndim=2)
    out = np.empty_like(positions)
    for t, p in enumerate(positions):
        d = np.linalg.norm(grid_positions - p, axis=1)
        out[t] = grid_positions[np.lexsort((np.arange(len(grid_positions)), d))[0]]
    return out


def finalize_map(
    directory: ObservationDirectory, calibration_positions, calibration_rss
) -> EstimatedRadioMap:
    """Blend buffer means with calibration fingerprints.

    Calibration wins where both exist; positions whose buffers never filled
    stay unfilled (NaN) so metrics can substitute a baseline.
    """
    calib_pos = check_array(
        calibration_positions, name="calibration_positions", ndim=2, allow_empty=True
    )
    calib_rss = check_array(calibration_rss, name="calibration_rss", ndim=2, allow_empty=True)
    if len(calib_pos) != len(calib_rss):
        raise StructuralError(
            f"{len(calib_pos)} calibration positions vs {len(calib_rss)} fingerprints"
        )
    n = directory.n_points
    k = directory.n_aps
    rss = np.full((n, k), np.nan)
    provenance = np.full(n, PROVENANCE_UNFILLED, dtype=object)
    counts = directory.counts
    for i in range(n):
        if counts[i] >= directory.n_acc:
            rss[i] = directory.buffer(i).mean(axis=0)
            provenance[i] = PROVENANCE_ESTIMATED
    for p, v in zip(calib_pos, calib_rss):
        i = directory.position_index(p)
        if v.shape != (k,):
            raise StructuralError(f"calibration fingerprint must have {k} entries, got {v.shape}")
        rss[i] = v
        provenance[i] = PROVENANCE_CALIBRATED
    return EstimatedRadioMap(
        positions=directory.grid_positions.copy(),
        rss=rss,
        provenance=np.array(provenance, dtype=object),
        counts=counts,
    )


def _check_same_grid(name: str, positions: np.ndarray, reference: np.ndarray) -> None:
    if positions.shape != reference.shape or not np.array_equal(positions, reference):
        raise StructuralError(f"{name}: grid positions differ from the estimated map's grid")


def map_metrics(estimated: EstimatedRadioMap, truth, baseline) -> MapMetrics:
    """RMS errors of the blended map and its improvement over the baseline.

    rms_estimated covers estimated-only positions; rms_overall covers every
    position, substituting baseline values where unfilled.  Improvement is
    the percent reduction of rms_overall relative to rms(baseline, truth).
    """
    _check_same_grid("truth map", truth.positions, estimated.positions)
    _check_same_grid("baseline map", baseline.positions, estimated.positions)
    if truth.rss.shape != estimated.rss.shape or baseline.rss.shape != estimated.rss.shape:
        raise StructuralError("maps disagree on the number of access points")
    est_mask = estimated.provenance == PROVENANCE_ESTIMATED
    unfilled = estimated.provenance == PROVENANCE_UNFILLED
    overall = np.where(unfilled[:, None], baseline.rss, estimated.rss)
    if np.any(~np.isfinite(overall)):
        raise StructuralError("non-finite RSS in filled map rows")
    if est_mask.any():
        rms_estimated = float(
            np.sqrt(np.mean((estimated.rss[est_mask] - truth.rss[est_mask]) ** 2))
        )
    else:
        rms_estimated = 0.0
    rms_overall = float(np.sqrt(np.mean((overall - truth.rss) ** 2)))
    rms_baseline = float(np.sqrt(np.mean((baseline.rss - truth.rss) ** 2)))
    if rms_baseline > 0:
        improvement = 100.0 * (rms_baseline - rms_overall) / rms_baseline
    else:
        improvement = 0.0
    return MapMetrics(
        rms_estimated_db=rms_estimated,
        rms_overall_db=rms_overall,
        improvement_pct=improvement,
    )


def save_estimated_map(estimated: EstimatedRadioMap, path) -> None:
    """Radio-map CSV schema plus provenance and count columns."""
    from .environment import _fmt

    k = estimated.rss.shape[1]
    header = "idx,x,y," + ",".join(f"rss_{j + 1}" for j in range(k)) + ",provenance,count"
    lines = [header]
    for i in range(estimated.n_points):
        x, y = estimated.positions[i]
        vals = ",".join(_fmt(v) if np.isfinite(v) else "nan" for v in estimated.rss[i])
        lines.append(
            f"{i},{_fmt(x)},{_fmt(y)},{vals},{estimated.provenance[i]},{estimated.counts[i]}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
