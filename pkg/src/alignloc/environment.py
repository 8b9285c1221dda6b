"""Synthetic indoor radio environments.

Floor plans with attenuating walls and access points, regular grids over
the walkable area, a log-distance path-loss simulator that produces
ground-truth radio maps, and the two source-dataset variants used for
alignment: simulated radio maps and extended plan coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigurationError, StructuralError
from .validation import check_nonnegative_float, check_positive_int


@dataclass(frozen=True)
class Wall:
    """Line segment with a signal attenuation in dB.

    ``dissociating`` walls additionally forbid grid points on opposite
    sides from being treated as neighbors (thick or metallic walls).
    """

    x1: float
    y1: float
    x2: float
    y2: float
    atten_db: float = 0.0
    dissociating: bool = False

    def __post_init__(self):
        if self.atten_db < 0:
            raise ConfigurationError(f"wall attenuation must be >= 0, got {self.atten_db}")

    @property
    def p1(self) -> np.ndarray:
        return np.array([self.x1, self.y1], dtype=float)

    @property
    def p2(self) -> np.ndarray:
        return np.array([self.x2, self.y2], dtype=float)


@dataclass(frozen=True)
class AccessPoint:
    """Transmitter at a fixed 2-D position; ids must be contiguous 1..K."""

    x: float
    y: float
    tx_dbm: float = 0.0
    ap_id: int = 1


@dataclass(frozen=True)
class FloorPlan:
    """Rectangular floor plan with walls and an optional grid inclusion mask.

    ``mask`` is a list of rows of 0/1 flags.  Row r, column c refers to the
    lattice point at (c*spacing, r*spacing) once a grid is built; ``None``
    means every lattice point is included.
    """

    width: float
    height: float
    walls: tuple[Wall, ...] = ()
    mask: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError(
                f"floor plan must have positive extent, got {self.width} x {self.height}"
            )
        object.__setattr__(self, "walls", tuple(self.walls))
        if self.mask is not None:
            object.__setattr__(self, "mask", tuple(tuple(int(v) for v in row) for row in self.mask))
        for w in self.walls:
            for x, y in ((w.x1, w.y1), (w.x2, w.y2)):
                if not (0 <= x <= self.width and 0 <= y <= self.height):
                    raise ConfigurationError(
                        f"wall endpoint ({x}, {y}) outside plan {self.width} x {self.height}"
                    )

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x <= self.width and 0 <= y <= self.height


@dataclass(frozen=True)
class GridSpec:
    """Row-major grid over a floor plan.

    ``positions`` has shape (S, 2) in meters; ``lattice`` holds the integer
    (col, row) coordinates of each kept point, which survive masking and
    let callers reason about 4-neighborhood adjacency on the walk graph.
    """

    spacing: float
    positions: np.ndarray
    lattice: np.ndarray
    shape: tuple[int, int]  # (n_cols, n_rows) of the unmasked lattice

    @property
    def n_points(self) -> int:
        return len(self.positions)

    def lattice_neighbors(self, i: int) -> list[int]:
        """Indices of grid points 4-adjacent to point ``i`` on the lattice."""
        c, r = self.lattice[i]
        out = []
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            hits = np.flatnonzero((self.lattice[:, 0] == c + dc) & (self.lattice[:, 1] == r + dr))
            out.extend(int(h) for h in hits)
        return out


@dataclass(frozen=True)
class RadioMap:
    """Per-grid-point RSS vectors: positions (S, 2), rss (S, K), both in row order."""

    positions: np.ndarray
    rss: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        rss = np.asarray(self.rss, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise StructuralError(f"positions must be (S, 2), got {pos.shape}")
        if rss.ndim != 2 or rss.shape[0] != pos.shape[0]:
            raise StructuralError(f"rss must be (S, K) with S={pos.shape[0]}, got {rss.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(rss))):
            raise StructuralError("radio map contains non-finite values")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rss", rss)

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def n_aps(self) -> int:
        return self.rss.shape[1]


@dataclass(frozen=True)
class PropagationModel:
    """Log-distance path loss: rx = tx - 10*n*log10(max(d, d0)) - wall losses."""

    exponent: float = 2.2
    reference_distance_m: float = 0.5

    def __post_init__(self):
        if self.exponent <= 0:
            raise ConfigurationError(f"path-loss exponent must be > 0, got {self.exponent}")
        if self.reference_distance_m <= 0:
            raise ConfigurationError(
                f"reference distance must be > 0, got {self.reference_distance_m}"
            )


def build_grid(plan: FloorPlan, spacing: float) -> GridSpec:
    """Lay a row-major lattice of points over the plan, honoring its mask."""
    spacing = float(spacing)
    if spacing <= 0:
        raise ConfigurationError(f"grid spacing must be > 0, got {spacing}")
    if spacing >= min(plan.width, plan.height):
        raise ConfigurationError(
            f"grid spacing {spacing} too large for plan {plan.width} x {plan.height}"
        )
    n_cols = int(np.floor(plan.width / spacing + 1e-9)) + 1
    n_rows = int(np.floor(plan.height / spacing + 1e-9)) + 1
    if plan.mask is not None:
        if len(plan.mask) != n_rows or any(len(row) != n_cols for row in plan.mask):
            raise StructuralError(
                f"mask shape {len(plan.mask)} x {len(plan.mask[0]) if plan.mask else 0}"
                f" does not match lattice {n_rows} rows x {n_cols} cols"
            )
    positions = []
    lattice = []
    for r in range(n_rows):
        for c in range(n_cols):
            if plan.mask is not None and not plan.mask[r][c]:
                continue
            positions.append((c * spacing, r * spacing))
            lattice.append((c, r))
    if len(positions) < 2:
        raise ConfigurationError(
            f"grid has {len(positions)} points; need at least 2 (spacing too large or mask too tight)"
        )
    return GridSpec(
        spacing=spacing,
        positions=np.array(positions, dtype=float),
        lattice=np.array(lattice, dtype=int),
        shape=(n_cols, n_rows),
    )


def segments_properly_intersect(a1, a2, b1, b2) -> bool:
    """True iff the open segments a1-a2 and b1-b2 cross at an interior point.

    Touching at an endpoint or mere collinear overlap does not count; both
    orientation pairs must strictly alternate.
    """
    a1 = np.asarray(a1, float)
    a2 = np.asarray(a2, float)
    b1 = np.asarray(b1, float)
    b2 = np.asarray(b2, float)

    def cross(o, p, q):
        return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])

    d1 = cross(b1, b2, a1)
    d2 = cross(b1, b2, a2)
    d3 = cross(a1, a2, b1)
    d4 = cross(a1, a2, b2)
    return bool(d1 * d2 < 0 and d3 * d4 < 0)


def _wall_losses(points: np.ndarray, source: np.ndarray, walls) -> np.ndarray:
    """Total attenuation of walls properly crossed by source->point segments."""
    points = np.atleast_2d(np.asarray(points, float))
    losses = np.zeros(len(points))
    sx, sy = float(source[0]), float(source[1])
    for w in walls:
        if w.atten_db == 0:
            continue
        wx, wy = w.x2 - w.x1, w.y2 - w.y1
        # orientation of segment endpoints relative to the wall line
        d1 = wx * (sy - w.y1) - wy * (sx - w.x1)
        d2 = wx * (points[:, 1] - w.y1) - wy * (points[:, 0] - w.x1)
        # orientation of wall endpoints relative to each source->point line
        vx, vy = points[:, 0] - sx, points[:, 1] - sy
        d3 = vx * (w.y1 - sy) - vy * (w.x1 - sx)
        d4 = vx * (w.y2 - sy) - vy * (w.x2 - sx)
        crossed = (d1 * d2 < 0) & (d3 * d4 < 0)
        losses[crossed] += w.atten_db
    return losses


def predict_rss(
    points: np.ndarray, ap: AccessPoint, plan: FloorPlan, model: PropagationModel
) -> np.ndarray:
    """Noise-free received signal strength at each point for one access point."""
    points = np.atleast_2d(np.asarray(points, float))
    d = np.hypot(points[:, 0] - ap.x, points[:, 1] - ap.y)
    d = np.maximum(d, model.reference_distance_m)
    rss = ap.tx_dbm - 10.0 * model.exponent * np.log10(d)
    rss -= _wall_losses(points, np.array([ap.x, ap.y]), plan.walls)
    return rss


def _check_aps(aps, plan: FloorPlan) -> list[AccessPoint]:
    aps = list(aps)
    if not aps:
        raise ConfigurationError("need at least one access point")
    ids = sorted(ap.ap_id for ap in aps)
    if ids != list(range(1, len(aps) + 1)):
        raise StructuralError(f"access point ids must be contiguous 1..{len(aps)}, got {ids}")
    for ap in aps:
        if not plan.contains(ap.x, ap.y):
            raise ConfigurationError(f"access point {ap.ap_id} at ({ap.x}, {ap.y}) outside plan")
    return sorted(aps, key=lambda ap: ap.ap_id)


def simulate_radio_map(
    plan: FloorPlan,
    aps,
    grid: GridSpec,
    model: PropagationModel | None = None,
    noise_sigma: float = 0.0,
    seed=0,
) -> RadioMap:
    """Ground-truth radio map from the log-distance model plus shadowing noise."""
    model = model or PropagationModel()
    noise_sigma = check_nonnegative_float(noise_sigma, name="noise_sigma")
    aps = _check_aps(aps, plan)
    rss = np.column_stack([predict_rss(grid.positions, ap, plan, model) for ap in aps])
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        rss = rss + rng.normal(0.0, noise_sigma, size=rss.shape)
    return RadioMap(positions=grid.positions.copy(), rss=rss)


def make_plan_source(grid: GridSpec, n_aps: int) -> np.ndarray:
    """Extended plan coordinates: (x, y, x, y, ...) padded to length ``n_aps``.

    Swapping RSS vectors for these preserves grid geometry in the source
    dataset without any propagation model.
    """
    n_aps = check_positive_int(n_aps, name="n_aps", minimum=2)
    out = np.empty((grid.n_points, n_aps))
    out[:, 0::2] = grid.positions[:, 0:1]
    out[:, 1::2] = grid.positions[:, 1:2]
    return out


def dissociation_filter(grid: GridSpec, plan: FloorPlan, i: int, j: int) -> bool:
    """True iff points i and j may not be neighbors (a dissociating wall between them)."""
    n = grid.n_points
    if i == j:
        raise StructuralError(f"dissociation filter needs two distinct points, got i == j == {i}")
    for idx in (i, j):
        if not 0 <= idx < n:
            raise StructuralError(f"grid index {idx} out of range 0..{n - 1}")
    p, q = grid.positions[i], grid.positions[j]
    return any(
        w.dissociating and segments_properly_intersect(p, q, w.p1, w.p2) for w in plan.walls
    )


def dissociation_matrix(grid: GridSpec, plan: FloorPlan) -> np.ndarray:
    """Boolean (S, S) matrix: entry [i, j] true iff i and j are dissociated."""
    n = grid.n_points
    out = np.zeros((n, n), dtype=bool)
    diss_walls = [w for w in plan.walls if w.dissociating]
    if not diss_walls:
        return out
    for i in range(n):
        p = grid.positions[i]
        for w in diss_walls:
            wx, wy = w.x2 - w.x1, w.y2 - w.y1
            d1 = wx * (p[1] - w.y1) - wy * (p[0] - w.x1)
            d2 = wx * (grid.positions[:, 1] - w.y1) - wy * (grid.positions[:, 0] - w.x1)
            vx = grid.positions[:, 0] - p[0]
            vy = grid.positions[:, 1] - p[1]
            d3 = vx * (w.y1 - p[1]) - vy * (w.x1 - p[0])
            d4 = vx * (w.y2 - p[1]) - vy * (w.x2 - p[0])
            out[i] |= (d1 * d2 < 0) & (d3 * d4 < 0)
    np.fill_diagonal(out, False)
    return out


def sample_observation(radio_map: RadioMap, position_index: int, obs_sigma: float, seed) -> np.ndarray:
    """One noisy RSS reading at a grid point: map entry plus i.i.d. Gaussian noise."""
    obs_sigma = check_nonnegative_float(obs_sigma, name="obs_sigma")
    n = radio_map.n_points
    if not 0 <= position_index < n:
        raise StructuralError(f"position index {position_index} out of range 0..{n - 1}")
    reading = radio_map.rss[position_index].copy()
    if obs_sigma > 0:
        rng = np.random.default_rng(seed)
        reading += rng.normal(0.0, obs_sigma, size=reading.shape)
    return reading


# ---------------------------------------------------------------------------
# File formats


def _fmt(v: float) -> str:
    # unique=True keeps the round-trip bit-exact; min_digits pads to 4 decimals
    return np.format_float_positional(float(v), unique=True, fractional=True, min_digits=4)


def save_radio_map(radio_map: RadioMap, path) -> None:
    """Write CSV with header idx,x,y,rss_1..rss_K; floats keep >= 4 decimals."""
    k = radio_map.n_aps
    header = "idx,x,y," + ",".join(f"rss_{j + 1}" for j in range(k))
    lines = [header]
    for i in range(radio_map.n_points):
        x, y = radio_map.positions[i]
        vals = ",".join(_fmt(v) for v in radio_map.rss[i])
        lines.append(f"{i},{_fmt(x)},{_fmt(y)},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_radio_map(path) -> RadioMap:
    """Read a CSV written by :func:`save_radio_map`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise StructuralError(f"{path}: empty radio map file")
    header = lines[0].split(",")
    if header[:3] != ["idx", "x", "y"] or not all(h.startswith("rss_") for h in header[3:]):
        raise StructuralError(f"{path}: unexpected header {lines[0]!r}")
    k = len(header) - 3
    if k < 1:
        raise StructuralError(f"{path}: no RSS columns")
    positions, rss = [], []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3 + k:
            raise StructuralError(f"{path}:{ln_no}: expected {3 + k} fields, got {len(parts)}")
        positions.append((float(parts[1]), float(parts[2])))
        rss.append([float(v) for v in parts[3:]])
    return RadioMap(positions=np.array(positions), rss=np.array(rss))


def load_floor_plan(path) -> tuple[FloorPlan, list[AccessPoint]]:
    """Read a floor-plan document (width, height, walls, aps, optional mask)."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return floor_plan_from_dict(doc, source=str(path))


def floor_plan_from_dict(doc, source: str = "floor plan") -> tuple[FloorPlan, list[AccessPoint]]:
    """Construct a plan and its access points from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}: expected a mapping at top level")
    allowed = {"width", "height", "walls", "aps", "mask"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigurationError(f"{source}: unknown keys {sorted(unknown)}")
    for key in ("width", "height", "aps"):
        if key not in doc:
            raise ConfigurationError(f"{source}: missing required key {key!r}")
    walls = []
    for n, w in enumerate(doc.get("walls") or []):
        extra = set(w) - {"x1", "y1", "x2", "y2", "atten_db", "dissociating"}
        if extra:
            raise ConfigurationError(f"{source}: wall {n}: unknown keys {sorted(extra)}")
        try:
            walls.append(
                Wall(
                    x1=float(w["x1"]),
                    y1=float(w["y1"]),
                    x2=float(w["x2"]),
                    y2=float(w["y2"]),
                    atten_db=float(w.get("atten_db", 0.0)),
                    dissociating=bool(w.get("dissociating", False)),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"{source}: wall {n}: missing key {exc}") from exc
    aps = []
    for n, a in enumerate(doc["aps"]):
        extra = set(a) - {"x", "y", "tx_dbm"}
        if extra:
            raise ConfigurationError(f"{source}: ap {n}: unknown keys {sorted(extra)}")
        try:
            aps.append(
                AccessPoint(x=float(a["x"]), y=float(a["y"]), tx_dbm=float(a.get("tx_dbm", 0.0)), ap_id=n + 1)
            )
        except KeyError as exc:
            raise ConfigurationError(f"{source}: ap {n}: missing key {exc}") from exc
    plan = FloorPlan(
        width=float(doc["width"]),
        height=float(doc["height"]),
        walls=tuple(walls),
        mask=doc.get("mask"),
    )
    _check_aps(aps, plan)
    return plan, aps


def save_floor_plan(plan: FloorPlan, aps, path) -> None:
    """Write a floor-plan document readable by :func:`load_floor_plan`."""
    doc = {
        "width": float(plan.width),
        "height": float(plan.height),
        "walls": [
            {
                "x1": float(w.x1),
                "y1": float(w.y1),
                "x2": float(w.x2),
                "y2": float(w.y2),
                "atten_db": float(w.atten_db),
                "dissociating": bool(w.dissociating),
            }
            for w in plan.walls
        ],
        "aps": [{"x": float(a.x), "y": float(a.y), "tx_dbm": float(a.tx_dbm)} for a in aps],
    }
    if plan.mask is not None:
        doc["mask"] = [list(row) for row in plan.mask]
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
