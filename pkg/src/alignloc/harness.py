"""Experiment harness: seeded Monte-Carlo sweeps and plot-ready CSV output.

Everything is reproducible from (config, seed) alone.  Each randomized
stage derives its generator from a composite key (master seed, stage id,
sweep index, trial index), so changing the trial count of one stage never
perturbs another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import environment as env
from . import lle, mapbuilder
from .errors import ConfigurationError
from .localizer import ManifoldAlignmentLocalizer
from .validation import check_choice

SOURCE_PLAN_COORDS = "plan_coords"
SOURCE_SIMULATED_MAP = "simulated_map"

# stage ids for composite seeding
STAGE_TRUTH_MAP = 101
STAGE_SOURCE_MAP = 102
STAGE_CALIBRATION = 201
STAGE_OBS_POSITIONS = 202
STAGE_OBS_NOISE = 203
STAGE_CALIB_NOISE = 204


def stage_rng(seed: int, stage: int, sweep_idx: int = 0, trial: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stage), int(sweep_idx), int(trial)])


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class LocalizationConfig:
    calibration_pct: float = 25.0
    observations: int = 11
    n_neighbors: int | None = None
    embedding_dim: int = 3
    mode: str = "stationary"
    observation_pattern: str = "uniform"
    outlier_threshold_m: float | None = None
    ridge: float = lle.DEFAULT_RIDGE
    trials: int = 200
    obs_noise_db: float = 3.0
    calib_noise_db: float = 0.0


@dataclass
class SweepConfig:
    calibration_pct: tuple = (10.0, 20.0, 30.0, 40.0, 50.0)
    n_neighbors: tuple = (10, 15, 20, 25, 30, 40, 50)
    observations: tuple = (1, 3, 5, 7, 9, 11)


@dataclass
class MapConfig:
    n_acc: int = mapbuilder.DEFAULT_N_ACC
    batch_observations: int = 11
    max_batches: int = 200
    trials: int = 3
    calibration_pct: float | None = None  # None: reuse localization.calibration_pct


@dataclass
class ExperimentConfig:
    seed: int = 0
    environment: str | dict | None = None
    grid_spacing: float = 1.0
    source_type: str = SOURCE_PLAN_COORDS
    propagation: env.PropagationModel = field(default_factory=env.PropagationModel)
    truth_shadowing_db: float = 2.0
    source_model_error_db: float = 0.0
    localization: LocalizationConfig = field(default_factory=LocalizationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    map_construction: MapConfig = field(default_factory=MapConfig)


def _require_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")


def _positive_pct(value, name: str) -> float:
    value = float(value)
    if not 0 < value <= 100:
        raise ConfigurationError(f"{name}: percentage must be in (0, 100], got {value}")
    return value


def config_from_dict(doc: dict, source: str = "config") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}: expected a mapping at top level")
    _require_keys(
        doc,
        {
            "seed",
            "environment",
            "grid_spacing",
            "source_type",
            "propagation",
            "truth_shadowing_db",
            "source_model_error_db",
            "localization",
            "sweep",
            "map_construction",
        },
        source,
    )
    cfg = ExperimentConfig()
    cfg.seed = int(doc.get("seed", 0))
    cfg.environment = doc.get("environment")
    cfg.grid_spacing = float(doc.get("grid_spacing", 1.0))
    if cfg.grid_spacing <= 0:
        raise ConfigurationError(f"grid_spacing: must be > 0, got {cfg.grid_spacing}")
    cfg.source_type = check_choice(
        doc.get("source_type", SOURCE_PLAN_COORDS),
        name="source_type",
        choices=(SOURCE_PLAN_COORDS, SOURCE_SIMULATED_MAP),
    )
    prop = doc.get("propagation") or {}
    _require_keys(prop, {"exponent", "reference_distance_m"}, f"{source}: propagation")
    cfg.propagation = env.PropagationModel(
        exponent=float(prop.get("exponent", 2.2)),
        reference_distance_m=float(prop.get("reference_distance_m", 0.5)),
    )
    cfg.truth_shadowing_db = float(doc.get("truth_shadowing_db", 2.0))
    cfg.source_model_error_db = float(doc.get("source_model_error_db", 0.0))
    for name, val in (
        ("truth_shadowing_db", cfg.truth_shadowing_db),
        ("source_model_error_db", cfg.source_model_error_db),
    ):
        if val < 0:
            raise ConfigurationError(f"{name}: must be >= 0, got {val}")

    loc = doc.get("localization") or {}
    _require_keys(
        loc,
        {
            "calibration_pct",
            "observations",
            "n_neighbors",
            "embedding_dim",
            "mode",
            "observation_pattern",
            "outlier_threshold_m",
            "ridge",
            "trials",
            "obs_noise_db",
            "calib_noise_db",
        },
        f"{source}: localization",
    )
    lc = LocalizationConfig()
    lc.calibration_pct = _positive_pct(
        loc.get("calibration_pct", lc.calibration_pct), "localization.calibration_pct"
    )
    lc.observations = int(loc.get("observations", lc.observations))
    if lc.observations < 1:
        raise ConfigurationError(f"localization.observations: must be >= 1, got {lc.observations}")
    if loc.get("n_neighbors") is not None:
        lc.n_neighbors = int(loc["n_neighbors"])
        if lc.n_neighbors < 1:
            raise ConfigurationError(
                f"localization.n_neighbors: must be >= 1, got {lc.n_neighbors}"
            )
    lc.embedding_dim = int(loc.get("embedding_dim", lc.embedding_dim))
    if not 1 <= lc.embedding_dim <= 10:
        raise ConfigurationError(
            f"localization.embedding_dim: must be in 1..10, got {lc.embedding_dim}"
        )
    lc.mode = check_choice(
        loc.get("mode", lc.mode), name="localization.mode", choices=("stationary", "walking")
    )
    lc.observation_pattern = check_choice(
        loc.get("observation_pattern", lc.observation_pattern),
        name="localization.observation_pattern",
        choices=("uniform", "walk"),
    )
    if loc.get("outlier_threshold_m") is not None:
        lc.outlier_threshold_m = float(loc["outlier_threshold_m"])
        if lc.outlier_threshold_m < 0:
            raise ConfigurationError("localization.outlier_threshold_m: must be >= 0")
    lc.ridge = float(loc.get("ridge", lc.ridge))
    if lc.ridge < 0:
        raise ConfigurationError(f"localization.ridge: must be >= 0, got {lc.ridge}")
    lc.trials = int(loc.get("trials", lc.trials))
    if lc.trials < 1:
        raise ConfigurationError(f"localization.trials: must be >= 1, got {lc.trials}")
    lc.obs_noise_db = float(loc.get("obs_noise_db", lc.obs_noise_db))
    lc.calib_noise_db = float(loc.get("calib_noise_db", lc.calib_noise_db))
    for name, val in (("obs_noise_db", lc.obs_noise_db), ("calib_noise_db", lc.calib_noise_db)):
        if val < 0:
            raise ConfigurationError(f"localization.{name}: must be >= 0, got {val}")
    cfg.localization = lc

    sw = doc.get("sweep") or {}
    _require_keys(sw, {"calibration_pct", "n_neighbors", "observations"}, f"{source}: sweep")
    sc = SweepConfig()
    if "calibration_pct" in sw:
        sc.calibration_pct = tuple(
            _positive_pct(v, "sweep.calibration_pct") for v in sw["calibration_pct"]
        )
    if "n_neighbors" in sw:
        sc.n_neighbors = tuple(int(v) for v in sw["n_neighbors"])
        if any(v < 1 for v in sc.n_neighbors):
            raise ConfigurationError("sweep.n_neighbors: values must be >= 1")
    if "observations" in sw:
        sc.observations = tuple(int(v) for v in sw["observations"])
        if any(v < 1 for v in sc.observations):
            raise ConfigurationError("sweep.observations: values must be >= 1")
    for name, vals in (
        ("sweep.calibration_pct", sc.calibration_pct),
        ("sweep.n_neighbors", sc.n_neighbors),
        ("sweep.observations", sc.observations),
    ):
        if not vals:
            raise ConfigurationError(f"{name}: must not be empty")
    cfg.sweep = sc

    mp = doc.get("map_construction") or {}
    _require_keys(
        mp,
        {"n_acc", "batch_observations", "max_batches", "trials", "calibration_pct"},
        f"{source}: map_construction",
    )
    mc = MapConfig()
    mc.n_acc = int(mp.get("n_acc", mc.n_acc))
    mc.batch_observations = int(mp.get("batch_observations", mc.batch_observations))
    mc.max_batches = int(mp.get("max_batches", mc.max_batches))
    mc.trials = int(mp.get("trials", mc.trials))
    for name, val in (
        ("n_acc", mc.n_acc),
        ("batch_observations", mc.batch_observations),
        ("max_batches", mc.max_batches),
        ("trials", mc.trials),
    ):
        if val < 1:
            raise ConfigurationError(f"map_construction.{name}: must be >= 1, got {val}")
    if mp.get("calibration_pct") is not None:
        mc.calibration_pct = _positive_pct(
            mp["calibration_pct"], "map_construction.calibration_pct"
        )
    cfg.map_construction = mc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid: {exc}") from exc
    return config_from_dict(doc or {}, source=str(path))


# ---------------------------------------------------------------------------
# Environment assembly


@dataclass(frozen=True)
class Environment:
    """Everything derivable from (config, master seed) before any trial runs."""

    plan: env.FloorPlan
    aps: tuple
    grid: env.GridSpec
    truth_map: env.RadioMap
    baseline_map: env.RadioMap
    source_points: np.ndarray
    source_laplacian: np.ndarray

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    @property
    def n_aps(self) -> int:
        return len(self.aps)


def packaged_environment_path(name: str = "office_corridors"):
    from importlib.resources import files

    return files("alignloc.data").joinpath(f"{name}.yaml")


def resolve_plan(cfg: ExperimentConfig, config_dir=None) -> tuple[env.FloorPlan, list]:
    """Environment source: inline mapping, file path, or the packaged default."""
    spec = cfg.environment
    if spec is None:
        ref = packaged_environment_path()
        return env.floor_plan_from_dict(yaml.safe_load(ref.read_text()), source=str(ref))
    if isinstance(spec, dict):
        return env.floor_plan_from_dict(spec, source="config: environment")
    import os

    path = spec
    if config_dir is not None and not os.path.isabs(path):
        candidate = os.path.join(config_dir, path)
        if os.path.exists(candidate):
            path = candidate
    try:
        return env.load_floor_plan(path)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"environment file not found: {path}") from exc


def build_environment(cfg: ExperimentConfig, config_dir=None) -> Environment:
    plan, aps = resolve_plan(cfg, config_dir=config_dir)
    grid = env.build_grid(plan, cfg.grid_spacing)
    truth = env.simulate_radio_map(
        plan,
        aps,
        grid,
        model=cfg.propagation,
        noise_sigma=cfg.truth_shadowing_db,
        seed=[cfg.seed, STAGE_TRUTH_MAP],
    )
    baseline = env.simulate_radio_map(
        plan,
        aps,
        grid,
        model=cfg.propagation,
        noise_sigma=cfg.source_model_error_db,
        seed=[cfg.seed, STAGE_SOURCE_MAP],
    )
    if cfg.source_type == SOURCE_PLAN_COORDS:
        source_points = env.make_plan_source(grid, len(aps))
    else:
        source_points = baseline.rss
    n_src = cfg.localization.n_neighbors or lle.default_n_neighbors(grid.n_points)
    n_src = min(n_src, grid.n_points - 1)
    forbidden = env.dissociation_matrix(grid, plan)
    if not forbidden.any():
        forbidden = None
    source_laplacian = lle.laplacian_from_points(
        source_points, n_src, ridge=cfg.localization.ridge, forbidden=forbidden
    )
    return Environment(
        plan=plan,
        aps=tuple(aps),
        grid=grid,
        truth_map=truth,
        baseline_map=baseline,
        source_points=source_points,
        source_laplacian=source_laplacian,
    )


# ---------------------------------------------------------------------------
# Trial sampling


def sample_calibration_indices(
    n_points: int, pct: float, rng: np.random.Generator
) -> np.ndarray:
    c = max(1, int(round(pct / 100.0 * n_points)))
    c = min(c, n_points)
    return np.sort(rng.choice(n_points, size=c, replace=False))


def sample_observation_indices(
    grid: env.GridSpec, n_obs: int, pattern: str, rng: np.random.Generator
) -> np.ndarray:
    """Observation ground-truth positions: uniform draws or a lattice walk."""
    if pattern == "uniform":
        replace = n_obs > grid.n_points
        return rng.choice(grid.n_points, size=n_obs, replace=replace)
    # walk: unit steps between 4-adjacent lattice points, staying put at dead ends
    out = np.empty(n_obs, dtype=int)
    here = int(rng.integers(grid.n_points))
    out[0] = here
    for t in range(1, n_obs):
        options = grid.lattice_neighbors(here)
        if options:
            here = int(options[rng.integers(len(options))])
        out[t] = here
    return out


def _noisy(readings: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0:
        return readings.copy()
    return readings + rng.normal(0.0, sigma, size=readings.shape)


# ---------------------------------------------------------------------------
# Experiments


@dataclass(frozen=True)
class MetricsRow:
    sweep_param: str
    value: float
    metrics: tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    header: tuple[str, ...]
    rows: tuple[MetricsRow, ...]
    per_trial: dict  # sweep value -> ndarray of per-trial scalars


def _run_single_trial(
    environment: Environment,
    cfg: ExperimentConfig,
    sweep_idx: int,
    trial: int,
    *,
    calibration_pct: float | None = None,
    n_neighbors_override: int | None = None,
    n_obs_override: int | None = None,
    mode_override: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One localization trial; returns (errors_m, true_pos, est_pos)."""
    lc = cfg.localization
    grid = environment.grid
    pct = calibration_pct if calibration_pct is not None else lc.calibration_pct
    n_obs = n_obs_override if n_obs_override is not None else lc.observations
    mode = mode_override if mode_override is not None else lc.mode

    rng_cal = stage_rng(cfg.seed, STAGE_CALIBRATION, sweep_idx, trial)
    calib_idx = sample_calibration_indices(grid.n_points, pct, rng_cal)
    rng_obs_pos = stage_rng(cfg.seed, STAGE_OBS_POSITIONS, sweep_idx, trial)
    pattern = "walk" if mode == "walking" else lc.observation_pattern
    obs_idx = sample_observation_indices(grid, n_obs, pattern, rng_obs_pos)

    truth = environment.truth_map.rss
    rng_obs = stage_rng(cfg.seed, STAGE_OBS_NOISE, sweep_idx, trial)
    obs_rss = _noisy(truth[obs_idx], lc.obs_noise_db, rng_obs)
    rng_calib_noise = stage_rng(cfg.seed, STAGE_CALIB_NOISE, sweep_idx, trial)
    calib_rss = _noisy(truth[calib_idx], lc.calib_noise_db, rng_calib_noise)

    n_nbr = n_neighbors_override if n_neighbors_override is not None else lc.n_neighbors
    if n_neighbors_override is not None:
        n_src = min(n_neighbors_override, grid.n_points - 1)
        forbidden = env.dissociation_matrix(grid, environment.plan)
        if not forbidden.any():
            forbidden = None
        source_lap = lle.laplacian_from_points(
            environment.source_points, n_src, ridge=lc.ridge, forbidden=forbidden
        )
    else:
        source_lap = environment.source_laplacian

    est = ManifoldAlignmentLocalizer(
        source_points=environment.source_points,
        source_positions=grid.positions,
        n_neighbors=n_nbr,
        n_components=lc.embedding_dim,
        ridge=lc.ridge,
        mode=mode,
        outlier_threshold_m=lc.outlier_threshold_m,
        source_laplacian=source_lap,
    )
    est.fit(calib_rss, grid.positions[calib_idx])
    result = est.localize(obs_rss)
    true_pos = grid.positions[obs_idx]
    errors = np.linalg.norm(result.positions - true_pos, axis=1)
    return errors, true_pos, result.positions


def run_localization_experiment(
    cfg: ExperimentConfig,
    environment: Environment | None = None,
    sweep_param: str | None = None,
    sweep_values=None,
) -> SweepResult:
    """Monte-Carlo localization sweep; one row per sweep value.

    ``sweep_param`` is one of None (single point at the configured
    calibration), "calibration_pct", "n_neighbors", or "observations".
    """
    environment = environment or build_environment(cfg)
    lc = cfg.localization
    if sweep_param is None:
        values = [lc.calibration_pct]
        param_name = "calibration_pct"
    else:
        param_name = sweep_param
        if sweep_values is None:
            sweep_values = getattr(cfg.sweep, sweep_param)
        values = list(sweep_values)
    rows = []
    per_trial = {}
    for sweep_idx, value in enumerate(values):
        kwargs = {}
        if param_name == "calibration_pct":
            kwargs["calibration_pct"] = float(value)
        elif param_name == "n_neighbors":
            kwargs["n_neighbors_override"] = int(value)
        elif param_name == "observations":
            kwargs["n_obs_override"] = int(value)
        else:
            raise ConfigurationError(f"unknown sweep parameter {param_name!r}")
        trial_means = np.empty(lc.trials)
        for trial in range(lc.trials):
            errors, _, _ = _run_single_trial(environment, cfg, sweep_idx, trial, **kwargs)
            trial_means[trial] = errors.mean()
        rows.append(
            MetricsRow(
                sweep_param=param_name,
                value=float(value),
                metrics=(float(trial_means.mean()), float(trial_means.std())),
            )
        )
        per_trial[float(value)] = trial_means
    return SweepResult(
        header=("sweep_param", "value", "mean_err_m", "std_err_m"),
        rows=tuple(rows),
        per_trial=per_trial,
    )


def run_map_experiment(
    cfg: ExperimentConfig,
    environment: Environment | None = None,
    sweep_values=None,
    localizer_fn=None,
) -> tuple[SweepResult, mapbuilder.EstimatedRadioMap]:
    """Stream localized observation batches into the map builder.

    Sweeps calibration percentage when ``sweep_values`` is given, else runs
    the single configured point.  ``localizer_fn(est, obs_rss, obs_idx)``
    may replace the real localizer (testing hook); it must return estimated
    positions.  Returns the metrics and the finalized map of the first
    sweep value's first trial.
    """
    environment = environment or build_environment(cfg)
    lc = cfg.localization
    mc = cfg.map_construction
    grid = environment.grid
    truth = environment.truth_map
    pct_default = mc.calibration_pct if mc.calibration_pct is not None else lc.calibration_pct
    values = [float(v) for v in sweep_values] if sweep_values is not None else [float(pct_default)]
    rows = []
    per_trial = {}
    first_map = None
    for sweep_idx, pct in enumerate(values):
        trial_metrics = np.empty((mc.trials, 3))
        for trial in range(mc.trials):
            rng_cal = stage_rng(cfg.seed, STAGE_CALIBRATION, sweep_idx, trial)
            calib_idx = sample_calibration_indices(grid.n_points, pct, rng_cal)
            rng_calib_noise = stage_rng(cfg.seed, STAGE_CALIB_NOISE, sweep_idx, trial)
            calib_rss = _noisy(truth.rss[calib_idx], lc.calib_noise_db, rng_calib_noise)
            est = ManifoldAlignmentLocalizer(
                source_points=environment.source_points,
                source_positions=grid.positions,
                n_neighbors=lc.n_neighbors,
                n_components=lc.embedding_dim,
                ridge=lc.ridge,
                mode=lc.mode,
                outlier_threshold_m=lc.outlier_threshold_m,
                source_laplacian=environment.source_laplacian,
            )
            est.fit(calib_rss, grid.positions[calib_idx])
            directory = mapbuilder.ObservationDirectory(
                grid.positions, n_aps=environment.n_aps, n_acc=mc.n_acc
            )
            pattern = "walk" if lc.mode == "walking" else lc.observation_pattern
            for batch in range(mc.max_batches):
                batch_key = trial * mc.max_batches + batch
                rng_obs_pos = stage_rng(cfg.seed, STAGE_OBS_POSITIONS, sweep_idx, batch_key)
                obs_idx = sample_observation_indices(
                    grid, mc.batch_observations, pattern, rng_obs_pos
                )
                rng_obs = stage_rng(cfg.seed, STAGE_OBS_NOISE, sweep_idx, batch_key)
                obs_rss = _noisy(truth.rss[obs_idx], lc.obs_noise_db, rng_obs)
                if localizer_fn is not None:
                    positions = localizer_fn(est, obs_rss, obs_idx)
                else:
                    positions = est.localize(obs_rss).positions
                positions = mapbuilder.snap_to_grid(positions, grid.positions)
                for pos, rss in zip(positions, obs_rss):
                    directory.record(pos, rss)
                if directory.is_complete():
                    break
            estimated = mapbuilder.finalize_map(directory, grid.positions[calib_idx], calib_rss)
            metrics = mapbuilder.map_metrics(estimated, truth, environment.baseline_map)
            trial_metrics[trial] = (
                metrics.rms_estimated_db,
                metrics.rms_overall_db,
                metrics.improvement_pct,
            )
            if first_map is None:
                first_map = estimated
        means = trial_metrics.mean(axis=0)
        rows.append(
            MetricsRow(
                sweep_param="calibration_pct",
                value=pct,
                metrics=(float(means[0]), float(means[1]), float(means[2])),
            )
        )
        per_trial[pct] = trial_metrics[:, 2].copy()  # improvement per trial
    result = SweepResult(
        header=("sweep_param", "value", "rms_est_db", "rms_overall_db", "improvement_pct"),
        rows=tuple(rows),
        per_trial=per_trial,
    )
    return result, first_map


# ---------------------------------------------------------------------------
# CSV output


def write_metrics_csv(result: SweepResult, path) -> None:
    lines = [",".join(result.header)]
    for row in result.rows:
        vals = ",".join(f"{v:.6f}" for v in row.metrics)
        if not all(math.isfinite(v) for v in row.metrics):
            raise ConfigurationError(f"non-finite metric for sweep value {row.value}")
        lines.append(f"{row.sweep_param},{row.value:g},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_localization_csv(true_positions, estimated_positions, path) -> None:
    lines = ["obs,true_x,true_y,est_x,est_y,err_m"]
    for t, (tp, ep) in enumerate(zip(true_positions, estimated_positions)):
        err = float(np.linalg.norm(np.asarray(tp) - np.asarray(ep)))
        lines.append(
            f"{t},{tp[0]:.6f},{tp[1]:.6f},{ep[0]:.6f},{ep[1]:.6f},{err:.6f}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
