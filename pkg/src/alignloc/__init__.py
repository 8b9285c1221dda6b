"""Indoor localization and radio-map construction via manifold alignment.

A source dataset that carries the grid's spatial structure (a simulated
radio map or extended plan coordinates) is aligned with the destination
dataset of calibration fingerprints and online RSS observations through a
joint graph Laplacian.  Observations inherit the grid position of their
nearest aligned source point; localized readings then accumulate into an
estimated radio map.
"""

from .alignment import (
    Embedding,
    JointLaplacian,
    PairedIndexing,
    align,
    assemble_joint_laplacian,
    compute_embedding,
    mixing_weights,
    pair_indices,
)
from .environment import (
    AccessPoint,
    FloorPlan,
    GridSpec,
    PropagationModel,
    RadioMap,
    Wall,
    build_grid,
    dissociation_filter,
    load_floor_plan,
    load_radio_map,
    make_plan_source,
    sample_observation,
    save_floor_plan,
    save_radio_map,
    simulate_radio_map,
)
from .errors import AlignlocError, ConfigurationError, NumericalError, StructuralError
from .lle import build_laplacian, compute_weights, default_n_neighbors, find_neighbors
from .localizer import (
    LocalizationResult,
    ManifoldAlignmentLocalizer,
    boost_trajectory_weights,
    localize,
    smooth_outliers,
)
from .mapbuilder import (
    EstimatedRadioMap,
    MapMetrics,
    ObservationDirectory,
    finalize_map,
    map_metrics,
    record_observation,
)

__version__ = "0.1.0"

__all__ = [
    "AccessPoint",
    "AlignlocError",
    "ConfigurationError",
    "Embedding",
    "EstimatedRadioMap",
    "FloorPlan",
    "GridSpec",
    "JointLaplacian",
    "LocalizationResult",
    "ManifoldAlignmentLocalizer",
    "MapMetrics",
    "NumericalError",
    "ObservationDirectory",
    "PairedIndexing",
    "PropagationModel",
    "RadioMap",
    "StructuralError",
    "Wall",
    "align",
    "assemble_joint_laplacian",
    "boost_trajectory_weights",
    "build_grid",
    "build_laplacian",
    "compute_embedding",
    "compute_weights",
    "default_n_neighbors",
    "dissociation_filter",
    "finalize_map",
    "find_neighbors",
    "load_floor_plan",
    "load_radio_map",
    "localize",
    "make_plan_source",
    "map_metrics",
    "mixing_weights",
    "pair_indices",
    "record_observation",
    "sample_observation",
    "save_floor_plan",
    "save_radio_map",
    "simulate_radio_map",
    "smooth_outliers",
]
