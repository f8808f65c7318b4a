"""beamsim: multi-beam GEO satellite forward-link Monte Carlo simulator.

Full-frequency-reuse TDMA downlink with multicast MMSE precoding, MaxDist
user clustering, and two frame schedulers (random and geographical) whose
spectral-efficiency and precoding-loss metrics can be compared pairwise.
"""

__version__ = "0.1.0"

from .channel import (
    antenna_gain,
    assemble_frame_matrix,
    beam_rf_parameters,
    channel_coefficient,
    channel_matrix,
    equivalent_cluster_vector,
)
from .clustering import ClusterPartition, channel_features, max_dist_partition
from .engine import RunManifest, run_cell, run_experiment, run_iteration
from .errors import GeometryError, ValidationError
from .geometry import (
    NormalizedPolar,
    SectorGrid,
    Sectorisation,
    assign_sector,
    edge_radius,
    sectorise,
    to_normalized_polar,
)
from .link_adaptation import MetricsReport, aggregate, cluster_rate
from .precoding import evaluate_sinr, mmse_precoder, normalize_power
from .scenario import (
    Beam,
    ModCodTable,
    Scenario,
    ScenarioConfig,
    UserTerminal,
    deploy_users,
    load_beams,
    load_config,
    load_modcod,
    load_scenario,
)
from .scheduling import ScheduleSequence, gsa_schedule, random_schedule

__all__ = [
    "__version__",
    "antenna_gain",
    "assemble_frame_matrix",
    "assign_sector",
    "beam_rf_parameters",
    "Beam",
    "channel_coefficient",
    "channel_features",
    "channel_matrix",
    "ClusterPartition",
    "cluster_rate",
    "deploy_users",
    "edge_radius",
    "equivalent_cluster_vector",
    "evaluate_sinr",
    "GeometryError",
    "gsa_schedule",
    "load_beams",
    "load_config",
    "load_modcod",
    "load_scenario",
    "max_dist_partition",
    "MetricsReport",
    "mmse_precoder",
    "ModCodTable",
    "normalize_power",
    "NormalizedPolar",
    "aggregate",
    "random_schedule",
    "run_cell",
    "run_experiment",
    "run_iteration",
    "RunManifest",
    "Scenario",
    "ScenarioConfig",
    "ScheduleSequence",
    "SectorGrid",
    "Sectorisation",
    "sectorise",
    "to_normalized_polar",
    "UserTerminal",
    "ValidationError",
]
