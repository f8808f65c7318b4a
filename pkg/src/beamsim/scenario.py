"""Scenario loading and validation: configuration, beam layout, ModCod table,
and the uniform user deployment."""

from __future__ import annotations

import json
import math
from dataclasses import MISSING, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import geometry
from .constants import BOLTZMANN, GEO_ALTITUDE_KM, SPEED_OF_LIGHT
from .errors import ValidationError

TAU = 2.0 * math.pi

SCHEDULER_POLICIES = ("random", "gsa")
SIMILARITY_METRICS = ("euclidean", "channel")
NORMALIZATION_MODES = ("sum-power", "per-antenna", "none")
REGULARIZATION_MODES = ("paper", "normalized")
PHASE_MODES = ("per-antenna", "per-beam")
ANTENNA_PATTERNS = ("bessel", "gaussian")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation parameters; units follow the field comments."""

    carrier_frequency: float        # Hz
    rx_antenna_diameter: float      # m
    rx_antenna_efficiency: float    # in (0, 1]
    antenna_losses: float           # dB (positive loss)
    satellite_longitude: float      # degrees east
    satellite_total_power: float    # W, split uniformly across beams
    user_density: float             # users/km^2
    cluster_size: int
    monte_carlo_iterations: int
    scheduler_policy: str           # random | gsa
    clustering_similarity: str      # euclidean | channel
    sector_radii: tuple             # ascending, first = beam-center radius, last = 1.0
    sector_angles: tuple            # ascending radians, last = 2pi
    noise_temperature: float        # K, applied to every beam
    user_bandwidth: float           # Hz
    master_seed: int
    # model switches (defaults documented in README)
    normalization_mode: str = "sum-power"
    regularization_mode: str = "paper"      # paper: alpha = P_Z/P_TX; normalized: 1/P_TX
    phase_mode: str = "per-antenna"         # per-antenna | per-beam random phase
    antenna_pattern: str = "bessel"         # bessel | gaussian
    tx_aperture_efficiency: float = 0.65    # used when deriving boresight gain
    tx_power_per_beam: float | None = None  # W; default satellite_total_power / N_B
    n_frames: int | None = None             # random scheduler frames; default max_b N_K

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def rx_gain_linear(self) -> float:
        return self.rx_antenna_efficiency * (math.pi * self.rx_antenna_diameter / self.wavelength) ** 2

    @property
    def loss_linear(self) -> float:
        return 10.0 ** (-self.antenna_losses / 10.0)

    @property
    def noise_power_w(self) -> float:
        return BOLTZMANN * self.noise_temperature * self.user_bandwidth

    def sector_grid(self) -> geometry.SectorGrid:
        return geometry.SectorGrid(tuple(self.sector_radii), tuple(self.sector_angles))

    def tx_power(self, n_beams: int) -> float:
        if self.tx_power_per_beam is not None:
            return self.tx_power_per_beam
        return self.satellite_total_power / n_beams


def _require_positive(cfg: ScenarioConfig, names):
    for name in names:
        value = getattr(cfg, name)
        if not value > 0:
            raise ValidationError(f"config field '{name}' must be positive, got {value!r}")


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    _require_positive(
        cfg,
        (
            "carrier_frequency",
            "rx_antenna_diameter",
            "rx_antenna_efficiency",
            "satellite_total_power",
            "user_density",
            "noise_temperature",
            "user_bandwidth",
        ),
    )
    if cfg.rx_antenna_efficiency > 1.0:
        raise ValidationError("config field 'rx_antenna_efficiency' must lie in (0, 1]")
    if cfg.antenna_losses < 0:
        raise ValidationError("config field 'antenna_losses' must be a non-negative dB value")
    if cfg.cluster_size < 1:
        raise ValidationError("config field 'cluster_size' must be >= 1")
    if cfg.monte_carlo_iterations < 1:
        raise ValidationError("config field 'monte_carlo_iterations' must be >= 1")
    if cfg.scheduler_policy not in SCHEDULER_POLICIES:
        raise ValidationError(f"config field 'scheduler_policy' must be one of {SCHEDULER_POLICIES}")
    if cfg.clustering_similarity not in SIMILARITY_METRICS:
        raise ValidationError(f"config field 'clustering_similarity' must be one of {SIMILARITY_METRICS}")
    if cfg.normalization_mode not in NORMALIZATION_MODES:
        raise ValidationError(f"config field 'normalization_mode' must be one of {NORMALIZATION_MODES}")
    if cfg.regularization_mode not in REGULARIZATION_MODES:
        raise ValidationError(f"config field 'regularization_mode' must be one of {REGULARIZATION_MODES}")
    if cfg.phase_mode not in PHASE_MODES:
        raise ValidationError(f"config field 'phase_mode' must be one of {PHASE_MODES}")
    if cfg.antenna_pattern not in ANTENNA_PATTERNS:
        raise ValidationError(f"config field 'antenna_pattern' must be one of {ANTENNA_PATTERNS}")
    if cfg.tx_power_per_beam is not None and not cfg.tx_power_per_beam > 0:
        raise ValidationError("config field 'tx_power_per_beam' must be positive when given")
    cfg.sector_grid()  # raises ValidationError on bad radii/angles
    return cfg


def config_from_mapping(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ValidationError("scenario config must be a key/value mapping")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config field(s): {sorted(unknown)}")
    required = {
        f.name
        for f in fields(ScenarioConfig)
        if f.default is MISSING and f.default_factory is MISSING
    }
    missing = [name for name in required if name not in data]
    if missing:
        raise ValidationError(f"missing config field(s): {sorted(missing)}")
    data = dict(data)
    float_fields = (
        "carrier_frequency", "rx_antenna_diameter", "rx_antenna_efficiency",
        "antenna_losses", "satellite_longitude", "satellite_total_power",
        "user_density", "noise_temperature", "user_bandwidth",
        "tx_aperture_efficiency", "tx_power_per_beam",
    )
    for key in float_fields:
        if data.get(key) is not None:
            try:
                data[key] = float(data[key])  # YAML 1.1 reads 19.5e9 as a string
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"config field '{key}' is not numeric: {exc}") from exc
    for key in ("sector_radii", "sector_angles"):
        data[key] = tuple(float(v) for v in data[key])
    # snap values meant to be exact bounds
    radii = data["sector_radii"]
    if radii and abs(radii[-1] - 1.0) < 1e-9:
        data["sector_radii"] = radii[:-1] + (1.0,)
    angles = data["sector_angles"]
    if angles and abs(angles[-1] - TAU) < 1e-9:
        data["sector_angles"] = angles[:-1] + (TAU,)
    for key in ("cluster_size", "monte_carlo_iterations", "master_seed"):
        data[key] = int(data[key])
    if data.get("n_frames") is not None:
        data["n_frames"] = int(data["n_frames"])
    try:
        cfg = ScenarioConfig(**data)
    except TypeError as exc:
        raise ValidationError(f"bad scenario config: {exc}") from exc
    return validate_config(cfg)


def load_config(source) -> ScenarioConfig:
    """Load the scenario configuration from a YAML/JSON file path or a mapping."""
    if isinstance(source, dict):
        return config_from_mapping(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"config file {path} does not parse: {exc}") from exc
    return config_from_mapping(data)


# ---------------------------------------------------------------------------
# Beams
# ---------------------------------------------------------------------------

@dataclass
class Beam:
    """One on-ground beam: center, boundary polygon, and geodesic area."""

    beam_id: int
    center_lat: float
    center_lon: float
    boundary: np.ndarray            # (n, 2) lat/lon degrees, closed implicitly
    area_km2: float
    boundary_xy: np.ndarray         # (n, 2) km, tangent plane about the center
    g_max_db: float | None = None   # optional per-beam boresight gain override
    theta_3db_deg: float | None = None  # optional per-beam half-power angle override


def make_beam(
    beam_id, center_lat, center_lon, boundary, area_km2=None,
    g_max_db=None, theta_3db_deg=None,
) -> Beam:
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim != 2 or boundary.shape[1] != 2 or len(boundary) < 3:
        raise ValidationError(f"beam {beam_id}: boundary must be >= 3 lat/lon vertices")
    x, y = geometry.project_tangent(center_lat, center_lon, boundary[:, 0], boundary[:, 1])
    boundary_xy = np.column_stack([x, y])
    if not geometry.polygon_is_simple(boundary_xy):
        raise ValidationError(f"beam {beam_id}: boundary polygon is self-intersecting")
    if not bool(geometry.point_in_polygon(boundary_xy, 0.0, 0.0)):
        raise ValidationError(f"beam {beam_id}: boundary does not contain the beam center")
    computed = geometry.polygon_area_km2(boundary[:, 0], boundary[:, 1])
    if area_km2 is None:
        area_km2 = computed
    elif abs(area_km2 - computed) > 0.01 * computed:
        raise ValidationError(
            f"beam {beam_id}: declared area {area_km2:.1f} km^2 deviates more than 1% "
            f"from the recomputed geodesic area {computed:.1f} km^2"
        )
    return Beam(
        beam_id=int(beam_id),
        center_lat=float(center_lat),
        center_lon=float(center_lon),
        boundary=boundary,
        area_km2=float(area_km2),
        boundary_xy=boundary_xy,
        g_max_db=g_max_db,
        theta_3db_deg=theta_3db_deg,
    )


def beams_from_records(records) -> list[Beam]:
    if not isinstance(records, list) or not records:
        raise ValidationError("beam layout must be a non-empty list of beam records")
    beams = []
    seen = set()
    for rec in records:
        try:
            beam_id = rec["id"]
            center = rec["center"]
            boundary = rec["boundary"]
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"beam record missing field {exc}") from exc
        if beam_id in seen:
            raise ValidationError(f"duplicate beam id {beam_id} in layout")
        seen.add(beam_id)
        beams.append(
            make_beam(
                beam_id,
                center[0],
                center[1],
                boundary,
                area_km2=rec.get("area_km2"),
                g_max_db=rec.get("g_max_db"),
                theta_3db_deg=rec.get("theta_3db_deg"),
            )
        )
    beams.sort(key=lambda b: b.beam_id)
    return beams


def load_beams(source) -> list[Beam]:
    """Load a beam layout from a JSON/YAML file path or a list of records."""
    if isinstance(source, list):
        return beams_from_records(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read beam layout {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ValidationError(f"beam layout {path} does not parse: {exc}") from exc
    return beams_from_records(data)


# ---------------------------------------------------------------------------
# Users
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class UserTerminal:
    user_id: int
    beam_id: int
    lat: float
    lon: float
    slant_range_m: float


def deploy_users(beams, density, seed, satellite_ecef_km) -> list[UserTerminal]:
    """Deploy round(density * area) users i.i.d. uniform over each beam polygon.

    Sampling rejects bounding-box draws that fall outside the beam boundary.
    Each beam derives its own RNG stream from (seed, beam_id), so the result
    is reproducible and independent of beam iteration order.
    """
    if not density > 0:
        raise ValidationError("user density must be positive")
    sat = np.asarray(satellite_ecef_km, dtype=float)
    users = []
    user_id = 0
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    for beam in beams:
        n = round_half_up(density * beam.area_km2)
        if n < 1:
            raise ValidationError(
                f"beam {beam.beam_id}: density {density} users/km^2 over "
                f"{beam.area_km2:.1f} km^2 rounds to zero users"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=base.entropy, spawn_key=(beam.beam_id,))
        )
        lo = beam.boundary_xy.min(axis=0)
        hi = beam.boundary_xy.max(axis=0)
        xs = np.empty(n)
        ys = np.empty(n)
        got = 0
        while got < n:
            m = max(2 * (n - got), 16)
            cand = rng.uniform(lo, hi, size=(m, 2))
            ok = geometry.point_in_polygon(beam.boundary_xy, cand[:, 0], cand[:, 1])
            take = min(int(ok.sum()), n - got)
            xs[got : got + take] = cand[ok, 0][:take]
            ys[got : got + take] = cand[ok, 1][:take]
            got += take
        lat, lon = geometry.unproject_tangent(beam.center_lat, beam.center_lon, xs, ys)
        ecef = geometry.geodetic_to_ecef_km(lat, lon)
        slant_km = np.linalg.norm(ecef - sat, axis=-1)
        if np.any(slant_km < GEO_ALTITUDE_KM - 1e-6):
            raise ValidationError(f"beam {beam.beam_id}: slant range below GEO altitude")
        for i in range(n):
            users.append(
                UserTerminal(user_id, beam.beam_id, float(lat[i]), float(lon[i]),
                             float(slant_km[i] * 1000.0))
            )
            user_id += 1
    return users


# ---------------------------------------------------------------------------
# ModCod table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModCodTable:
    """Ascending (SNR threshold dB, spectral efficiency bit/s/Hz) rows."""

    thresholds_db: np.ndarray
    efficiencies: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds_db, dtype=float)
        e = np.asarray(self.efficiencies, dtype=float)
        if t.ndim != 1 or t.shape != e.shape or len(t) == 0:
            raise ValidationError("ModCod table must hold matching non-empty columns")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("ModCod thresholds must be strictly ascending")
        if np.any(np.diff(e) <= 0) or np.any(e <= 0):
            raise ValidationError("ModCod efficiencies must be positive and strictly ascending")
        object.__setattr__(self, "thresholds_db", t)
        object.__setattr__(self, "efficiencies", e)

    def efficiency(self, snr_db):
        """Efficiency of the highest threshold <= snr_db; 0 below the table."""
        idx = np.searchsorted(self.thresholds_db, snr_db, side="right") - 1
        eff = np.where(idx >= 0, self.efficiencies[np.maximum(idx, 0)], 0.0)
        if np.isscalar(snr_db):
            return float(eff)
        return eff


def load_modcod(source) -> ModCodTable:
    """Load the two-column `snr_db,spectral_efficiency` table."""
    if isinstance(source, ModCodTable):
        return source
    path = Path(source)
    try:
        lines = path.read_text().strip().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read ModCod table {path}: {exc}") from exc
    if not lines or [c.strip() for c in lines[0].split(",")] != ["snr_db", "spectral_efficiency"]:
        raise ValidationError(
            f"ModCod table {path} must start with header 'snr_db,spectral_efficiency'"
        )
    thresholds, efficiencies = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"ModCod table {path} line {ln}: expected two columns")
        try:
            thresholds.append(float(parts[0]))
            efficiencies.append(float(parts[1]))
        except ValueError as exc:
            raise ValidationError(f"ModCod table {path} line {ln}: {exc}") from exc
    return ModCodTable(np.asarray(thresholds), np.asarray(efficiencies))


# ---------------------------------------------------------------------------
# Scenario bundle
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    config: ScenarioConfig
    beams: list[Beam]
    modcod: ModCodTable

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    def satellite(self) -> np.ndarray:
        return geometry.satellite_ecef_km(self.config.satellite_longitude)

    def with_config(self, **changes) -> "Scenario":
        return Scenario(validate_config(replace(self.config, **changes)), self.beams, self.modcod)


def check_density_supports_clusters(scenario: Scenario, cluster_size=None, density=None):
    """Every beam must round to at least `cluster_size` users."""
    k = cluster_size if cluster_size is not None else scenario.config.cluster_size
    rho = density if density is not None else scenario.config.user_density
    for beam in scenario.beams:
        n = round_half_up(rho * beam.area_km2)
        if n < k:
            raise ValidationError(
                f"beam {beam.beam_id}: {n} users at density {rho} users/km^2 is fewer "
                f"than the cluster size {k}"
            )


def load_scenario(config_source, beam_layout_source, modcod_source) -> Scenario:
    """Load and cross-validate the full scenario."""
    cfg = load_config(config_source)
    beams = load_beams(beam_layout_source)
    modcod = load_modcod(modcod_source)
    scenario = Scenario(cfg, beams, modcod)
    check_density_supports_clusters(scenario)
    return scenario
