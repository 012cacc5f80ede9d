"""System configuration: scenario scalars, unit conversions, JSON profiles.

All angles are stored in radians and all powers/gains in linear watts. The
JSON profile format uses human units (degrees, dB, dBm) and is converted once
at load time; after that no log-domain math happens anywhere in the package.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import math
from dataclasses import dataclass, fields

from .errors import ConfigError

PACKAGE_VERSION = "0.1.0"

HALF_PI = math.pi / 2.0


def db2lin(db: float) -> float:
    """Convert a dB gain to linear scale."""
    return 10.0 ** (db / 10.0)


def dbm2watt(dbm: float) -> float:
    """Convert a dBm power to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars. Defaults are the desk profile (small dimensions,
    two targets); see profiles/paper.json for the full-scale values."""

    # array sizes
    n_tx: int = 4
    n_ris: int = 8
    n_clusters: int = 2
    users_per_cluster: int = 2
    # powers (linear watts)
    p_max: float = dbm2watt(35.0)
    noise_power: float = dbm2watt(-90.0)
    # QoS floors (bits/s/Hz)
    r_min_near: float = 0.5
    r_min_far: float = 0.1
    # arrays / propagation
    spacing_ratio: float = 0.5
    pathloss_ref: float = db2lin(-30.0)
    pathloss_exp_list: tuple = (2.2, 2.2)  # (BS->RIS, RIS->user)
    rician_k: float = 3.0
    # sensing geometry (radians / meters)
    target_angles: tuple = (-math.pi / 4, math.pi / 4)
    target_radii: tuple = (90.0, 80.0)
    beam_width: float = math.radians(6.0)
    angle_grid_step: float = math.pi / 100.0
    # scenario geometry
    bs_position: tuple = (-40.0, 10.0)
    rnu_radius_range: tuple = (20.0, 25.0)
    rfu_radius_range: tuple = (80.0, 85.0)
    cluster_angle_ranges: tuple = (
        (math.radians(-30.0), math.radians(-20.0)),
        (math.radians(20.0), math.radians(30.0)),
    )
    # solver loop tolerances and caps
    sca_tol: float = 1e-4
    srcr_rank_tol: float = 1e-4
    outer_tol: float = 1e-3
    t1_max: int = 30
    t2_max: int = 50
    t3_max: int = 20
    srcr_step: float = 0.1
    srcr_stall: float = 1e-8
    rng_seed: int = 1234

    def __post_init__(self):
        # normalize list-like fields to tuples so the config hashes stably
        for name in ("pathloss_exp_list", "target_angles", "target_radii",
                     "bs_position", "rnu_radius_range", "rfu_radius_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "cluster_angle_ranges",
            tuple(tuple(r) for r in self.cluster_angle_ranges))
        self._validate()

    def _validate(self):
        if self.n_tx < 1 or self.n_ris < 1 or self.n_clusters < 1:
            raise ConfigError("antenna/element/cluster counts must be >= 1")
        if self.users_per_cluster != 2:
            raise ConfigError("exactly two users per cluster (one near, one far)")
        if self.p_max <= 0 or self.noise_power <= 0:
            raise ConfigError("p_max and noise_power must be positive")
        if self.r_min_near < 0 or self.r_min_far < 0:
            raise ConfigError("QoS floors must be >= 0")
        if self.beam_width <= 0:
            raise ConfigError("beam_width must be positive")
        if self.angle_grid_step <= 0:
            raise ConfigError("angle_grid_step must be positive")
        if self.spacing_ratio <= 0:
            raise ConfigError("spacing_ratio must be positive")
        if len(self.pathloss_exp_list) != 2:
            raise ConfigError("pathloss_exp_list must have two entries "
                              "(BS->RIS, RIS->user)")
        if len(self.target_radii) != len(self.target_angles):
            raise ConfigError("target_radii and target_angles length mismatch")
        if len(self.cluster_angle_ranges) != self.n_clusters:
            raise ConfigError("need one cluster angle range per cluster")
        for th in self.target_angles:
            if not (-HALF_PI <= th < HALF_PI):
                raise ConfigError(f"target angle {th} outside [-pi/2, pi/2)")
        for lo, hi in self.cluster_angle_ranges:
            if not (-HALF_PI <= lo < hi < HALF_PI):
                raise ConfigError("cluster angle range must satisfy "
                                  "-pi/2 <= lo < hi < pi/2")
        for name in ("rnu_radius_range", "rfu_radius_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} must satisfy 0 < lo <= hi")
        for name in ("sca_tol", "srcr_rank_tol", "outer_tol", "srcr_step",
                     "srcr_stall"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("t1_max", "t2_max", "t3_max"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out


def config_hash(config: SystemConfig) -> str:
    """Short stable hash of the resolved (linear-unit) configuration."""
    blob = json.dumps(config.to_dict(), sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


# JSON profile schema: key -> function mapping the JSON value onto
# SystemConfig constructor arguments (human units -> internal units).

def _deg(x):
    return math.radians(float(x))


_JSON_SCHEMA = {
    "n_tx": ("n_tx", int),
    "n_ris": ("n_ris", int),
    "n_clusters": ("n_clusters", int),
    "users_per_cluster": ("users_per_cluster", int),
    "p_max_dbm": ("p_max", dbm2watt),
    "noise_dbm": ("noise_power", dbm2watt),
    "r_min_near": ("r_min_near", float),
    "r_min_far": ("r_min_far", float),
    "spacing_ratio": ("spacing_ratio", float),
    "pathloss_ref_db": ("pathloss_ref", db2lin),
    "pathloss_exp_list": ("pathloss_exp_list", lambda v: tuple(float(x) for x in v)),
    "rician_k": ("rician_k", float),
    "target_angles_deg": ("target_angles", lambda v: tuple(_deg(x) for x in v)),
    "target_radii_m": ("target_radii", lambda v: tuple(float(x) for x in v)),
    "beam_width_deg": ("beam_width", _deg),
    "angle_grid_step_deg": ("angle_grid_step", _deg),
    "bs_position_m": ("bs_position", lambda v: tuple(float(x) for x in v)),
    "rnu_radius_range_m": ("rnu_radius_range", lambda v: tuple(float(x) for x in v)),
    "rfu_radius_range_m": ("rfu_radius_range", lambda v: tuple(float(x) for x in v)),
    "cluster_angle_ranges_deg": (
        "cluster_angle_ranges",
        lambda v: tuple((_deg(lo), _deg(hi)) for lo, hi in v)),
    "sca_tol": ("sca_tol", float),
    "srcr_rank_tol": ("srcr_rank_tol", float),
    "outer_tol": ("outer_tol", float),
    "t1_max": ("t1_max", int),
    "t2_max": ("t2_max", int),
    "t3_max": ("t3_max", int),
    "srcr_step": ("srcr_step", float),
    "srcr_stall": ("srcr_stall", float),
    "rng_seed": ("rng_seed", int),
}


def config_from_json_dict(data: dict) -> SystemConfig:
    """Build a SystemConfig from a parsed profile dict (human units)."""
    unknown = sorted(set(data) - set(_JSON_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    missing = sorted(set(_JSON_SCHEMA) - set(data))
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    kwargs = {}
    for key, (attr, conv) in _JSON_SCHEMA.items():
        try:
            kwargs[attr] = conv(data[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {data[key]!r}") from exc
    return SystemConfig(**kwargs)


def load_config(path) -> SystemConfig:
    """Load and validate a JSON profile from a file path."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return config_from_json_dict(data)


def load_profile(name: str) -> SystemConfig:
    """Load one of the packaged profiles ('desk' or 'paper')."""
    res = importlib.resources.files("risbeam").joinpath(f"profiles/{name}.json")
    try:
        text = res.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no packaged profile named {name!r}")
    return config_from_json_dict(json.loads(text))


def profile_path(name: str):
    """Filesystem path of a packaged profile (for CLI --config defaults)."""
    return importlib.resources.files("risbeam").joinpath(f"profiles/{name}.json")
