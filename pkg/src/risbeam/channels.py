"""Scenario geometry and Rician fading channel generation.

Coordinate frame: the RIS sits at the origin with its elements along the
x-axis, so broadside points along +y. The angle of a point (x, y) seen from
the RIS is atan2(x, y), which makes the steering phase proportional to
sin(angle) as usual for a uniform linear array. Users and targets live on
half circles in the upper half plane; the BS is at config.bs_position.

Seeding: every public entry point takes a ``seed`` (int or tuple accepted by
numpy's SeedSequence). The sequence is split into three fixed substreams:

    [0] user geometry draws
    [1] channel fading draws
    [2] RIS phase initialization (consumed by the alternation driver)

so geometry, fading, and optimizer initialization never share raw randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ConfigError


def seed_streams(seed):
    """Return the three per-trial random generators (geometry, fading, phase
    init). ``seed`` may be an int or a tuple such as (master_seed, trial)."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def steering_vector(theta: float, m: int, spacing_ratio: float) -> np.ndarray:
    """ULA steering vector: entry p is exp(j*2*pi*spacing_ratio*p*sin(theta))."""
    if m < 1:
        raise ValueError(f"steering vector needs m >= 1, got {m}")
    p = np.arange(m)
    return np.exp(2j * np.pi * spacing_ratio * p * np.sin(theta))


def pathloss(distance: float, exponent: float, ref_gain: float) -> float:
    """Linear power gain ref_gain * distance**(-exponent)."""
    if distance <= 0:
        raise ValueError(f"pathloss needs a positive distance, got {distance}")
    return ref_gain * distance ** (-exponent)


def rician_channel(rows: int, cols: int, k_factor: float,
                   los_component: np.ndarray, gain: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw one Rician fading realization.

    Returns sqrt(gain) * (sqrt(k/(k+1)) * los + sqrt(1/(k+1)) * nlos) where
    nlos has i.i.d. zero-mean unit-variance circularly symmetric complex
    entries. k_factor may be math.inf for the pure-LoS limit.
    """
    if k_factor < 0:
        raise ValueError(f"Rician factor must be >= 0, got {k_factor}")
    if gain < 0:
        raise ValueError(f"channel gain must be >= 0, got {gain}")
    los = np.asarray(los_component, dtype=complex)
    if los.shape != (rows, cols):
        raise ValueError(f"LoS component shape {los.shape} != ({rows}, {cols})")
    if math.isinf(k_factor):
        return math.sqrt(gain) * los
    nlos = (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)
    mix = (math.sqrt(k_factor / (k_factor + 1.0)) * los
           + math.sqrt(1.0 / (k_factor + 1.0)) * nlos)
    return math.sqrt(gain) * mix


def angle_from_ris(x: float, y: float) -> float:
    """Angle of the point (x, y) seen from the RIS broadside (+y axis)."""
    return math.atan2(x, y)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Sampled user placement plus the fixed BS/target geometry."""

    cluster_angles: np.ndarray   # (K,) shared by both users of a cluster
    rnu_radii: np.ndarray        # (K,)
    rfu_radii: np.ndarray        # (K,)
    target_angles: np.ndarray    # (Q_T,)
    target_radii: np.ndarray     # (Q_T,)
    bs_position: tuple
    bs_distance: float           # BS<->RIS
    bs_angle_at_ris: float       # arrival angle of the BS link at the RIS
    ris_angle_at_bs: float       # departure angle of the RIS link at the BS


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization: BS->RIS matrix and RIS->user vectors."""

    G: np.ndarray        # (M, N_T)
    g_near: np.ndarray   # (K, M)
    g_far: np.ndarray    # (K, M)

    @property
    def n_ris(self) -> int:
        return self.G.shape[0]

    @property
    def n_tx(self) -> int:
        return self.G.shape[1]

    @property
    def n_clusters(self) -> int:
        return self.g_near.shape[0]


def build_scenario(config: SystemConfig, seed):
    """Sample one scenario: user positions, then all fading channels.

    Deterministic given (config, seed); independent seeds give independent
    realizations.
    """
    geo_rng, fade_rng, _ = seed_streams(seed)
    k_clusters = config.n_clusters
    m = config.n_ris

    angles = np.empty(k_clusters)
    rnu_r = np.empty(k_clusters)
    rfu_r = np.empty(k_clusters)
    for k in range(k_clusters):
        lo, hi = config.cluster_angle_ranges[k]
        if not hi > lo:
            raise ConfigError(f"empty angle range for cluster {k}: ({lo}, {hi}]")
        angles[k] = geo_rng.uniform(lo, hi)
        rnu_r[k] = geo_rng.uniform(*config.rnu_radius_range)
        rfu_r[k] = geo_rng.uniform(*config.rfu_radius_range)

    bx, by = config.bs_position
    bs_dist = math.hypot(bx, by)
    bs_angle = angle_from_ris(bx, by)
    # direction of the RIS as seen from the BS array (same broadside convention)
    ris_angle = math.atan2(-bx, -by)

    geom = ScenarioGeometry(
        cluster_angles=angles, rnu_radii=rnu_r, rfu_radii=rfu_r,
        target_angles=np.asarray(config.target_angles, dtype=float),
        target_radii=np.asarray(config.target_radii, dtype=float),
        bs_position=(bx, by), bs_distance=bs_dist,
        bs_angle_at_ris=bs_angle, ris_angle_at_bs=ris_angle)

    exp_bs_ris, exp_ris_user = config.pathloss_exp_list
    sr = config.spacing_ratio

    los_g = np.outer(steering_vector(bs_angle, m, sr),
                     steering_vector(ris_angle, config.n_tx, sr).conj())
    gain_g = pathloss(bs_dist, exp_bs_ris, config.pathloss_ref)
    G = rician_channel(m, config.n_tx, config.rician_k, los_g, gain_g, fade_rng)

    g_near = np.empty((k_clusters, m), dtype=complex)
    g_far = np.empty((k_clusters, m), dtype=complex)
    for k in range(k_clusters):
        los_u = steering_vector(angles[k], m, sr)[:, None]
        for radii, dest in ((rnu_r, g_near), (rfu_r, g_far)):
            gain_u = pathloss(radii[k], exp_ris_user, config.pathloss_ref)
            dest[k] = rician_channel(m, 1, config.rician_k, los_u, gain_u,
                                     fade_rng).ravel()

    return geom, ChannelSet(G=G, g_near=g_near, g_far=g_far)
