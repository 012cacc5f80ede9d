"""Radar-side metrics: beampattern gain, desired mask, interested angle set,
and the illumination heatmap.

Composite convention used across the package: for extracted vectors the
beampattern quadratic form is |v^H Upsilon_q w|^2 with
Upsilon_q = diag(a^H(theta_q)) G, and its lifted twin is
Tr(V Upsilon_q (sum_k W_k) Upsilon_q^H). The physical RIS phase of element m
is -arg(v_m) (i.e. the physical phase matrix is diag(conj(v))), which leaves
every gain and rate in the package unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import steering_vector
from .config import SystemConfig

_ANGLE_EPS = 1e-12


@dataclass(frozen=True)
class AngleGrid:
    """The scan grid plus the interested (target window) subset."""

    angles: np.ndarray          # (n,) radians, -pi/2 .. pi/2
    mask: np.ndarray            # (n,) 1 inside a target window, else 0
    interested_idx: np.ndarray  # indices into angles

    @property
    def interested_angles(self) -> np.ndarray:
        return self.angles[self.interested_idx]


def desired_beampattern(theta, target_angles, beam_width: float):
    """1 if theta lies within beam_width/2 of any target angle, else 0.

    Accepts a scalar or an array of angles.
    """
    th = np.asarray(theta, dtype=float)
    targets = np.asarray(target_angles, dtype=float)
    half = beam_width / 2.0 + _ANGLE_EPS
    hit = (np.abs(th[..., None] - targets[None, :]) <= half).any(axis=-1)
    if np.isscalar(theta):
        return int(hit.reshape(-1)[0])
    return hit.astype(int)


def make_angle_grid(config: SystemConfig) -> AngleGrid:
    """Build the scan grid from the configured step and target windows."""
    n = int(round(np.pi / config.angle_grid_step)) + 1
    angles = np.linspace(-np.pi / 2, np.pi / 2, n)
    mask = desired_beampattern(angles, config.target_angles, config.beam_width)
    idx = np.flatnonzero(mask)
    return AngleGrid(angles=angles, mask=mask, interested_idx=idx)


def _steering_matrix(angles: np.ndarray, m: int, spacing_ratio: float) -> np.ndarray:
    """Rows are steering vectors of the given angles, shape (n, m)."""
    return np.exp(2j * np.pi * spacing_ratio
                  * np.outer(np.sin(np.asarray(angles, dtype=float)), np.arange(m)))


def _sum_covariance(W_list) -> np.ndarray:
    s = None
    for W in W_list:
        s = np.array(W, dtype=complex) if s is None else s + W
    if s is None:
        raise ValueError("W_list must contain at least one block")
    return s


def beampattern_gain(V: np.ndarray, W_list, G: np.ndarray, theta: float,
                     spacing_ratio: float) -> float:
    """Tr(V Upsilon (sum W) Upsilon^H) at one angle (real scalar)."""
    S = _sum_covariance(W_list)
    m, n_tx = G.shape
    if V.shape != (m, m):
        raise ValueError(f"V shape {V.shape} does not match G rows {m}")
    if S.shape != (n_tx, n_tx):
        raise ValueError(f"W blocks {S.shape} do not match G columns {n_tx}")
    ups = steering_vector(theta, m, spacing_ratio).conj()[:, None] * G
    return float(np.trace(V @ ups @ S @ ups.conj().T).real)


def gain_profile(V: np.ndarray, W_list, G: np.ndarray, angles,
                 spacing_ratio: float) -> np.ndarray:
    """Beampattern gain at many angles at once.

    Uses Tr(V diag(conj(a)) B diag(a)) = a^T (V * B^T) conj(a) with
    B = G (sum W) G^H, evaluated once per angle via einsum.
    """
    S = _sum_covariance(W_list)
    m = G.shape[0]
    if V.shape != (m, m):
        raise ValueError(f"V shape {V.shape} does not match G rows {m}")
    B = G @ S @ G.conj().T
    C = V * B.T
    A = _steering_matrix(angles, m, spacing_ratio)
    return np.einsum("qi,ij,qj->q", A, C, A.conj()).real


def min_gain(V: np.ndarray, W_list, G: np.ndarray, interested_angles,
             spacing_ratio: float):
    """Minimum beampattern gain over the interested set: (value, argmin angle)."""
    angles = np.asarray(interested_angles, dtype=float)
    if angles.size == 0:
        raise ValueError("interested set is empty")
    gains = gain_profile(V, W_list, G, angles, spacing_ratio)
    j = int(np.argmin(gains))
    return float(gains[j]), float(angles[j])


def illumination_heatmap(state, channels, config: SystemConfig, xy_grid):
    """Normalized illumination power over an x-y window.

    Each grid point contributes pathloss(distance to RIS) times the
    beampattern gain along its RIS-relative angle; the matrix is normalized
    by its maximum. A point at the exact origin gets 0 (undefined distance).
    Returns (len(ys), len(xs)) with rows indexed by y.
    """
    xs, ys = (np.asarray(g, dtype=float) for g in xy_grid)
    X, Y = np.meshgrid(xs, ys)
    R = np.hypot(X, Y)
    theta = np.arctan2(X, Y)
    _, exp_ru = config.pathloss_exp_list
    gains = gain_profile(state.V, state.W, channels.G, theta.ravel(),
                         config.spacing_ratio).reshape(theta.shape)
    with np.errstate(divide="ignore"):
        pl = np.where(R > 0, config.pathloss_ref * R ** (-exp_ru), 0.0)
    heat = np.clip(pl * gains, 0.0, None)
    peak = heat.max()
    if peak > 0:
        heat = heat / peak
    return heat
