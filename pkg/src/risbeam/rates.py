"""NOMA achievable rates, the SIC decode chain, and the lifted channel
quadratics shared by the optimizers.

Rate conventions (fixed decoding order, near user decodes the far user's
message first):

    R_far_at_near = log2(1 + a_f*g_n / (a_n*g_n + I_inter + noise))
    R_near        = log2(1 + a_n*g_n / (I_inter + noise))
    R_far_at_far  = log2(1 + a_f*g_f / (a_n*g_f + I_inter_f + noise))
    R_far         = min(R_far_at_near, R_far_at_far)

where g_i = Tr(V Gamma_i W_k Gamma_i^H), Gamma_i = diag(g_i^H) G, and
I_inter sums the other clusters' covariances through the same Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig


@dataclass
class BeamState:
    """Optimization variables for one solution.

    W, V are the lifted blocks; w, v the extracted vectors (filled in once an
    optimizer has produced rank-one blocks). a_near[k] + a_far[k] = 1.
    """

    W: list                      # K blocks, each (N_T, N_T) Hermitian PSD
    a_near: np.ndarray           # (K,)
    a_far: np.ndarray            # (K,)
    V: np.ndarray                # (M, M) Hermitian PSD, unit diagonal
    w: list | None = None        # K vectors (N_T,)
    v: np.ndarray | None = None  # (M,), unit-modulus entries

    @classmethod
    def from_vectors(cls, w_list, a_near, v):
        """Lift extracted vectors back into matrix form (exact rank one)."""
        a_near = np.asarray(a_near, dtype=float)
        return cls(W=[np.outer(w, w.conj()) for w in w_list],
                   a_near=a_near, a_far=1.0 - a_near,
                   V=np.outer(v, np.conj(v)), w=list(w_list),
                   v=np.asarray(v, dtype=complex))

    def validate(self, p_max: float | None = None, tol: float = 1e-6):
        a = self.a_near + self.a_far
        if not np.allclose(a, 1.0, atol=tol):
            raise ValueError("power coefficients must pairwise sum to 1")
        if np.any(self.a_near <= 0) or np.any(self.a_near >= 1):
            raise ValueError("a_near must lie in (0, 1)")
        if not np.allclose(np.diag(self.V).real, 1.0, atol=1e-6):
            raise ValueError("V must have unit diagonal")
        for X in (*self.W, self.V):
            lam = np.linalg.eigvalsh((X + X.conj().T) / 2)
            if lam[0] < -tol * max(1.0, lam[-1]):
                raise ValueError("covariance blocks must be PSD")
        if p_max is not None:
            total = sum(float(np.trace(W).real) for W in self.W)
            if total > p_max * (1 + 1e-6) + 1e-9:
                raise ValueError(f"power {total} exceeds budget {p_max}")


@dataclass
class RateReport:
    """Per-cluster rates of one state, plus the SINR-threshold context."""

    r_far_at_near: np.ndarray
    r_near: np.ndarray
    r_far_at_far: np.ndarray
    r_far: np.ndarray
    r_min_near: float = 0.0
    r_min_far: float = 0.0
    # SINR thresholds 2^R - 1, stored once for the optimizer builders
    sinr_min_near: float = field(init=False, default=0.0)
    sinr_min_far: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.sinr_min_near = 2.0 ** self.r_min_near - 1.0
        self.sinr_min_far = 2.0 ** self.r_min_far - 1.0

    def worst_margins(self):
        """(near margin, far margin) in bits/s/Hz; negative means violated."""
        return (float((self.r_near - self.r_min_near).min()),
                float((self.r_far - self.r_min_far).min()))


def gamma_matrix(channel: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Gamma = diag(channel^H) G, the composite RIS-row/BS-column map."""
    channel = np.asarray(channel)
    if channel.ndim != 1 or channel.shape[0] != G.shape[0]:
        raise ValueError(f"channel length {channel.shape} does not match "
                         f"G rows {G.shape[0]}")
    return channel.conj()[:, None] * G


def effective_gain(V: np.ndarray, W: np.ndarray, channel: np.ndarray,
                   G: np.ndarray) -> float:
    """Tr(V Gamma W Gamma^H); equals |v^H Gamma w|^2 for rank-one V, W."""
    gam = gamma_matrix(channel, G)
    if V.shape != (G.shape[0],) * 2:
        raise ValueError(f"V shape {V.shape} does not match G rows {G.shape[0]}")
    if W.shape != (G.shape[1],) * 2:
        raise ValueError(f"W shape {W.shape} does not match G columns {G.shape[1]}")
    return float(np.trace(V @ gam @ W @ gam.conj().T).real)


def _cluster_gains(state: BeamState, channel: np.ndarray, G: np.ndarray, k: int):
    """(own-cluster gain, inter-cluster interference) at one user's channel."""
    own = effective_gain(state.V, state.W[k], channel, G)
    inter = sum(effective_gain(state.V, state.W[j], channel, G)
                for j in range(len(state.W)) if j != k)
    return own, inter


def rate_f_at_n(state: BeamState, channels, config: SystemConfig,
                     k: int) -> float:
    """Rate of the far user's message decoded at the near user (SIC stage 1)."""
    g_n, inter = _cluster_gains(state, channels.g_near[k], channels.G, k)
    sinr = (state.a_far[k] * g_n) / (state.a_near[k] * g_n + inter
                                     + config.noise_power)
    return math.log2(1.0 + sinr)


def rate_n(state: BeamState, channels, config: SystemConfig, k: int) -> float:
    """Near user's own rate after removing the far user's message."""
    g_n, inter = _cluster_gains(state, channels.g_near[k], channels.G, k)
    return math.log2(1.0 + state.a_near[k] * g_n / (inter + config.noise_power))


def rate_f_at_f(state: BeamState, channels, config: SystemConfig,
                    k: int) -> float:
    """Far user decoding its own message, treating the near one as noise."""
    g_f, inter = _cluster_gains(state, channels.g_far[k], channels.G, k)
    sinr = (state.a_far[k] * g_f) / (state.a_near[k] * g_f + inter
                                     + config.noise_power)
    return math.log2(1.0 + sinr)


def rate_far(state: BeamState, channels, config: SystemConfig, k: int) -> float:
    """Achievable far-user rate: the SIC stage must succeed at both ends."""
    return min(rate_f_at_n(state, channels, config, k),
               rate_f_at_f(state, channels, config, k))


def rate_report(state: BeamState, channels, config: SystemConfig) -> RateReport:
    ks = range(channels.n_clusters)
    return RateReport(
        r_far_at_near=np.array([rate_f_at_n(state, channels, config, k)
                                for k in ks]),
        r_near=np.array([rate_n(state, channels, config, k) for k in ks]),
        r_far_at_far=np.array([rate_f_at_f(state, channels, config, k)
                               for k in ks]),
        r_far=np.array([rate_far(state, channels, config, k) for k in ks]),
        r_min_near=config.r_min_near, r_min_far=config.r_min_far)


def qos_satisfied(report: RateReport, config: SystemConfig,
                  slack: float = 0.0) -> bool:
    """True iff every user clears its rate floor, with the given slack."""
    return bool(np.all(report.r_near >= config.r_min_near - slack)
                and np.all(report.r_far >= config.r_min_far - slack))
