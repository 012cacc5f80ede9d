"""Passive beamforming: max-min beampattern gain over the lifted reflect
matrix V = v v^H, with transmit covariances and power splits held fixed.

The lifted problem is a semidefinite program except for rank(V) = 1. Instead
of dropping rank and randomizing, the loop tightens a sequential cut

    e_max(V^t)^H V e_max(V^t) >= eps^t * Tr(V)

that forces the principal eigenvalue to carry an eps-fraction of the trace.
eps anneals toward 1 by a step rho that resets on every solvable round and
halves on every failed one; eps^{t+1} = min(1, lam_max/Tr + rho). The loop
ends when Tr(V)/lam_max is within the rank tolerance of 1 and the objective
has settled. A step underflow raises StallError carrying the best iterate.

QoS rows are stated per unit noise power; floors and objective in watts. All
row families are always emitted (a zero rate floor makes its row vacuously
true) so the constraint census of a built problem does not depend on the
configuration values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import (LinCon, SdpProblem, constant, principal_eigpair, scalar,
                    solve, trace_of)
from .config import SystemConfig
from .channels import ChannelSet, steering_vector
from .errors import SolverError, StallError
from .rates import BeamState, gamma_matrix
from .sensing import make_angle_grid

_PHASE_EPS = 1e-12


@dataclass(frozen=True)
class SrcrStep:
    chi: float | None
    accepted: bool
    eps: float
    rank_ratio: float
    status: str


@dataclass
class PassiveResult:
    V: np.ndarray
    chi: float
    trace: tuple
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def rank_ratio(self) -> float:
        lam, _ = principal_eigpair(self.V)
        return float(np.trace(self.V).real / lam)


def random_phase_matrix(m: int, rng: np.random.Generator) -> np.ndarray:
    """Lifted matrix of a uniformly random phase profile."""
    v = np.exp(2j * np.pi * rng.random(m))
    return np.outer(v, v.conj())


def source_row(channel: np.ndarray, G: np.ndarray, w_list,
               noise_power: float):
    """M_j = Gamma W_j Gamma^H / sigma^2 for one receive channel: Tr(V M_j)
    is source j's power per unit noise there."""
    gam = gamma_matrix(channel, G)
    row = []
    for W in w_list:
        Mm = gam @ W @ gam.conj().T / noise_power
        row.append((Mm + Mm.conj().T) / 2.0)
    return row


def source_matrices(channels: ChannelSet, state: BeamState,
                    config: SystemConfig):
    """M_kuj = Gamma_ku W_j Gamma_ku^H / sigma^2 for u in {near, far}:
    Tr(V M_kuj) is cluster j's power per unit noise at user (k, u)."""
    near, far = [], []
    for k in range(channels.n_clusters):
        for store, g in ((near, channels.g_near[k]), (far, channels.g_far[k])):
            store.append(source_row(g, channels.G, state.W,
                                    config.noise_power))
    return near, far


def reflect_floor_matrices(channels, w_list, angles: np.ndarray,
                           config: SystemConfig):
    """B_q = Ups_q S Ups_q^H with S the summed covariance; Tr(V B_q) is the
    beampattern gain at the probed angle."""
    S = np.zeros((channels.n_tx, channels.n_tx), dtype=complex)
    for W in w_list:
        S = S + W
    mats = []
    for theta in np.atleast_1d(angles):
        a = steering_vector(float(theta), channels.n_ris, config.spacing_ratio)
        ups = a.conj()[:, None] * channels.G
        B = ups @ S @ ups.conj().T
        mats.append((B + B.conj().T) / 2.0)
    return mats


def lift_constraints(m: int, eigvec: np.ndarray, eps: float):
    """Rows every lifted reflect program shares: unit diagonal and the
    eigenvector cut e^H V e >= eps Tr(V)."""
    cons = []
    for i in range(m):
        unit = np.zeros((m, m))
        unit[i, i] = 1.0
        cons.append(LinCon(f"unit_mod[{i}]",
                           trace_of("V", unit) + constant(-1.0), "=="))
    e = np.asarray(eigvec, dtype=complex).reshape(m)
    cut = np.outer(e, e.conj()) - float(eps) * np.eye(m)
    cons.append(LinCon("eigen_cut", trace_of("V", cut), ">="))
    return cons


def build_srcr_problem(channels: ChannelSet, state: BeamState,
                       config: SystemConfig, angles: np.ndarray,
                       eigvec: np.ndarray, eps: float) -> SdpProblem:
    """One round of the rank-tightened reflect design at a given cut."""
    m = channels.n_ris
    k_count = channels.n_clusters
    near, far = source_matrices(channels, state, config)
    floors = reflect_floor_matrices(channels, state.W, angles, config)
    gamma_n = 2.0 ** config.r_min_near - 1.0
    gamma_f = 2.0 ** config.r_min_far - 1.0

    cons = []
    for k in range(k_count):
        a_n = float(state.a_near[k])
        a_f = float(state.a_far[k])

        def lumped(row, own_coeff, gamma):
            total = own_coeff * row[k]
            for j in range(k_count):
                if j != k:
                    total = total - gamma * row[j]
            return total

        cons.append(LinCon(
            f"qos_near[{k}]",
            trace_of("V", lumped(near[k], a_n, gamma_n)) - gamma_n,
            ">="))
        cons.append(LinCon(
            f"qos_far_at_near[{k}]",
            trace_of("V", lumped(near[k], a_f - gamma_f * a_n, gamma_f)) - gamma_f,
            ">="))
        cons.append(LinCon(
            f"qos_far[{k}]",
            trace_of("V", lumped(far[k], a_f - gamma_f * a_n, gamma_f)) - gamma_f,
            ">="))

    for q, B in enumerate(floors):
        cons.append(LinCon(f"beam_floor[{q}]",
                           trace_of("V", B) - scalar("chi"), ">="))

    cons.extend(lift_constraints(m, eigvec, eps))

    return SdpProblem(
        psd_vars=(("V", m),),
        scalar_vars=(("chi", 0.0, None),),
        maximize=scalar("chi"),
        constraints=tuple(cons),
    )


def update_epsilon(v_next: np.ndarray, rho: float) -> float:
    """Anneal rule: eps <- min(1, lam_max/Tr + rho). At an exactly rank-one
    iterate lam_max/Tr = 1 and eps pins to 1."""
    lam, _ = principal_eigpair(v_next)
    tr = float(np.trace(v_next).real)
    if tr <= 0.0:
        return min(1.0, float(rho))
    return min(1.0, lam / tr + float(rho))


def srcr_loop(build, v_init: np.ndarray, config: SystemConfig) -> PassiveResult:
    """Run the annealed rank-cut iteration; `build(eigvec, eps)` supplies the
    round's program (shared by the clustered design and the baseline)."""
    rho = config.srcr_step
    eps = 0.0
    V = np.array(v_init, dtype=complex)
    chi = None
    prev_chi = None
    best = None
    steps: list = []
    for _ in range(config.t2_max):
        _, evec = principal_eigpair(V)
        sol = solve(build(evec, eps), fallback=False)
        if sol.ok:
            V = sol.values["V"]
            prev_chi, chi = chi, sol.objective
            rho = config.srcr_step
        else:
            rho /= 2.0
            if eps >= 1.0:
                # While lam/Tr + rho stays above 1 the cut re-pins at eps = 1
                # and the next round is byte-identical to the one that just
                # failed; keep halving until the cut actually loosens instead
                # of burning budget on repeat solves.
                lam_p, _ = principal_eigpair(V)
                tr_p = float(np.trace(V).real)
                if tr_p > 0.0:
                    while (lam_p / tr_p + rho >= 1.0
                           and rho >= config.srcr_stall):
                        rho /= 2.0
        lam, _ = principal_eigpair(V)
        tr = float(np.trace(V).real)
        ratio = tr / lam if lam > 0.0 else float("inf")
        eps = update_epsilon(V, rho)
        steps.append(SrcrStep(chi=chi, accepted=sol.ok, eps=eps,
                              rank_ratio=ratio, status=sol.status))
        if sol.ok and ratio <= 1.0 + config.srcr_rank_tol:
            if best is None or chi > best[0]:
                best = (chi, np.array(V))
            if prev_chi is not None and abs(chi - prev_chi) <= config.sca_tol:
                return PassiveResult(V=V, chi=chi, trace=tuple(steps),
                                     converged=True)
        if not sol.ok and rho < config.srcr_stall:
            raise StallError(
                f"rank-cut step underflow after {len(steps)} rounds "
                f"(last status {sol.status})",
                best_v=best[1] if best else (V if chi is not None else None),
                best_chi=best[0] if best else chi,
                trace=steps)
    if best is not None:
        return PassiveResult(V=best[1], chi=best[0], trace=tuple(steps),
                             converged=False)
    if chi is None:
        raise SolverError(
            f"reflect stage produced no solvable round in {len(steps)} tries "
            f"(last status {steps[-1].status})")
    return PassiveResult(V=V, chi=chi, trace=tuple(steps), converged=False)


def algorithm2(channels: ChannelSet, state: BeamState, config: SystemConfig,
               angles: np.ndarray | None = None,
               v_init: np.ndarray | None = None) -> PassiveResult:
    """Reflect-matrix stage for the clustered design. v_init defaults to the
    lifted matrix already attached to the beam state."""
    if angles is None:
        angles = make_angle_grid(config).interested_angles
    if v_init is None:
        v_init = state.V

    def build(eigvec, eps):
        return build_srcr_problem(channels, state, config, angles, eigvec, eps)

    return srcr_loop(build, v_init, config)


def extract_phases(V: np.ndarray):
    """Unit-modulus profile from the principal component, plus the rank-one
    fit fidelity ||V - v v^H||_F / M^2 (small = faithful extraction). Entries
    of the eigenvector with vanishing magnitude fall back to phase 1, so a
    degenerate (e.g. identity) V yields the all-ones profile."""
    _, vec = principal_eigpair(V)
    m = len(vec)
    v = np.ones(m, dtype=complex)
    mags = np.abs(vec)
    good = mags > _PHASE_EPS
    v[good] = vec[good] / mags[good]
    fidelity = float(np.linalg.norm(V - np.outer(v, v.conj()))) / (m * m)
    return v, fidelity
