"""Outer alternation between the transmit and reflect stages, plus the
conventional (one beam per user, no power splitting) baseline it is compared
against.

Both drivers share the shape: warm transmit design at the current reflect
matrix, then reflect redesign at the fixed transmit design, repeated until
the worst-angle beampattern gain settles. Because each stage keeps the other
stage's incumbent feasible, the objective cannot move down by more than
solver noise between rounds.

Failure policy: an infeasible first transmit stage means the QoS floors are
unreachable on this channel draw and propagates. Anything that breaks after
one full round returns the best completed round, with the event counted in
the diagnostics. A reflect-stage stall falls back to the stage's best
iterate when it carries one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .active import (algorithm1, extract_beamformers, rank_ratio,
                     sca_state_from_beams)
from .conic import LinCon, SdpProblem, constant, scalar, solve, trace_of
from .config import SystemConfig
from .channels import ChannelSet, seed_streams
from .errors import InfeasibleError, SolverError, StallError
from .passive import (algorithm2, extract_phases, lift_constraints,
                      random_phase_matrix, reflect_floor_matrices,
                      source_row, srcr_loop)
from .rates import BeamState, gamma_matrix, qos_satisfied, rate_report
from .sensing import make_angle_grid

_RANK_REPAIR_TOL = 1e-5


@dataclass
class JointResult:
    state: BeamState          # W, a, V plus extracted w, v
    outer_trace: tuple        # reflect-stage objective per outer round
    converged: bool
    active_traces: tuple      # per round: transmit-stage objective trace
    passive_traces: tuple     # per round: reflect-stage step records
    diagnostics: dict

    @property
    def chi(self) -> float:
        return self.outer_trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.outer_trace)


def algorithm3(channels: ChannelSet, config: SystemConfig,
               seed) -> JointResult:
    """Alternate the two stages from a seeded random reflect profile."""
    _, _, phase_rng = seed_streams(seed)
    angles = make_angle_grid(config).interested_angles
    V = random_phase_matrix(channels.n_ris, phase_rng)

    outer: list = []
    active_traces: list = []
    passive_traces: list = []
    diagnostics = {"stalls": 0, "aborted": None}
    warm = None
    best = None
    converged = False
    active = None
    for _ in range(config.t3_max):
        try:
            active = algorithm1(channels, V, config, angles, init=warm)
        except (InfeasibleError, SolverError):
            if best is None:
                raise
            diagnostics["aborted"] = "active stage failed after progress"
            warnings.warn(diagnostics["aborted"], RuntimeWarning, stacklevel=2)
            break
        try:
            passive = algorithm2(channels, active.state, config, angles,
                                 v_init=V)
            chi_t = passive.chi
            V_next = passive.V
            passive_trace = passive.trace
        except StallError as err:
            diagnostics["stalls"] += 1
            if err.best_v is None:
                if best is None:
                    raise SolverError(
                        "reflect stage stalled before any usable iterate"
                    ) from err
                diagnostics["aborted"] = "reflect stage stalled"
                warnings.warn(diagnostics["aborted"], RuntimeWarning,
                              stacklevel=2)
                break
            chi_t = err.best_chi
            V_next = err.best_v
            passive_trace = tuple(err.trace)

        prev = outer[-1] if outer else None
        outer.append(chi_t)
        active_traces.append(active.chi_trace)
        passive_traces.append(passive_trace)
        V = V_next
        current = (chi_t, active.state, V)
        if best is None or chi_t >= best[0]:
            best = current
        if prev is not None and abs(chi_t - prev) <= config.outer_tol:
            converged = True
            break
        warm = sca_state_from_beams(active.state, channels, V, config)

    chi_final, beams, V_final = (current if diagnostics["aborted"] is None
                                 else best)
    w_list = extract_beamformers(beams.W)
    v, fidelity = extract_phases(V_final)
    state = BeamState(W=list(beams.W), a_near=np.array(beams.a_near),
                      a_far=np.array(beams.a_far), V=np.array(V_final),
                      w=w_list, v=v)
    diagnostics.update({
        "phase_fidelity": fidelity,
        "covariance_rank_ratios": [rank_ratio(W) for W in state.W],
        "final_chi": chi_final,
    })
    return JointResult(state=state, outer_trace=tuple(outer),
                       converged=converged,
                       active_traces=tuple(active_traces),
                       passive_traces=tuple(passive_traces),
                       diagnostics=diagnostics)


@dataclass(frozen=True)
class UserChannels:
    """Flat per-user view for the no-clustering baseline: one channel and one
    rate floor per user, same RIS-to-transmitter link."""

    G: np.ndarray
    g_users: np.ndarray   # (n_users, n_ris)
    r_mins: np.ndarray    # (n_users,)

    @property
    def n_users(self) -> int:
        return self.g_users.shape[0]

    @property
    def n_ris(self) -> int:
        return self.G.shape[0]

    @property
    def n_tx(self) -> int:
        return self.G.shape[1]


def flatten_for_baseline(channels: ChannelSet,
                         config: SystemConfig) -> UserChannels:
    """Same channel draws, clusters dissolved: near users keep the near
    floor, far users the far floor."""
    rows = []
    floors = []
    for k in range(channels.n_clusters):
        rows.append(channels.g_near[k])
        floors.append(config.r_min_near)
        rows.append(channels.g_far[k])
        floors.append(config.r_min_far)
    return UserChannels(G=np.array(channels.G), g_users=np.array(rows),
                        r_mins=np.array(floors))


@dataclass
class BaselineResult:
    W: list
    V: np.ndarray
    w: list
    v: np.ndarray
    outer_trace: tuple
    converged: bool
    diagnostics: dict

    @property
    def chi(self) -> float:
        return self.outer_trace[-1]


def _baseline_active(users: UserChannels, V: np.ndarray,
                     config: SystemConfig, angles) -> SdpProblem:
    """One covariance per user, plain per-user SINR rows (linear once V is
    fixed), shared floors and budget."""
    from .active import floor_matrices

    n = users.n_users
    sinr = 2.0 ** users.r_mins - 1.0
    d_mats = []
    for u in range(n):
        gam = gamma_matrix(users.g_users[u], users.G)
        D = gam.conj().T @ V @ gam / config.noise_power
        d_mats.append((D + D.conj().T) / 2.0)
    a_mats = floor_matrices(users, V, angles, config)

    cons = []
    for q, A in enumerate(a_mats):
        total = constant(0.0)
        for u in range(n):
            total = total + trace_of(f"W[{u}]", A)
        cons.append(LinCon(f"beam_floor[{q}]", total - scalar("chi"), ">="))
    budget = constant(-config.p_max)
    for u in range(n):
        budget = budget + trace_of(f"W[{u}]", np.eye(users.n_tx))
    cons.append(LinCon("power", budget, "<="))
    for u in range(n):
        row = trace_of(f"W[{u}]", d_mats[u]) - float(sinr[u])
        for j in range(n):
            if j != u:
                row = row - trace_of(f"W[{j}]", d_mats[u], float(sinr[u]))
        cons.append(LinCon(f"qos_user[{u}]", row, ">="))

    return SdpProblem(
        psd_vars=tuple((f"W[{u}]", users.n_tx) for u in range(n)),
        scalar_vars=(("chi", 0.0, None),),
        maximize=scalar("chi"),
        constraints=tuple(cons),
    )


def _repair_rank(w_list, p_max: float):
    """If relaxation returned a spread spectrum, keep the principal beam per
    user and re-spend the whole budget proportionally (per-user SINRs are
    increasing in a common power scale)."""
    ratios = [rank_ratio(W) for W in w_list]
    if max(ratios, default=0.0) <= _RANK_REPAIR_TOL:
        return list(w_list), False
    repaired = []
    for W in w_list:
        vals, vecs = np.linalg.eigh((W + W.conj().T) / 2.0)
        lam = max(float(vals[-1]), 0.0)
        repaired.append(lam * np.outer(vecs[:, -1], vecs[:, -1].conj()))
    total = sum(np.trace(W).real for W in repaired)
    if total > 0.0:
        c = p_max / total
        repaired = [c * W for W in repaired]
    return repaired, True


def baseline_ris_isac(channels_2k: UserChannels, config: SystemConfig,
                      seed) -> BaselineResult:
    """Alternating design for the conventional system: every user gets a
    dedicated beam and a hard SINR floor."""
    _, _, phase_rng = seed_streams(seed)
    angles = make_angle_grid(config).interested_angles
    V = random_phase_matrix(channels_2k.n_ris, phase_rng)
    sinr = 2.0 ** channels_2k.r_mins - 1.0

    outer: list = []
    diagnostics = {"stalls": 0, "rank_repairs": 0, "aborted": None}
    best = None
    converged = False
    w_list = None
    for _ in range(config.t3_max):
        sol = solve(_baseline_active(channels_2k, V, config, angles))
        if not sol.ok:
            if best is None:
                if sol.status == "infeasible":
                    raise InfeasibleError(
                        "baseline SINR floors unreachable at the initial "
                        "reflect profile")
                raise SolverError(f"baseline transmit stage {sol.status}")
            diagnostics["aborted"] = f"transmit stage {sol.status}"
            warnings.warn(diagnostics["aborted"], RuntimeWarning, stacklevel=2)
            break
        w_list = [sol.values[f"W[{u}]"] for u in range(channels_2k.n_users)]
        w_list, repaired = _repair_rank(w_list, config.p_max)
        if repaired:
            diagnostics["rank_repairs"] += 1

        def build(eigvec, eps, w_list=w_list):
            floors = reflect_floor_matrices(channels_2k, w_list, angles,
                                            config)
            cons = []
            for u in range(channels_2k.n_users):
                row = source_row(channels_2k.g_users[u], channels_2k.G,
                                 w_list, config.noise_power)
                lump = row[u]
                for j in range(channels_2k.n_users):
                    if j != u:
                        lump = lump - float(sinr[u]) * row[j]
                cons.append(LinCon(f"qos_user[{u}]",
                                   trace_of("V", lump) - float(sinr[u]),
                                   ">="))
            for q, B in enumerate(floors):
                cons.append(LinCon(f"beam_floor[{q}]",
                                   trace_of("V", B) - scalar("chi"), ">="))
            cons.extend(lift_constraints(channels_2k.n_ris, eigvec, eps))
            return SdpProblem(
                psd_vars=(("V", channels_2k.n_ris),),
                scalar_vars=(("chi", 0.0, None),),
                maximize=scalar("chi"),
                constraints=tuple(cons),
            )

        try:
            passive = srcr_loop(build, V, config)
            chi_t, V_next = passive.chi, passive.V
        except StallError as err:
            diagnostics["stalls"] += 1
            if err.best_v is None:
                if best is None:
                    raise SolverError(
                        "baseline reflect stage stalled before any usable "
                        "iterate") from err
                diagnostics["aborted"] = "reflect stage stalled"
                warnings.warn(diagnostics["aborted"], RuntimeWarning,
                              stacklevel=2)
                break
            chi_t, V_next = err.best_chi, err.best_v

        prev = outer[-1] if outer else None
        outer.append(chi_t)
        V = V_next
        current = (chi_t, w_list, V)
        if best is None or chi_t >= best[0]:
            best = current
        if prev is not None and abs(chi_t - prev) <= config.outer_tol:
            converged = True
            break

    chi_final, w_final, V_final = (current if diagnostics["aborted"] is None
                                   else best)
    vec_list = extract_beamformers(w_final)
    v, fidelity = extract_phases(V_final)
    diagnostics.update({
        "phase_fidelity": fidelity,
        "covariance_rank_ratios": [rank_ratio(W) for W in w_final],
        "final_chi": chi_final,
    })
    return BaselineResult(W=list(w_final), V=np.array(V_final), w=vec_list,
                          v=v, outer_trace=tuple(outer), converged=converged,
                          diagnostics=diagnostics)


def baseline_rates(V: np.ndarray, w_list, users: UserChannels,
                   config: SystemConfig) -> np.ndarray:
    """Per-user achievable rates of the baseline at a given design."""
    out = np.empty(users.n_users)
    for u in range(users.n_users):
        row = source_row(users.g_users[u], users.G, w_list,
                         config.noise_power)
        own = np.trace(V @ row[u]).real
        inter = sum(np.trace(V @ row[j]).real
                    for j in range(users.n_users) if j != u)
        out[u] = np.log2(1.0 + max(own, 0.0) / (max(inter, 0.0) + 1.0))
    return out


def verify_joint(result: JointResult, channels: ChannelSet,
                 config: SystemConfig, slack: float = 1e-3):
    """Rates at the extracted vectors (rank-one everywhere), plus the SDR
    level report; both should clear the floors within the given slack."""
    lifted = rate_report(result.state, channels, config)
    vec_state = BeamState.from_vectors(result.state.w, result.state.a_near,
                                       result.state.v)
    extracted = rate_report(vec_state, channels, config)
    return {
        "lifted_ok": qos_satisfied(lifted, config, slack),
        "extracted_ok": qos_satisfied(extracted, config, slack),
        "lifted": lifted,
        "extracted": extracted,
    }
