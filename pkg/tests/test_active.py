"""Transmit-stage builder and loop: fixed points, surrogate tightness, the
relaxed problem census, and the single-cluster closed form."""

import math

import numpy as np
import pytest

from conftest import lincon_value, quadcon_slack, tiny_config
from risbeam.active import (ActiveResult, ScaState, algorithm1,
                            build_relaxed_problem, extract_beamformers,
                            feasible_init, floor_matrices, init_sca_state,
                            qos_matrices, rank_ratio, sca_state_from_beams,
                            update_fixed_points)
from risbeam.channels import build_scenario
from risbeam.conic import SdpSolution, principal_eigpair
from risbeam.errors import InfeasibleError, StateError
from risbeam.passive import random_phase_matrix
from risbeam.rates import BeamState, rate_report
from risbeam.sensing import make_angle_grid, min_gain
from risbeam.errors import SolverError


@pytest.fixture(scope="module")
def setup(tiny_cfg):
    _, channels = build_scenario(tiny_cfg, (7, 0))
    V = random_phase_matrix(tiny_cfg.n_ris, np.random.default_rng(3))
    return channels, V, tiny_cfg


def test_qos_matrices_are_hermitian_psd(setup):
    channels, V, cfg = setup
    d_near, d_far = qos_matrices(channels, V, cfg)
    for D in d_near + d_far:
        assert D.shape == (cfg.n_tx, cfg.n_tx)
        assert np.allclose(D, D.conj().T)
        assert np.linalg.eigvalsh(D)[0] >= -1e-9 * abs(D).max()


def test_qos_matrices_scale_with_noise(setup):
    channels, V, cfg = setup
    d1, _ = qos_matrices(channels, V, cfg)
    cfg10 = tiny_config(noise_power=10.0 * cfg.noise_power)
    d10, _ = qos_matrices(channels, V, cfg10)
    assert np.allclose(d1[0], 10.0 * d10[0])


def test_floor_matrices_one_per_angle(setup):
    channels, V, cfg = setup
    angles = make_angle_grid(cfg).interested_angles
    mats = floor_matrices(channels, V, angles, cfg)
    assert len(mats) == len(angles)
    for A in mats:
        assert np.allclose(A, A.conj().T)
        assert np.linalg.eigvalsh(A)[0] >= -1e-9 * max(abs(A).max(), 1e-30)


def test_init_state_matches_isotropic_start(setup):
    channels, V, cfg = setup
    state = init_sca_state(channels, V, cfg)
    d_near, _ = qos_matrices(channels, V, cfg)
    w_scale = cfg.p_max / (channels.n_clusters * channels.n_tx)
    t_n = w_scale * np.trace(d_near[0]).real
    assert state.eta_tilde[0] == pytest.approx(math.sqrt(0.2 * t_n))
    assert state.beta_near[0] == pytest.approx(t_n / 0.2)
    assert state.t1 == 0


def test_state_from_beams_is_tight(setup):
    channels, V, cfg = setup
    rng = np.random.default_rng(4)
    w = rng.standard_normal(cfg.n_tx) + 1j * rng.standard_normal(cfg.n_tx)
    point = BeamState(W=[np.outer(w, w.conj())], a_near=np.array([0.37]),
                      a_far=np.array([0.63]), V=V)
    state = sca_state_from_beams(point, channels, V, cfg)
    d_near, d_far = qos_matrices(channels, V, cfg)
    t_n = np.trace(point.W[0] @ d_near[0]).real
    t_f = np.trace(point.W[0] @ d_far[0]).real
    assert state.eta_tilde[0] ** 2 == pytest.approx(0.37 * t_n, rel=1e-12)
    assert state.beta_near[0] == pytest.approx(t_n / 0.37, rel=1e-12)
    assert state.beta_far[0] == pytest.approx(t_f / 0.37, rel=1e-12)

    bad = BeamState(W=point.W, a_near=np.array([0.0]),
                    a_far=np.array([1.0]), V=V)
    with pytest.raises(StateError):
        sca_state_from_beams(bad, channels, V, cfg)


def test_builder_census_with_qos(setup):
    channels, V, cfg = setup
    angles = make_angle_grid(cfg).interested_angles
    state = init_sca_state(channels, V, cfg)
    problem = build_relaxed_problem(channels, V, state, cfg, angles)
    k, q = channels.n_clusters, len(angles)
    assert problem.count_labels() == {
        "beam_floor": q, "power": 1, "schur": k, "taylor_near": k,
        "agm_far_near": k, "agm_far_far": k}
    names = [n for n, *_ in problem.scalar_vars]
    assert names == ["chi"] + [f"a[{i}]" for i in range(k)] \
        + [f"eta[{i}]" for i in range(k)]
    assert [n for n, _ in problem.psd_vars] == [f"W[{i}]" for i in range(k)]


def test_builder_census_without_qos(tiny_noqos):
    _, channels = build_scenario(tiny_noqos, (7, 0))
    V = random_phase_matrix(tiny_noqos.n_ris, np.random.default_rng(3))
    angles = make_angle_grid(tiny_noqos).interested_angles
    state = init_sca_state(channels, V, tiny_noqos)
    problem = build_relaxed_problem(channels, V, state, tiny_noqos, angles)
    assert problem.count_labels() == {"beam_floor": len(angles), "power": 1}
    assert [n for n, *_ in problem.scalar_vars] == ["chi"]


def test_surrogate_rows_are_tight_at_their_fixed_point(setup):
    """At fixed points derived from an incumbent, the convexified QoS rows
    evaluated at that incumbent equal the exact rows (scaled by 1/(1+gamma_f)
    for the far pair), so the relaxation never cuts off the incumbent."""
    channels, V, cfg = setup
    rng = np.random.default_rng(8)
    angles = make_angle_grid(cfg).interested_angles
    gamma_n = 2.0 ** cfg.r_min_near - 1.0
    gamma_f = 2.0 ** cfg.r_min_far - 1.0
    d_near, d_far = qos_matrices(channels, V, cfg)
    for _ in range(10):
        w = rng.standard_normal(cfg.n_tx) + 1j * rng.standard_normal(cfg.n_tx)
        a = float(rng.uniform(0.1, 0.9))
        point = BeamState(W=[np.outer(w, w.conj())], a_near=np.array([a]),
                          a_far=np.array([1.0 - a]), V=V)
        state = sca_state_from_beams(point, channels, V, cfg)
        problem = build_relaxed_problem(channels, V, state, cfg, angles)
        by_label = {c.label: c for c in problem.constraints}
        vals = {"W[0]": point.W[0], "a[0]": a,
                "eta[0]": float(state.eta_tilde[0]), "chi": 0.0}

        t_n = np.trace(point.W[0] @ d_near[0]).real
        t_f = np.trace(point.W[0] @ d_far[0]).real
        # single cluster: no inter-cluster term, noise normalizes to 1
        exact_near = a * t_n - gamma_n
        exact_far_n = (1.0 - a) * t_n - gamma_f * (a * t_n + 1.0)
        exact_far_f = (1.0 - a) * t_f - gamma_f * (a * t_f + 1.0)
        scale = 1.0 / (gamma_f + 1.0)

        got_near = lincon_value(by_label["taylor_near[0]"], vals)
        assert got_near == pytest.approx(exact_near, rel=1e-10, abs=1e-12)
        assert quadcon_slack(by_label["agm_far_near[0]"], vals) \
            == pytest.approx(exact_far_n * scale, rel=1e-10, abs=1e-12)
        assert quadcon_slack(by_label["agm_far_far[0]"], vals) \
            == pytest.approx(exact_far_f * scale, rel=1e-10, abs=1e-12)


def test_surrogates_never_exceed_true_terms(setup):
    # Taylor under-estimates the square; the weighted-mean bound
    # over-estimates the bilinear product away from its matched weight.
    rng = np.random.default_rng(15)
    for _ in range(50):
        eta_t = rng.uniform(0.01, 10.0)
        eta = rng.uniform(0.0, 10.0)
        assert 2.0 * eta_t * eta - eta_t ** 2 <= eta ** 2 + 1e-12
        a, t = rng.uniform(0.05, 1.0), rng.uniform(0.01, 10.0)
        beta = rng.uniform(0.01, 10.0)
        assert beta / 2.0 * a ** 2 + t ** 2 / (2.0 * beta) >= a * t - 1e-12
        matched = t / a
        assert matched / 2.0 * a ** 2 + t ** 2 / (2.0 * matched) \
            == pytest.approx(a * t, rel=1e-12)


def test_algorithm1_improves_and_meets_floors(setup):
    channels, V, cfg = setup
    result = algorithm1(channels, V, cfg)
    assert isinstance(result, ActiveResult)
    assert result.converged
    diffs = np.diff(result.chi_trace)
    assert np.all(diffs >= -1e-6)
    state = result.state
    assert sum(np.trace(W).real for W in state.W) <= cfg.p_max * (1 + 1e-6)
    report = rate_report(state, channels, cfg)
    assert report.r_near[0] >= cfg.r_min_near - 1e-6
    assert report.r_far[0] >= cfg.r_min_far - 1e-6
    # the objective is the worst interested-angle gain at the optimum
    angles = make_angle_grid(cfg).interested_angles
    worst, _ = min_gain(V, state.W, channels.G, angles, cfg.spacing_ratio)
    assert result.chi == pytest.approx(worst, rel=1e-3, abs=1e-12)


def test_algorithm1_single_angle_closed_form():
    # one interested angle and no rate floors: the optimum puts the whole
    # budget on the top eigenvector of the angle's quadratic form
    cfg = tiny_config(r_min_near=0.0, r_min_far=0.0,
                      beam_width=math.radians(1.0))
    _, channels = build_scenario(cfg, (7, 0))
    V = random_phase_matrix(cfg.n_ris, np.random.default_rng(5))
    angles = make_angle_grid(cfg).interested_angles
    assert len(angles) == 1
    A = floor_matrices(channels, V, angles, cfg)[0]
    lam, _ = principal_eigpair(A)
    result = algorithm1(channels, V, cfg, angles)
    assert result.chi == pytest.approx(cfg.p_max * lam, rel=1e-3)


def test_algorithm1_warm_start_accepts_incumbent(setup):
    channels, V, cfg = setup
    first = algorithm1(channels, V, cfg)
    warm = sca_state_from_beams(first.state, channels, V, cfg)
    second = algorithm1(channels, V, cfg, init=warm)
    assert second.chi >= first.chi - 1e-6


def test_feasible_init_recovers_or_raises(setup):
    channels, V, cfg = setup
    state = feasible_init(channels, V, cfg)
    assert isinstance(state, ScaState)
    assert np.all(state.eta_tilde > 0)
    hopeless = tiny_config(r_min_near=50.0)
    with pytest.raises(InfeasibleError):
        feasible_init(channels, V, hopeless)


def test_algorithm1_raises_on_unattainable_floors(setup):
    channels, V, cfg = setup
    hopeless = tiny_config(r_min_near=50.0)
    with pytest.raises((InfeasibleError, SolverError)):
        algorithm1(channels, V, hopeless)


def test_update_fixed_points_guards(setup):
    channels, V, cfg = setup
    state = init_sca_state(channels, V, cfg)
    with pytest.raises(StateError):
        update_fixed_points(SdpSolution(status="infeasible", values={},
                                        objective=None),
                            channels, V, cfg, state)
    # a solve that carried no split variables leaves the state unchanged
    sol = SdpSolution(status="optimal",
                      values={"W[0]": np.eye(cfg.n_tx), "chi": 0.0},
                      objective=0.0)
    nxt = update_fixed_points(sol, channels, V, cfg, state)
    assert np.array_equal(nxt.eta_tilde, state.eta_tilde)
    assert nxt.t1 == state.t1 + 1
    bad = SdpSolution(status="optimal",
                      values={"W[0]": np.eye(cfg.n_tx), "a[0]": 0.0,
                              "chi": 0.0},
                      objective=0.0)
    with pytest.raises(StateError):
        update_fixed_points(bad, channels, V, cfg, state)


def test_extract_beamformers_oracles():
    zeros = extract_beamformers([np.zeros((3, 3))])[0]
    assert np.array_equal(zeros, np.zeros(3))

    rng = np.random.default_rng(17)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    W = np.outer(w, w.conj())
    got = extract_beamformers([W])[0]
    # equal up to a global phase
    assert abs(np.vdot(got, w)) == pytest.approx(
        np.linalg.norm(w) ** 2, rel=1e-9)

    noise = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    noise = (noise + noise.conj().T) / 2.0
    W_noisy = W + 1e-9 * noise
    got = extract_beamformers([W_noisy])[0]
    err = np.linalg.norm(np.outer(got, got.conj()) - W) / np.linalg.norm(W)
    assert err <= 1e-4


def test_rank_ratio_oracles():
    assert rank_ratio(np.zeros((2, 2))) == 0.0
    assert rank_ratio(np.eye(3)) == 1.0
    v = np.array([1.0, 2.0, -1.0])
    assert rank_ratio(np.outer(v, v)) == pytest.approx(0.0, abs=1e-12)
    assert rank_ratio(np.diag([4.0, 1.0])) == 0.25
