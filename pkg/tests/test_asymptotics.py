import math

import numpy as np
import pytest

from fpplab import asymptotics as asy
from fpplab.environment import ModelKind, generate_environment
from fpplab.laws import Exponential, ParameterRangeError
from fpplab.rng import RngStream


def test_walk_params_simplex_and_known_values():
    p = asy.step_probabilities(1.0, 1.0)
    assert abs(p.p_up + p.p_flat + p.p_down - 1.0) < 1e-14
    assert p.q1 == 0.5 and p.beta == pytest.approx(0.25)
    assert p.p_up == pytest.approx(3 / 8)
    assert p.p_down == pytest.approx(3 / 8)
    assert p.p_flat == pytest.approx(1 / 4)
    assert p.q_up == pytest.approx(3 / 5)
    assert p.p_down_down == pytest.approx(2 / 3)
    # equal-rate closed form for the double-down probability
    for rho in (0.5, 1.0, 3.0):
        pr = asy.step_probabilities(rho, rho)
        assert pr.p_down_down == pytest.approx(2 * rho / (1 + 2 * rho))
        assert pr.p_flat == pytest.approx(pr.beta * 0 + (1 - pr.q1) ** 2)
    # limits: rho2 -> infinity kills upward steps
    p = asy.step_probabilities(1.0, 1e9)
    assert p.p_up < 1e-8


def test_sigma_series_probability_structure():
    ser = asy.sigma_series(0.25, 2000)
    assert ser[0] == 0.0
    assert ser[1] == pytest.approx(0.75 / 4)
    assert np.all(ser >= -1e-15)
    partial = np.cumsum(ser)
    assert np.all(partial <= 1.0 + 1e-12)
    assert partial[-1] > 0.95
    with pytest.raises(ParameterRangeError):
        asy.sigma_series(1.0, 5)


def test_sigma_tail_constant_from_series():
    for rho in (0.5, 1.0, 2.0):
        p = asy.step_probabilities(rho, rho)
        ser = asy.sigma_series(p.beta, 10_000)
        assert ser[10_000] * 10_000 ** 1.5 == pytest.approx(
            asy.sigma_tail_constant(p), rel=0.02)


def test_sigma_cf():
    assert asy.sigma_cf(0.25, 0.0) == pytest.approx(1.0)
    # CF = generating function on the unit circle: compare against the series
    ser = asy.sigma_series(0.25, 40_000)
    for theta in (0.5, 1.0):
        z = np.exp(1j * theta)
        truncated = np.sum(ser * z ** np.arange(len(ser)))
        assert asy.sigma_cf(0.25, theta) == pytest.approx(truncated, abs=5e-3)


def test_sigma_cf_matches_monte_carlo():
    p = asy.step_probabilities(1.0, 1.0)
    vals, _ = asy.sample_sigma(p, RngStream(60, 0), 200_000, cap=10**6,
                               allow_capped=True)
    for theta in (0.1, 0.5, 1.0):
        emp = np.exp(1j * theta * vals).mean()
        assert abs(emp - asy.sigma_cf(p.beta, theta)) < 0.01


def test_sigma_readings_differ_as_documented():
    p = asy.step_probabilities(1.0, 1.0)
    strict, _ = asy.sample_sigma(p, RngStream(61, 0), 100_000,
                                 reading=asy.READING_STRICT, cap=10**5,
                                 allow_capped=True)
    flat, _ = asy.sample_sigma(p, RngStream(61, 1), 100_000,
                               reading=asy.READING_FLAT_STOPS, cap=10**5,
                               allow_capped=True)
    assert strict.min() >= 1
    # flat reading has an atom q_flat at 1; strict has P(1) = ptilde_1
    p1_flat = np.mean(flat == 1)
    assert p1_flat == pytest.approx(p.q_flat, abs=0.01)
    p1_strict = np.mean(strict == 1)
    assert p1_strict == pytest.approx(asy.sigma_series(p.beta, 3)[1], abs=0.01)


def test_tau_means_settle_the_holding_question():
    # E[tau(1,2)] = p_dd/(q1-q2); the geometric compound has mean 1/(q1-q2)
    params = asy.step_probabilities(1.0, 2.0)
    taus, capped = asy.sample_walk_tau(params, RngStream(62, 0), 200_000,
                                       cap=10**7, allow_capped=True)
    assert not capped.any()
    target_tau = params.p_down_down * asy.holding_mean_constant(1.0, 2.0)
    se = taus.std() / math.sqrt(len(taus))
    assert abs(taus.mean() - target_tau) < 4 * se
    assert abs(taus.mean() - asy.holding_mean_constant(1.0, 2.0)) > 20 * se


def test_tau_first_step_down_gives_one():
    params = asy.step_probabilities(1.0, 2.0)
    taus, _ = asy.sample_walk_tau(params, RngStream(63, 0), 50_000,
                                  cap=10**7, allow_capped=True)
    assert np.mean(taus == 1) == pytest.approx(params.p_down, abs=0.01)


def test_cap_exceeded_raises_and_reports():
    params = asy.step_probabilities(1.0, 1.0)
    with pytest.raises(asy.CapExceededError):
        asy.sample_sigma(params, RngStream(64, 0), 50_000, cap=100)


def test_erickson_limit():
    assert asy.erickson_limit(0.5, 3.0) == pytest.approx(2.0 / (3.0 * math.pi))
    assert asy.erickson_limit(0.5, 6.0) == pytest.approx(
        asy.erickson_limit(0.5, 3.0) / 2.0)
    p = asy.step_probabilities(1.0, 1.0)
    assert asy.erickson_limit(0.5, asy.sigma_tail_L(p)) == pytest.approx(
        asy.sigma_renewal_constant(p))


def test_convoy_sample_structure():
    pts = asy.convoy_sample(1.0, 50_000, RngStream(65, 0))
    assert pts[0] == 0
    assert np.all(np.diff(pts) >= 1)
    assert pts[-1] <= 50_000
    # deterministic replay
    pts2 = asy.convoy_sample(1.0, 50_000, RngStream(65, 0))
    assert np.array_equal(pts, pts2)


def test_convoy_gaps_look_iid():
    pts = asy.convoy_sample(1.0, 200_000, RngStream(66, 0))
    gaps = np.diff(pts).astype(float)
    lg = np.log(gaps)
    n = len(lg) - 1
    r = np.corrcoef(lg[:-1], lg[1:])[0, 1]
    assert abs(r) < 4.0 / math.sqrt(n)


def test_convoy_candidates_at_one():
    c = asy.convoy_constant_candidates(1.0)
    assert c["long"] == pytest.approx(3 ** 1.5 / (4 * math.sqrt(math.pi)), rel=1e-12)
    assert c["simplified"] == pytest.approx(3 / (2 * math.sqrt(2 * math.pi)), rel=1e-12)
    assert c["thinned"] == pytest.approx(1 / math.sqrt(3 * math.pi), rel=1e-12)


def test_branch_jump_cdf_and_inverse():
    assert asy.branch_jump_cdf(0.3, 0, 0.0) == pytest.approx(0.3)
    assert asy.branch_jump_cdf(0.2, 3, 0.2) == 0.0
    for u in (0.1, 0.5, 0.9):
        t = asy.invert_branch_jump_cdf(u, 2, 0.3)
        assert asy.branch_jump_cdf(t, 2, 0.3) == pytest.approx(u, abs=1e-9)


def test_branch_trajectory_structure():
    traj = asy.branch_process_sample(1000, RngStream(67, 0))
    ts, bs = traj.jumps()
    assert bs[0] == 0 and ts[0] == 0.0
    assert np.all(np.diff(bs) > 0)
    assert bs[-1] >= 1000
    assert asy.branch_count(traj, 1000) == len(bs) - 1 + (1 if bs[-1] < 1000 else 0)
    # monotone in N
    counts = [asy.branch_count(traj, N) for N in (10, 100, 1000)]
    assert counts == sorted(counts)


def test_branch_single_jump_count():
    traj = asy.JumpTrajectory(np.array([0.0, 0.5]), np.array([0, 2000]))
    assert asy.branch_count(traj, 1000) == 1


def test_geodesic_fan_tightness_and_counts():
    env = generate_environment(ModelKind.swfpp(), Exponential(1.0), 24, 700, 68)
    fan = asy.busemann_geodesic_fan(env, np.geomspace(0.05, 20.0, 24),
                                    height=256, columns=16, seed=68)
    assert fan["tightness"].all()
    assert fan["visits"][0, 0] == 24
    a0 = asy.highways_column_count(fan, 0, 256)
    assert 1 <= a0 <= 256
    # paths are monotone staircases clipped to the window
    for path in fan["paths"]:
        diffs = np.diff(np.asarray(path), axis=0)
        assert np.all(diffs.sum(axis=1) == 1) and np.all(diffs >= 0)
