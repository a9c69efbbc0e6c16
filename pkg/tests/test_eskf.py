import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_nav_state, random_attitude
from gyrocal import eskf
from gyrocal.earth import geo_offset_m, gravity_magnitude
from gyrocal.eskf import (
    ATT,
    BA,
    BG,
    GmBank,
    N_STATES,
    POS,
    SA,
    SG,
    VEL,
    build_F,
    build_Qd,
    feedback,
    predict,
    update,
)
from gyrocal.geometry import rotation_angle_between, skew
from gyrocal.sensors import NoiseSpec, SensorErrors

GM = GmBank()


def test_build_F_gravity_block_static_level():
    state = make_nav_state()
    g = gravity_magnitude(state.pos.lat, state.pos.height)
    F = build_F(state, [0.0, 0.0, -g], GM)
    assert_allclose(F[VEL, ATT], skew([0.0, 0.0, -g]))


def test_build_F_gm_diagonal():
    state = make_nav_state()
    F = build_F(state, np.zeros(3), GM)
    assert_allclose(np.diag(F)[BG], -np.ones(3) / 3600.0)
    assert_allclose(np.diag(F)[SG], -np.ones(3) / 7200.0)


def test_build_F_sensor_coupling_blocks(rng):
    state = make_nav_state(q=random_attitude(rng).q)
    C = state.att.dcm
    omega_b = np.array([0.1, -0.2, 0.3])
    f_b = np.array([1.0, 2.0, -9.0])
    F = build_F(state, C @ f_b, GM, omega_b_meas=omega_b, f_b_meas=f_b)
    assert_allclose(F[VEL, BA], C)
    assert_allclose(F[ATT, BG], -C)
    assert_allclose(F[VEL, SA], C @ np.diag(f_b))
    assert_allclose(F[ATT, SG], -C @ np.diag(omega_b))


def test_predict_zero_error_state_stays_zero():
    state = make_nav_state()
    F = build_F(state, np.zeros(3), GM)
    Qd = build_Qd(NoiseSpec(), GM, 0.02)
    x, P = np.zeros(N_STATES), np.eye(N_STATES)
    x2, _ = predict(x, P, F, Qd, 0.02)
    assert np.array_equal(x2, np.zeros(N_STATES))


def test_predict_scalar_analog():
    # P = 1, F = 0, Q_d = 0.1 -> P = 1.1 after one step.
    x = np.zeros(N_STATES)
    P = np.eye(N_STATES)
    x2, P2 = predict(x, P, np.zeros((N_STATES, N_STATES)), 0.1 * np.eye(N_STATES), 1.0)
    assert_allclose(np.diag(P2), np.full(N_STATES, 1.1))


def test_predict_preserves_psd_under_random_F(rng):
    # 10^4 random-F steps keep P positive semidefinite and symmetric.
    P = np.diag(rng.uniform(0.1, 10.0, N_STATES))
    Qd = 1e-6 * np.eye(N_STATES)
    x = np.zeros(N_STATES)
    for _ in range(10_000):
        F = rng.standard_normal((N_STATES, N_STATES)) * 0.5
        x, P = predict(x, P, F, Qd, 0.02)
        assert np.array_equal(P, P.T)
    evals = np.linalg.eigvalsh(P)
    assert evals.min() >= -1e-9 * np.trace(P)


def test_update_perfect_measurement_limit(rng):
    x = np.zeros(N_STATES)
    P = np.eye(N_STATES)
    z = rng.standard_normal(N_STATES)
    res = update(x, P, np.eye(N_STATES), 1e-12 * np.eye(N_STATES), z)
    assert_allclose(res.x, z, atol=1e-9)


def test_update_zero_innovation_no_change(rng):
    x = rng.standard_normal(N_STATES)
    P = np.eye(N_STATES)
    H = np.zeros((3, N_STATES))
    H[:, BG] = np.eye(3)
    z = H @ x
    res = update(x, P, H, 0.01 * np.eye(3), z)
    assert_allclose(res.x, x, atol=1e-12)
    assert_allclose(res.innovation, np.zeros(3), atol=1e-12)


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_joseph_equals_standard_form(rng):
    # Algebraic oracle: (I-KH)P from the optimal gain equals the Joseph form.
    for _ in range(200):
        P = random_spd(rng, N_STATES)
        H = rng.standard_normal((3, N_STATES))
        R = random_spd(rng, 3)
        res = update(np.zeros(N_STATES), P, H, R, rng.standard_normal(3))
        S = H @ P @ H.T + R
        K = P @ H.T @ np.linalg.inv(S)
        P_std = (np.eye(N_STATES) - K @ H) @ P
        P_std = 0.5 * (P_std + P_std.T)
        scale = np.abs(P_std).max()
        assert np.abs(res.P - P_std).max() < 1e-10 * max(scale, 1.0)


def test_innovation_gate_skips_outliers():
    x = np.zeros(N_STATES)
    P = np.eye(N_STATES)
    H = np.zeros((3, N_STATES))
    H[:, POS] = np.eye(3)
    res = update(x, P, H, 1e-4 * np.eye(3), np.array([50.0, 0.0, 0.0]), gate_sigma=3.0)
    assert not res.accepted
    assert_allclose(res.x, x)
    assert res.nis > 100.0


def test_feedback_zero_error_state_is_identity():
    nav = make_nav_state(vel=[1.0, 2.0, 3.0])
    errs = SensorErrors(b_g=[0.01, 0.0, 0.0])
    nav2, errs2, x2 = feedback(nav, errs, np.zeros(N_STATES))
    assert_allclose(nav2.vel_n, nav.vel_n)
    assert rotation_angle_between(nav2.att.q, nav.att.q) < 1e-15
    assert_allclose(errs2.b_g, errs.b_g)
    assert np.array_equal(x2, np.zeros(N_STATES))


def test_feedback_position_shift_definition():
    nav = make_nav_state()
    x = np.zeros(N_STATES)
    x[POS] = [1.0, 2.0, 3.0]
    nav2, _, _ = feedback(nav, SensorErrors(), x)
    assert_allclose(geo_offset_m(nav2.pos, nav.pos), [-1.0, -2.0, -3.0], atol=1e-9)


def test_feedback_always_accumulates_bias():
    nav = make_nav_state()
    x = np.zeros(N_STATES)
    x[BG] = [0.01, 0.02, -0.01]
    nav2, errs2, x2 = feedback(nav, SensorErrors(), x)
    assert_allclose(errs2.b_g, x[BG])
    assert np.array_equal(x2, np.zeros(N_STATES))


def test_evaluation_gates_on_covariance():
    from gyrocal.eskf import EvaluationGates, evaluation_passed

    gates = EvaluationGates()
    P = np.eye(N_STATES) * 1e-12
    P[9, 9] = np.radians(5.0) ** 2  # gyro-bias sigma far above the gate
    passed = evaluation_passed(P, gates)
    assert not passed["gyro_bias"]
    assert passed["accel_bias"] and passed["gyro_scale"] and passed["accel_scale"]

    P[9, 9] = np.radians(0.1) ** 2
    assert evaluation_passed(P, gates)["gyro_bias"]


def test_feedback_rejects_invariant_violation():
    nav = make_nav_state()
    x = np.zeros(N_STATES)
    x[SG] = [0.2, 0.0, 0.0]  # would exceed the 10% scale bound
    x[BG] = [0.01, 0.0, 0.0]
    nav2, errs2, x2 = feedback(nav, SensorErrors(), x)
    assert_allclose(errs2.s_g, np.zeros(3))
    assert_allclose(x2[SG], x[SG])  # retained
    assert_allclose(errs2.b_g, x[BG])  # bias application still goes through
    assert_allclose(x2[BG], np.zeros(3))


def test_feedback_attitude_error_convention():
    nav = make_nav_state()
    psi = np.array([0.01, -0.02, 0.03])
    x = np.zeros(N_STATES)
    x[ATT] = psi
    nav2, _, _ = feedback(nav, SensorErrors(), x)
    # C_true = (I + [psi x]) C_hat to first order
    expected = (np.eye(3) + skew(psi)) @ nav.att.dcm
    assert np.abs(nav2.att.dcm - expected).max() < np.linalg.norm(psi) ** 2
