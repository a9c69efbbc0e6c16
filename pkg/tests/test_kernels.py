import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_nav_state, random_attitude
from gyrocal import eskf, kernels
from gyrocal.earth import GeoPosition
from gyrocal.eskf import N_STATES, build_F, predict
from gyrocal.geometry import Attitude, quat_from_rotvec, quat_multiply, quat_normalize
from gyrocal.kernels import KernelParams
from gyrocal.kernels import pure as pure_backend
from gyrocal.mechanization import MechConfig, NavState, ins_step
from gyrocal.sensors import SensorErrors, correct_measurements


def make_params(health=True):
    return KernelParams(
        gm_tau=np.array([3600.0, 3600.0, 7200.0, 7200.0]),
        gm_qd=np.array([1e-10, 1e-8, 1e-12, 1e-12]),
        q_vel=1e-6 * 0.02,
        q_att=np.radians(0.01) ** 2 * 0.02,
        health_checks=health,
    )


def random_block(rng, n=50):
    pos = np.array([0.89, -1.99, 1045.0])
    vel = rng.uniform(-1.5, 1.5, 3)
    quat = rng.standard_normal(4)
    quat /= np.linalg.norm(quat)
    x = np.zeros(N_STATES)
    A = rng.standard_normal((N_STATES, N_STATES))
    P = A @ A.T * 1e-4 + np.eye(N_STATES) * 1e-3
    errs = np.concatenate(
        [rng.normal(0, 0.02, 3), rng.normal(0, 0.1, 3), rng.normal(0, 2e-3, 3), rng.normal(0, 2e-3, 3)]
    )
    gyro = rng.uniform(-3.0, 3.0, (n, 3))
    accel = rng.uniform(-12.0, 12.0, (n, 3))
    return pos, vel, quat, x, P, errs, gyro, accel


def reference_composition(pos, vel, quat, x, P, errs, gyro, accel, dt, params):
    """Oracle: compose the public building blocks step by step."""
    mech = MechConfig(params.earth_rotation, params.transport_rate)
    gm = params.gm_bank()
    serrs = SensorErrors(errs[0:3], errs[3:6], errs[6:9], errs[9:12])
    Qd = pure_backend._assemble_qd(params)
    state = NavState(GeoPosition(*pos), vel.copy(), Attitude(quat))
    x = x.copy()
    quats = []
    for k in range(gyro.shape[0]):
        omega_c, f_c = correct_measurements(gyro[k], accel[k], serrs)
        new_state = ins_step(state, omega_c, f_c, dt, mech)
        q_mid = quat_normalize(quat_multiply(state.att.q, quat_from_rotvec(0.5 * omega_c * dt)))
        mid = NavState(state.pos, state.vel_n, Attitude(q_mid))
        F = build_F(mid, mid.att.dcm @ f_c, gm, omega_b_meas=gyro[k], f_b_meas=accel[k], cfg=mech)
        x, P = predict(x, P, F, Qd, dt)
        state = new_state
        quats.append(state.att.q)
    pos_out = np.array([state.pos.lat, state.pos.lon, state.pos.height])
    return pos_out, state.vel_n, state.att.q, x, P, np.array(quats)


@pytest.mark.parametrize("backend_name", ["pure", "fast"])
def test_backend_matches_public_composition(backend_name, rng):
    backends = kernels.available_backends()
    if backend_name not in backends:
        pytest.skip(f"{backend_name} backend not built")
    fn = backends[backend_name]
    dt = 0.02
    params = make_params()
    args = random_block(rng)
    ref = reference_composition(*[a.copy() for a in args], dt, params)
    out = fn(*[a.copy() for a in args], dt, params)
    scale = np.abs(ref[4]).max()
    assert_allclose(out[0], ref[0], atol=1e-14)
    assert_allclose(out[1], ref[1], atol=1e-10)
    assert_allclose(out[2], ref[2], atol=1e-12)
    assert np.abs(out[4] - ref[4]).max() < 1e-11 * max(scale, 1.0)
    assert_allclose(out[5], ref[5], atol=1e-12)


def test_backends_agree(rng):
    backends = kernels.available_backends()
    if "fast" not in backends:
        pytest.skip("fast backend not built")
    dt = 0.02
    params = make_params()
    for _ in range(5):
        args = random_block(rng, n=30)
        out_p = backends["pure"](*[a.copy() for a in args], dt, params)
        out_f = backends["fast"](*[a.copy() for a in args], dt, params)
        for a, b, tol in zip(out_p[:6], out_f[:6], (1e-14, 1e-10, 1e-13, 1e-13, None, 1e-12)):
            if tol is None:
                assert np.abs(a - b).max() < 1e-11 * max(np.abs(a).max(), 1.0)
            else:
                assert_allclose(b, a, atol=tol)
        assert out_f[6].psd_failures == out_p[6].psd_failures


def test_health_flags_detect_indefinite_P(rng):
    backends = kernels.available_backends()
    pos, vel, quat, x, P, errs, gyro, accel = random_block(rng, n=3)
    P = -np.eye(N_STATES)  # deliberately not PSD
    for fn in backends.values():
        *_, health = fn(pos.copy(), vel.copy(), quat.copy(), x.copy(), P.copy(), errs, gyro, accel, 0.02, make_params())
        assert health.psd_failures > 0


def test_nonzero_error_state_propagates(rng):
    backends = kernels.available_backends()
    args = list(random_block(rng, n=10))
    args[3] = np.zeros(N_STATES)
    args[3][eskf.SG] = [1e-3, -2e-3, 5e-4]  # retained scale states
    outs = []
    for fn in backends.values():
        out = fn(*[np.array(a, copy=True) for a in args], 0.02, make_params())
        outs.append(out[3])
        assert np.abs(out[3][eskf.SG]).max() > 0.0
    if len(outs) == 2:
        assert_allclose(outs[0], outs[1], atol=1e-15)


def test_rejects_out_of_range_scale_estimate(rng):
    # Both backends refuse scale estimates outside the trust region
    # (InvalidCorrectionError or the SensorErrors invariant, both ValueError).
    args = list(random_block(rng, n=5))
    args[5] = args[5].copy()
    args[5][6] = -0.7  # 1 + s_g below the trust region
    for fn in kernels.available_backends().values():
        with pytest.raises(ValueError):
            fn(*[np.array(a, copy=True) for a in args], 0.02, make_params())
