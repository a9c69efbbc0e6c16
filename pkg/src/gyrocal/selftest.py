"""Built-in invariant suite: fast spot checks of the numerical core,
runnable in the field via ``gyrocal selftest``."""

from __future__ import annotations

import numpy as np

D2R = np.pi / 180.0


def _check_skew_antisymmetry(rng):
    from .geometry import skew

    for _ in range(100):
        S = skew(rng.standard_normal(3))
        if not np.array_equal(S, -S.T):
            return False
    return True


def _check_attitude_roundtrip(rng):
    from .geometry import dcm_from_quat, quat_from_dcm, rotation_angle_between

    for _ in range(100):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        if rotation_angle_between(q, quat_from_dcm(dcm_from_quat(q))) > 1e-9:
            return False
    return True


def _check_earth_rate_magnitude(rng):
    from .earth import EARTH_RATE, earth_rate_n

    lats = rng.uniform(-np.pi / 2, np.pi / 2, 50)
    return all(abs(np.linalg.norm(earth_rate_n(la)) - EARTH_RATE) < 1e-15 for la in lats)


def _check_sensor_roundtrip(rng):
    from .sensors import SensorErrors, apply_errors, correct_measurements

    errs = SensorErrors(
        b_g=rng.normal(0, 0.05, 3), b_a=rng.normal(0, 0.2, 3),
        s_g=rng.normal(0, 0.002, 3), s_a=rng.normal(0, 0.002, 3),
    )
    omega, f = rng.standard_normal(3), rng.standard_normal(3)
    om2, f2 = correct_measurements(*apply_errors(omega, f, errs), errs)
    return np.abs(om2 - omega).max() < 1e-12 and np.abs(f2 - f).max() < 1e-12


def _check_gm_stationarity(rng):
    from .sensors import GaussMarkovSpec, gm_discretize

    spec = GaussMarkovSpec(30.0, 0.7)
    phi, qd = gm_discretize(spec, 0.5)
    x = rng.standard_normal(5000) * spec.sigma
    for _ in range(100):
        x = phi * x + rng.standard_normal(5000) * np.sqrt(qd)
    return abs(x.var() / spec.sigma**2 - 1.0) < 0.06


def _check_joseph_agreement(rng):
    from .eskf import N_STATES, update

    for _ in range(50):
        A = rng.standard_normal((N_STATES, N_STATES))
        P = A @ A.T + N_STATES * np.eye(N_STATES)
        H = rng.standard_normal((3, N_STATES))
        R = np.eye(3)
        res = update(np.zeros(N_STATES), P, H, R, rng.standard_normal(3))
        S = H @ P @ H.T + R
        K = P @ H.T @ np.linalg.inv(S)
        P_std = (np.eye(N_STATES) - K @ H) @ P
        P_std = 0.5 * (P_std + P_std.T)
        if np.abs(res.P - P_std).max() > 1e-10 * np.abs(P_std).max():
            return False
    return True


def _check_backend_equivalence(rng):
    from .kernels import KernelParams, available_backends

    backends = available_backends()
    if len(backends) < 2:
        return True  # nothing to compare against
    params = KernelParams(
        gm_tau=np.array([3600.0, 3600.0, 7200.0, 7200.0]),
        gm_qd=np.array([1e-10, 1e-8, 1e-12, 1e-12]),
        q_vel=2e-8, q_att=6e-10,
    )
    pos = np.array([0.89, -1.99, 1045.0])
    vel = rng.uniform(-1, 1, 3)
    quat = rng.standard_normal(4)
    quat /= np.linalg.norm(quat)
    A = rng.standard_normal((21, 21))
    P = A @ A.T * 1e-4 + 1e-3 * np.eye(21)
    gyro = rng.uniform(-3, 3, (40, 3))
    accel = rng.uniform(-12, 12, (40, 3))
    outs = [
        fn(pos.copy(), vel.copy(), quat.copy(), np.zeros(21), P.copy(),
           np.zeros(12), gyro, accel, 0.02, params)
        for fn in backends.values()
    ]
    a, b = outs[0], outs[1]
    return (
        np.abs(a[2] - b[2]).max() < 1e-12
        and np.abs(a[4] - b[4]).max() < 1e-11 * max(1.0, np.abs(a[4]).max())
    )


def _check_simulator_consistency(rng):
    from .config import Config
    from .earth import GeoPosition, geo_offset_m
    from .geometry import Attitude, rotation_angle_between
    from .mechanization import NavState, ins_step
    from .simulator import generate_truth

    cfg = Config(duration_s=8.0, tail_s=2.0, motion="pocket", seed=int(rng.integers(1000)))
    truth = generate_truth(cfg.scenario())
    state = NavState(
        GeoPosition(truth.lat[0], truth.lon[0], truth.h[0]), truth.vel_n[0], Attitude(truth.quat[0])
    )
    dt = truth.t[1] - truth.t[0]
    for k in range(1, truth.t.size):
        state = ins_step(state, truth.omega_b[k], truth.f_b[k], dt, cfg.mech_config())
    pos_err = np.linalg.norm(
        geo_offset_m(state.pos, GeoPosition(truth.lat[-1], truth.lon[-1], truth.h[-1]))
    )
    att_err = rotation_angle_between(state.att.q, truth.quat[-1])
    return pos_err < 1e-3 and att_err < 1e-4


CHECKS = [
    ("skew antisymmetry", _check_skew_antisymmetry),
    ("attitude quat/DCM roundtrip", _check_attitude_roundtrip),
    ("earth rate magnitude", _check_earth_rate_magnitude),
    ("sensor model roundtrip", _check_sensor_roundtrip),
    ("Gauss-Markov stationarity", _check_gm_stationarity),
    ("Joseph update agreement", _check_joseph_agreement),
    ("kernel backend equivalence", _check_backend_equivalence),
    ("simulator mechanization consistency", _check_simulator_consistency),
]


def run_selftest(verbose: bool = True, seed: int = 0) -> int:
    """Run every check; returns a process exit code (0 = all passed)."""
    rng = np.random.default_rng(seed)
    failures = 0
    for name, fn in CHECKS:
        ok = bool(fn(rng))
        failures += not ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    if verbose:
        print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 1 if failures else 0
