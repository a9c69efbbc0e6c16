"""Pure-numpy propagation backend.

Composes the public building blocks (`correct_measurements`, `ins_step`,
`build_F`, `predict`) sample by sample; the compiled backend must agree
with this one to floating-point tolerance (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from ..earth import GeoPosition
from ..eskf import ATT, BA, BG, N_STATES, SA, SG, VEL, build_F
from ..geometry import Attitude, quat_from_rotvec, quat_multiply, quat_normalize
from ..mechanization import MechConfig, NavState, ins_step
from ..sensors import SensorErrors, correct_measurements
from .types import BlockHealth, KernelParams

BACKEND_NAME = "pure"


def _assemble_qd(p: KernelParams) -> NDArray[np.float64]:
    qd = np.zeros(N_STATES)
    qd[VEL] = p.q_vel
    qd[ATT] = p.q_att
    qd[BG], qd[BA], qd[SG], qd[SA] = (
        p.gm_qd[0],
        p.gm_qd[1],
        p.gm_qd[2],
        p.gm_qd[3],
    )
    return np.diag(qd)


def propagate_block(
    pos: NDArray[np.float64],
    vel: NDArray[np.float64],
    quat: NDArray[np.float64],
    x: NDArray[np.float64],
    P: NDArray[np.float64],
    errs: NDArray[np.float64],
    gyro: NDArray[np.float64],
    accel: NDArray[np.float64],
    dt: float,
    params: KernelParams,
) -> tuple[NDArray, NDArray, NDArray, NDArray, NDArray, NDArray, BlockHealth]:
    """
    Propagate the navigation state and error covariance across a block of
    raw IMU samples (one update interval).

    Parameters mirror the flat-array kernel ABI: ``pos`` is
    (lat, lon, height), ``errs`` packs (b_g, b_a, s_g, s_a), ``gyro`` and
    ``accel`` are the raw samples of the block, shape (n, 3).

    Returns the final (pos, vel, quat, x, P), the per-sample post-step
    attitude quaternions (n, 4), and the block health record.
    """
    n = gyro.shape[0]
    mech = MechConfig(params.earth_rotation, params.transport_rate)
    gm = params.gm_bank()
    sensor_errs = SensorErrors(errs[0:3], errs[3:6], errs[6:9], errs[9:12])
    Qd = _assemble_qd(params)

    state = NavState(GeoPosition(pos[0], pos[1], pos[2]), vel, Attitude(quat))
    x = np.asarray(x, dtype=float).copy()
    P = np.asarray(P, dtype=float).copy()
    quats_out = np.empty((n, 4))
    max_asym = 0.0
    psd_failures = 0

    eye = np.eye(N_STATES)
    for k in range(n):
        omega_c, f_c = correct_measurements(gyro[k], accel[k], sensor_errs)
        new_state = ins_step(state, omega_c, f_c, dt, mech)
        # Evaluate the attitude-dependent F blocks at the interval midpoint:
        # step-start evaluation leaves an O(|omega| dt) axis-mixing error
        # that high-rate motion funnels into the bias/scale states.
        q_mid = quat_normalize(
            quat_multiply(state.att.q, quat_from_rotvec(0.5 * omega_c * dt))
        )
        mid_state = NavState(state.pos, state.vel_n, Attitude(q_mid))
        F = build_F(
            mid_state,
            mid_state.att.dcm @ f_c,
            gm,
            omega_b_meas=gyro[k],
            f_b_meas=accel[k],
            cfg=mech,
        )
        state = new_state
        # Same arithmetic as eskf.predict (Phi = I + F dt, Joseph-symmetric
        # resymmetrization), inlined so the pre-resymmetrization asymmetry
        # is observable for the health record.
        Phi = eye + F * dt
        x = Phi @ x
        P_raw = Phi @ P @ Phi.T + Qd
        if params.health_checks:
            max_asym = max(max_asym, float(np.abs(P_raw - P_raw.T).max()))
        P = 0.5 * (P_raw + P_raw.T)
        if params.health_checks:
            shift = 1e-9 * float(np.trace(P))
            try:
                np.linalg.cholesky(P + shift * eye)
            except np.linalg.LinAlgError:
                psd_failures += 1
        quats_out[k] = state.att.q

    pos_out = np.array([state.pos.lat, state.pos.lon, state.pos.height])
    health = BlockHealth(max_asym=max_asym, psd_failures=psd_failures)
    return pos_out, state.vel_n, state.att.q, x, P, quats_out, health
