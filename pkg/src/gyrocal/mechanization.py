"""Strapdown INS mechanization in the local-level NED frame.

One `ins_step` consumes an IMU sample interpreted as the average angular
rate / specific force over the step interval (integrating-sensor
convention) and advances position, velocity and attitude. `invert_step`
is the exact algebraic inverse used by the simulator to manufacture
sample streams that mechanize back to a prescribed trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .earth import (
    GeoPosition,
    earth_rate_n,
    gravity_magnitude,
    radii_of_curvature,
    transport_rate_n,
)
from .exceptions import MalformedStreamError
from .geometry import (
    Attitude,
    dcm_from_quat,
    quat_conjugate,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    rotvec_from_quat,
)

MAX_STEP_DT = 0.1  # s


@dataclass
class NavState:
    """Total navigation state: geodetic position, NED velocity, attitude."""

    pos: GeoPosition
    vel_n: NDArray[np.float64]
    att: Attitude

    def __post_init__(self):
        self.vel_n = np.asarray(self.vel_n, dtype=float).reshape(3).copy()
        if not np.isfinite(self.vel_n).all():
            raise ValueError("velocity components must be finite")

    def copy(self) -> "NavState":
        return NavState(self.pos, self.vel_n.copy(), Attitude(self.att.q))


@dataclass(frozen=True)
class ImuSample:
    """Timestamped gyro/accel pair: average rates over the preceding interval."""

    t: float
    omega_b: NDArray[np.float64]
    f_b: NDArray[np.float64]


@dataclass(frozen=True)
class MechConfig:
    """Mechanization options.

    Earth-rate and transport-rate compensation are physically correct but
    far below the noise floor of consumer gyros; tests exercise both
    settings.
    """

    earth_rotation: bool = True
    transport_rate: bool = True


def _nav_rates(
    pos: GeoPosition, v_n: NDArray[np.float64], cfg: MechConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    w_ie = earth_rate_n(pos.lat) if cfg.earth_rotation else np.zeros(3)
    w_en = transport_rate_n(pos, v_n) if cfg.transport_rate else np.zeros(3)
    return w_ie, w_en


def ins_step(
    state: NavState,
    omega_b: ArrayLike,
    f_b: ArrayLike,
    dt: float,
    cfg: MechConfig = MechConfig(),
) -> NavState:
    """
    Advance the navigation state by one IMU interval.

    Parameters
    ----------
    state : NavState
        State at the start of the interval.
    omega_b, f_b : array-like, shape (3,)
        Average body angular rate (rad/s) and specific force (m/s^2) over
        the interval, already corrected for estimated sensor errors.
    dt : float
        Interval length (s); must satisfy ``0 < dt <= 0.1``.

    Notes
    -----
    Single-sample update: attitude by body/nav rotation increments,
    velocity with the specific force rotated through the midpoint
    attitude plus gravity and Coriolis terms, position by trapezoidal
    integration of velocity. No coning/sculling compensation; second-order
    terms are negligible for pedestrian dynamics at >= 50 Hz sampling.
    """
    if not (0.0 < dt <= MAX_STEP_DT):
        raise MalformedStreamError(f"step dt out of range (0, {MAX_STEP_DT}]: {dt}")
    omega_b = np.asarray(omega_b, dtype=float)
    f_b = np.asarray(f_b, dtype=float)

    pos, v_old, q_old = state.pos, state.vel_n, state.att.q
    w_ie, w_en = _nav_rates(pos, v_old, cfg)
    zeta = (w_ie + w_en) * dt
    phi_b = omega_b * dt

    # Attitude: C_new = R(-zeta) C_old R(phi_b).
    q_new = quat_multiply(quat_from_rotvec(-zeta), quat_multiply(q_old, quat_from_rotvec(phi_b)))
    q_new = quat_normalize(q_new)

    # Velocity: rotate specific force through the midpoint attitude.
    C_mid = dcm_from_quat(
        quat_multiply(quat_from_rotvec(-0.5 * zeta), quat_multiply(q_old, quat_from_rotvec(0.5 * phi_b)))
    )
    f_n = C_mid @ f_b
    g_n = np.array([0.0, 0.0, gravity_magnitude(pos.lat, pos.height)])
    coriolis = -np.cross(2.0 * w_ie + w_en, v_old)
    v_new = v_old + (f_n + g_n + coriolis) * dt

    # Position: trapezoid on velocity with radii frozen at the old position.
    v_avg = 0.5 * (v_old + v_new)
    r_m, r_n = radii_of_curvature(pos.lat)
    lat_new = pos.lat + v_avg[0] / (r_m + pos.height) * dt
    lon_new = pos.lon + v_avg[1] / ((r_n + pos.height) * np.cos(pos.lat)) * dt
    h_new = pos.height - v_avg[2] * dt

    return NavState(GeoPosition(lat_new, lon_new, h_new), v_new, Attitude(q_new))


def invert_step(
    state: NavState,
    next_vel_n: ArrayLike,
    next_q: ArrayLike,
    dt: float,
    cfg: MechConfig = MechConfig(),
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Solve for the IMU sample that makes `ins_step` land exactly on the
    given next velocity and attitude.

    Returns ``(omega_b, f_b)``. The position part of `ins_step` follows
    deterministically from the velocities, so it needs no inversion.
    """
    if not (0.0 < dt <= MAX_STEP_DT):
        raise MalformedStreamError(f"step dt out of range (0, {MAX_STEP_DT}]: {dt}")
    next_vel_n = np.asarray(next_vel_n, dtype=float)
    next_q = np.asarray(next_q, dtype=float)

    pos, v_old, q_old = state.pos, state.vel_n, state.att.q
    w_ie, w_en = _nav_rates(pos, v_old, cfg)
    zeta = (w_ie + w_en) * dt

    # quat(phi_b) = q_old^-1 * quat(zeta) * q_new
    q_body = quat_multiply(
        quat_conjugate(q_old), quat_multiply(quat_from_rotvec(zeta), next_q)
    )
    phi_b = rotvec_from_quat(quat_normalize(q_body))
    omega_b = phi_b / dt

    C_mid = dcm_from_quat(
        quat_multiply(quat_from_rotvec(-0.5 * zeta), quat_multiply(q_old, quat_from_rotvec(0.5 * phi_b)))
    )
    g_n = np.array([0.0, 0.0, gravity_magnitude(pos.lat, pos.height)])
    coriolis = -np.cross(2.0 * w_ie + w_en, v_old)
    f_n = (next_vel_n - v_old) / dt - g_n - coriolis
    f_b = C_mid.T @ f_n
    return omega_b, f_b
