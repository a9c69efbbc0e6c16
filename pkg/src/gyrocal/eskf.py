"""21-state error-state Kalman filter.

Error vector ordering (fixed; every measurement matrix indexes it):

====  =========  =============================================
slice  symbol     meaning
====  =========  =============================================
0:3   delta r^n  position error, m, NED
3:6   delta v^n  velocity error, m/s, NED
6:9   psi        attitude error, rad (C_hat = (I - [psi x]) C)
9:12  b_g        gyro bias error, rad/s
12:15 b_a        accel bias error, m/s^2
15:18 ds_g       gyro scale-factor error
18:21 ds_a       accel scale-factor error
====  =========  =============================================

The filter runs closed loop: after every feedback the error state is
exactly zero, so the time update propagates covariance only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import chi2, norm

from .earth import earth_rate_n, transport_rate_n
from .geometry import apply_attitude_error, skew
from .mechanization import MechConfig, NavState
from .sensors import GaussMarkovSpec, NoiseSpec, SensorErrors, gm_discretize
from .earth import geo_shift

logger = logging.getLogger(__name__)

N_STATES = 21
POS = slice(0, 3)
VEL = slice(3, 6)
ATT = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
SG = slice(15, 18)
SA = slice(18, 21)


@dataclass(frozen=True)
class GmBank:
    """Gauss-Markov specs of the four slowly varying sensor-error groups."""

    gyro_bias: GaussMarkovSpec = GaussMarkovSpec(3600.0, np.radians(5.0))
    accel_bias: GaussMarkovSpec = GaussMarkovSpec(3600.0, 0.58860)  # 60 mg
    gyro_scale: GaussMarkovSpec = GaussMarkovSpec(7200.0, 5000e-6)
    accel_scale: GaussMarkovSpec = GaussMarkovSpec(7200.0, 5000e-6)


@dataclass(frozen=True)
class EvaluationGates:
    """Confidence thresholds for releasing calibration results.

    The filter itself always runs closed loop; a sensor-error group is
    exported (reported, handed to navigation consumers) only once every
    diagonal sigma of its covariance block has shrunk below the threshold.
    Withholding the transfer inside the filter instead would desynchronize
    the estimate from its covariance and measurably corrupts the solution.
    """

    gyro_bias: float = np.radians(1.0)  # rad/s
    accel_bias: float = 0.2  # m/s^2
    gyro_scale: float = 0.004
    accel_scale: float = 0.004


def evaluation_passed(P: NDArray[np.float64], gates: EvaluationGates) -> dict[str, bool]:
    """Which sensor-error groups currently satisfy their evaluation gate."""
    sig = np.sqrt(np.diag(P))
    return {
        "gyro_bias": bool(sig[BG].max() < gates.gyro_bias),
        "accel_bias": bool(sig[BA].max() < gates.accel_bias),
        "gyro_scale": bool(sig[SG].max() < gates.gyro_scale),
        "accel_scale": bool(sig[SA].max() < gates.accel_scale),
    }


def build_F(
    state: NavState,
    f_n: ArrayLike,
    gm: GmBank,
    omega_b_meas: ArrayLike | None = None,
    f_b_meas: ArrayLike | None = None,
    cfg: MechConfig = MechConfig(),
) -> NDArray[np.float64]:
    """
    Continuous-time system matrix of the psi-angle error model augmented
    with Gauss-Markov sensor-error states.

    Parameters
    ----------
    state : NavState
        Nominal state the model is linearized about.
    f_n : array-like, shape (3,)
        Specific force in the nav frame (corrected measurement rotated by
        the current attitude).
    gm : GmBank
        Correlation times for the sensor-error diagonal blocks.
    omega_b_meas, f_b_meas : array-like, optional
        Measured (raw) body rates / specific force; they enter the
        scale-factor coupling columns. Zero when omitted.
    """
    f_n = np.asarray(f_n, dtype=float)
    w_ie = earth_rate_n(state.pos.lat) if cfg.earth_rotation else np.zeros(3)
    w_en = transport_rate_n(state.pos, state.vel_n) if cfg.transport_rate else np.zeros(3)
    C = state.att.dcm

    F = np.zeros((N_STATES, N_STATES))
    F[POS, POS] = -skew(w_en)
    F[POS, VEL] = np.eye(3)
    F[VEL, VEL] = -skew(2.0 * w_ie + w_en)
    F[VEL, ATT] = skew(f_n)
    F[VEL, BA] = C
    F[ATT, ATT] = -skew(w_ie + w_en)
    F[ATT, BG] = -C
    if f_b_meas is not None:
        F[VEL, SA] = C * np.asarray(f_b_meas, dtype=float)  # C @ diag(f_b)
    if omega_b_meas is not None:
        F[ATT, SG] = -C * np.asarray(omega_b_meas, dtype=float)
    for sl, spec in ((BG, gm.gyro_bias), (BA, gm.accel_bias), (SG, gm.gyro_scale), (SA, gm.accel_scale)):
        F[sl, sl] = -np.eye(3) / spec.tau
    return F


def build_Qd(noise: NoiseSpec, gm: GmBank, dt: float) -> NDArray[np.float64]:
    """
    Discrete process-noise matrix for one step of length ``dt``.

    VRW/ARW densities map into the velocity/attitude rows through C_b^n;
    the noise is isotropic, so the rotation collapses to the identity and
    the diagonal is written directly. Gauss-Markov states get their exact
    discrete driving variance.
    """
    Qd = np.zeros((N_STATES, N_STATES))
    Qd[VEL, VEL] = noise.accel_vrw**2 * dt * np.eye(3)
    Qd[ATT, ATT] = noise.gyro_arw**2 * dt * np.eye(3)
    for sl, spec in ((BG, gm.gyro_bias), (BA, gm.accel_bias), (SG, gm.gyro_scale), (SA, gm.accel_scale)):
        _, qd = gm_discretize(spec, dt)
        Qd[sl, sl] = qd * np.eye(3)
    return Qd


def predict(
    x: NDArray[np.float64],
    P: NDArray[np.float64],
    F: NDArray[np.float64],
    Qd: NDArray[np.float64],
    dt: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Kalman time update with the first-order transition ``Phi = I + F dt``.

    Returns the propagated error state and covariance (resymmetrized).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    Phi = np.eye(N_STATES) + F * dt
    x_new = Phi @ x
    P_new = Phi @ P @ Phi.T + Qd
    P_new = 0.5 * (P_new + P_new.T)
    return x_new, P_new


class UpdateResult(NamedTuple):
    x: NDArray[np.float64]
    P: NDArray[np.float64]
    innovation: NDArray[np.float64]
    accepted: bool
    nis: float


def innovation_gate_threshold(gate_sigma: float, m: int) -> float:
    """Chi-square NIS threshold equivalent to a two-sided ``gate_sigma`` test."""
    p_tail = 2.0 * norm.sf(gate_sigma)
    return float(chi2.isf(p_tail, m))


def update(
    x: NDArray[np.float64],
    P: NDArray[np.float64],
    H: NDArray[np.float64],
    R: NDArray[np.float64],
    z: NDArray[np.float64],
    gate_sigma: float | None = None,
) -> UpdateResult:
    """
    Kalman measurement update in Joseph form.

    When ``gate_sigma`` is given, the normalized innovation squared is
    tested against the equivalent chi-square threshold and the update is
    skipped (state and covariance unchanged, ``accepted=False``) on
    failure.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    m = z.shape[0]

    innov = z - H @ x
    S = H @ P @ H.T + R
    nis = float(innov @ np.linalg.solve(S, innov))
    if gate_sigma is not None and nis > innovation_gate_threshold(gate_sigma, m):
        logger.debug("innovation gated out: nis=%.2f dim=%d", nis, m)
        return UpdateResult(x.copy(), P.copy(), innov, False, nis)

    K = np.linalg.solve(S.T, H @ P).T  # P H^T S^-1
    x_new = x + K @ innov
    IKH = np.eye(N_STATES) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return UpdateResult(x_new, P_new, innov, True, nis)


def feedback(
    nav: NavState,
    errs: SensorErrors,
    x: NDArray[np.float64],
) -> tuple[NavState, SensorErrors, NDArray[np.float64]]:
    """
    Transfer the estimated errors into the nominal state (closed-loop
    reset): position, velocity and attitude are corrected, the sensor
    error groups accumulate into `SensorErrors`, and the returned error
    state is exactly zero. A scale-factor increment whose application
    would violate the `SensorErrors` invariants is rejected and those
    error states are retained instead.
    """
    x = np.asarray(x, dtype=float)
    nav_new = NavState(
        geo_shift(nav.pos, -x[POS]),
        nav.vel_n - x[VEL],
        apply_attitude_error(nav.att, x[ATT]),
    )

    x_new = np.zeros(N_STATES)
    b_g = errs.b_g + x[BG]
    b_a = errs.b_a + x[BA]
    try:
        errs_new = SensorErrors(b_g, b_a, errs.s_g + x[SG], errs.s_a + x[SA])
    except ValueError:
        # Scale estimates out of bounds: keep the previous scale values and
        # retain the offending states; the bias groups still go through.
        logger.warning("feedback rejected: sensor-error invariants violated")
        x_new[SG] = x[SG]
        x_new[SA] = x[SA]
        errs_new = SensorErrors(b_g, b_a, errs.s_g.copy(), errs.s_a.copy())
    return nav_new, errs_new, x_new
