"""Multi-level measurement constraints and their activation detectors.

Four measurement families feed the error-state filter:

- pseudo-position: the device stays within a bounded range of the session
  start while the user walks; adaptively weighted.
- tightly-coupled accelerometer: the raw specific force compared to
  gravity, with a three-mode adaptive noise driven by the sensed linear
  acceleration.
- magnetometer during quasi-static-magnetic-field (QSMF) periods: the raw
  field compared against a locally calibrated reference, usable without
  knowing the true local field.
- quasi-static attitude update (QSAU): near rest, the gyro output is a
  direct bias measurement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import eskf
from .earth import GeoPosition, geo_offset_m
from .geometry import Attitude, skew
from .mechanization import ImuSample, NavState

__all__ = [
    "MagSample",
    "AccelMode",
    "AccelModeConfig",
    "QuasiStaticConfig",
    "QsmfConfig",
    "QsmfState",
    "MeasurementPacket",
    "AdaptivePositionNoise",
    "acceleration_mode",
    "detect_quasi_static",
    "detect_qsmf",
    "calibrate_lmf",
    "calibrate_lmf_mean",
    "pseudo_position_packet",
    "pseudo_velocity_packet",
    "accel_packet",
    "mag_packet",
    "qsau_packet",
    "trailing_mean",
    "trailing_std",
]

MAX_FIELD_UT = 1000.0


@dataclass(frozen=True)
class MagSample:
    """Timestamped magnetometer reading (uT, body frame)."""

    t: float
    m_b: NDArray[np.float64]


class AccelMode(IntEnum):
    NON_ACCELERATION = 0
    LOW_ACCELERATION = 1
    HIGH_ACCELERATION = 2


@dataclass(frozen=True)
class AccelModeConfig:
    """Thresholds and sigmas of the three-mode accelerometer noise model."""

    th_acc1: float = 0.5  # m/s^2
    th_acc2: float = 2.0  # m/s^2
    sigma_a: float = 0.05  # m/s^2, non-acceleration mode 1-sigma
    sigma_a_max: float = 100.0  # m/s^2, high-acceleration deweighting
    s_scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.th_acc1 < self.th_acc2):
            raise ValueError("thresholds must satisfy 0 < th_acc1 < th_acc2")
        if not (0.0 < self.sigma_a < self.sigma_a_max):
            raise ValueError("sigma_a must be positive and below sigma_a_max")


@dataclass(frozen=True)
class QuasiStaticConfig:
    """Quasi-static detector thresholds (window statistics of raw magnitudes)."""

    window_s: float = 1.0
    gyro_std: float = np.radians(0.3)  # rad/s
    gyro_mean: float = np.radians(0.5)  # rad/s, on the bias-corrected mean rate
    accel_std: float = 0.05  # m/s^2
    accel_mean: float = 0.1  # m/s^2, tolerance of | mean|f| - g |


@dataclass(frozen=True)
class QsmfConfig:
    """QSMF detector: stability test on the magnetometer magnitude."""

    window_s: float = 1.0
    threshold_ut: float = 1.5  # max-min bound on the smoothed magnitude
    smooth_s: float = 0.2  # moving-average length before the range test
    max_slope_ut_s: float = 5.0
    calib_samples: int = 5  # samples averaged for the field calibration
    min_span_s: float = 0.5


@dataclass
class QsmfState:
    """Bookkeeping of the current QSMF period and its calibrated field.

    ``ref_att_cov`` is the attitude-error covariance at calibration time:
    the reference inherits that uncertainty, and the measurement noise of
    every update within the period must carry it or the filter would keep
    claiming absolute heading information from a self-referenced field.
    """

    active: bool = False
    m_n_ref: NDArray[np.float64] | None = None
    period_index: int = 0
    window: deque = field(default_factory=lambda: deque(maxlen=64))
    ref_att_cov: NDArray[np.float64] | None = None

    def start_period(self, m_n_ref: ArrayLike, ref_att_cov: ArrayLike | None = None) -> None:
        self.active = True
        self.m_n_ref = np.asarray(m_n_ref, dtype=float).reshape(3)
        self.period_index += 1
        self.ref_att_cov = None if ref_att_cov is None else np.asarray(ref_att_cov, dtype=float)

    def end_period(self) -> None:
        self.active = False
        self.m_n_ref = None
        self.ref_att_cov = None


@dataclass(frozen=True)
class MeasurementPacket:
    """One ready-to-apply measurement: ``z = H x + noise`` with covariance R."""

    z: NDArray[np.float64]
    H: NDArray[np.float64]
    R: NDArray[np.float64]
    kind: str

    def __post_init__(self):
        m = self.z.shape[0]
        if self.H.shape != (m, eskf.N_STATES) or self.R.shape != (m, m):
            raise ValueError("inconsistent packet dimensions")
        np.linalg.cholesky(self.R)  # R must be positive definite


def acceleration_mode(
    f_b: ArrayLike,
    g: float,
    cfg: AccelModeConfig,
    att_cov_trace: float,
) -> tuple[AccelMode, float]:
    """
    Classify the sensed linear acceleration ``A = | |f_b| - g |`` and
    return the accelerometer measurement variance for this epoch.

    Non-acceleration: ``sigma_a^2``. Low acceleration:
    ``s * (A^2 / P) * sigma_a^2`` with ``P`` the attitude covariance trace.
    High acceleration: ``sigma_a_max^2`` (the update then contributes
    next to nothing).
    """
    if g <= 0.0:
        raise ValueError("gravity must be positive")
    A = abs(float(np.linalg.norm(np.asarray(f_b, dtype=float))) - g)
    if A <= cfg.th_acc1:
        return AccelMode.NON_ACCELERATION, cfg.sigma_a**2
    if A <= cfg.th_acc2:
        p = max(float(att_cov_trace), 1e-12)
        return AccelMode.LOW_ACCELERATION, cfg.s_scale * (A**2 / p) * cfg.sigma_a**2
    return AccelMode.HIGH_ACCELERATION, cfg.sigma_a_max**2


def _window_arrays(samples: Sequence[ImuSample]) -> tuple[NDArray, NDArray, NDArray]:
    t = np.array([s.t for s in samples])
    omega = np.array([np.asarray(s.omega_b, dtype=float) for s in samples])
    f = np.array([np.asarray(s.f_b, dtype=float) for s in samples])
    return t, omega, f


def quasi_static_decision(
    t: NDArray[np.float64],
    omega: NDArray[np.float64],
    f: NDArray[np.float64],
    cfg: QuasiStaticConfig,
    g: float,
    gyro_bias: ArrayLike | None = None,
    accel_bias: ArrayLike | None = None,
) -> bool:
    """Array form of `detect_quasi_static`; the pipeline calls this on
    stream slices so both paths take identical decisions."""
    if t.shape[0] < 2 or t[-1] - t[0] < 0.95 * cfg.window_s:
        return False
    if accel_bias is not None:
        f = f - np.asarray(accel_bias, dtype=float)
    omega_mag = np.linalg.norm(omega, axis=1)
    f_mag = np.linalg.norm(f, axis=1)
    mean_rate = omega.mean(axis=0)
    if gyro_bias is not None:
        mean_rate = mean_rate - np.asarray(gyro_bias, dtype=float)
    return bool(
        omega_mag.std() < cfg.gyro_std
        and np.linalg.norm(mean_rate) < cfg.gyro_mean
        and f_mag.std() < cfg.accel_std
        and abs(f_mag.mean() - g) < cfg.accel_mean
    )


def detect_quasi_static(
    imu_window: Sequence[ImuSample],
    cfg: QuasiStaticConfig = QuasiStaticConfig(),
    g: float = 9.80665,
    gyro_bias: ArrayLike | None = None,
    accel_bias: ArrayLike | None = None,
) -> bool:
    """
    True when the device is still enough that the gyro output is pure bias.

    Tests, over the window: the spread of the gyro and accelerometer
    magnitudes, the closeness of the mean specific force to gravity, and
    the bias-corrected mean rotation rate (which catches slow steady
    rotations that leave all the spreads small). Windows shorter than the
    configured span are not evaluable and return False.
    """
    if len(imu_window) < 2:
        return False
    t, omega, f = _window_arrays(imu_window)
    return quasi_static_decision(t, omega, f, cfg, g, gyro_bias, accel_bias)


def _smooth_trailing(values: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """Trailing moving average; the first n-1 entries use the partial window."""
    if n <= 1:
        return values
    c = np.cumsum(np.concatenate([[0.0], values]))
    out = np.empty_like(values)
    k = np.arange(1, len(values) + 1)
    lo = np.maximum(k - n, 0)
    out[:] = (c[k] - c[lo]) / (k - lo)
    return out


def detect_qsmf(mag_window: Sequence[MagSample], cfg: QsmfConfig = QsmfConfig()) -> bool:
    """
    True when the local magnetic field is quasi-static over the window.

    The magnitude series is smoothed with a short moving average, then the
    max-min range and the half-window slope are tested. Windows shorter
    than ``min_span_s`` return False.
    """
    if len(mag_window) < 2:
        return False
    t = np.array([s.t for s in mag_window])
    span = t[-1] - t[0]
    if span < 0.95 * cfg.min_span_s:
        return False
    mags = np.array([np.linalg.norm(np.asarray(s.m_b, dtype=float)) for s in mag_window])
    if np.any(mags >= MAX_FIELD_UT):
        return False
    rate = (len(t) - 1) / span
    smoothed = _smooth_trailing(mags, max(1, round(cfg.smooth_s * rate)))
    if smoothed.max() - smoothed.min() >= cfg.threshold_ut:
        return False
    h = len(smoothed) // 2
    slope = abs(smoothed[h:].mean() - smoothed[:h].mean()) / max(span / 2.0, 1e-9)
    return bool(slope < cfg.max_slope_ut_s)


def qsmf_flags(
    t: NDArray[np.float64],
    mag: NDArray[np.float64],
    cfg: QsmfConfig = QsmfConfig(),
) -> tuple[NDArray[np.bool_], NDArray[np.int_], list[int]]:
    """
    Per-sample QSMF activity over a whole stream (vectorized form of
    `detect_qsmf` with a trailing evaluation window).

    Returns ``(flags, period_index, period_starts)`` where
    ``period_index[i]`` numbers the QSMF period sample ``i`` belongs to
    (1-based, 0 outside any period) and ``period_starts[k-1]`` is the
    first sample index of period ``k``.
    """
    n = t.shape[0]
    rate = (n - 1) / (t[-1] - t[0])
    n_w = int(round(cfg.window_s * rate)) + 1
    n_s = max(1, int(round(cfg.smooth_s * rate)))
    half = max(1, n_w // 2)

    mags = np.linalg.norm(mag, axis=1)
    smoothed = _smooth_trailing(mags, n_s)
    flags = np.zeros(n, dtype=bool)
    if n >= n_w:
        win = np.lib.stride_tricks.sliding_window_view(smoothed, n_w)
        rng_ok = (win.max(axis=1) - win.min(axis=1)) < cfg.threshold_ut
        m_half = trailing_mean(smoothed, half)
        slope = np.abs(m_half[n_w - 1 :] - m_half[n_w - 1 - half : n - half]) * rate / half
        flags[n_w - 1 :] = rng_ok & (slope < cfg.max_slope_ut_s)
    flags &= mags < MAX_FIELD_UT

    rising = flags & ~np.concatenate([[False], flags[:-1]])
    period_index = np.where(flags, np.cumsum(rising), 0)
    period_starts = list(np.flatnonzero(rising))
    return flags, period_index, period_starts


def calibrate_lmf(att: Attitude, m_b_first: ArrayLike) -> NDArray[np.float64]:
    """
    Local-magnetic-field reference for a fresh QSMF period:
    the first body-frame reading rotated into the nav frame,
    ``m_n = C_b^n m_b``.
    """
    return att.dcm @ np.asarray(m_b_first, dtype=float)


def calibrate_lmf_mean(quats: ArrayLike, m_bs: ArrayLike) -> NDArray[np.float64]:
    """Average of several per-sample rotated readings (reduces sensor noise)."""
    from .geometry import dcm_from_quat

    quats = np.asarray(quats, dtype=float)
    m_bs = np.asarray(m_bs, dtype=float)
    rotated = np.array([dcm_from_quat(q) @ m for q, m in zip(quats, m_bs)])
    return rotated.mean(axis=0)


def pseudo_position_packet(
    nav: NavState, r_ref: GeoPosition, r_cov: ArrayLike
) -> MeasurementPacket:
    """
    Pseudo-position constraint: the mechanized position should stay near
    the session-start position ``r_ref``. ``r_cov`` carries the per-axis
    variances (m^2), typically from `AdaptivePositionNoise`.
    """
    z = geo_offset_m(nav.pos, r_ref)
    H = np.zeros((3, eskf.N_STATES))
    H[:, eskf.POS] = np.eye(3)
    return MeasurementPacket(z, H, np.diag(np.asarray(r_cov, dtype=float)), "pseudo_position")


def pseudo_velocity_packet(nav: NavState, v_sigma: float) -> MeasurementPacket:
    """Optional zero-velocity pseudo-observation (disabled by default while walking)."""
    H = np.zeros((3, eskf.N_STATES))
    H[:, eskf.VEL] = np.eye(3)
    return MeasurementPacket(nav.vel_n.copy(), H, v_sigma**2 * np.eye(3), "pseudo_velocity")


def accel_packet(
    nav: NavState, f_b: ArrayLike, mode_sigma2: float, g: float
) -> MeasurementPacket:
    """
    Tightly-coupled accelerometer measurement: compares the raw specific
    force rotated by the current attitude with nav-frame gravity. Only the
    attitude-error columns are populated; accelerometer deterministic
    errors are deliberately neglected here.
    """
    f_n_ref = np.array([0.0, 0.0, -g])
    z = f_n_ref - nav.att.dcm @ np.asarray(f_b, dtype=float)
    H = np.zeros((3, eskf.N_STATES))
    H[:, eskf.ATT] = skew([0.0, 0.0, g])
    return MeasurementPacket(z, H, mode_sigma2 * np.eye(3), "accel")


def mag_packet(
    nav: NavState, m_b: ArrayLike, qsmf: QsmfState, mag_sigma: float
) -> MeasurementPacket | None:
    """
    Magnetometer measurement against the calibrated per-period field.

    Needs no leveling: the model is a function of the raw reading and the
    attitude only. Returns None while no QSMF period is active. The noise
    covariance combines the sensor noise with the attitude uncertainty
    inherited by the reference at calibration time.
    """
    if not qsmf.active or qsmf.m_n_ref is None:
        return None
    z = nav.att.dcm @ np.asarray(m_b, dtype=float) - qsmf.m_n_ref
    H = np.zeros((3, eskf.N_STATES))
    M = skew(qsmf.m_n_ref)
    H[:, eskf.ATT] = M
    R = mag_sigma**2 * np.eye(3)
    if qsmf.ref_att_cov is not None:
        R = R + M @ qsmf.ref_att_cov @ M.T
    return MeasurementPacket(z, H, R, "mag")


def qsau_packet(omega_b: ArrayLike, qs_sigma: float) -> MeasurementPacket:
    """Quasi-static attitude update: the gyro output measures the bias directly."""
    z = np.asarray(omega_b, dtype=float).reshape(3).copy()
    H = np.zeros((3, eskf.N_STATES))
    H[:, eskf.BG] = np.eye(3)
    return MeasurementPacket(z, H, qs_sigma**2 * np.eye(3), "qsau")


class AdaptivePositionNoise:
    """
    Pseudo-position noise tuning: start from a rough prior, then scale by
    the position excursion observed over a sliding window.

    The excursion enters with a margin factor: the walked displacement is
    a legitimate signal, not a position error, so the pseudo-position
    innovations must stay well inside their assumed noise or they leak
    systematically into the correlated attitude/bias states.
    """

    def __init__(
        self,
        prior_sigma_m: float = 5.0,
        window_s: float = 10.0,
        margin: float = 3.0,
    ):
        self.prior_sigma_m = prior_sigma_m
        self.window_s = window_s
        self.margin = margin
        self._hist: deque[tuple[float, NDArray[np.float64]]] = deque()

    def observe(self, t: float, offset_m: ArrayLike) -> None:
        """Record the NED offset (m) of the current position from the reference."""
        self._hist.append((t, np.abs(np.asarray(offset_m, dtype=float))))
        while self._hist and self._hist[0][0] < t - self.window_s:
            self._hist.popleft()

    def r_cov(self) -> NDArray[np.float64]:
        """Per-axis variances (m^2): max(prior, margin * windowed excursion)^2."""
        sigma = np.full(3, self.prior_sigma_m)
        if self._hist:
            exc = np.max(np.array([h[1] for h in self._hist]), axis=0)
            sigma = np.maximum(sigma, self.margin * exc)
        return sigma**2


def trailing_mean(values: ArrayLike, n: int) -> NDArray[np.float64]:
    """Trailing-window mean; entries before a full window are NaN.

    Matches the statistics used by the sample-sequence detectors so the
    vectorized pipeline and the public detectors take identical decisions.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    if len(values) < n:
        return out
    c = np.cumsum(np.concatenate([np.zeros((1,) + values.shape[1:]), values]), axis=0)
    out[n - 1 :] = (c[n:] - c[:-n]) / n
    return out


def trailing_std(values: ArrayLike, n: int) -> NDArray[np.float64]:
    """Trailing-window population std; entries before a full window are NaN."""
    values = np.asarray(values, dtype=float)
    m1 = trailing_mean(values, n)
    m2 = trailing_mean(values**2, n)
    return np.sqrt(np.clip(m2 - m1**2, 0.0, None))
