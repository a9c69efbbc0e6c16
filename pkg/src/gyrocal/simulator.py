"""Synthetic pedestrian-motion and magnetic-environment generator.

Trajectories are built from analytic attitude/velocity templates (per-mode
sinusoidal oscillations on top of constant-velocity walking, with a
static lead-in and a quasi-static tail). The emitted gyro/accel samples
are obtained by inverting the mechanization step between consecutive
truth states, so mechanizing the noise-free stream reproduces the
trajectory to floating-point precision; samples carry interval-average
rates (integrating-sensor convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .constraints import QuasiStaticConfig, detect_quasi_static
from .earth import EARTH_RATE, GeoPosition
from .exceptions import ReferenceUnavailableError
from .geometry import quat_conjugate, quat_from_rotvec, quat_multiply, quat_normalize, rotvec_from_quat
from .mechanization import ImuSample, MechConfig
from .sensors import NoiseSpec, SensorErrors, apply_errors

D2R = np.pi / 180.0
MAX_RATE_DPS = 500.0

MOTION_MODES = ("static", "handheld", "phoning", "dangling", "pocket", "belt", "backpack")


@dataclass(frozen=True)
class MotionProfile:
    """Per-mode trajectory template.

    Attitude oscillation amplitudes are (roll, pitch, yaw) in rad; their
    frequencies are multiples of the step frequency. Linear acceleration
    amplitudes are NED peak accelerations (m/s^2) realized as velocity
    sinusoids. Amplitude values are design values tuned to reproduce the
    qualitative per-mode dynamics ordering (dangling and pocket carry the
    strongest gyro signal).
    """

    mode: str
    walk_speed: float = 1.2  # m/s
    step_frequency: float = 1.8  # Hz
    base_euler: tuple[float, float, float] = (0.0, 0.0, 0.0)
    att_amp: tuple[float, float, float] = (0.0, 0.0, 0.0)
    att_freq_mult: tuple[float, float, float] = (1.0, 1.0, 0.5)
    att_phase: tuple[float, float, float] = (0.0, 1.3, 2.1)
    acc_amp: tuple[float, float, float] = (0.0, 0.0, 0.0)
    acc_freq_mult: tuple[float, float, float] = (1.0, 0.5, 1.0)
    acc_phase: tuple[float, float, float] = (0.4, 1.9, 0.0)
    heading_meander: float = np.radians(8.0)
    heading_meander_freq: float = 0.05  # Hz
    # Broadband jolt/vibration content riding on the smooth gait template;
    # it is what separates the ragged high-dynamics modes from the calm ones.
    jitter_att_amp: float = 0.0  # rad, per jitter tone and axis
    jitter_acc_amp: float = 0.0  # m/s^2, per jitter tone and axis
    jitter_freqs: tuple[float, ...] = (4.7, 7.3, 11.1)  # Hz

    def __post_init__(self):
        if self.mode not in MOTION_MODES:
            raise ValueError(f"unknown motion mode: {self.mode}")
        if self.mode != "static" and not (0.5 < self.step_frequency < 3.0):
            raise ValueError("step frequency must lie in (0.5, 3) Hz")
        peak = max(
            a * 2.0 * np.pi * m * self.step_frequency
            for a, m in zip(self.att_amp, self.att_freq_mult)
        ) if self.mode != "static" else 0.0
        if peak > MAX_RATE_DPS * D2R:
            raise ValueError("attitude amplitudes exceed the 500 deg/s gyro range")

    def peak_rate(self) -> float:
        """Upper bound of the oscillatory body rate (rad/s)."""
        return sum(
            a * 2.0 * np.pi * m * self.step_frequency
            for a, m in zip(self.att_amp, self.att_freq_mult)
        )


def _preset(mode, **kw) -> MotionProfile:
    return MotionProfile(mode=mode, **kw)


MODE_PRESETS: dict[str, MotionProfile] = {
    "static": _preset("static", walk_speed=0.0, att_amp=(0.0, 0.0, 0.0), heading_meander=0.0),
    "handheld": _preset(
        "handheld",
        jitter_att_amp=np.radians(0.15),
        jitter_acc_amp=0.15,
        base_euler=(0.0, -0.5, 0.0),
        att_amp=(np.radians(2.0), np.radians(3.0), np.radians(4.0)),
        att_freq_mult=(1.0, 1.0, 0.5),
        acc_amp=(0.8, 0.6, 2.5),
        acc_freq_mult=(1.0, 0.5, 1.0),
    ),
    "phoning": _preset(
        "phoning",
        jitter_att_amp=np.radians(0.2),
        jitter_acc_amp=0.2,
        base_euler=(np.radians(60.0), np.radians(-15.0), np.radians(20.0)),
        att_amp=(np.radians(3.0), np.radians(2.0), np.radians(3.0)),
        att_freq_mult=(1.0, 1.0, 0.5),
        acc_amp=(0.6, 0.8, 2.0),
        acc_freq_mult=(1.0, 0.5, 1.0),
    ),
    "dangling": _preset(
        "dangling",
        jitter_att_amp=np.radians(2.5),
        jitter_acc_amp=2.0,
        base_euler=(0.0, np.radians(-70.0), 0.0),
        att_amp=(np.radians(8.0), np.radians(40.0), np.radians(6.0)),
        att_freq_mult=(1.0, 0.5, 0.5),
        acc_amp=(3.0, 1.5, 5.0),
        acc_freq_mult=(0.5, 0.5, 1.0),
    ),
    "pocket": _preset(
        "pocket",
        jitter_att_amp=np.radians(2.0),
        jitter_acc_amp=1.5,
        base_euler=(np.radians(10.0), np.radians(-75.0), np.radians(5.0)),
        att_amp=(np.radians(10.0), np.radians(35.0), np.radians(6.0)),
        att_freq_mult=(1.0, 0.5, 0.5),
        acc_amp=(2.5, 1.5, 4.5),
        acc_freq_mult=(0.5, 0.5, 1.0),
    ),
    "belt": _preset(
        "belt",
        jitter_att_amp=np.radians(0.3),
        jitter_acc_amp=0.3,
        base_euler=(np.radians(90.0), 0.0, 0.0),
        att_amp=(np.radians(6.0), np.radians(4.0), np.radians(5.0)),
        att_freq_mult=(1.0, 1.0, 0.5),
        acc_amp=(1.0, 1.5, 3.0),
        acc_freq_mult=(1.0, 0.5, 1.0),
    ),
    "backpack": _preset(
        "backpack",
        jitter_att_amp=np.radians(0.1),
        jitter_acc_amp=0.1,
        base_euler=(0.0, np.radians(85.0), 0.0),
        att_amp=(np.radians(1.5), np.radians(2.0), np.radians(2.0)),
        att_freq_mult=(1.0, 1.0, 0.5),
        acc_amp=(0.5, 0.8, 2.2),
        acc_freq_mult=(1.0, 0.5, 1.0),
    ),
}


@dataclass(frozen=True)
class MagSegment:
    """One piecewise-constant span of the local magnetic field."""

    start_s: float
    lmf_n: tuple[float, float, float]
    wobble_amp_ut: float = 0.0  # continuous magnitude disturbance
    wobble_freq_hz: float = 1.3


@dataclass(frozen=True)
class MagEnvironment:
    """Ordered field segments with linear transitions between them."""

    segments: tuple[MagSegment, ...]
    transition_s: float = 0.5

    def __post_init__(self):
        starts = [s.start_s for s in self.segments]
        if sorted(starts) != starts or len(set(starts)) != len(starts):
            raise ValueError("segment start times must be strictly increasing")
        for s in self.segments:
            mag = np.linalg.norm(s.lmf_n)
            if not (10.0 < mag < 100.0):
                raise ValueError(f"LMF magnitude out of range (10, 100) uT: {mag:.1f}")

    def field_at(self, t: NDArray[np.float64]) -> NDArray[np.float64]:
        """LMF vector (uT, NED) at each time; vectorized over t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 3))
        starts = np.array([s.start_s for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        for k, seg in enumerate(self.segments):
            sel = idx == k
            if not sel.any():
                continue
            vec = np.tile(np.asarray(seg.lmf_n, dtype=float), (int(sel.sum()), 1))
            tk = t[sel]
            if k > 0 and self.transition_s > 0.0:
                w = np.clip((tk - seg.start_s) / self.transition_s, 0.0, 1.0)
                prev = np.asarray(self.segments[k - 1].lmf_n, dtype=float)
                vec = (1.0 - w)[:, None] * prev + w[:, None] * vec
            if seg.wobble_amp_ut > 0.0:
                norm = np.linalg.norm(vec, axis=1)
                mod = 1.0 + seg.wobble_amp_ut * np.sin(
                    2.0 * np.pi * seg.wobble_freq_hz * (tk - seg.start_s)
                ) / norm
                vec = vec * mod[:, None]
            out[sel] = vec
        return out


OUTDOOR_LMF = (20.4, 3.0, 48.0)


def outdoor_environment() -> MagEnvironment:
    """Stable field for the whole session."""
    return MagEnvironment((MagSegment(0.0, OUTDOOR_LMF),))


def indoor_environment(
    duration_s: float,
    seed: int,
    stable_s: float = 24.0,
    disturbed_s: float = 16.0,
) -> MagEnvironment:
    """
    Piecewise-perturbed field: direction changes up to 40 degrees and
    magnitude changes up to 15 uT between segments, alternating stable
    spans with continuously disturbed ones. At walking speed the default
    rhythm corresponds to magnetic features every 6-12 m, and it puts the
    quasi-static fraction mid-way into the 30-70% band.
    """
    rng = np.random.default_rng(seed + 77_003)
    base = np.asarray(OUTDOOR_LMF, dtype=float)
    segs = []
    t0 = 0.0
    k = 0
    while t0 < duration_s:
        yaw = rng.uniform(-np.radians(40.0), np.radians(40.0))
        c, s = np.cos(yaw), np.sin(yaw)
        vec = np.array([c * base[0] - s * base[1], s * base[0] + c * base[1], base[2]])
        vec = vec * (1.0 + rng.uniform(-0.25, 0.25))
        mag = np.linalg.norm(vec)
        target = np.clip(mag + rng.uniform(-15.0, 15.0), 25.0, 90.0)
        vec = vec * (target / mag)
        disturbed = k % 2 == 1
        segs.append(MagSegment(t0, tuple(vec), 2.5 if disturbed else 0.0))
        t0 += disturbed_s if disturbed else stable_s
        k += 1
    return MagEnvironment(tuple(segs))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate one deterministic scenario."""

    profile: MotionProfile
    environment: MagEnvironment
    errors: SensorErrors = field(default_factory=SensorErrors)
    noise: NoiseSpec = NoiseSpec()
    duration_s: float = 120.0
    seed: int = 0
    lead_in_s: float = 2.0
    tail_s: float = 30.0
    ramp_s: float = 1.5
    start: GeoPosition = GeoPosition(np.radians(51.0), np.radians(-114.0), 1045.0)
    mech: MechConfig = MechConfig()

    def __post_init__(self):
        if self.duration_s <= 0.0:
            raise ValueError("duration must be positive")

    @property
    def total_s(self) -> float:
        return self.lead_in_s + self.duration_s + self.tail_s


@dataclass
class TruthData:
    """Ground-truth trajectory and noise-free sensor streams (row k at t[k])."""

    t: NDArray[np.float64]
    lat: NDArray[np.float64]
    lon: NDArray[np.float64]
    h: NDArray[np.float64]
    vel_n: NDArray[np.float64]
    quat: NDArray[np.float64]
    omega_b: NDArray[np.float64]  # interval-average over (t[k-1], t[k]]
    f_b: NDArray[np.float64]
    m_b: NDArray[np.float64]
    lmf_n: NDArray[np.float64]


@dataclass
class StreamData:
    """Corrupted sensor streams in the CSV column layout."""

    t: NDArray[np.float64]
    gyro: NDArray[np.float64]
    accel: NDArray[np.float64]
    mag: NDArray[np.float64] | None


def _smoothstep(x: NDArray[np.float64]) -> NDArray[np.float64]:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _batched_dcm(q: NDArray[np.float64]) -> NDArray[np.float64]:
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    C = np.empty((q.shape[0], 3, 3))
    C[:, 0, 0] = 1 - 2 * (y * y + z * z)
    C[:, 0, 1] = 2 * (x * y - w * z)
    C[:, 0, 2] = 2 * (x * z + w * y)
    C[:, 1, 0] = 2 * (x * y + w * z)
    C[:, 1, 1] = 1 - 2 * (x * x + z * z)
    C[:, 1, 2] = 2 * (y * z - w * x)
    C[:, 2, 0] = 2 * (x * z - w * y)
    C[:, 2, 1] = 2 * (y * z + w * x)
    C[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return C


def generate_truth(cfg: ScenarioConfig) -> TruthData:
    """
    Build the kinematically consistent ground-truth stream for a scenario.

    The attitude and velocity histories are analytic; position integrates
    velocity with the mechanization's own trapezoid rule, and the IMU
    samples are the exact per-interval increments that make the
    mechanization land on the truth states.
    """
    p = cfg.profile
    rate = cfg.noise.sample_rate
    dt = 1.0 / rate
    n = int(round(cfg.total_s * rate))
    t = np.arange(n + 1) * dt

    # motion envelope: zero in lead-in and tail, smooth ramps at the edges
    env = _smoothstep((t - cfg.lead_in_s) / cfg.ramp_s) * (
        1.0 - _smoothstep((t - (cfg.lead_in_s + cfg.duration_s - cfg.ramp_s)) / cfg.ramp_s)
    )
    if p.mode == "static":
        env = np.zeros_like(t)

    f_step = p.step_frequency
    roll = p.base_euler[0] + env * p.att_amp[0] * np.sin(
        2 * np.pi * f_step * p.att_freq_mult[0] * t + p.att_phase[0]
    )
    pitch = p.base_euler[1] + env * p.att_amp[1] * np.sin(
        2 * np.pi * f_step * p.att_freq_mult[1] * t + p.att_phase[1]
    )
    yaw = p.base_euler[2] + env * (
        p.att_amp[2] * np.sin(2 * np.pi * f_step * p.att_freq_mult[2] * t + p.att_phase[2])
        + p.heading_meander * np.sin(2 * np.pi * p.heading_meander_freq * t)
    )

    if p.jitter_att_amp > 0.0 or p.jitter_acc_amp > 0.0:
        jrng = np.random.default_rng(cfg.seed + 40_087)
        jit = np.zeros((3, t.size))
        for f_j in p.jitter_freqs:
            ph = jrng.uniform(0.0, 2 * np.pi, 3)
            jit += np.sin(2 * np.pi * f_j * t[None, :] + ph[:, None])
        roll = roll + env * p.jitter_att_amp * jit[0]
        pitch = pitch + env * p.jitter_att_amp * jit[1]
        yaw = yaw + env * p.jitter_att_amp * jit[2]

    zeros = np.zeros_like(t)
    qz = quat_from_rotvec(np.stack([zeros, zeros, yaw], axis=-1))
    qy = quat_from_rotvec(np.stack([zeros, pitch, zeros], axis=-1))
    qx = quat_from_rotvec(np.stack([roll, zeros, zeros], axis=-1))
    quat = quat_normalize(quat_multiply(qz, quat_multiply(qy, qx)))

    vel = np.zeros((n + 1, 3))
    vel[:, 0] = p.walk_speed * env
    for ax in range(3):
        amp = p.acc_amp[ax]
        if amp == 0.0:
            continue
        f_ax = f_step * p.acc_freq_mult[ax]
        vel[:, ax] += env * amp / (2 * np.pi * f_ax) * np.sin(
            2 * np.pi * f_ax * t + p.acc_phase[ax]
        )
    if p.jitter_acc_amp > 0.0:
        jrng_v = np.random.default_rng(cfg.seed + 40_091)
        for f_j in p.jitter_freqs:
            ph = jrng_v.uniform(0.0, 2 * np.pi, 3)
            vel += (
                env[:, None]
                * p.jitter_acc_amp
                / (2 * np.pi * f_j)
                * np.sin(2 * np.pi * f_j * t[:, None] + ph[None, :])
            )

    # Position: the mechanization's trapezoid with radii at the old point.
    lat = np.empty(n + 1)
    lon = np.empty(n + 1)
    h = np.empty(n + 1)
    lat[0], lon[0], h[0] = cfg.start.lat, cfg.start.lon, cfg.start.height
    e2 = 1.0 - (1.0 - 1.0 / 298.257223563) ** 2
    a_ax = 6378137.0
    for k in range(1, n + 1):
        la, hh = lat[k - 1], h[k - 1]
        s2 = math.sin(la) ** 2
        d = 1.0 - e2 * s2
        r_n = a_ax / math.sqrt(d)
        r_m = a_ax * (1.0 - e2) / (d * math.sqrt(d))
        v_avg = 0.5 * (vel[k - 1] + vel[k])
        lat[k] = la + v_avg[0] / (r_m + hh) * dt
        lon[k] = lon[k - 1] + v_avg[1] / ((r_n + hh) * math.cos(la)) * dt
        h[k] = hh - v_avg[2] * dt

    # Nav-frame rotation rates and gravity at the start of each interval.
    w_ie = np.zeros((n + 1, 3))
    if cfg.mech.earth_rotation:
        w_ie[:, 0] = EARTH_RATE * np.cos(lat)
        w_ie[:, 2] = -EARTH_RATE * np.sin(lat)
    w_en = np.zeros((n + 1, 3))
    if cfg.mech.transport_rate:
        r_m_all, r_n_all = radii_of_curvature_vec(lat)
        w_en[:, 0] = vel[:, 1] / (r_n_all + h)
        w_en[:, 1] = -vel[:, 0] / (r_m_all + h)
        w_en[:, 2] = -vel[:, 1] * np.tan(lat) / (r_n_all + h)
    g_mag = gravity_vec(lat, h)

    # Exact inverse of the mechanization step, batched over intervals.
    q_prev, q_next = quat[:-1], quat[1:]
    zeta = (w_ie[:-1] + w_en[:-1]) * dt
    q_body = quat_multiply(quat_conjugate(q_prev), quat_multiply(quat_from_rotvec(zeta), q_next))
    phi_b = rotvec_from_quat(quat_normalize(q_body))
    omega = np.zeros((n + 1, 3))
    omega[1:] = phi_b / dt

    q_mid = quat_multiply(
        quat_from_rotvec(-0.5 * zeta), quat_multiply(q_prev, quat_from_rotvec(0.5 * phi_b))
    )
    C_mid = _batched_dcm(quat_normalize(q_mid))
    g_n = np.zeros((n, 3))
    g_n[:, 2] = g_mag[:-1]
    coriolis = -np.cross(2.0 * w_ie[:-1] + w_en[:-1], vel[:-1])
    f_n_req = np.diff(vel, axis=0) / dt - g_n - coriolis
    f_b = np.zeros((n + 1, 3))
    f_b[1:] = np.einsum("kij,kj->ki", C_mid.transpose(0, 2, 1), f_n_req)
    omega[0], f_b[0] = omega[1], f_b[1]

    lmf = cfg.environment.field_at(t)
    C_all = _batched_dcm(quat)
    m_b = np.einsum("kij,kj->ki", C_all.transpose(0, 2, 1), lmf)

    return TruthData(t, lat, lon, h, vel, quat, omega, f_b, m_b, lmf)


def radii_of_curvature_vec(lat: NDArray[np.float64]) -> tuple[NDArray, NDArray]:
    s2 = np.sin(lat) ** 2
    e2 = 1.0 - (1.0 - 1.0 / 298.257223563) ** 2
    d = 1.0 - e2 * s2
    return 6378137.0 * (1.0 - e2) / d**1.5, 6378137.0 / np.sqrt(d)


def gravity_vec(lat: NDArray[np.float64], h: NDArray[np.float64]) -> NDArray[np.float64]:
    """Same model as `earth.gravity_magnitude`, vectorized."""
    from .earth import (
        ECCENTRICITY_SQ,
        FLATTENING,
        GRAVITY_EQUATOR,
        SEMI_MAJOR_AXIS,
        SOMIGLIANA_K,
        _M_RATIO,
    )

    s2 = np.sin(lat) ** 2
    g0 = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / np.sqrt(1.0 - ECCENTRICITY_SQ * s2)
    h_corr = (
        1.0
        - 2.0 / SEMI_MAJOR_AXIS * (1.0 + FLATTENING + _M_RATIO - 2.0 * FLATTENING * s2) * h
        + 3.0 / SEMI_MAJOR_AXIS**2 * h**2
    )
    return g0 * h_corr


def corrupt(
    truth: TruthData,
    errs: SensorErrors,
    noise: NoiseSpec,
    seed: int,
    with_mag: bool = True,
) -> StreamData:
    """
    Apply the sensor error model plus sampled white noise to a truth stream.

    The magnetometer gets additive noise only (its deterministic errors
    are out of scope). Identical seeds give identical output.
    """
    rng = np.random.default_rng(seed)
    n = truth.t.size
    w_g = rng.normal(0.0, noise.gyro_sample_sigma(), (n, 3))
    w_a = rng.normal(0.0, noise.accel_sample_sigma(), (n, 3))
    gyro, accel = apply_errors(truth.omega_b, truth.f_b, errs, w_g, w_a)
    mag = None
    if with_mag:
        mag = truth.m_b + rng.normal(0.0, noise.mag_noise, (n, 3))
    return StreamData(truth.t.copy(), gyro, accel, mag)


def simulate_scenario(cfg: ScenarioConfig, with_mag: bool = True) -> tuple[TruthData, StreamData]:
    """Generate truth and its corrupted stream in one call."""
    truth = generate_truth(cfg)
    return truth, corrupt(truth, cfg.errors, cfg.noise, cfg.seed, with_mag)


def reference_bias(
    tail: Sequence[ImuSample],
    window_s: float,
    qs_cfg: QuasiStaticConfig = QuasiStaticConfig(),
    g: float = 9.80665,
    gyro_bias: NDArray[np.float64] | None = None,
    accel_bias: NDArray[np.float64] | None = None,
) -> NDArray[np.float64]:
    """
    Evaluation reference: componentwise mean of the raw gyro outputs over
    the quasi-static tail window.

    The stillness precondition is checked with `detect_quasi_static`
    (supply the converged bias estimates so known sensor offsets do not
    masquerade as motion); a non-quasi-static tail raises
    `ReferenceUnavailableError`.
    """
    if not tail:
        raise ReferenceUnavailableError("empty tail window")
    t = np.array([s.t for s in tail])
    sel = t >= t[-1] - window_s
    window = [s for s, keep in zip(tail, sel) if keep]
    qs_cfg = replace(qs_cfg, window_s=min(qs_cfg.window_s, window_s))
    if not detect_quasi_static(window, qs_cfg, g=g, gyro_bias=gyro_bias, accel_bias=accel_bias):
        raise ReferenceUnavailableError("tail window is not quasi-static")
    return np.mean([np.asarray(s.omega_b, dtype=float) for s in window], axis=0)
