"""Calibration pipeline: align, then per-sample mechanize/predict with
scheduled constraint updates and gated feedback, ending in the report."""

from __future__ import annotations

import logging
import time

import numpy as np

from . import eskf, kernels
from .alignment import HEADING_SIGMA_UNKNOWN, leveling_fallback
from .config import Config
from .constraints import (
    AccelMode,
    AdaptivePositionNoise,
    QsmfState,
    acceleration_mode,
    accel_packet,
    calibrate_lmf_mean,
    mag_packet,
    pseudo_position_packet,
    pseudo_velocity_packet,
    qsau_packet,
    qsmf_flags,
    quasi_static_decision,
    trailing_mean,
)
from .earth import GeoPosition, geo_offset_m, gravity_magnitude
from .eskf import ATT, BG, N_STATES
from .exceptions import AlignmentDeferred, MalformedStreamError, ReferenceUnavailableError
from .geometry import (
    Attitude,
    quat_conjugate,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    rotvec_from_quat,
)
from .mechanization import ImuSample, NavState
from .metrics import CalibrationReport, HealthSummary, compute_metrics
from .sensors import SensorErrors, gm_discretize
from .simulator import StreamData, reference_bias, simulate_scenario

logger = logging.getLogger(__name__)

D2R = np.pi / 180.0
MAX_ALIGN_SLIDES = 30


def _kernel_params(cfg: Config, dt: float) -> kernels.KernelParams:
    gm = cfg.gm_bank()
    taus = np.array([g.tau for g in (gm.gyro_bias, gm.accel_bias, gm.gyro_scale, gm.accel_scale)])
    qds = np.array(
        [
            gm_discretize(g, dt)[1]
            for g in (gm.gyro_bias, gm.accel_bias, gm.gyro_scale, gm.accel_scale)
        ]
    )
    noise = cfg.noise_spec()
    return kernels.KernelParams(
        gm_tau=taus,
        gm_qd=qds,
        q_vel=noise.accel_vrw**2 * dt,
        q_att=noise.gyro_arw**2 * dt,
        earth_rotation=cfg.earth_rotation,
        transport_rate=cfg.transport_rate,
        health_checks=cfg.health_checks,
    )


def _align(stream: StreamData, cfg: Config, n_win: int) -> tuple[int, Attitude]:
    """Leveling alignment on the first still-enough window; returns the
    index the filter starts at and the initial attitude (heading zero)."""
    n = stream.t.size
    for attempt in range(MAX_ALIGN_SLIDES):
        j0 = attempt * n_win + n_win - 1
        if j0 >= n:
            break
        f_mean = stream.accel[j0 - n_win + 1 : j0 + 1].mean(axis=0)
        try:
            att = leveling_fallback(f_mean, gravity_magnitude(np.radians(cfg.lat_deg), cfg.height_m))
            return j0, att
        except AlignmentDeferred:
            continue
    raise AlignmentDeferred("no alignment-capable window found in the stream")


def run_pipeline(
    cfg: Config,
    stream: StreamData | None = None,
    use_mag: bool = True,
) -> CalibrationReport:
    """
    Execute a full calibration run.

    When ``stream`` is None a scenario is simulated from the config.
    ``use_mag=False`` (or a stream without magnetometer columns) disables
    the magnetometer constraint; the report notes it.
    """
    wall0 = time.perf_counter()
    notes: list[str] = []
    if stream is None:
        _, stream = simulate_scenario(cfg.scenario(), with_mag=use_mag)

    t = np.asarray(stream.t, dtype=float)
    n = t.size
    if n < 3:
        raise MalformedStreamError("stream too short to calibrate")
    if np.any(np.diff(t) <= 0.0):
        raise MalformedStreamError("timestamps must be strictly increasing")
    dt = float((t[-1] - t[0]) / (n - 1))
    if abs(np.diff(t) - dt).max() > 1e-3 * dt:
        raise MalformedStreamError("sample grid must be uniform")
    rate = 1.0 / dt

    mag_on = bool(cfg.mag_update_enabled and use_mag and stream.mag is not None)
    if cfg.mag_update_enabled and use_mag and stream.mag is None:
        notes.append("mag updates disabled: stream has no magnetometer channel")

    gyro = np.asarray(stream.gyro, dtype=float)
    accel = np.asarray(stream.accel, dtype=float)

    pos0 = cfg.start_position()
    g = gravity_magnitude(pos0.lat, pos0.height)

    # ---- detector precomputation -------------------------------------
    n_qs = int(round(cfg.qs_window_s * rate)) + 1
    n_am = int(round(cfg.accel_mode_window_s * rate)) + 1
    gyro_win_mean = trailing_mean(gyro, n_qs)
    flags = pid = None
    starts: list[int] = []
    if mag_on:
        flags, pid, starts = qsmf_flags(t, stream.mag, cfg.qsmf_config())

    # ---- alignment and filter initialization --------------------------
    n_upd = max(1, int(round(rate / cfg.update_rate_hz)))
    j0, att0 = _align(stream, cfg, n_qs)
    if j0 + n_upd >= n:
        raise MalformedStreamError("stream ends before the first update epoch")

    nav = NavState(pos0, np.zeros(3), att0)
    errs = SensorErrors()
    x = np.zeros(N_STATES)
    P = np.diag(cfg.p0_diagonal())
    P[8, 8] = max(HEADING_SIGMA_UNKNOWN, np.sqrt(P[8, 8])) ** 2  # heading from leveling
    params = _kernel_params(cfg, dt)
    qs_cfg = cfg.quasi_static_config()
    accel_cfg = cfg.accel_mode_config()
    eval_gates = cfg.evaluation_gates()
    bias_released = False
    gate_sigma = cfg.innovation_gate_sigma if cfg.innovation_gate_sigma > 0.0 else None
    qsau_sigma = cfg.qsau_sigma_dps * D2R
    pos_noise = AdaptivePositionNoise(cfg.pseudo_position_prior_sigma_m, cfg.pseudo_position_window_s)
    qsmf_state = QsmfState()
    calibrated_period = 0
    att_cov_at_last_mag = None

    quat_hist = np.zeros((n, 4))
    quat_hist[: j0 + 1] = att0.q

    health = HealthSummary()
    update_counts: dict[str, int] = {}
    ep_t, ep_bias, ep_sigma, ep_qsmf, ep_qs, ep_mode = [], [], [], [], [], []

    pos_arr = np.array([nav.pos.lat, nav.pos.lon, nav.pos.height])
    vel_arr = nav.vel_n.copy()
    quat_arr = nav.att.q.copy()

    # ---- main loop over update epochs ---------------------------------
    prev = j0
    for j in range(j0 + n_upd, n, n_upd):
        if np.any(x != 0.0):
            health.error_state_nonzero_predicts += j - prev
        errs_flat = np.concatenate([errs.b_g, errs.b_a, errs.s_g, errs.s_a])
        pos_arr, vel_arr, quat_arr, x, P, quats, bh = kernels.propagate_block(
            pos_arr, vel_arr, quat_arr, x, P,
            errs_flat, gyro[prev + 1 : j + 1], accel[prev + 1 : j + 1], dt, params,
        )
        quat_hist[prev + 1 : j + 1] = quats
        health.max_cov_asym = max(health.max_cov_asym, bh.max_asym)
        health.psd_failures += bh.psd_failures
        nav = NavState(GeoPosition(*pos_arr), vel_arr, Attitude(quat_arr))

        # -- detectors at this epoch --
        # The gyro-bias estimate is reliably observable and needed for the
        # mean-rate check. The accel-bias estimate is left out: its effect
        # on the accel measurement is deliberately unmodeled, so the
        # estimate can be confidently wrong and would veto genuinely still
        # windows; the mean-force tolerance absorbs realistic accel biases.
        qs_flag = quasi_static_decision(
            t[j - n_qs + 1 : j + 1],
            gyro[j - n_qs + 1 : j + 1],
            accel[j - n_qs + 1 : j + 1],
            qs_cfg,
            g,
            gyro_bias=errs.b_g,
        )
        f_corr = (accel[j] - errs.b_a) / (1.0 + errs.s_a)
        # Classify on the worst sample of the trailing window: an
        # instantaneous |f| near g mid-stride is a zero crossing, not
        # quiescence, and carries unmodeled tangential acceleration.
        f_win = (accel[max(j0, j - n_am + 1) : j + 1] - errs.b_a) / (1.0 + errs.s_a)
        worst = int(np.argmax(np.abs(np.linalg.norm(f_win, axis=1) - g)))
        mode, mode_sigma2 = acceleration_mode(f_win[worst], g, accel_cfg, float(np.trace(P[ATT, ATT])))
        # The sample is the average over (t[j-1], t[j]]; pair it with the
        # mid-interval attitude or fast rotations leak into the tilt residual.
        dq = quat_multiply(quat_conjugate(quat_hist[j - 1]), quat_hist[j])
        q_mid = quat_normalize(
            quat_multiply(quat_hist[j - 1], quat_from_rotvec(0.5 * rotvec_from_quat(dq)))
        )
        nav_mid = NavState(nav.pos, nav.vel_n, Attitude(q_mid))

        if mag_on:
            if not flags[j]:
                if qsmf_state.active:
                    qsmf_state.end_period()
            else:
                period = int(pid[j])
                if calibrated_period != period:
                    # a reference calibrated for an earlier period must never
                    # serve the current one: the field may have changed
                    if qsmf_state.active:
                        qsmf_state.end_period()
                    s = max(starts[period - 1], j0 + 1)
                    if j - s + 1 >= cfg.qsmf_calib_samples:
                        sl = slice(s, s + cfg.qsmf_calib_samples)
                        # The new reference bakes in whatever attitude drift
                        # accumulated while the field was unusable; the
                        # unobserved part (attitude covariance growth since
                        # the last usable update) rides on this period's
                        # measurement noise, otherwise the filter reads
                        # "zero drift across the gap" as bias information.
                        gap_cov = None
                        if att_cov_at_last_mag is not None:
                            growth = np.diag(P[ATT, ATT]) - np.diag(att_cov_at_last_mag)
                            gap_cov = np.diag(np.clip(growth, 0.0, None))
                        qsmf_state.start_period(
                            calibrate_lmf_mean(quat_hist[sl], stream.mag[sl]),
                            ref_att_cov=gap_cov,
                        )
                        calibrated_period = period

        # -- measurement updates (sequential), then one feedback --
        packets = []
        if cfg.pseudo_position_enabled:
            pos_noise.observe(t[j], geo_offset_m(nav.pos, pos0))
            packets.append(pseudo_position_packet(nav, pos0, pos_noise.r_cov()))
        if cfg.pseudo_velocity_enabled:
            packets.append(pseudo_velocity_packet(nav, cfg.pseudo_velocity_sigma_mps))
        if cfg.accel_update_enabled:
            packets.append(accel_packet(nav_mid, f_corr, mode_sigma2, g))
        mag_fired = False
        if mag_on and qsmf_state.active:
            pkt = mag_packet(nav, stream.mag[j], qsmf_state, cfg.mag_sigma_ut)
            if pkt is not None:
                packets.append(pkt)
                mag_fired = True
        if cfg.qsau_enabled and qs_flag:
            omega_mean = (gyro_win_mean[j] - errs.b_g) / (1.0 + errs.s_g)
            packets.append(qsau_packet(omega_mean, qsau_sigma))

        for pkt in packets:
            res = eskf.update(x, P, pkt.H, pkt.R, pkt.z, gate_sigma=gate_sigma)
            x, P = res.x, res.P
            if res.accepted:
                update_counts[pkt.kind] = update_counts.get(pkt.kind, 0) + 1
            else:
                health.gated_updates += 1
        if mag_fired:
            att_cov_at_last_mag = P[ATT, ATT].copy()
        nav, errs, x = eskf.feedback(nav, errs, x)
        if not bias_released:
            bias_released = eskf.evaluation_passed(P, eval_gates)["gyro_bias"]
        pos_arr = np.array([nav.pos.lat, nav.pos.lon, nav.pos.height])
        vel_arr, quat_arr = nav.vel_n, nav.att.q

        ep_t.append(t[j])
        # the exported calibration: withheld (zero) until the estimate
        # passes its evaluation gate
        ep_bias.append((errs.b_g if bias_released else np.zeros(3)) / D2R)
        ep_sigma.append(np.sqrt(np.diag(P)[BG]) / D2R)
        ep_qsmf.append(bool(qsmf_state.active))
        ep_qs.append(bool(qs_flag))
        ep_mode.append(int(mode))
        prev = j

    # ---- evaluation ----------------------------------------------------
    reference = None
    metrics = None
    tail_n = int(round(cfg.reference_window_s * rate)) + 1
    if tail_n <= n:
        tail = [ImuSample(t[k], gyro[k], accel[k]) for k in range(n - tail_n, n)]
        try:
            reference = reference_bias(
                tail,
                cfg.reference_window_s,
                qs_cfg,
                g=g,
                gyro_bias=errs.b_g,
            ) / D2R
        except ReferenceUnavailableError as e:
            notes.append(f"reference unavailable: {e}")
            logger.warning("reference unavailable: %s", e)
    else:
        notes.append("reference unavailable: stream shorter than the reference window")

    ep_t_arr = np.array(ep_t)
    bias_arr = np.array(ep_bias)
    if reference is not None:
        # Statistics cover the test itself; the reference window at the end
        # is evaluation apparatus, not part of the calibrated motion.
        in_test = ep_t_arr <= t[-1] - cfg.reference_window_s
        if in_test.sum() >= 2:
            metrics = compute_metrics(
                ep_t_arr[in_test], bias_arr[in_test], reference, cfg.convergence_threshold_dps
            )
        else:
            metrics = compute_metrics(ep_t_arr, bias_arr, reference, cfg.convergence_threshold_dps)

    return CalibrationReport(
        t=ep_t_arr,
        bias_dps=bias_arr,
        reference_dps=reference,
        metrics=metrics,
        qsmf_active=np.array(ep_qsmf, dtype=bool),
        quasi_static=np.array(ep_qs, dtype=bool),
        accel_mode=np.array(ep_mode, dtype=int),
        bias_sigma_dps=np.array(ep_sigma),
        update_counts=update_counts,
        health=health,
        backend=kernels.BACKEND,
        runtime_s=time.perf_counter() - wall0,
        duration_s=float(t[-1] - t[0]),
        mag_available=mag_on,
        notes=notes,
    )
