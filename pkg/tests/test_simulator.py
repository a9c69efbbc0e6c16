import numpy as np
import pytest
from numpy.testing import assert_allclose

from gyrocal.config import Config
from gyrocal.constraints import QsmfConfig, QuasiStaticConfig, qsmf_flags
from gyrocal.earth import GeoPosition, geo_offset_m
from gyrocal.exceptions import ReferenceUnavailableError
from gyrocal.geometry import Attitude, rotation_angle_between
from gyrocal.mechanization import ImuSample, NavState, ins_step
from gyrocal.sensors import NoiseSpec, SensorErrors
from gyrocal.simulator import (
    MODE_PRESETS,
    MagEnvironment,
    MagSegment,
    MotionProfile,
    ScenarioConfig,
    corrupt,
    generate_truth,
    indoor_environment,
    outdoor_environment,
    reference_bias,
    simulate_scenario,
)

D2R = np.pi / 180.0


def scenario(mode="handheld", env=None, duration=10.0, tail=3.0, seed=0, **kw):
    return ScenarioConfig(
        profile=MODE_PRESETS[mode],
        environment=env or outdoor_environment(),
        duration_s=duration,
        tail_s=tail,
        seed=seed,
        **kw,
    )


def test_static_profile_truth():
    from gyrocal.mechanization import MechConfig

    cfg = scenario("static", duration=5.0, tail=2.0, mech=MechConfig(False, False))
    truth = generate_truth(cfg)
    assert_allclose(truth.omega_b, 0.0, atol=1e-12)
    assert np.abs(truth.f_b - truth.f_b[0]).max() < 1e-9
    assert np.linalg.norm(truth.f_b[0]) == pytest.approx(9.8, abs=0.05)
    assert_allclose(truth.lat, np.full_like(truth.lat, truth.lat[0]))
    assert_allclose(truth.vel_n, 0.0, atol=1e-12)


def mechanize_and_compare(cfg, n_check=25):
    truth = generate_truth(cfg)
    state = NavState(
        GeoPosition(truth.lat[0], truth.lon[0], truth.h[0]),
        truth.vel_n[0],
        Attitude(truth.quat[0]),
    )
    dt = truth.t[1] - truth.t[0]
    max_pos = max_att = 0.0
    stride = max(1, truth.t.size // n_check)
    for k in range(1, truth.t.size):
        state = ins_step(state, truth.omega_b[k], truth.f_b[k], dt, cfg.mech)
        if k % stride == 0 or k == truth.t.size - 1:
            pos_err = np.linalg.norm(
                geo_offset_m(state.pos, GeoPosition(truth.lat[k], truth.lon[k], truth.h[k]))
            )
            att_err = rotation_angle_between(state.att.q, truth.quat[k])
            max_pos = max(max_pos, pos_err)
            max_att = max(max_att, att_err)
    return max_pos, max_att


@pytest.mark.parametrize("mode", ["handheld", "dangling", "static"])
def test_mechanization_reproduces_truth(mode):
    # The core simulator consistency property (full sweep in acceptance).
    max_pos, max_att = mechanize_and_compare(scenario(mode, duration=8.0, tail=2.0, seed=2))
    assert max_pos < 1e-3
    assert max_att < 1e-4


def test_dangling_stronger_than_handheld():
    t_d = generate_truth(scenario("dangling", seed=1))
    t_h = generate_truth(scenario("handheld", seed=1))
    assert np.abs(t_d.omega_b).max() > np.abs(t_h.omega_b).max()


def test_mode_presets_within_rate_limit():
    for mode, prof in MODE_PRESETS.items():
        assert prof.peak_rate() <= np.radians(500.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        MotionProfile(mode="sprinting")
    with pytest.raises(ValueError):
        MotionProfile(mode="handheld", step_frequency=4.0)
    with pytest.raises(ValueError):
        MotionProfile(
            mode="handheld",
            att_amp=(np.radians(80.0), 0.0, 0.0),
            att_freq_mult=(2.0, 1.0, 1.0),
        )


def test_environment_validation():
    with pytest.raises(ValueError):
        MagEnvironment((MagSegment(0.0, (200.0, 0.0, 0.0)),))
    with pytest.raises(ValueError):
        MagEnvironment((MagSegment(5.0, (20.0, 0.0, 44.0)), MagSegment(1.0, (20.0, 0.0, 44.0))))


def test_corrupt_bias_injection_static():
    cfg = scenario("static", duration=10.0, tail=5.0)
    truth = generate_truth(cfg)
    errs = SensorErrors(b_g=np.array([3.0, -3.0, 3.0]) * D2R)
    stream = corrupt(truth, errs, NoiseSpec(), seed=4)
    mean_dps = stream.gyro.mean(axis=0) / D2R
    assert_allclose(mean_dps, [3.0, -3.0, 3.0], atol=0.05)


def test_corrupt_zero_noise_zero_errors_is_truth():
    cfg = scenario("handheld", duration=5.0, tail=1.0)
    truth = generate_truth(cfg)
    quiet = NoiseSpec(gyro_arw=0.0, accel_vrw=0.0, mag_noise=0.0)
    stream = corrupt(truth, SensorErrors(), quiet, seed=9)
    assert np.array_equal(stream.gyro, truth.omega_b)
    assert np.array_equal(stream.accel, truth.f_b)
    assert np.array_equal(stream.mag, truth.m_b)


def test_determinism_same_seed():
    cfg = scenario("pocket", duration=6.0, tail=2.0, seed=11)
    t1, s1 = simulate_scenario(cfg)
    t2, s2 = simulate_scenario(cfg)
    assert np.array_equal(s1.gyro, s2.gyro)
    assert np.array_equal(s1.accel, s2.accel)
    assert np.array_equal(s1.mag, s2.mag)


def test_outdoor_qsmf_coverage():
    cfg = Config(duration_s=60.0, motion="handheld", env="outdoor", seed=5)
    _, stream = simulate_scenario(cfg.scenario())
    flags, _, _ = qsmf_flags(stream.t, stream.mag, QsmfConfig())
    n_warm = int(round(50.0 * QsmfConfig().window_s))
    assert flags[n_warm:].mean() >= 0.95


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_indoor_qsmf_coverage_between_30_and_70(seed):
    cfg = Config(duration_s=120.0, motion="handheld", env="indoor", seed=seed)
    _, stream = simulate_scenario(cfg.scenario())
    flags, _, _ = qsmf_flags(stream.t, stream.mag, QsmfConfig())
    cov = flags.mean()
    assert 0.30 <= cov <= 0.70


def test_reference_bias_static_tail():
    cfg = scenario("static", duration=5.0, tail=30.0)
    truth = generate_truth(cfg)
    b = np.array([3.0, -3.0, 3.0]) * D2R
    stream = corrupt(truth, SensorErrors(b_g=b), NoiseSpec(), seed=1)
    tail = [ImuSample(stream.t[k], stream.gyro[k], stream.accel[k]) for k in range(stream.t.size - 1501, stream.t.size)]
    ref = reference_bias(tail, 30.0, gyro_bias=b)
    # sigma of the mean: ARW * sqrt(rate) / sqrt(N)
    sigma_mean = NoiseSpec().gyro_sample_sigma() / np.sqrt(1500)
    assert np.abs(ref - b).max() < 3.5 * sigma_mean


def test_reference_bias_sigma_scaling():
    # 30 s at 50 Hz with ARW 0.01 deg/s/sqrt(Hz): sigma_mean ~ 0.0018 deg/s.
    spec = NoiseSpec()
    sigma_mean_dps = np.degrees(spec.gyro_sample_sigma()) / np.sqrt(30.0 * 50.0)
    assert sigma_mean_dps == pytest.approx(np.degrees(spec.gyro_arw) / np.sqrt(30.0), rel=1e-12)
    assert sigma_mean_dps == pytest.approx(0.00183, abs=2e-4)


def test_reference_bias_rejects_moving_tail():
    cfg = scenario("dangling", duration=10.0, tail=0.0)
    truth = generate_truth(cfg)
    stream = corrupt(truth, SensorErrors(), NoiseSpec(), seed=2)
    sl = slice(stream.t.size - 400, stream.t.size)
    tail = [ImuSample(stream.t[k], stream.gyro[k], stream.accel[k]) for k in range(sl.start, sl.stop)]
    with pytest.raises(ReferenceUnavailableError):
        reference_bias(tail, 8.0)


def test_indoor_environment_determinism():
    e1 = indoor_environment(120.0, 42)
    e2 = indoor_environment(120.0, 42)
    assert e1 == e2
