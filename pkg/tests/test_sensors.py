import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gyrocal.exceptions import InvalidCorrectionError
from gyrocal.sensors import (
    GaussMarkovSpec,
    NoiseSpec,
    SensorErrors,
    apply_errors,
    correct_measurements,
    gm_discretize,
)

D2R = np.pi / 180.0


def test_bias_injection_matches_protocol():
    # 3 / -3 / 3 deg/s added on top of the raw rates.
    errs = SensorErrors(b_g=np.array([3.0, -3.0, 3.0]) * D2R)
    omega, f = apply_errors(np.array([10.0, 0.0, 0.0]) * D2R, np.zeros(3), errs)
    assert_allclose(omega / D2R, [13.0, -3.0, 3.0], atol=1e-12)
    assert_allclose(f, np.zeros(3))


def test_zero_errors_identity():
    omega, f = apply_errors([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], SensorErrors())
    assert_allclose(omega, [0.1, 0.2, 0.3])
    assert_allclose(f, [1.0, 2.0, 3.0])


def test_scale_factor_1000ppm():
    errs = SensorErrors(s_g=[0.001, 0.0, 0.0])
    omega, _ = apply_errors(np.array([100.0, 0.0, 0.0]) * D2R, np.zeros(3), errs)
    assert_allclose(omega / D2R, [100.1, 0.0, 0.0], atol=1e-12)


def test_correct_inverts_the_bias_example():
    errs = SensorErrors(b_g=np.array([3.0, -3.0, 3.0]) * D2R)
    omega, _ = correct_measurements(np.array([13.0, -3.0, 3.0]) * D2R, np.zeros(3), errs)
    assert_allclose(omega / D2R, [10.0, 0.0, 0.0], atol=1e-12)


small = st.floats(-0.09, 0.09)
vec3 = st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3)


@given(vec3, vec3, st.lists(small, min_size=3, max_size=3), st.lists(small, min_size=3, max_size=3))
def test_apply_then_correct_roundtrip(omega, f, s_g, s_a):
    errs = SensorErrors(
        b_g=np.array([0.05, -0.02, 0.03]), b_a=np.array([0.1, 0.2, -0.3]), s_g=s_g, s_a=s_a
    )
    omega_m, f_m = apply_errors(omega, f, errs)
    omega_r, f_r = correct_measurements(omega_m, f_m, errs)
    assert_allclose(omega_r, omega, atol=1e-12)
    assert_allclose(f_r, f, atol=1e-12)


def test_correct_rejects_out_of_range_scale():
    errs = SensorErrors()
    errs.s_g = np.array([-0.6, 0.0, 0.0])  # bypasses construction-time validation
    with pytest.raises(InvalidCorrectionError):
        correct_measurements(np.zeros(3), np.zeros(3), errs)


def test_sensor_errors_invariant():
    with pytest.raises(ValueError):
        SensorErrors(s_g=[0.2, 0.0, 0.0])


def test_gm_discretize_exponential():
    # Oracle: evaluate the exponentials independently.
    phi, q_d = gm_discretize(GaussMarkovSpec(3600.0, 2.0), 1.0)
    assert phi == pytest.approx(math.exp(-1.0 / 3600.0), rel=1e-12)
    assert phi == pytest.approx(0.999722, abs=5e-7)
    assert q_d == pytest.approx(4.0 * (1.0 - math.exp(-2.0 / 3600.0)), rel=1e-12)


def test_gm_discretize_small_dt_limit():
    phi, q_d = gm_discretize(GaussMarkovSpec(100.0, 1.5), 1e-9)
    assert phi == pytest.approx(1.0, abs=1e-10)
    assert q_d == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("dt", [0.01, 1.0, 50.0])
@pytest.mark.parametrize("tau", [10.0, 3600.0])
def test_gm_phi_in_unit_interval(dt, tau):
    phi, _ = gm_discretize(GaussMarkovSpec(tau, 1.0), dt)
    assert 0.0 < phi <= 1.0


def test_gm_stationary_variance_monte_carlo():
    # Propagating with (phi, q_d) from the stationary distribution must
    # keep the variance at sigma^2 (checked to 3% with 10k paths).
    spec = GaussMarkovSpec(30.0, 0.7)
    phi, q_d = gm_discretize(spec, 0.5)
    rng = np.random.default_rng(42)
    x = rng.standard_normal(10_000) * spec.sigma
    for _ in range(200):
        x = phi * x + rng.standard_normal(10_000) * np.sqrt(q_d)
    assert x.var() == pytest.approx(spec.sigma**2, rel=0.03)


def test_noise_spec_sample_sigmas():
    spec = NoiseSpec(gyro_arw=0.01, accel_vrw=0.001, sample_rate=50.0)
    assert spec.gyro_sample_sigma() == pytest.approx(0.01 * np.sqrt(50.0))
    assert spec.accel_sample_sigma() == pytest.approx(0.001 * np.sqrt(50.0))
