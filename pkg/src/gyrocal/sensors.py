"""Sensor error models: bias/scale-factor forward and inverse models and
first-order Gauss-Markov processes for the slowly varying error terms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import InvalidCorrectionError

MAX_SCALE_ERROR = 0.1  # dimensionless; invariant bound on |scale-factor error|


def _vec3(v: ArrayLike) -> NDArray[np.float64]:
    out = np.asarray(v, dtype=float).reshape(3).copy()
    if not np.isfinite(out).all():
        raise ValueError("vector components must be finite")
    return out


@dataclass
class SensorErrors:
    """
    Deterministic IMU error terms: gyro/accel biases and scale-factor errors.

    Units: ``b_g`` rad/s, ``b_a`` m/s^2, ``s_g``/``s_a`` dimensionless.
    """

    b_g: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    b_a: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    s_g: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    s_a: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.b_g = _vec3(self.b_g)
        self.b_a = _vec3(self.b_a)
        self.s_g = _vec3(self.s_g)
        self.s_a = _vec3(self.s_a)
        if np.abs(self.s_g).max() >= MAX_SCALE_ERROR or np.abs(self.s_a).max() >= MAX_SCALE_ERROR:
            raise ValueError("scale-factor errors must stay below 10%")

    def copy(self) -> "SensorErrors":
        return SensorErrors(self.b_g.copy(), self.b_a.copy(), self.s_g.copy(), self.s_a.copy())


@dataclass(frozen=True)
class GaussMarkovSpec:
    """First-order Gauss-Markov process: correlation time (s) and stationary sigma."""

    tau: float
    sigma: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("correlation time must be positive")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise densities of the sensor triads plus the sampling rate."""

    gyro_arw: float = np.radians(0.01)  # rad/s/sqrt(Hz)
    accel_vrw: float = 0.001  # m/s^2/sqrt(Hz)
    mag_noise: float = 0.5  # uT, 1-sigma per axis
    sample_rate: float = 50.0  # Hz

    def __post_init__(self):
        if min(self.gyro_arw, self.accel_vrw, self.mag_noise) < 0.0 or self.sample_rate <= 0.0:
            raise ValueError("noise densities must be non-negative and rate positive")

    def gyro_sample_sigma(self) -> float:
        """Per-sample white noise sigma of the gyro at the configured rate (rad/s)."""
        return self.gyro_arw * np.sqrt(self.sample_rate)

    def accel_sample_sigma(self) -> float:
        return self.accel_vrw * np.sqrt(self.sample_rate)


def apply_errors(
    true_omega: ArrayLike,
    true_f: ArrayLike,
    errs: SensorErrors,
    noise_omega: ArrayLike | None = None,
    noise_f: ArrayLike | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Forward sensor model: corrupt true angular rate and specific force.

    Componentwise ``omega_meas = omega * (1 + s_g) + b_g + w_g`` and
    ``f_meas = f * (1 + s_a) + b_a + w_a``. Broadcasting over leading axes
    is supported (shape ``(..., 3)``).
    """
    omega = np.asarray(true_omega, dtype=float)
    f = np.asarray(true_f, dtype=float)
    omega_meas = omega * (1.0 + errs.s_g) + errs.b_g
    f_meas = f * (1.0 + errs.s_a) + errs.b_a
    if noise_omega is not None:
        omega_meas = omega_meas + np.asarray(noise_omega, dtype=float)
    if noise_f is not None:
        f_meas = f_meas + np.asarray(noise_f, dtype=float)
    return omega_meas, f_meas


def correct_measurements(
    omega_meas: ArrayLike,
    f_meas: ArrayLike,
    errs: SensorErrors,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Inverse sensor model: remove estimated biases and scale factors.

    Exact inverse of `apply_errors` at zero noise. Raises
    `InvalidCorrectionError` when a scale-factor estimate leaves the
    trust region ``|1 + s| > 0.5``.
    """
    den_g = 1.0 + errs.s_g
    den_a = 1.0 + errs.s_a
    if np.abs(den_g).min() <= 0.5 or np.abs(den_a).min() <= 0.5:
        raise InvalidCorrectionError("scale-factor correction out of range")
    omega = (np.asarray(omega_meas, dtype=float) - errs.b_g) / den_g
    f = (np.asarray(f_meas, dtype=float) - errs.b_a) / den_a
    return omega, f


def gm_discretize(spec: GaussMarkovSpec, dt: float) -> tuple[float, float]:
    """
    Exact discrete-time parameters of a first-order Gauss-Markov process.

    Returns ``(phi, q_d)`` with ``phi = exp(-dt/tau)`` and
    ``q_d = sigma^2 * (1 - exp(-2*dt/tau))`` such that
    ``x_k = phi * x_{k-1} + w_k``, ``Var[w_k] = q_d`` is stationary with
    variance ``sigma^2``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    phi = np.exp(-dt / spec.tau)
    q_d = spec.sigma**2 * (1.0 - np.exp(-2.0 * dt / spec.tau))
    return float(phi), float(q_d)
