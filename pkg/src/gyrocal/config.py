"""Run configuration: one flat key=value file drives the simulator, the
filter, and the report. Every tunable named in the documentation has a
key here; `Config()` carries the defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .constraints import AccelModeConfig, QsmfConfig, QuasiStaticConfig
from .earth import GeoPosition
from .eskf import EvaluationGates, GmBank
from .mechanization import MechConfig
from .sensors import GaussMarkovSpec, NoiseSpec, SensorErrors
from .simulator import (
    MODE_PRESETS,
    MagEnvironment,
    MotionProfile,
    ScenarioConfig,
    indoor_environment,
    outdoor_environment,
)

D2R = np.pi / 180.0


@dataclass
class Config:
    # scenario
    seed: int = 0
    sample_rate_hz: float = 50.0
    duration_s: float = 120.0
    lead_in_s: float = 2.0
    tail_s: float = 30.0
    motion: str = "handheld"
    env: str = "outdoor"
    walk_speed_mps: float = 1.2
    step_frequency_hz: float = 1.8
    lat_deg: float = 51.0
    lon_deg: float = -114.0
    height_m: float = 1045.0

    # injected truth errors (simulator only)
    inject_gyro_bias_dps: tuple = (3.0, -3.0, 3.0)
    inject_accel_bias_mps2: tuple = (0.05, -0.04, 0.06)
    inject_gyro_scale_ppm: tuple = (0.0, 0.0, 0.0)
    inject_accel_scale_ppm: tuple = (0.0, 0.0, 0.0)

    # white-noise densities (simulator truth and filter assumption)
    gyro_arw_dps_sqrt_hz: float = 0.01
    accel_vrw_mps2_sqrt_hz: float = 0.001
    mag_noise_ut: float = 0.5

    # mechanization
    earth_rotation: bool = True
    transport_rate: bool = True

    # filter initial uncertainties (1-sigma)
    p0_pos_m: float = 10.0
    p0_vel_mps: float = 1.0
    p0_att_h_rad: float = 0.1
    p0_att_z_rad: float = 0.5
    p0_gyro_bias_dps: float = 5.0
    p0_accel_bias_mps2: float = 0.5886
    p0_gyro_scale: float = 0.005
    p0_accel_scale: float = 0.005

    # Gauss-Markov models of the sensor-error states
    gm_gyro_bias_tau_s: float = 3600.0
    gm_gyro_bias_sigma_dps: float = 0.5
    gm_accel_bias_tau_s: float = 3600.0
    gm_accel_bias_sigma_mps2: float = 0.06
    gm_gyro_scale_tau_s: float = 7200.0
    gm_gyro_scale_sigma: float = 0.005
    gm_accel_scale_tau_s: float = 7200.0
    gm_accel_scale_sigma: float = 0.005

    # update scheduling and gating
    update_rate_hz: float = 1.0
    innovation_gate_sigma: float = 0.0  # 0 disables the gate
    evaluation_gate_bias_dps: float = 1.0
    evaluation_gate_accel_bias_mps2: float = 0.2
    evaluation_gate_scale: float = 0.004

    # pseudo-observations
    pseudo_position_enabled: bool = True
    pseudo_position_prior_sigma_m: float = 5.0
    pseudo_position_window_s: float = 10.0
    pseudo_velocity_enabled: bool = False
    pseudo_velocity_sigma_mps: float = 0.5

    # accelerometer update
    accel_update_enabled: bool = True
    th_acc1_mps2: float = 0.5
    th_acc2_mps2: float = 2.0
    accel_sigma_mps2: float = 0.05
    accel_sigma_max_mps2: float = 100.0
    accel_mode_scale: float = 1.0
    accel_mode_window_s: float = 0.5

    # magnetometer update
    mag_update_enabled: bool = True
    mag_sigma_ut: float = 0.5
    qsmf_window_s: float = 1.0
    qsmf_threshold_ut: float = 1.5
    qsmf_smooth_s: float = 0.2
    qsmf_max_slope_ut_s: float = 5.0
    qsmf_calib_samples: int = 5

    # quasi-static attitude update
    qsau_enabled: bool = True
    qs_window_s: float = 1.0
    qs_gyro_std_dps: float = 0.3
    qs_gyro_mean_dps: float = 0.5
    qs_accel_std_mps2: float = 0.05
    qs_accel_mean_mps2: float = 0.1
    qsau_sigma_dps: float = 0.02

    # evaluation
    convergence_threshold_dps: float = 0.2
    reference_window_s: float = 30.0
    health_checks: bool = True

    # ------------------------------------------------------------------
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(
            gyro_arw=self.gyro_arw_dps_sqrt_hz * D2R,
            accel_vrw=self.accel_vrw_mps2_sqrt_hz,
            mag_noise=self.mag_noise_ut,
            sample_rate=self.sample_rate_hz,
        )

    def injected_errors(self) -> SensorErrors:
        return SensorErrors(
            b_g=np.asarray(self.inject_gyro_bias_dps) * D2R,
            b_a=np.asarray(self.inject_accel_bias_mps2),
            s_g=np.asarray(self.inject_gyro_scale_ppm) * 1e-6,
            s_a=np.asarray(self.inject_accel_scale_ppm) * 1e-6,
        )

    def mech_config(self) -> MechConfig:
        return MechConfig(self.earth_rotation, self.transport_rate)

    def gm_bank(self) -> GmBank:
        return GmBank(
            gyro_bias=GaussMarkovSpec(self.gm_gyro_bias_tau_s, self.gm_gyro_bias_sigma_dps * D2R),
            accel_bias=GaussMarkovSpec(self.gm_accel_bias_tau_s, self.gm_accel_bias_sigma_mps2),
            gyro_scale=GaussMarkovSpec(self.gm_gyro_scale_tau_s, self.gm_gyro_scale_sigma),
            accel_scale=GaussMarkovSpec(self.gm_accel_scale_tau_s, self.gm_accel_scale_sigma),
        )

    def evaluation_gates(self) -> EvaluationGates:
        return EvaluationGates(
            gyro_bias=self.evaluation_gate_bias_dps * D2R,
            accel_bias=self.evaluation_gate_accel_bias_mps2,
            gyro_scale=self.evaluation_gate_scale,
            accel_scale=self.evaluation_gate_scale,
        )

    def accel_mode_config(self) -> AccelModeConfig:
        return AccelModeConfig(
            th_acc1=self.th_acc1_mps2,
            th_acc2=self.th_acc2_mps2,
            sigma_a=self.accel_sigma_mps2,
            sigma_a_max=self.accel_sigma_max_mps2,
            s_scale=self.accel_mode_scale,
        )

    def quasi_static_config(self) -> QuasiStaticConfig:
        return QuasiStaticConfig(
            window_s=self.qs_window_s,
            gyro_std=self.qs_gyro_std_dps * D2R,
            gyro_mean=self.qs_gyro_mean_dps * D2R,
            accel_std=self.qs_accel_std_mps2,
            accel_mean=self.qs_accel_mean_mps2,
        )

    def qsmf_config(self) -> QsmfConfig:
        return QsmfConfig(
            window_s=self.qsmf_window_s,
            threshold_ut=self.qsmf_threshold_ut,
            smooth_s=self.qsmf_smooth_s,
            max_slope_ut_s=self.qsmf_max_slope_ut_s,
            calib_samples=self.qsmf_calib_samples,
        )

    def p0_diagonal(self) -> np.ndarray:
        sig = np.concatenate(
            [
                np.full(3, self.p0_pos_m),
                np.full(3, self.p0_vel_mps),
                [self.p0_att_h_rad, self.p0_att_h_rad, self.p0_att_z_rad],
                np.full(3, self.p0_gyro_bias_dps * D2R),
                np.full(3, self.p0_accel_bias_mps2),
                np.full(3, self.p0_gyro_scale),
                np.full(3, self.p0_accel_scale),
            ]
        )
        return sig**2

    def start_position(self) -> GeoPosition:
        return GeoPosition(np.radians(self.lat_deg), np.radians(self.lon_deg), self.height_m)

    def motion_profile(self) -> MotionProfile:
        preset = MODE_PRESETS[self.motion]
        return replace(
            preset,
            walk_speed=self.walk_speed_mps if self.motion != "static" else 0.0,
            step_frequency=self.step_frequency_hz,
        )

    def environment(self) -> MagEnvironment:
        if self.env == "outdoor":
            return outdoor_environment()
        if self.env == "indoor":
            return indoor_environment(self.duration_s, self.seed)
        raise ValueError(f"unknown environment: {self.env}")

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(
            profile=self.motion_profile(),
            environment=self.environment(),
            errors=self.injected_errors(),
            noise=self.noise_spec(),
            duration_s=self.duration_s,
            seed=self.seed,
            lead_in_s=self.lead_in_s,
            tail_s=self.tail_s,
            start=self.start_position(),
            mech=self.mech_config(),
        )


def _parse_value(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        return tuple(float(p) for p in raw.replace(",", " ").split())
    return raw


def load_config(path: str | Path, base: Config | None = None) -> Config:
    """
    Read a flat ``key = value`` file (``#`` comments, blank lines allowed)
    on top of the defaults. Unknown keys raise.
    """
    cfg = base or Config()
    known = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    updates = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
        updates[key] = _parse_value(raw, known[key])
    return replace(cfg, **updates)


def dump_config(cfg: Config) -> str:
    """Render a config as the flat key=value format (all keys, current values)."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(f"{x:g}" for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
