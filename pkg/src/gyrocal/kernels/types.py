"""Shared parameter/result types of the propagation kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..eskf import GmBank
from ..sensors import GaussMarkovSpec


@dataclass(frozen=True)
class KernelParams:
    """Flat, backend-agnostic parameter block for `propagate_block`.

    ``gm_tau``/``gm_qd`` are ordered (gyro bias, accel bias, gyro scale,
    accel scale); ``q_vel``/``q_att`` are the per-step white-noise
    variances (density^2 * dt).
    """

    gm_tau: NDArray[np.float64]
    gm_qd: NDArray[np.float64]
    q_vel: float
    q_att: float
    earth_rotation: bool = True
    transport_rate: bool = True
    health_checks: bool = True

    def gm_bank(self) -> GmBank:
        # Sigmas are irrelevant for the F diagonal; the driving variances
        # arrive pre-discretized in gm_qd.
        return GmBank(
            gyro_bias=GaussMarkovSpec(self.gm_tau[0], 1.0),
            accel_bias=GaussMarkovSpec(self.gm_tau[1], 1.0),
            gyro_scale=GaussMarkovSpec(self.gm_tau[2], 1.0),
            accel_scale=GaussMarkovSpec(self.gm_tau[3], 1.0),
        )


@dataclass
class BlockHealth:
    """Numerical health of one propagated block."""

    max_asym: float = 0.0
    psd_failures: int = 0
