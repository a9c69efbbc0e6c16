"""Initial attitude determination from one accelerometer/magnetometer pair,
with an accelerometer-only leveling fallback (heading set to zero)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import AlignmentDeferred, DegenerateGeometryError
from .geometry import Attitude, orthonormalize_rotation, quat_from_euler

MIN_PAIR_ANGLE = np.radians(5.0)
HEADING_SIGMA_UNKNOWN = np.pi / np.sqrt(3.0)  # 1-sigma of a uniform heading


@dataclass(frozen=True)
class AlignmentInputs:
    """Measured body-frame vectors and their nav-frame references."""

    f_b: NDArray[np.float64]
    m_b: NDArray[np.float64]
    f_n: NDArray[np.float64]
    m_n: NDArray[np.float64]


def _pair_angle(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.arccos(c))


def initial_dcm(inp: AlignmentInputs) -> Attitude:
    """
    Two-vector (triad) attitude: solves
    ``[f_n m_n l_n]^T C = [f_b m_b l_b]^T`` with ``l = f x m`` and
    re-orthonormalizes the result by polar decomposition.

    Raises `DegenerateGeometryError` when either vector pair is closer
    than 5 degrees to parallel, in which case leveling is the fallback.
    """
    f_b = np.asarray(inp.f_b, dtype=float)
    m_b = np.asarray(inp.m_b, dtype=float)
    f_n = np.asarray(inp.f_n, dtype=float)
    m_n = np.asarray(inp.m_n, dtype=float)

    for f, m in ((f_n, m_n), (f_b, m_b)):
        ang = _pair_angle(f, m)
        if min(ang, np.pi - ang) < MIN_PAIR_ANGLE:
            raise DegenerateGeometryError(
                "accelerometer and magnetometer vectors too close to parallel"
            )

    M_n = np.vstack([f_n, m_n, np.cross(f_n, m_n)])
    M_b = np.vstack([f_b, m_b, np.cross(f_b, m_b)])
    C = np.linalg.solve(M_n, M_b)
    return Attitude.from_dcm(orthonormalize_rotation(C))


def leveling_fallback(f_b: ArrayLike, g: float = 9.80665) -> Attitude:
    """
    Roll/pitch from the measured gravity direction; heading set to zero.

    Valid only near rest: requires ``| |f_b| - g | <= 0.5 g``, otherwise
    raises `AlignmentDeferred` so the caller retries on later samples.
    The caller is responsible for widening the heading uncertainty to
    `HEADING_SIGMA_UNKNOWN` in the filter covariance.
    """
    f_b = np.asarray(f_b, dtype=float)
    norm = np.linalg.norm(f_b)
    if abs(norm - g) > 0.5 * g:
        raise AlignmentDeferred(
            f"specific force magnitude {norm:.2f} m/s^2 too far from gravity for leveling"
        )
    pitch = np.arctan2(f_b[0], np.hypot(f_b[1], f_b[2]))
    roll = np.arctan2(-f_b[1], -f_b[2])
    return Attitude(quat_from_euler(float(roll), float(pitch), 0.0))
