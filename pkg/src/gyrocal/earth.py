"""Earth model: WGS-84 quantities, normal gravity, frame rotation rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

# WGS-84 defining / derived constants.
SEMI_MAJOR_AXIS = 6378137.0  # m
FLATTENING = 1.0 / 298.257223563
ECCENTRICITY_SQ = FLATTENING * (2.0 - FLATTENING)
SEMI_MINOR_AXIS = SEMI_MAJOR_AXIS * (1.0 - FLATTENING)
EARTH_RATE = 7.292115e-5  # rad/s
GM = 3.986004418e14  # m^3/s^2

# Somigliana normal-gravity constants (WGS-84).
GRAVITY_EQUATOR = 9.7803253359  # m/s^2
SOMIGLIANA_K = 1.931852652458e-3
_M_RATIO = EARTH_RATE**2 * SEMI_MAJOR_AXIS**2 * SEMI_MINOR_AXIS / GM


@dataclass(frozen=True)
class GeoPosition:
    """Geodetic position: latitude (rad), longitude (rad), height (m)."""

    lat: float
    lon: float
    height: float

    def __post_init__(self):
        if not (abs(self.lat) <= np.pi / 2.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not np.isfinite([self.lat, self.lon, self.height]).all():
            raise ValueError("position components must be finite")


def radii_of_curvature(lat: float) -> tuple[float, float]:
    """Meridian and transverse (normal) radii of curvature (R_M, R_N) in meters."""
    s2 = np.sin(lat) ** 2
    d = 1.0 - ECCENTRICITY_SQ * s2
    r_n = SEMI_MAJOR_AXIS / np.sqrt(d)
    r_m = SEMI_MAJOR_AXIS * (1.0 - ECCENTRICITY_SQ) / d**1.5
    return float(r_m), float(r_n)


def gravity_magnitude(lat: float, height: float = 0.0) -> float:
    """
    Local gravity magnitude (m/s^2): Somigliana normal gravity on the
    WGS-84 ellipsoid with a free-air height correction.
    """
    if abs(lat) > np.pi / 2.0:
        raise ValueError(f"latitude out of range: {lat}")
    s2 = np.sin(lat) ** 2
    g0 = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / np.sqrt(1.0 - ECCENTRICITY_SQ * s2)
    h_corr = (
        1.0
        - 2.0 / SEMI_MAJOR_AXIS * (1.0 + FLATTENING + _M_RATIO - 2.0 * FLATTENING * s2) * height
        + 3.0 / SEMI_MAJOR_AXIS**2 * height**2
    )
    return float(g0 * h_corr)


def gravity_n(lat: float, height: float = 0.0) -> NDArray[np.float64]:
    """Gravity acceleration vector in NED (points down)."""
    return np.array([0.0, 0.0, gravity_magnitude(lat, height)])


def earth_rate_n(lat: float) -> NDArray[np.float64]:
    """Earth rotation rate projected to NED: [O*cos(lat), 0, -O*sin(lat)]."""
    if abs(lat) > np.pi / 2.0:
        raise ValueError(f"latitude out of range: {lat}")
    return EARTH_RATE * np.array([np.cos(lat), 0.0, -np.sin(lat)])


def transport_rate_n(pos: GeoPosition, v_n: ArrayLike) -> NDArray[np.float64]:
    """
    Rotation rate of the NED frame with respect to the Earth frame (rad/s)
    caused by vehicle motion over the curved Earth.
    """
    v_n = np.asarray(v_n, dtype=float)
    r_m, r_n = radii_of_curvature(pos.lat)
    return np.array(
        [
            v_n[1] / (r_n + pos.height),
            -v_n[0] / (r_m + pos.height),
            -v_n[1] * np.tan(pos.lat) / (r_n + pos.height),
        ]
    )


def geo_offset_m(pos: GeoPosition, ref: GeoPosition) -> NDArray[np.float64]:
    """NED offset (m) of `pos` relative to `ref`, evaluated with the radii at `ref`."""
    r_m, r_n = radii_of_curvature(ref.lat)
    return np.array(
        [
            (pos.lat - ref.lat) * (r_m + ref.height),
            (pos.lon - ref.lon) * (r_n + ref.height) * np.cos(ref.lat),
            -(pos.height - ref.height),
        ]
    )


def geo_shift(pos: GeoPosition, dr_ned: ArrayLike) -> GeoPosition:
    """Position displaced by an NED offset (m); inverse of `geo_offset_m` at `pos`."""
    dr = np.asarray(dr_ned, dtype=float)
    r_m, r_n = radii_of_curvature(pos.lat)
    return GeoPosition(
        pos.lat + dr[0] / (r_m + pos.height),
        pos.lon + dr[1] / ((r_n + pos.height) * np.cos(pos.lat)),
        pos.height - dr[2],
    )
