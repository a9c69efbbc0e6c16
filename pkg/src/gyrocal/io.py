"""Sensor-stream CSV format shared by the simulator and the CLI.

Header ``t,gx,gy,gz,ax,ay,az,mx,my,mz``: time in seconds (monotonic),
gyro in rad/s, accel in m/s^2, magnetometer in uT. The magnetometer
columns are optional. Rows carry interval-average rates (the value at
``t[k]`` covers ``(t[k-1], t[k]]``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exceptions import MalformedStreamError
from .simulator import StreamData

FULL_HEADER = "t,gx,gy,gz,ax,ay,az,mx,my,mz"
IMU_HEADER = "t,gx,gy,gz,ax,ay,az"


def write_stream_csv(path: str | Path, stream: StreamData) -> None:
    cols = [stream.t[:, None], stream.gyro, stream.accel]
    header = FULL_HEADER if stream.mag is not None else IMU_HEADER
    if stream.mag is not None:
        cols.append(stream.mag)
    data = np.hstack(cols)
    np.savetxt(path, data, fmt="%.10g", delimiter=",", header=header, comments="")


def read_stream_csv(path: str | Path) -> StreamData:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    names = [c.strip() for c in header.split(",")]
    if names[:7] != IMU_HEADER.split(","):
        raise MalformedStreamError(f"unexpected CSV header in {path}: {header!r}")
    has_mag = names == FULL_HEADER.split(",")
    if not has_mag and len(names) != 7:
        raise MalformedStreamError(f"unexpected CSV header in {path}: {header!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise MalformedStreamError(f"unparseable CSV {path}: {e}") from e
    if data.size == 0 or data.shape[0] < 2:
        raise MalformedStreamError("stream has fewer than two samples")
    if data.shape[1] != len(names):
        raise MalformedStreamError("row width does not match header")
    t = data[:, 0]
    if not np.isfinite(data).all():
        raise MalformedStreamError("stream contains non-finite values")
    if np.any(np.diff(t) <= 0.0):
        raise MalformedStreamError("timestamps must be strictly increasing")
    mag = data[:, 7:10] if has_mag else None
    return StreamData(t, data[:, 1:4], data[:, 4:7], mag)
