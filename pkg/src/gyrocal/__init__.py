"""gyrocal: autonomous real-time calibration of MEMS gyro biases and scale
factors from natural pedestrian motion, plus the synthetic-scenario
simulator used to exercise it."""

__version__ = "0.1.0"

from .earth import GeoPosition
from .geometry import Attitude
from .mechanization import ImuSample, MechConfig, NavState
from .sensors import GaussMarkovSpec, NoiseSpec, SensorErrors

__all__ = [
    "Attitude",
    "GeoPosition",
    "GaussMarkovSpec",
    "ImuSample",
    "MechConfig",
    "NavState",
    "NoiseSpec",
    "SensorErrors",
    "__version__",
]
