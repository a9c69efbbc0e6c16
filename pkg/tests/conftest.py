import numpy as np
import pytest

from gyrocal.earth import GeoPosition
from gyrocal.geometry import Attitude
from gyrocal.mechanization import NavState

LAT, LON, H = np.radians(51.0), np.radians(-114.0), 1045.0


def make_nav_state(q=None, vel=None, lat=LAT, lon=LON, h=H):
    att = Attitude.identity() if q is None else Attitude(np.asarray(q, float))
    v = np.zeros(3) if vel is None else np.asarray(vel, float)
    return NavState(GeoPosition(lat, lon, h), v, att)


def random_attitude(rng):
    q = rng.standard_normal(4)
    return Attitude(q / np.linalg.norm(q))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
