import numpy as np
import pytest

from wisense import chansim
from wisense.resolution import ArrayGeometry


def single_pair_geometry(d_rt=7.0, n=1):
    return ArrayGeometry.from_carrier(5.32e9, n_tx=n, n_rx=n, bandwidth=10e6, d_rt=d_rt)


def make_scene(scatterers, d_rt=7.0, n=1, freqs=None, **kw):
    g = single_pair_geometry(d_rt, n)
    kw.setdefault("phase_distortion", "zero")
    if freqs is not None:
        kw["subcarrier_freqs"] = freqs
    return chansim.Scene(geometry=g, tx_position=[0.0, 0.0, 0.0], rx_position=[d_rt, 0.0, 0.0],
                         scatterers=scatterers, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
