"""Shared fixtures: a small but fully honest profile bundle."""

import numpy as np
import pytest

from ws_scatter.grids import Grid
from ws_scatter.profiles import (build_asymptotic_state, build_profile_bundle,
                                 gaussian_field)

TEST_SIGMA = 0.5
TEST_ALPHA = 0.12
TEST_WAVE_AMP = 1.0
TEST_WAVE_WIDTH = 3.5


@pytest.fixture(scope="session")
def small_state():
    gp = Grid(40, 8.6)
    gw = Grid(48, 72.0)
    w = gaussian_field(gp, TEST_ALPHA, TEST_SIGMA).astype(complex)
    a_plus = gaussian_field(gw, TEST_WAVE_AMP, TEST_WAVE_WIDTH)
    return build_asymptotic_state(gp, w, gw, a_plus, np.zeros(gw.shape))


@pytest.fixture(scope="session")
def small_bundle(small_state):
    return build_profile_bundle(small_state, nu_max=16.0, node_count=96,
                                near_n=128, octave_n=64)
