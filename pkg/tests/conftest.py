import numpy as np
import pytest

from aris_opt.scenario import load_scenario

MINI_CONFIG = """
n_slots = 12
ris.rows = 2
ris.cols = 2
limits.start_x = 200
limits.start_y = -100
limits.finish_x = 600
limits.finish_y = 100
"""

# three slots, single-element RIS, short hop around the midpoint corridor
TOY_CONFIG = """
n_slots = 3
ris.rows = 1
ris.cols = 1
nodes.1.x = 250
nodes.2.x = 550
limits.start_x = 380
limits.start_y = -40
limits.finish_x = 420
limits.finish_y = -40
limits.v_max_horizontal_ms = 60
limits.v_max_vertical_ms = 400
limits.h_min_m = 120
"""


@pytest.fixture(scope="session")
def mini_scenario():
    return load_scenario(MINI_CONFIG)


@pytest.fixture(scope="session")
def toy_scenario():
    return load_scenario(TOY_CONFIG)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240517)
