import numpy as np
import pytest

from early import harness, sac
from early.envsim import map_from_dict


@pytest.fixture(scope="session")
def nav1():
    return harness.load_task_map("nav1")


@pytest.fixture(scope="session")
def nav2():
    return harness.load_task_map("nav2")


@pytest.fixture(scope="session")
def nav3():
    return harness.load_task_map("nav3")


@pytest.fixture(scope="session")
def open_map():
    """20x20 map with no obstacles, free start/goal rectangles."""
    return map_from_dict({
        "bounds": [0.0, 0.0, 20.0, 20.0],
        "obstacles": [],
        "start": {"kind": "rect", "xmin": 1.0, "ymin": 1.0, "xmax": 19.0, "ymax": 19.0},
        "goal": {"kind": "rect", "xmin": 1.0, "ymin": 1.0, "xmax": 19.0, "ymax": 19.0},
        "goal_radius": 1.0,
        "max_steps": 200,
    }, name="open")


def make_rng(seed=0):
    return np.random.default_rng(seed)


@pytest.fixture
def rng():
    return make_rng(0)


def tiny_agent(map_spec, seed=0, hidden=(8, 8), **cfg_kwargs):
    """Small random agent for numeric tests."""
    cfg = sac.SacConfig(hidden=hidden, **cfg_kwargs)
    return sac.make_agent(cfg, map_spec, make_rng(seed))


@pytest.fixture
def agent(nav1):
    return tiny_agent(nav1)
