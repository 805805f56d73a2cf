"""Builders shared by the test modules."""

from typing import List, Sequence

import numpy as np

from vphnav.models import Scenario
from vphnav.services.artifacts import build_config
from vphnav.services.world import Scan, load_scenario


def rectangle(x0: float, y0: float, x1: float, y1: float) -> List[List[float]]:
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def make_scan(ranges: Sequence[float]) -> Scan:
    return Scan(ranges=np.asarray(ranges, dtype=float))


def make_scenario(obstacles=(), start=(0.0, 0.0, 0.0), goal=(10.0, 0.0), name="test", params=None) -> Scenario:
    return Scenario(name=name, obstacles=list(obstacles), start=start, goal=goal, params=params or {})


def builtin_episode(name: str, *overrides: str, **flags):
    """Bundled scenario plus the config its params block produces."""
    scenario = load_scenario(name)
    cfg = build_config(scenario.params, overrides=overrides, **flags)
    return scenario, cfg
