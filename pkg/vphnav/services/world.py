"""
World service: scenario loading and laser range finder simulation.
Obstacles are closed polygons; the scanner is a fan of ideal rays cast
against every polygon edge at once.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from shapely.geometry import Point, Polygon

from vphnav.config import get_settings
from vphnav.exceptions import ScenarioParseError, ScenarioValidationError
from vphnav.models import LidarSpec, Scenario

logger = logging.getLogger(__name__)

BUILTIN_SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

# Ranges are strictly positive even when the sensor sits on an edge
MIN_RANGE = 1e-6

Pose = Tuple[float, float, float]


@dataclass(frozen=True)
class Scan:
    """One sweep of the range finder, index i = beam i."""
    ranges: np.ndarray
    angular_resolution_deg: float = 1.0
    fov_start_deg: float = 0.0
    max_range: float = 80.0

    @property
    def beam_count(self) -> int:
        return int(self.ranges.shape[0])

    @property
    def heading_angle_deg(self) -> float:
        """Scan-frame angle of the vehicle's forward axis."""
        return self.fov_start_deg + 0.5 * (self.beam_count - 1) * self.angular_resolution_deg

    def angles_deg(self) -> np.ndarray:
        return self.fov_start_deg + np.arange(self.beam_count) * self.angular_resolution_deg

    def points(self) -> np.ndarray:
        """Obstacle points O_i in the scan frame, shape (n, 2)."""
        angles = np.deg2rad(self.angles_deg())
        return np.column_stack((self.ranges * np.cos(angles), self.ranges * np.sin(angles)))


@dataclass(frozen=True)
class WorldGeometry:
    """Precomputed obstacle geometry of a scenario."""
    edges: np.ndarray  # (M, 2, 2) segment endpoints
    polygons: Tuple[Polygon, ...]


def build_geometry(scenario: Scenario) -> WorldGeometry:
    """
    Flatten the scenario polygons into an edge array for raycasting.

    Args:
        scenario: Validated scenario

    Returns:
        WorldGeometry with one segment per polygon side
    """
    segments = []
    for vertices in scenario.obstacles:
        ring = np.asarray(vertices, dtype=float)
        segments.append(np.stack((ring, np.roll(ring, -1, axis=0)), axis=1))
    edges = np.concatenate(segments, axis=0) if segments else np.zeros((0, 2, 2))
    polygons = tuple(Polygon(vertices) for vertices in scenario.obstacles)
    return WorldGeometry(edges=edges, polygons=polygons)


def raycast_scan(
    scenario: Scenario,
    pose: Sequence[float],
    spec: Optional[LidarSpec] = None,
    geometry: Optional[WorldGeometry] = None,
    rng: Optional[np.random.Generator] = None,
) -> Scan:
    """
    Simulate one range-finder sweep from ``pose``.

    Beam i points along heading + (angle_i - forward_angle); ranges are the
    distance to the nearest polygon edge, clamped to max_range.

    Args:
        scenario: Obstacle world
        pose: (x, y, heading) of the sensor
        spec: Scanner description, defaults to the 181-beam 80 m fan
        geometry: Precomputed geometry of ``scenario`` (saves rebuilding it every call)
        rng: Generator for the optional range noise

    Returns:
        Scan with ``spec.beam_count`` ranges
    """
    spec = spec or LidarSpec()
    geometry = geometry or build_geometry(scenario)
    x, y, heading = float(pose[0]), float(pose[1]), float(pose[2])

    angles = heading + np.deg2rad(spec.beam_angles_deg() - spec.heading_angle_deg)
    dirs = np.column_stack((np.cos(angles), np.sin(angles)))
    ranges = np.full(spec.beam_count, spec.max_range)

    if geometry.edges.shape[0]:
        rel = geometry.edges[:, 0, :] - np.array([x, y])
        seg = geometry.edges[:, 1, :] - geometry.edges[:, 0, :]
        # ray p + t*d meets segment a + u*e where t = (a x e)/(d x e), u = (a x d)/(d x e)
        denom = dirs[:, 0, None] * seg[None, :, 1] - dirs[:, 1, None] * seg[None, :, 0]
        t_num = rel[None, :, 0] * seg[None, :, 1] - rel[None, :, 1] * seg[None, :, 0]
        u_num = rel[None, :, 0] * dirs[:, 1, None] - rel[None, :, 1] * dirs[:, 0, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t_num / denom
            u = u_num / denom
        hit = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        nearest = np.where(hit, t, np.inf).min(axis=1)
        ranges = np.minimum(nearest, spec.max_range)

    if spec.range_noise_std > 0.0 and rng is not None:
        returns = ranges < spec.max_range
        ranges = ranges + np.where(returns, rng.normal(0.0, spec.range_noise_std, ranges.shape), 0.0)

    ranges = np.clip(ranges, MIN_RANGE, spec.max_range)
    return Scan(
        ranges=ranges,
        angular_resolution_deg=spec.angular_resolution_deg,
        fov_start_deg=spec.fov_start_deg,
        max_range=spec.max_range,
    )


def validate_scenario(scenario: Scenario, radius: float) -> Scenario:
    """
    Check that start and goal keep more than ``radius`` from every obstacle.

    Args:
        scenario: Parsed scenario
        radius: Vehicle bounding radius R

    Returns:
        The same scenario

    Raises:
        ScenarioValidationError: If start or goal is inside an inflated obstacle
    """
    start = Point(scenario.start[0], scenario.start[1])
    goal = Point(scenario.goal[0], scenario.goal[1])
    for index, polygon in enumerate(build_geometry(scenario).polygons):
        if polygon.distance(start) <= radius:
            raise ScenarioValidationError(
                f"scenario '{scenario.name}': start lies within {radius} m of obstacle {index}"
            )
        if polygon.distance(goal) <= radius:
            raise ScenarioValidationError(
                f"scenario '{scenario.name}': goal lies within {radius} m of obstacle {index}"
            )
    return scenario


def list_builtin_scenarios() -> List[str]:
    """Names of the bundled scenarios."""
    return sorted(path.stem for path in BUILTIN_SCENARIO_DIR.glob("*.json"))


def resolve_scenario_path(path_or_name: str) -> Path:
    """
    Map a file path or scenario name to a file.
    Lookup order: literal path, NAV_SCENARIO_DIR, bundled suite.

    Raises:
        ScenarioParseError: If nothing matches
    """
    candidate = Path(path_or_name)
    if candidate.is_file():
        return candidate

    search_dirs = []
    scenario_dir = get_settings().scenario_dir
    if scenario_dir:
        search_dirs.append(Path(scenario_dir))
    search_dirs.append(BUILTIN_SCENARIO_DIR)

    for directory in search_dirs:
        named = directory / f"{path_or_name}.json"
        if named.is_file():
            return named

    raise ScenarioParseError(f"file not found: {path_or_name}")


def load_scenario(path_or_name: str, radius: float = 0.5) -> Scenario:
    """
    Load and validate a scenario JSON file or a built-in scenario by name.

    Args:
        path_or_name: File path, or a name such as "fig6"
        radius: Vehicle bounding radius used for the start/goal check

    Returns:
        Validated Scenario

    Raises:
        ScenarioParseError: Missing file, malformed JSON or wrong schema
        ScenarioValidationError: Degenerate polygon, or start/goal inside an obstacle
    """
    path = resolve_scenario_path(path_or_name)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        logger.error(f"[WORLD] Malformed scenario file {path}: {e.msg}")
        raise ScenarioParseError(f"{path}:{e.lineno}: {e.msg}") from e
    except OSError as e:
        raise ScenarioParseError(f"{path}: {e}") from e

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        geometric = any(err["type"] == "value_error" for err in e.errors())
        error_cls = ScenarioValidationError if geometric else ScenarioParseError
        raise error_cls(f"{path}: {e}") from e

    validate_scenario(scenario, radius)
    logger.info(
        f"[WORLD] ✓ Loaded scenario '{scenario.name}' with {len(scenario.obstacles)} obstacle(s) from {path}"
    )
    return scenario


def goal_distance(pose: Sequence[float], goal: Sequence[float]) -> float:
    """Planar distance from the pose position to the goal."""
    return math.hypot(goal[0] - pose[0], goal[1] - pose[1])
