"""
Pydantic models for configuration, scenario files and run summaries.
"""

import math
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from shapely.geometry import Polygon


# =============================================================================
# Enums
# =============================================================================

class ControllerMode(str, Enum):
    """Steering law used by the closed loop."""
    VPH_ONLY = "vph_only"
    VPH_MPC = "vph_mpc"


class ConcavityRule(str, Enum):
    """Which block-end comparison marks a block concave."""
    LITERAL = "literal"
    RECESSED = "recessed"


class Outcome(str, Enum):
    """Terminal state of an episode."""
    GOAL_REACHED = "GoalReached"
    COLLISION = "Collision"
    NO_FEASIBLE_DIRECTION = "NoFeasibleDirection"
    TIMEOUT = "Timeout"


class PlotKind(str, Enum):
    """Supported SVG renderings."""
    TRAJECTORY = "trajectory"
    CONTROL = "control"
    HISTOGRAM = "histogram"


class ExitCode(IntEnum):
    """Process exit status of every subcommand."""
    SUCCESS = 0
    NAVIGATION_FAILURE = 1
    USAGE_ERROR = 2


# =============================================================================
# World Models
# =============================================================================

class LidarSpec(BaseModel):
    """Planar laser range finder: one ideal ray per beam."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    beam_count: int = Field(default=181, ge=2)
    angular_resolution_deg: float = Field(default=1.0, gt=0, alias="gamma")
    max_range: float = Field(default=80.0, gt=0)
    fov_start_deg: float = Field(default=0.0)
    fov_end_deg: float = Field(default=180.0)
    range_noise_std: float = Field(default=0.0, ge=0, description="Additive Gaussian range noise (m)")

    @model_validator(mode="after")
    def _check_beam_count(self) -> "LidarSpec":
        span = self.fov_end_deg - self.fov_start_deg
        if span <= 0:
            raise ValueError("fov_end_deg must be greater than fov_start_deg")
        expected = span / self.angular_resolution_deg + 1
        if not math.isclose(expected, self.beam_count, abs_tol=1e-9):
            raise ValueError(
                f"beam_count must equal fov span / resolution + 1 ({expected:g}), got {self.beam_count}"
            )
        return self

    @property
    def heading_angle_deg(self) -> float:
        """Scan-frame angle of the vehicle's forward axis (90 for the default fan)."""
        return 0.5 * (self.fov_start_deg + self.fov_end_deg)

    def beam_angles_deg(self) -> np.ndarray:
        """Scan-frame angle of every beam, in degrees."""
        return self.fov_start_deg + np.arange(self.beam_count) * self.angular_resolution_deg


class Scenario(BaseModel):
    """
    Obstacle world with a start pose and a goal point.
    Lengths in meters, angles in radians.
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    obstacles: List[List[Tuple[float, float]]] = Field(default_factory=list)
    start: Tuple[float, float, float] = Field(..., description="x, y, heading")
    goal: Tuple[float, float]
    params: Dict[str, Any] = Field(
        default_factory=dict,
        description="Optional config overrides layered above the built-in defaults"
    )

    @field_validator("obstacles")
    @classmethod
    def _check_polygons(cls, obstacles: List[List[Tuple[float, float]]]):
        for index, vertices in enumerate(obstacles):
            if len(vertices) < 3:
                raise ValueError(f"obstacle {index} has {len(vertices)} vertices, need at least 3")
            if Polygon(vertices).area <= 0.0:
                raise ValueError(f"obstacle {index} has zero area")
        return obstacles


# =============================================================================
# Planner / Vehicle / Controller Parameters
# =============================================================================

class VphParams(BaseModel):
    """Parameters of the polar-histogram direction planner."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    radius: float = Field(default=0.5, gt=0, alias="R", description="Vehicle bounding radius used for shadowing")
    puffed_distance: float = Field(default=0.3, ge=0, alias="delta_d")
    clearance_deduction: Optional[float] = Field(
        default=None, ge=0, alias="R_prime",
        description="Distance subtracted from the reachable range; defaults to R"
    )
    window_radius: float = Field(default=10.0, gt=0, alias="L_w")
    deceleration: float = Field(default=2.0, gt=0, alias="a_dec")
    safety_margin: float = Field(default=0.2, ge=0, alias="d_margin")
    k1: float = Field(default=2.0, gt=0)
    k2: float = Field(default=1.0, gt=0)
    k3: float = Field(default=0.5, gt=0)
    concavity_rule: ConcavityRule = Field(default=ConcavityRule.LITERAL)

    @model_validator(mode="after")
    def _check_cost_weights(self) -> "VphParams":
        if not self.k1 > self.k2:
            raise ValueError(f"k1 must be greater than k2 (got k1={self.k1}, k2={self.k2})")
        return self

    @property
    def r_prime(self) -> float:
        return self.radius if self.clearance_deduction is None else self.clearance_deduction

    @property
    def r_threshold(self) -> float:
        """Block split / merge threshold R + 2*delta_d."""
        return self.radius + 2.0 * self.puffed_distance


class VehicleParams(BaseModel):
    """Geometry and actuator limits of the bicycle-model vehicle."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    wheelbase: float = Field(default=0.6, gt=0, alias="L")
    wheel_track: float = Field(default=0.35, gt=0)
    wheel_radius: float = Field(default=0.09, gt=0)
    max_steer_deg: float = Field(default=30.0, gt=0, lt=90)
    max_steer_rate_deg: float = Field(default=70.0, gt=0, description="deg/s")
    radius: float = Field(
        default=0.5, gt=0, alias="R",
        description="Bounding radius used for collision checks; must cover the wheel footprint"
    )

    @model_validator(mode="after")
    def _check_radius_covers_footprint(self) -> "VehicleParams":
        if self.radius < self.footprint_radius:
            raise ValueError(
                f"R={self.radius} m does not cover the wheel footprint (needs at least {self.footprint_radius:.3f} m)"
            )
        return self

    @property
    def footprint_radius(self) -> float:
        """Half diagonal of the rectangle spanned by the four wheel contact patches."""
        length = self.wheelbase + 2.0 * self.wheel_radius
        return 0.5 * math.hypot(length, self.wheel_track)

    @property
    def max_steer(self) -> float:
        """Steering limit in radians."""
        return math.radians(self.max_steer_deg)

    @property
    def max_steer_rate(self) -> float:
        """Steering slew limit in rad/s."""
        return math.radians(self.max_steer_rate_deg)


class MpcConfig(BaseModel):
    """Horizon, weights and solver limits of the steering MPC."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    prediction_horizon: int = Field(default=15, ge=1, alias="N_p")
    control_horizon: int = Field(default=5, ge=1, alias="N_c")
    sample_time: float = Field(default=0.1, gt=0, alias="T")
    state_weights: Tuple[float, float, float] = Field(default=(1.0, 1.0, 0.5), alias="Q")
    input_rate_weight: float = Field(default=10.0, gt=0, alias="R_w")
    input_weight: float = Field(default=1.0, ge=0, alias="S_w")
    max_iterations: int = Field(default=100, ge=1)
    apply_first_nc: bool = Field(
        default=False,
        description="Play the first N_c planned inputs open loop before re-solving"
    )

    @model_validator(mode="after")
    def _check_horizons(self) -> "MpcConfig":
        if self.control_horizon > self.prediction_horizon:
            raise ValueError("N_c must not exceed N_p")
        if any(weight < 0 for weight in self.state_weights):
            raise ValueError("Q weights must be non-negative")
        return self


class EpisodeConfig(BaseModel):
    """Everything one closed-loop run needs besides the scenario."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    speed: float = Field(default=2.0, gt=0, alias="v_r")
    goal_tolerance: float = Field(default=0.5, gt=0)
    max_steps: int = Field(default=3000, gt=0)
    controller_mode: ControllerMode = Field(default=ControllerMode.VPH_MPC)
    no_feasible_hold_cycles: int = Field(default=10, ge=0)
    hold_decay: float = Field(default=0.5, ge=0, le=1, description="Per-cycle factor applied to the held command")
    lookahead_time: float = Field(default=1.0, gt=0, description="vph_only lookahead L_d = v_r * lookahead_time")
    noise_seed: int = Field(default=0)
    debug: bool = Field(default=False, description="Keep per-cycle histograms and MPC diagnostics")
    perception_period: Optional[float] = Field(default=None, gt=0, description="Seconds between scans, defaults to T")
    planning_period: Optional[float] = Field(default=None, gt=0, description="Seconds between VPH+ plans, defaults to T")

    vph: VphParams = Field(default_factory=VphParams)
    mpc: MpcConfig = Field(default_factory=MpcConfig)
    vehicle: VehicleParams = Field(default_factory=VehicleParams)
    lidar: LidarSpec = Field(default_factory=LidarSpec)

    @model_validator(mode="after")
    def _check_periods(self) -> "EpisodeConfig":
        for name in ("perception_period", "planning_period"):
            period = getattr(self, name)
            if period is None:
                continue
            cycles = period / self.mpc.sample_time
            if round(cycles) < 1 or abs(cycles - round(cycles)) > 1e-9:
                raise ValueError(f"{name}={period} s must be a whole multiple of T={self.mpc.sample_time} s")
        return self

    @property
    def control_period(self) -> float:
        return self.mpc.sample_time

    @property
    def perception_cycles(self) -> int:
        """Control cycles per scan."""
        return 1 if self.perception_period is None else round(self.perception_period / self.mpc.sample_time)

    @property
    def planning_cycles(self) -> int:
        """Control cycles per VPH+ plan."""
        return 1 if self.planning_period is None else round(self.planning_period / self.mpc.sample_time)


# =============================================================================
# Command Models
# =============================================================================

class RunRequest(BaseModel):
    """One `run` invocation."""
    scenario: str = Field(..., description="Scenario file path or built-in name")
    params_path: Optional[str] = None
    output_dir: str
    controller_mode: Optional[ControllerMode] = None
    overrides: List[str] = Field(default_factory=list, description="key=value pairs")
    debug: bool = False
    force: bool = False


class BatchRequest(BaseModel):
    """One `batch` invocation: the cross product of scenarios and modes."""
    scenarios: List[str] = Field(..., min_length=1)
    modes: List[ControllerMode] = Field(default_factory=lambda: [ControllerMode.VPH_MPC])
    params_path: Optional[str] = None
    output_dir: str
    overrides: List[str] = Field(default_factory=list)
    debug: bool = False
    force: bool = False
    jobs: int = Field(default=1, ge=1)


class PlotRequest(BaseModel):
    """One `plot` invocation."""
    log_paths: List[str] = Field(
        ..., min_length=1,
        description="Run directories or CSV logs; several runs, or one batch scenario directory, are overlaid"
    )
    kind: PlotKind
    output_path: str
    cycle: int = Field(default=0, ge=0)


class EpisodeMetrics(BaseModel):
    """Summary numbers of one episode."""
    path_length: float
    steps: int
    min_clearance: float
    max_steering_rate: float = Field(..., description="max |delta_{k+1} - delta_k| / T in deg/s")
    final_distance_to_goal: float
    duration: float
