"""
Closed-loop episode runner.
Each control period: scan, plan a heading, compute a steering command,
advance the plant, then check for collision and goal arrival.
"""

import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from shapely.geometry import Point

from vphnav.models import ControllerMode, EpisodeConfig, EpisodeMetrics, Outcome, Scenario
from vphnav.services.mpc import first_command, solve_mpc
from vphnav.services.vehicle import VehicleState, step_nonlinear
from vphnav.services.vph import Histogram, beam_to_heading, compute_histogram
from vphnav.services.world import WorldGeometry, build_geometry, goal_distance, raycast_scan
from vphnav.utils import wrap_angle

logger = logging.getLogger(__name__)

RECORD_FIELDS = ("t", "x", "y", "theta", "delta", "delta_cmd", "m", "min_range", "objective", "clearance")


@dataclass
class StepRecord:
    """State at time t and the command computed from it."""
    t: float
    x: float
    y: float
    theta: float
    delta: float
    delta_cmd: float
    m: int
    min_range: float
    objective: float
    clearance: float

    def as_row(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in RECORD_FIELDS}


@dataclass
class EpisodeLog:
    scenario: str
    controller_mode: ControllerMode
    sample_time: float
    goal: Tuple[float, float]
    records: List[StepRecord] = field(default_factory=list)
    outcome: Optional[Outcome] = None
    metrics: Optional[EpisodeMetrics] = None
    # Only filled when cfg.debug is set
    histograms: List[Tuple[int, Histogram]] = field(default_factory=list)
    mpc_diagnostics: List[Dict[str, float]] = field(default_factory=list)


def check_collision(
    world: Union[Scenario, WorldGeometry],
    pose: Sequence[float],
    radius: float,
) -> float:
    """
    Clearance between the vehicle disc and the nearest obstacle.

    Args:
        world: Scenario or its precomputed geometry
        pose: (x, y[, heading])
        radius: Vehicle bounding radius R

    Returns:
        Distance to the nearest obstacle minus R; -R inside an obstacle,
        sys.float_info.max when there are no obstacles
    """
    geometry = world if isinstance(world, WorldGeometry) else build_geometry(world)
    if not geometry.polygons:
        return sys.float_info.max
    center = Point(float(pose[0]), float(pose[1]))
    return min(polygon.distance(center) for polygon in geometry.polygons) - radius


def compute_metrics(log: EpisodeLog) -> EpisodeMetrics:
    """
    Summary numbers of a recorded episode.

    Raises:
        ValueError: If the log has no records
    """
    if not log.records:
        raise ValueError("cannot compute metrics of an empty log")

    xs = np.array([r.x for r in log.records])
    ys = np.array([r.y for r in log.records])
    deltas = np.array([r.delta for r in log.records])
    last = log.records[-1]

    rate = np.abs(np.diff(deltas)) / log.sample_time if len(deltas) > 1 else np.zeros(1)
    return EpisodeMetrics(
        path_length=float(np.sum(np.hypot(np.diff(xs), np.diff(ys)))),
        steps=len(log.records) - 1,
        min_clearance=float(min(r.clearance for r in log.records)),
        max_steering_rate=float(np.degrees(rate.max())),
        final_distance_to_goal=goal_distance((last.x, last.y), log.goal),
        duration=last.t,
    )


def pure_pursuit_steering(heading_error: float, wheelbase: float, lookahead: float, max_steer: float) -> float:
    """Front-wheel angle that points the vehicle at a lookahead point heading_error off its nose."""
    delta = math.atan2(2.0 * wheelbase * math.sin(heading_error), lookahead)
    return min(max(delta, -max_steer), max_steer)


class EpisodeRunner:
    """
    Runs one scenario under one configuration.
    Holds no state between episodes, so one instance can serve every run.
    """

    def run(self, scenario: Scenario, cfg: EpisodeConfig) -> EpisodeLog:
        """
        Simulate until goal, collision, loss of every feasible direction or timeout.

        Args:
            scenario: Obstacle world, start pose and goal
            cfg: Episode configuration

        Returns:
            EpisodeLog with exactly one outcome and its metrics
        """
        T = cfg.control_period
        geometry = build_geometry(scenario)
        rng = np.random.default_rng(cfg.noise_seed)
        state = VehicleState(x=scenario.start[0], y=scenario.start[1], theta=wrap_angle(scenario.start[2]), delta=0.0)
        log = EpisodeLog(
            scenario=scenario.name,
            controller_mode=cfg.controller_mode,
            sample_time=T,
            goal=tuple(scenario.goal),
        )

        logger.info(
            f"[EPISODE] Starting '{scenario.name}' in {cfg.controller_mode.value} mode "
            f"(v_r={cfg.speed} m/s, T={T} s, max_steps={cfg.max_steps})"
        )

        blocked_cycles = 0
        last_command = 0.0
        queued: List[float] = []
        scan, scan_pose = None, None
        histogram, desired = None, 0.0

        for step in range(cfg.max_steps + 1):
            t = step * T
            pose = (state.x, state.y, state.theta)
            clearance = check_collision(geometry, pose, cfg.vehicle.radius)
            if step % cfg.perception_cycles == 0:
                scan, scan_pose = raycast_scan(scenario, pose, cfg.lidar, geometry, rng), pose
            min_range = float(scan.ranges.min())

            outcome = None
            if clearance <= 0.0:
                outcome = Outcome.COLLISION
                logger.warning(f"[EPISODE] Collision at t={t:.1f} s, clearance {clearance:.3f} m")
            elif goal_distance(pose, scenario.goal) <= cfg.goal_tolerance:
                outcome = Outcome.GOAL_REACHED
            elif step == cfg.max_steps:
                outcome = Outcome.TIMEOUT

            if outcome is not None:
                log.records.append(StepRecord(t, state.x, state.y, state.theta, state.delta, state.delta, -1,
                                              min_range, math.nan, clearance))
                log.outcome = outcome
                break

            if step % cfg.planning_cycles == 0:
                # plans use the pose the scan was taken from
                histogram = compute_histogram(scan, scan_pose, scenario.goal, cfg.speed, cfg.vph)
                if histogram.m is not None:
                    angle = scan.fov_start_deg + histogram.m * scan.angular_resolution_deg
                    desired = beam_to_heading(angle, scan_pose[2], scan.heading_angle_deg)
                if cfg.debug:
                    log.histograms.append((step, histogram))

            objective = math.nan
            if histogram.m is None:
                blocked_cycles += 1
                queued.clear()
                if blocked_cycles > cfg.no_feasible_hold_cycles:
                    log.records.append(StepRecord(t, state.x, state.y, state.theta, state.delta, state.delta, -1,
                                                  min_range, math.nan, clearance))
                    log.outcome = Outcome.NO_FEASIBLE_DIRECTION
                    break
                logger.warning(f"[EPISODE] Step {step}: no feasible direction, holding ({blocked_cycles})")
                command = last_command * cfg.hold_decay
            else:
                blocked_cycles = 0
                if cfg.controller_mode == ControllerMode.VPH_ONLY:
                    command = pure_pursuit_steering(
                        wrap_angle(desired - state.theta),
                        cfg.vehicle.wheelbase,
                        cfg.speed * cfg.lookahead_time,
                        cfg.vehicle.max_steer,
                    )
                elif queued:
                    command = queued.pop(0)
                else:
                    command, objective = self._mpc_command(log, step, state, desired, cfg, queued)

            log.records.append(StepRecord(t, state.x, state.y, state.theta, state.delta, command,
                                          -1 if histogram.m is None else histogram.m,
                                          min_range, objective, clearance))
            state = step_nonlinear(state, command, cfg.speed, T, cfg.vehicle)
            last_command = command

        log.metrics = compute_metrics(log)
        logger.info(
            f"[EPISODE] ✓ '{scenario.name}' ({cfg.controller_mode.value}) finished: {log.outcome.value} "
            f"after {log.metrics.steps} steps, path {log.metrics.path_length:.2f} m, "
            f"min clearance {log.metrics.min_clearance:.3f} m"
        )
        return log

    @staticmethod
    def _mpc_command(
        log: EpisodeLog,
        step: int,
        state: VehicleState,
        desired: float,
        cfg: EpisodeConfig,
        queued: List[float],
    ) -> Tuple[float, float]:
        solution = solve_mpc(state, desired, state.delta, cfg.mpc, cfg.vehicle, cfg.speed)
        command = first_command(solution, state.delta, cfg.mpc, cfg.vehicle)
        if not solution.exact:
            logger.warning(f"[EPISODE] Step {step}: inexact MPC solve ({solution.status.value}), command clamped")
        if cfg.mpc.apply_first_nc:
            queued.extend(float(u) for u in solution.u[1:cfg.mpc.control_horizon])
        if cfg.debug:
            log.mpc_diagnostics.append({
                "step": step,
                "objective": solution.objective,
                "iterations": solution.iterations,
                "active_constraints": solution.active_constraints,
                "delta_u1": float(solution.delta_u[0]),
                "kkt_residual": solution.kkt_residual,
                "status": solution.status.value,
            })
        return command, solution.objective


# Singleton instance
episode_runner = EpisodeRunner()


def run_episode(scenario: Scenario, cfg: EpisodeConfig) -> EpisodeLog:
    """Run one closed-loop episode with the shared runner."""
    return episode_runner.run(scenario, cfg)
