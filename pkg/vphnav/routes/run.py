"""
`run` command: one scenario, one controller mode, one run directory.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from vphnav.exceptions import ConfigError, LogFormatError, ScenarioError
from vphnav.models import EpisodeConfig, ExitCode, Outcome, RunRequest, Scenario
from vphnav.services.artifacts import build_config, prepare_run_dir, write_run
from vphnav.services.simloop import EpisodeLog, episode_runner
from vphnav.services.world import load_scenario, validate_scenario

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ScenarioError, ConfigError, LogFormatError, FileExistsError, OSError)


def prepare_episode(request: RunRequest) -> Tuple[Scenario, EpisodeConfig]:
    """
    Load the scenario and layer its params with the request's config sources.

    Raises:
        ScenarioError: Scenario missing, malformed or invalid for the vehicle radius
        ConfigError: Bad params file or override
    """
    scenario = load_scenario(request.scenario, radius=0.0)
    cfg = build_config(
        scenario_params=scenario.params,
        params_path=request.params_path,
        overrides=request.overrides,
        controller_mode=request.controller_mode,
        debug=request.debug or None,
    )
    validate_scenario(scenario, cfg.vehicle.radius)
    return scenario, cfg


def execute_run(request: RunRequest) -> Tuple[EpisodeLog, Dict[str, Any]]:
    """
    Run one episode and write its artifacts.

    Returns:
        (episode log, summary document)

    Raises:
        Any of USAGE_ERRORS
    """
    scenario, cfg = prepare_episode(request)
    run_dir = prepare_run_dir(Path(request.output_dir), request.force)
    log = episode_runner.run(scenario, cfg)
    summary = write_run(run_dir, log, cfg, scenario, request.scenario)
    return log, summary


def cmd_run(request: RunRequest) -> int:
    """
    Handle `run`.

    Returns:
        0 on GoalReached, 1 on any other outcome, 2 on usage, config or I/O errors
    """
    logger.info(f"[RUN] Scenario {request.scenario} -> {request.output_dir}")
    try:
        log, _ = execute_run(request)
    except USAGE_ERRORS as e:
        logger.error(f"[RUN] {e}")
        return int(ExitCode.USAGE_ERROR)

    if log.outcome != Outcome.GOAL_REACHED:
        logger.warning(f"[RUN] '{log.scenario}' ended with {log.outcome.value}")
        return int(ExitCode.NAVIGATION_FAILURE)

    logger.info(f"[RUN] ✓ '{log.scenario}' reached the goal in {log.metrics.steps} steps")
    return int(ExitCode.SUCCESS)
