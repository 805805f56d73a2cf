"""
`batch` command: every scenario under every controller mode, plus a
combined metrics table.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Tuple

from vphnav.models import BatchRequest, ExitCode, Outcome, RunRequest
from vphnav.routes.run import USAGE_ERRORS, execute_run
from vphnav.services.artifacts import METRICS_FILE, metrics_row, prepare_run_dir, write_metrics_table

logger = logging.getLogger(__name__)


def scenario_label(scenario: str) -> str:
    """Directory name of a scenario path or built-in name."""
    return Path(scenario).stem


def _run_one(request: RunRequest) -> Tuple[Dict[str, Any], int]:
    """Worker body; must stay a module-level function so it can be pickled."""
    label = scenario_label(request.scenario)
    mode = request.controller_mode.value
    try:
        log, summary = execute_run(request)
    except USAGE_ERRORS as e:
        logger.error(f"[BATCH] {label}/{mode}: {e}")
        return metrics_row(label, mode, {"outcome": "error"}), int(ExitCode.USAGE_ERROR)

    code = ExitCode.SUCCESS if log.outcome == Outcome.GOAL_REACHED else ExitCode.NAVIGATION_FAILURE
    return metrics_row(label, mode, summary), int(code)


def build_requests(request: BatchRequest) -> List[RunRequest]:
    """One RunRequest per scenario x mode, in a fixed order."""
    root = Path(request.output_dir)
    return [
        RunRequest(
            scenario=scenario,
            params_path=request.params_path,
            output_dir=str(root / scenario_label(scenario) / mode.value),
            controller_mode=mode,
            overrides=request.overrides,
            debug=request.debug,
            force=request.force,
        )
        for scenario in request.scenarios
        for mode in request.modes
    ]


def cmd_batch(request: BatchRequest) -> int:
    """
    Handle `batch`.
    Failing runs do not stop the others.

    Returns:
        0 if every run reached its goal, 2 if any run had a usage/config error, else 1
    """
    try:
        root = prepare_run_dir(Path(request.output_dir), request.force)
    except USAGE_ERRORS as e:
        logger.error(f"[BATCH] {e}")
        return int(ExitCode.USAGE_ERROR)

    runs = build_requests(request)
    logger.info(f"[BATCH] Running {len(runs)} episode(s) with {request.jobs} job(s)")

    if request.jobs > 1:
        with ProcessPoolExecutor(max_workers=request.jobs) as executor:
            results = list(executor.map(_run_one, runs))
    else:
        results = [_run_one(run) for run in runs]

    rows = [row for row, _ in results]
    codes = [code for _, code in results]
    write_metrics_table(root / METRICS_FILE, rows)

    failed = sum(1 for code in codes if code != ExitCode.SUCCESS)
    if failed:
        logger.warning(f"[BATCH] {failed} of {len(runs)} run(s) did not reach the goal")
        return int(ExitCode.USAGE_ERROR if ExitCode.USAGE_ERROR in codes else ExitCode.NAVIGATION_FAILURE)

    logger.info(f"[BATCH] ✓ All {len(runs)} run(s) reached the goal; table at {root / METRICS_FILE}")
    return int(ExitCode.SUCCESS)
