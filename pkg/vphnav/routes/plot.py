"""
`plot` command: render an SVG from a run's logs, or overlay several runs.
"""

import logging

from vphnav.exceptions import LogFormatError
from vphnav.models import ExitCode, PlotRequest
from vphnav.services.plotting import expand_runs, render_comparison, render_plot

logger = logging.getLogger(__name__)


def cmd_plot(request: PlotRequest) -> int:
    """
    Handle `plot`. Several runs, or a batch scenario directory, are overlaid.

    Returns:
        0 when the SVG was written, 2 on a missing or malformed log
    """
    sources = ", ".join(request.log_paths)
    try:
        runs = expand_runs(request.log_paths)
        if len(runs) > 1:
            render_comparison(request.kind, runs, request.output_path)
        else:
            render_plot(request.kind, runs[0], request.output_path, request.cycle)
    except (FileNotFoundError, LogFormatError, ValueError) as e:
        logger.error(f"[PLOT] Cannot plot {sources}: {e}")
        return int(ExitCode.USAGE_ERROR)
    return int(ExitCode.SUCCESS)
