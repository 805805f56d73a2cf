"""
vphnav - command-line entry point.

    python -m vphnav.main run --scenario fig6 --mode vph_mpc --out out/fig6
    python -m vphnav.main batch --scenario empty --scenario fig6 --mode vph_only --mode vph_mpc --out out/batch
    python -m vphnav.main plot out/fig6 --kind trajectory --out out/fig6/trajectory.svg
    python -m vphnav.main plot out/batch/fig6 --kind control --out out/batch/fig6/control.svg
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from vphnav import __version__
from vphnav.config import get_settings
from vphnav.models import BatchRequest, ControllerMode, ExitCode, PlotKind, PlotRequest, RunRequest
from vphnav.routes import cmd_batch, cmd_plot, cmd_run

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    """Root logging setup; LOG_LEVEL from the environment unless overridden."""
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    modes = [mode.value for mode in ControllerMode]

    parser = argparse.ArgumentParser(
        prog="vphnav",
        description="Reactive polar-histogram navigation with MPC steering in a 2D simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL (DEBUG, INFO, WARNING, ERROR)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_episode_flags(command: argparse.ArgumentParser) -> None:
        command.add_argument("--params", dest="params_path", default=None, help="JSON params file")
        command.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                             help="Config override with a dotted key, e.g. mpc.N_p=20 (repeatable)")
        command.add_argument("--debug", action="store_true", help="Also write histogram.csv and mpc.csv")
        command.add_argument("--force", action="store_true", help="Overwrite existing artifacts")

    run = sub.add_parser("run", help="Run one scenario")
    run.add_argument("--scenario", required=True, help="Scenario file or built-in name")
    run.add_argument("--mode", choices=modes, default=None)
    run.add_argument("--out", default=settings.output_dir, help="Run directory")
    add_episode_flags(run)

    batch = sub.add_parser("batch", help="Run scenarios x modes and tabulate metrics")
    batch.add_argument("--scenario", dest="scenarios", action="append", required=True,
                       help="Scenario file or built-in name (repeatable)")
    batch.add_argument("--mode", dest="modes", action="append", choices=modes, default=None,
                       help="Controller mode (repeatable, default vph_mpc)")
    batch.add_argument("--out", default=settings.output_dir, help="Batch root directory")
    batch.add_argument("--jobs", type=int, default=settings.jobs, help="Parallel episodes (NAV_JOBS)")
    add_episode_flags(batch)

    plot = sub.add_parser("plot", help="Render an SVG from a run, or overlay several runs")
    plot.add_argument("logs", nargs="+", help="Run directories or CSV logs, or one batch scenario directory")
    plot.add_argument("--kind", required=True, choices=[kind.value for kind in PlotKind])
    plot.add_argument("--out", required=True, help="SVG file to write")
    plot.add_argument("--cycle", type=int, default=0, help="Histogram cycle")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch to a command handler.

    Returns:
        Exit status (0 success, 1 navigation failure, 2 usage/config error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else int(ExitCode.USAGE_ERROR)

    configure_logging(args.log_level)

    try:
        if args.command == "run":
            return cmd_run(RunRequest(
                scenario=args.scenario,
                params_path=args.params_path,
                output_dir=args.out,
                controller_mode=args.mode,
                overrides=args.overrides,
                debug=args.debug,
                force=args.force,
            ))
        if args.command == "batch":
            return cmd_batch(BatchRequest(
                scenarios=args.scenarios,
                modes=args.modes or [ControllerMode.VPH_MPC.value],
                params_path=args.params_path,
                output_dir=args.out,
                overrides=args.overrides,
                debug=args.debug,
                force=args.force,
                jobs=args.jobs,
            ))
        return cmd_plot(PlotRequest(log_paths=args.logs, kind=args.kind, output_path=args.out, cycle=args.cycle))
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        return int(ExitCode.USAGE_ERROR)


if __name__ == "__main__":
    sys.exit(main())
