"""
Static SVG plots of recorded runs: the driven path over the obstacle
outlines, the steering history, and one cycle's polar histogram.
Several runs of one scenario can be overlaid on shared axes.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from vphnav.models import PlotKind, Scenario  # noqa: E402
from vphnav.services.artifacts import (  # noqa: E402
    HISTOGRAM_FILE,
    TRAJECTORY_FILE,
    read_histogram,
    read_scenario_copy,
    read_trajectory,
)
from vphnav.services.simloop import StepRecord  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, out_path: Path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)


def plot_trajectory(records: List[StepRecord], scenario: Optional[Scenario], out_path: Path) -> Dict[str, np.ndarray]:
    """
    Path of the vehicle over the obstacle outlines.

    Returns:
        The plotted series {"x", "y"}
    """
    series = {
        "x": np.array([r.x for r in records]),
        "y": np.array([r.y for r in records]),
    }
    fig, ax = plt.subplots(figsize=(10, 6))
    if scenario is not None:
        for vertices in scenario.obstacles:
            ring = np.asarray(vertices + [vertices[0]], dtype=float)
            ax.fill(ring[:, 0], ring[:, 1], color="0.75", edgecolor="k", linewidth=1)
        ax.plot(scenario.goal[0], scenario.goal[1], "g*", ms=12, label="goal")
    ax.plot(series["x"], series["y"], "-b", linewidth=2, label="trajectory")
    if len(records):
        ax.plot(series["x"][0], series["y"][0], "ro", ms=6, label="start")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.axis("equal")
    ax.grid(True)
    ax.legend()
    _save(fig, out_path)
    return series


def plot_control(records: List[StepRecord], out_path: Path) -> Dict[str, np.ndarray]:
    """
    Commanded and actual steering over time, and the steering rate.

    Returns:
        The plotted series {"t", "delta_cmd", "delta", "rate"} (angles in degrees)
    """
    t = np.array([r.t for r in records])
    delta = np.degrees([r.delta for r in records])
    series = {
        "t": t,
        "delta_cmd": np.degrees([r.delta_cmd for r in records]),
        "delta": np.asarray(delta),
        "rate": np.diff(delta) / np.diff(t) if len(t) > 1 else np.zeros(0),
    }
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    top.plot(t, series["delta_cmd"], "--r", label="commanded")
    top.plot(t, series["delta"], "-b", label="applied")
    top.set_ylabel("steering [deg]")
    top.grid(True)
    top.legend()
    bottom.plot(t[1:], series["rate"], "-k")
    bottom.set_xlabel("t [s]")
    bottom.set_ylabel("steering rate [deg/s]")
    bottom.grid(True)
    _save(fig, out_path)
    return series


def plot_histogram(histogram: Dict[str, np.ndarray], out_path: Path, cycle: int = 0) -> Dict[str, np.ndarray]:
    """
    D, B, H and C against beam index for one cycle.

    Returns:
        The plotted series {"i", "D", "B", "H", "C"}
    """
    series = {
        "i": histogram["i"],
        "D": histogram["D_i"],
        "B": histogram["B_i"],
        "H": histogram["H_i"],
        "C": histogram["C_i"],
    }
    fig, axes = plt.subplots(4, 1, figsize=(10, 9), sharex=True)
    for ax, name in zip(axes, ("D", "B", "H", "C")):
        ax.plot(series["i"], series[name], "-b" if name in ("D", "C") else "-k", drawstyle="steps-mid")
        ax.set_ylabel(name)
        ax.grid(True)
    axes[0].set_title(f"cycle {cycle}")
    axes[-1].set_xlabel("beam index")
    _save(fig, out_path)
    return series


def _resolve_log(log_path: Path, default_name: str) -> Path:
    log_path = Path(log_path)
    return log_path / default_name if log_path.is_dir() else log_path


def render_plot(kind: PlotKind, log_path: Path, out_path: Path, cycle: int = 0) -> Dict[str, np.ndarray]:
    """
    Render one plot kind from a run directory or CSV file.

    Args:
        kind: trajectory, control or histogram
        log_path: Run directory, trajectory.csv or histogram.csv
        out_path: SVG file to write
        cycle: Histogram cycle to draw

    Returns:
        The plotted series

    Raises:
        ValueError: Unknown plot kind
        FileNotFoundError: Missing log
        LogFormatError: Malformed log
    """
    kind = PlotKind(kind)
    if kind == PlotKind.HISTOGRAM:
        path = _resolve_log(log_path, HISTOGRAM_FILE)
        series = plot_histogram(read_histogram(path, cycle), out_path, cycle)
    else:
        path = _resolve_log(log_path, TRAJECTORY_FILE)
        records = read_trajectory(path)
        if kind == PlotKind.TRAJECTORY:
            series = plot_trajectory(records, read_scenario_copy(path.parent), out_path)
        else:
            series = plot_control(records, out_path)
    logger.info(f"[PLOT] ✓ Rendered {kind.value} plot of {path} to {out_path}")
    return series


# =============================================================================
# Run comparison
# =============================================================================

def expand_runs(log_paths: Sequence[Path]) -> List[Path]:
    """
    Resolve the runs behind the given paths. A directory without its own
    trajectory but with run subdirectories (a batch scenario directory)
    stands for those runs, in name order.
    """
    runs: List[Path] = []
    for log_path in map(Path, log_paths):
        if log_path.is_dir() and not (log_path / TRAJECTORY_FILE).is_file():
            children = sorted(p for p in log_path.iterdir() if (p / TRAJECTORY_FILE).is_file())
            if children:
                runs.extend(children)
                continue
        runs.append(log_path)
    return runs


def _run_label(path: Path, taken: Dict[str, List[StepRecord]]) -> str:
    run_dir = path if path.is_dir() else path.parent
    label = run_dir.name
    return label if label not in taken else f"{run_dir.parent.name}/{label}"


def plot_trajectory_comparison(
    runs: Dict[str, List[StepRecord]],
    scenario: Optional[Scenario],
    out_path: Path,
) -> Dict[str, Dict[str, np.ndarray]]:
    """
    Paths of several runs over one set of obstacle outlines.

    Returns:
        Per run label, the plotted series {"x", "y"}
    """
    series = {
        label: {"x": np.array([r.x for r in records]), "y": np.array([r.y for r in records])}
        for label, records in runs.items()
    }
    fig, ax = plt.subplots(figsize=(10, 6))
    if scenario is not None:
        for vertices in scenario.obstacles:
            ring = np.asarray(vertices + [vertices[0]], dtype=float)
            ax.fill(ring[:, 0], ring[:, 1], color="0.75", edgecolor="k", linewidth=1)
        ax.plot(scenario.goal[0], scenario.goal[1], "g*", ms=12, label="goal")
    for label, xy in series.items():
        ax.plot(xy["x"], xy["y"], linewidth=2, label=label)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.axis("equal")
    ax.grid(True)
    ax.legend()
    _save(fig, out_path)
    return series


def plot_control_comparison(runs: Dict[str, List[StepRecord]], out_path: Path) -> Dict[str, Dict[str, np.ndarray]]:
    """
    Commanded steering of several runs, and its change per control cycle.

    Returns:
        Per run label, the plotted series {"t", "delta_cmd", "change"} (degrees)
    """
    series = {}
    for label, records in runs.items():
        delta_cmd = np.degrees([r.delta_cmd for r in records])
        series[label] = {
            "t": np.array([r.t for r in records]),
            "delta_cmd": np.asarray(delta_cmd),
            "change": np.diff(delta_cmd),
        }
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    for label, values in series.items():
        top.plot(values["t"], values["delta_cmd"], label=label)
        bottom.plot(values["t"][1:], values["change"], label=label)
    top.set_ylabel("commanded steering [deg]")
    top.grid(True)
    top.legend()
    bottom.set_xlabel("t [s]")
    bottom.set_ylabel("change per cycle [deg]")
    bottom.grid(True)
    _save(fig, out_path)
    return series


def render_comparison(kind: PlotKind, log_paths: Sequence[Path], out_path: Path) -> Dict[str, Dict[str, np.ndarray]]:
    """
    Overlay the trajectory or control plots of several runs.

    Args:
        kind: trajectory or control
        log_paths: Run directories, trajectory CSVs or batch scenario directories
        out_path: SVG file to write

    Returns:
        Per run label, the plotted series

    Raises:
        ValueError: Histogram kind, or fewer than two runs
        FileNotFoundError: Missing log
        LogFormatError: Malformed log
    """
    kind = PlotKind(kind)
    if kind == PlotKind.HISTOGRAM:
        raise ValueError("histogram plots take a single run")
    paths = expand_runs(log_paths)
    if len(paths) < 2:
        raise ValueError(f"a comparison needs at least two runs, found {len(paths)}")

    runs: Dict[str, List[StepRecord]] = {}
    for path in paths:
        runs[_run_label(path, runs)] = read_trajectory(_resolve_log(path, TRAJECTORY_FILE))

    if kind == PlotKind.TRAJECTORY:
        first = _resolve_log(paths[0], TRAJECTORY_FILE)
        series = plot_trajectory_comparison(runs, read_scenario_copy(first.parent), out_path)
    else:
        series = plot_control_comparison(runs, out_path)
    logger.info(f"[PLOT] ✓ Rendered {kind.value} comparison of {', '.join(runs)} to {out_path}")
    return series
