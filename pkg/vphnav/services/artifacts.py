"""
Run artifacts: layered episode configuration and the CSV/JSON files
written into each run directory.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Type

import numpy as np
from pydantic import BaseModel, ValidationError

from vphnav.exceptions import ConfigError, LogFormatError
from vphnav.models import ControllerMode, EpisodeConfig, Scenario
from vphnav.services.simloop import RECORD_FIELDS, EpisodeLog, StepRecord
from vphnav.utils import deep_merge, dotted_to_nested, parse_override

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.json"
SCENARIO_FILE = "scenario.json"
HISTOGRAM_FILE = "histogram.csv"
MPC_FILE = "mpc.csv"
METRICS_FILE = "metrics.csv"

HISTOGRAM_FIELDS = ("cycle", "i", "d_i", "D_i", "B_i", "H_i", "S_i", "C_i")
MPC_FIELDS = ("step", "objective", "iterations", "active_constraints", "delta_u1", "kkt_residual", "status")
METRICS_FIELDS = (
    "scenario", "mode", "outcome", "path_length", "steps", "min_clearance",
    "max_steering_rate", "final_distance_to_goal", "duration",
)


# =============================================================================
# Configuration layering
# =============================================================================

def _canonicalize(model_cls: Type[BaseModel], data: Dict[str, Any], origin: str, prefix: str = "") -> Dict[str, Any]:
    """
    Rewrite alias keys (``N_p``, ``R``) to field names so layers merge key by key.

    Raises:
        ConfigError: On a key the model does not define
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: '{prefix or '<root>'}' must be an object")

    lookup: Dict[str, str] = {}
    for name, info in model_cls.model_fields.items():
        lookup[name] = name
        if info.alias:
            lookup[info.alias] = name

    canonical: Dict[str, Any] = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in lookup:
            raise ConfigError(f"{origin}: unknown config key '{path}'")
        name = lookup[key]
        annotation = model_cls.model_fields[name].annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel) and isinstance(value, dict):
            value = _canonicalize(annotation, value, origin, f"{path}.")
        canonical[name] = value
    return canonical


def load_params_file(path: str) -> Dict[str, Any]:
    """
    Read a JSON params file.

    Raises:
        ConfigError: Missing file or malformed JSON, reported as ``path:line: message``
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"[CONFIG] Cannot read params file {path}: {e}")
        raise ConfigError(f"{path}: file not found or unreadable") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"[CONFIG] Malformed params file {path}: {e.msg}")
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: params file must hold a JSON object")
    return data


def build_config(
    scenario_params: Optional[Dict[str, Any]] = None,
    params_path: Optional[str] = None,
    overrides: Sequence[str] = (),
    controller_mode: Optional[ControllerMode] = None,
    debug: Optional[bool] = None,
) -> EpisodeConfig:
    """
    Layer configuration sources into one EpisodeConfig.
    Lowest to highest: defaults, scenario params, params file, --set overrides,
    then the explicit --mode / --debug flags.

    Args:
        scenario_params: The scenario file's ``params`` block
        params_path: Optional JSON params file
        overrides: ``key=value`` strings with dotted keys
        controller_mode: Mode flag, if given
        debug: Debug flag, if given

    Returns:
        Validated EpisodeConfig

    Raises:
        ConfigError: On any unreadable, unknown or invalid setting
    """
    merged: Dict[str, Any] = {}
    if scenario_params:
        merged = deep_merge(merged, _canonicalize(EpisodeConfig, scenario_params, "scenario params"))
    if params_path:
        merged = deep_merge(merged, _canonicalize(EpisodeConfig, load_params_file(params_path), params_path))
    for expression in overrides:
        try:
            key, value = parse_override(expression)
        except ValueError as e:
            raise ConfigError(f"--set: {e}") from e
        merged = deep_merge(merged, _canonicalize(EpisodeConfig, dotted_to_nested(key, value), f"--set {key}"))
    if controller_mode is not None:
        merged["controller_mode"] = controller_mode
    if debug is not None:
        merged["debug"] = debug

    try:
        return EpisodeConfig.model_validate(merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        logger.error(f"[CONFIG] Invalid configuration: {problems}")
        raise ConfigError(f"invalid configuration: {problems}") from e


def effective_config(cfg: EpisodeConfig) -> Dict[str, Any]:
    """JSON-ready dump of the configuration, keyed by the documented aliases."""
    return cfg.model_dump(by_alias=True, mode="json")


# =============================================================================
# Output directory
# =============================================================================

def prepare_run_dir(path: Path, force: bool = False) -> Path:
    """
    Create the run directory.

    Raises:
        FileExistsError: If it already holds run artifacts and force is not set
    """
    path = Path(path)
    if path.exists() and not force:
        existing = [name for name in (TRAJECTORY_FILE, SUMMARY_FILE, METRICS_FILE) if (path / name).exists()]
        if existing:
            raise FileExistsError(f"{path} already contains {', '.join(existing)}; use --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


# =============================================================================
# Writers
# =============================================================================

def _write_rows(path: Path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_trajectory(path: Path, log: EpisodeLog) -> None:
    _write_rows(path, RECORD_FIELDS, (record.as_row() for record in log.records))


def write_histograms(path: Path, log: EpisodeLog) -> None:
    """One row per beam per cycle."""
    rows = (
        {"cycle": cycle, **row}
        for cycle, histogram in log.histograms
        for row in histogram.rows()
    )
    _write_rows(path, HISTOGRAM_FIELDS, rows)


def write_mpc_diagnostics(path: Path, log: EpisodeLog) -> None:
    _write_rows(path, MPC_FIELDS, log.mpc_diagnostics)


def summary_document(log: EpisodeLog, cfg: EpisodeConfig, scenario_source: str) -> Dict[str, Any]:
    return {
        "scenario": log.scenario,
        "scenario_source": scenario_source,
        "controller_mode": log.controller_mode.value,
        "outcome": log.outcome.value if log.outcome else None,
        "metrics": log.metrics.model_dump() if log.metrics else None,
        "config": effective_config(cfg),
    }


def write_json(path: Path, document: Dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def write_run(
    run_dir: Path,
    log: EpisodeLog,
    cfg: EpisodeConfig,
    scenario: Scenario,
    scenario_source: str,
) -> Dict[str, Any]:
    """
    Write every artifact of one episode into ``run_dir``.

    Returns:
        The summary document
    """
    run_dir = Path(run_dir)
    write_trajectory(run_dir / TRAJECTORY_FILE, log)
    summary = summary_document(log, cfg, scenario_source)
    write_json(run_dir / SUMMARY_FILE, summary)
    write_json(run_dir / SCENARIO_FILE, scenario.model_dump(mode="json"))
    if cfg.debug:
        write_histograms(run_dir / HISTOGRAM_FILE, log)
        write_mpc_diagnostics(run_dir / MPC_FILE, log)
    logger.info(f"[RUN] ✓ Wrote artifacts for '{log.scenario}' to {run_dir}")
    return summary


def metrics_row(scenario: str, mode: str, summary: Dict[str, Any]) -> Dict[str, Any]:
    """One line of the combined batch table."""
    row: Dict[str, Any] = {"scenario": scenario, "mode": mode, "outcome": summary.get("outcome")}
    metrics = summary.get("metrics") or {}
    for name in METRICS_FIELDS[3:]:
        row[name] = metrics.get(name, math.nan)
    return row


def write_metrics_table(path: Path, rows: Sequence[Dict[str, Any]]) -> None:
    _write_rows(path, METRICS_FIELDS, rows)


# =============================================================================
# Readers
# =============================================================================

def _read_rows(path: Path, required: Sequence[str]) -> List[Dict[str, str]]:
    """
    Raises:
        LogFormatError: If the header misses a required column
        FileNotFoundError: If the file does not exist
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [name for name in required if name not in header]
        if missing:
            raise LogFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def read_trajectory(path: Path) -> List[StepRecord]:
    """Parse a trajectory CSV back into step records."""
    records = []
    for line, row in enumerate(_read_rows(path, RECORD_FIELDS), start=2):
        try:
            records.append(StepRecord(
                t=float(row["t"]),
                x=float(row["x"]),
                y=float(row["y"]),
                theta=float(row["theta"]),
                delta=float(row["delta"]),
                delta_cmd=float(row["delta_cmd"]),
                m=int(row["m"]),
                min_range=float(row["min_range"]),
                objective=float(row["objective"]),
                clearance=float(row["clearance"]),
            ))
        except (TypeError, ValueError) as e:
            raise LogFormatError(f"{path}:{line}: {e}") from e
    return records


def read_histogram(path: Path, cycle: int = 0) -> Dict[str, np.ndarray]:
    """
    Per-beam arrays of one cycle from a histogram CSV.

    Raises:
        LogFormatError: Bad columns, or the cycle is not in the file
    """
    rows = [row for row in _read_rows(path, HISTOGRAM_FIELDS) if int(row["cycle"]) == cycle]
    if not rows:
        raise LogFormatError(f"{path}: no rows for cycle {cycle}")
    rows.sort(key=lambda row: int(row["i"]))
    return {name: np.array([float(row[name]) for row in rows]) for name in HISTOGRAM_FIELDS[1:]}


def read_scenario_copy(run_dir: Path) -> Optional[Scenario]:
    """The scenario stored next to a trajectory, if any."""
    path = Path(run_dir) / SCENARIO_FILE
    if not path.is_file():
        return None
    return Scenario.model_validate(json.loads(path.read_text(encoding="utf-8")))
