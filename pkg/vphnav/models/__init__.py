"""Models package initialization."""

from vphnav.models.schemas import (
    # Enums
    ControllerMode,
    ConcavityRule,
    Outcome,
    PlotKind,
    ExitCode,
    # World
    LidarSpec,
    Scenario,
    # Parameters
    VphParams,
    VehicleParams,
    MpcConfig,
    EpisodeConfig,
    # Commands
    RunRequest,
    BatchRequest,
    PlotRequest,
    EpisodeMetrics,
)

__all__ = [
    "ControllerMode",
    "ConcavityRule",
    "Outcome",
    "PlotKind",
    "ExitCode",
    "LidarSpec",
    "Scenario",
    "VphParams",
    "VehicleParams",
    "MpcConfig",
    "EpisodeConfig",
    "RunRequest",
    "BatchRequest",
    "PlotRequest",
    "EpisodeMetrics",
]
