"""Services package initialization."""

from vphnav.services.world import Scan, WorldGeometry, build_geometry, load_scenario, raycast_scan
from vphnav.services.vph import (
    BlockSet,
    Histogram,
    PolarField,
    cluster_blocks,
    compute_histogram,
    cost_function,
    merge_blocks,
    modify_scan,
    plan_direction,
    select_direction,
    symbol_function,
    threshold_function,
)
from vphnav.services.vehicle import (
    LinearModel,
    VehicleState,
    derivative,
    euler_step,
    linearize,
    predict_linear,
    step_nonlinear,
)
from vphnav.services.mpc import (
    MpcSolution,
    QpProblem,
    Reference,
    SolverStatus,
    assemble_qp,
    build_reference,
    mpc_step,
    solve_mpc,
    solve_qp,
)
from vphnav.services.simloop import (
    EpisodeLog,
    EpisodeRunner,
    StepRecord,
    check_collision,
    compute_metrics,
    episode_runner,
    run_episode,
)

__all__ = [
    # World
    "Scan",
    "WorldGeometry",
    "build_geometry",
    "load_scenario",
    "raycast_scan",
    # Planner
    "BlockSet",
    "Histogram",
    "PolarField",
    "cluster_blocks",
    "compute_histogram",
    "cost_function",
    "merge_blocks",
    "modify_scan",
    "plan_direction",
    "select_direction",
    "symbol_function",
    "threshold_function",
    # Vehicle
    "LinearModel",
    "VehicleState",
    "derivative",
    "euler_step",
    "linearize",
    "predict_linear",
    "step_nonlinear",
    # Controller
    "MpcSolution",
    "QpProblem",
    "Reference",
    "SolverStatus",
    "assemble_qp",
    "build_reference",
    "mpc_step",
    "solve_mpc",
    "solve_qp",
    # Closed loop
    "EpisodeLog",
    "EpisodeRunner",
    "StepRecord",
    "check_collision",
    "compute_metrics",
    "episode_runner",
    "run_episode",
]
