"""
Steering MPC: straight-line reference toward the planned heading, condensed
quadratic program over steering increments, and its solver.

The QP is

    minimize    0.5 x'Hx + g'x + c
    subject to  lower <= x <= upper
                constraint_lower <= G x <= constraint_upper

with x = (dU_1 .. dU_Nc). The objective equals half the tracking cost J.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize, nnls

from vphnav.exceptions import HorizonMismatchError
from vphnav.models import MpcConfig, VehicleParams
from vphnav.services.vehicle import LinearModel, VehicleState, linearize
from vphnav.utils import wrap_angle

logger = logging.getLogger(__name__)

# Accuracy contract of solve_qp
KKT_TOLERANCE = 1e-6
# Slack used to decide which constraints are active
ACTIVE_TOLERANCE = 1e-9


class SolverStatus(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INACCURATE = "inaccurate"


@dataclass(frozen=True)
class Reference:
    """N_p waypoints spaced v_r*T along heading psi, starting after the anchor."""
    poses: np.ndarray          # (N_p, 3)
    inputs: np.ndarray         # (N_p,) reference steering, all zero
    anchor: Tuple[float, float, float]
    heading: float


@dataclass
class QpProblem:
    """Condensed QP; the prediction fields are only set by assemble_qp."""
    hessian: np.ndarray
    gradient: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constraint_matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    constraint_lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constraint_upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constant: float = 0.0
    max_iterations: int = 100
    # Stacked prediction: errors = free_response + input_map @ x, shape (N_p, 3)
    free_response: Optional[np.ndarray] = None
    input_map: Optional[np.ndarray] = None
    delta_prev: float = 0.0

    @property
    def size(self) -> int:
        return int(self.gradient.shape[0])

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.hessian @ x + self.gradient @ x + self.constant)

    def inequalities(self) -> Tuple[np.ndarray, np.ndarray]:
        """Every finite bound and constraint row as C x <= c."""
        n = self.size
        rows: List[np.ndarray] = []
        limits: List[float] = []
        identity = np.eye(n)
        matrix = self.constraint_matrix.reshape(-1, n) if self.constraint_matrix.size else np.zeros((0, n))
        blocks = [
            (identity, self.lower, self.upper),
            (matrix, self.constraint_lower, self.constraint_upper),
        ]
        for M, lo, hi in blocks:
            for i in range(M.shape[0]):
                if np.isfinite(hi[i]):
                    rows.append(M[i])
                    limits.append(float(hi[i]))
                if np.isfinite(lo[i]):
                    rows.append(-M[i])
                    limits.append(-float(lo[i]))
        if not rows:
            return np.zeros((0, n)), np.zeros(0)
        return np.vstack(rows), np.asarray(limits)


@dataclass
class MpcSolution:
    delta_u: np.ndarray
    u: np.ndarray
    predicted_errors: np.ndarray
    objective: float
    iterations: int
    status: SolverStatus
    kkt_residual: float
    active_constraints: int

    @property
    def exact(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


# =============================================================================
# Reference and condensing
# =============================================================================

def build_reference(state: VehicleState, desired_heading: float, v_r: float, cfg: MpcConfig) -> Reference:
    """
    Straight reference from the current position along ``desired_heading``.

    Args:
        state: Vehicle state at the start of the cycle (the anchor)
        desired_heading: Planned heading psi (rad)
        v_r: Reference speed (m/s)
        cfg: Horizon and sample time

    Returns:
        Reference with N_p waypoints

    Raises:
        ValueError: If the heading is not finite
    """
    if not math.isfinite(desired_heading):
        raise ValueError(f"desired heading must be finite, got {desired_heading}")

    steps = np.arange(1, cfg.prediction_horizon + 1) * v_r * cfg.sample_time
    poses = np.column_stack((
        state.x + steps * math.cos(desired_heading),
        state.y + steps * math.sin(desired_heading),
        np.full(cfg.prediction_horizon, desired_heading),
    ))
    return Reference(
        poses=poses,
        inputs=np.zeros(cfg.prediction_horizon),
        anchor=(state.x, state.y, state.theta),
        heading=desired_heading,
    )


def _prediction_matrices(model: LinearModel, n_p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Psi (3N_p x 3) and Gamma (3N_p x N_p) of the stacked error prediction."""
    A, b = model.A, model.B[:, 0]
    powers = [np.eye(3)]
    for _ in range(n_p):
        powers.append(A @ powers[-1])

    psi = np.vstack(powers[1:])
    gamma = np.zeros((3 * n_p, n_p))
    for k in range(1, n_p + 1):
        for j in range(k):
            gamma[3 * (k - 1):3 * k, j] = powers[k - 1 - j] @ b
    return psi, gamma


def cumulative_map(n_p: int, n_c: int) -> np.ndarray:
    """Lambda: input step j uses the increments 0..min(j, N_c - 1)."""
    rows = np.arange(n_p)[:, None]
    cols = np.arange(n_c)[None, :]
    return (cols <= np.minimum(rows, n_c - 1)).astype(float)


def assemble_qp(
    state: VehicleState,
    reference: Reference,
    model: LinearModel,
    cfg: MpcConfig,
    delta_prev: float,
    vehicle: Optional[VehicleParams] = None,
) -> QpProblem:
    """
    Condense the tracking cost into a QP over steering increments.

    Args:
        state: Current vehicle state
        reference: Output of build_reference
        model: Error model linearized at (psi, 0, v_r)
        cfg: Horizons, weights and solver limits
        delta_prev: Steering angle applied in the previous cycle (rad)
        vehicle: Steering limits, defaults to VehicleParams()

    Returns:
        QpProblem with box bounds |dU| <= rate*T and cumulative bounds |U| <= max_steer

    Raises:
        HorizonMismatchError: If the reference length differs from N_p
    """
    vehicle = vehicle or VehicleParams()
    n_p, n_c = cfg.prediction_horizon, cfg.control_horizon
    if reference.poses.shape[0] != n_p or reference.inputs.shape[0] != n_p:
        raise HorizonMismatchError(
            f"reference has {reference.poses.shape[0]} poses and {reference.inputs.shape[0]} inputs, "
            f"prediction horizon is {n_p}"
        )

    anchor_x, anchor_y, _ = reference.anchor
    error0 = np.array([
        state.x - anchor_x,
        state.y - anchor_y,
        wrap_angle(state.theta - reference.heading),
    ])

    psi, gamma = _prediction_matrices(model, n_p)
    lam = cumulative_map(n_p, n_c)
    theta = gamma @ lam
    free = psi @ error0 + gamma @ np.full(n_p, delta_prev)

    q_bar = np.diag(np.tile(np.asarray(cfg.state_weights, dtype=float), n_p))
    input_offset = np.full(n_p, delta_prev) - reference.inputs

    hessian = theta.T @ q_bar @ theta + cfg.input_rate_weight * np.eye(n_c) + cfg.input_weight * lam.T @ lam
    hessian = 0.5 * (hessian + hessian.T)
    gradient = theta.T @ q_bar @ free + cfg.input_weight * lam.T @ input_offset
    constant = 0.5 * float(free @ q_bar @ free) + 0.5 * cfg.input_weight * float(input_offset @ input_offset)

    rate_limit = vehicle.max_steer_rate * cfg.sample_time
    return QpProblem(
        hessian=hessian,
        gradient=gradient,
        lower=np.full(n_c, -rate_limit),
        upper=np.full(n_c, rate_limit),
        constraint_matrix=np.tril(np.ones((n_c, n_c))),
        constraint_lower=np.full(n_c, -vehicle.max_steer - delta_prev),
        constraint_upper=np.full(n_c, vehicle.max_steer - delta_prev),
        constant=constant,
        max_iterations=cfg.max_iterations,
        free_response=free.reshape(n_p, 3),
        input_map=theta,
        delta_prev=delta_prev,
    )


# =============================================================================
# Solver
# =============================================================================

def kkt_residual(problem: QpProblem, x: np.ndarray) -> Tuple[float, int]:
    """
    Largest violation of stationarity, primal feasibility or complementarity.
    Multipliers are fitted by non-negative least squares on the active rows.

    Returns:
        (residual, number of active constraints)
    """
    C, c = problem.inequalities()
    grad = problem.hessian @ x + problem.gradient
    slack = c - C @ x
    violation = float(max(0.0, -slack.min())) if slack.size else 0.0

    active = np.flatnonzero(np.abs(slack) <= 1e-7) if slack.size else np.zeros(0, dtype=int)
    if active.size:
        multipliers, _ = nnls(C[active].T, -grad)
        stationarity = grad + C[active].T @ multipliers
        complementarity = float(np.max(np.abs(multipliers * slack[active])))
    else:
        stationarity = grad
        complementarity = 0.0
    residual = max(float(np.max(np.abs(stationarity))) if stationarity.size else 0.0, violation, complementarity)
    return residual, int(active.size)


def project_feasible(problem: QpProblem, x: np.ndarray) -> np.ndarray:
    """
    Clip x into the box and, for cumulative constraint rows, walk the partial
    sums so that every one stays inside its limits. A feasible x comes back
    unchanged.
    """
    x = np.clip(x, problem.lower, problem.upper)
    n = problem.size
    if not problem.constraint_matrix.size or not np.array_equal(problem.constraint_matrix, np.tril(np.ones((n, n)))):
        return x

    projected = x.copy()
    total = 0.0
    for k in range(n):
        low = max(problem.lower[k], problem.constraint_lower[k] - total)
        high = min(problem.upper[k], problem.constraint_upper[k] - total)
        if low > high:
            return x
        projected[k] = min(max(x[k], low), high)
        total += projected[k]
    return projected


def _refine_active_set(
    problem: QpProblem,
    x: np.ndarray,
    C: np.ndarray,
    c: np.ndarray,
    max_rounds: int,
) -> Tuple[Optional[np.ndarray], int]:
    """
    Active-set refinement from the SLSQP point: solve the equality-constrained
    KKT system on the working set, drop rows with negative multipliers and
    add the most violated row until both checks pass or max_rounds is spent.

    Returns:
        (refined x or None, rounds used)
    """
    n = problem.size
    H, g = problem.hessian, problem.gradient
    working = list(np.flatnonzero(np.abs(c - C @ x) <= 1e-7)) if C.size else []

    for rounds in range(1, max_rounds + 1):
        m = len(working)
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = H
        rhs = np.concatenate((-g, np.zeros(m)))
        if m:
            Cw = C[working]
            kkt[:n, n:] = Cw.T
            kkt[n:, :n] = Cw
            rhs[n:] = c[working]
        solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        candidate, multipliers = solution[:n], solution[n:]

        if m and multipliers.min() < -ACTIVE_TOLERANCE:
            working.pop(int(np.argmin(multipliers)))
            continue

        violation = C @ candidate - c if C.size else np.zeros(0)
        if violation.size and violation.max() > ACTIVE_TOLERANCE:
            worst = int(np.argmax(violation))
            if worst in working:
                return None, rounds
            working.append(worst)
            continue
        return candidate, rounds
    return None, max_rounds


def solve_qp(problem: QpProblem) -> MpcSolution:
    """
    Minimize the QP with SLSQP, then polish with an active-set pass.
    SLSQP iterations and refinement rounds share the max_iterations budget,
    and the returned iterate always satisfies the box and cumulative rows.

    Args:
        problem: QP with positive definite Hessian

    Returns:
        MpcSolution; status MAX_ITERATIONS or INACCURATE marks a best-effort iterate
    """
    n = problem.size
    C, c = problem.inequalities()
    matrix = problem.constraint_matrix.reshape(-1, n) if problem.constraint_matrix.size else np.zeros((0, n))

    constraints = []
    for M, limit, sign in (
        (matrix, problem.constraint_upper, 1.0),
        (matrix, problem.constraint_lower, -1.0),
    ):
        rows = np.flatnonzero(np.isfinite(limit))
        if rows.size:
            Ms, ls = sign * M[rows], sign * limit[rows]
            constraints.append({
                "type": "ineq",
                "fun": lambda x, Ms=Ms, ls=ls: ls - Ms @ x,
                "jac": lambda x, Ms=Ms: -Ms,
            })

    bounds = [
        (None if not np.isfinite(lo) else float(lo), None if not np.isfinite(hi) else float(hi))
        for lo, hi in zip(problem.lower, problem.upper)
    ]
    x0 = np.clip(np.zeros(n), problem.lower, problem.upper)

    result = minimize(
        problem.objective,
        x0,
        jac=lambda x: problem.hessian @ x + problem.gradient,
        method="SLSQP",
        bounds=bounds,
        constraints=constraints,
        options={"ftol": 1e-12, "maxiter": problem.max_iterations},
    )
    x = project_feasible(problem, np.asarray(result.x, dtype=float))
    iterations = min(int(getattr(result, "nit", 0)), problem.max_iterations)

    refined, rounds = _refine_active_set(problem, x, C, c, max(problem.max_iterations - iterations, 0))
    iterations += rounds
    if refined is not None:
        feasible = not C.size or (C @ refined - c).max() <= ACTIVE_TOLERANCE
        if feasible and problem.objective(refined) <= problem.objective(x) + 1e-12:
            x = project_feasible(problem, refined)

    residual, active = kkt_residual(problem, x)
    if residual <= KKT_TOLERANCE:
        status = SolverStatus.OPTIMAL
    elif result.status == 9 or iterations >= problem.max_iterations:
        status = SolverStatus.MAX_ITERATIONS
    else:
        status = SolverStatus.INACCURATE

    if status != SolverStatus.OPTIMAL:
        logger.warning(f"[MPC] QP solve {status.value}: kkt residual {residual:.2e} after {iterations} iterations")

    return _make_solution(problem, x, iterations, status, residual, active)


def _make_solution(
    problem: QpProblem,
    x: np.ndarray,
    iterations: int,
    status: SolverStatus,
    residual: float,
    active: int,
) -> MpcSolution:
    if problem.input_map is not None and problem.free_response is not None:
        n_p = problem.free_response.shape[0]
        predicted = problem.free_response + (problem.input_map @ x).reshape(n_p, 3)
        u = problem.delta_prev + cumulative_map(n_p, problem.size) @ x
    else:
        predicted = np.zeros((0, 3))
        u = problem.delta_prev + np.cumsum(x)
    return MpcSolution(
        delta_u=x,
        u=u,
        predicted_errors=predicted,
        objective=problem.objective(x),
        iterations=iterations,
        status=status,
        kkt_residual=residual,
        active_constraints=active,
    )


# =============================================================================
# Controller
# =============================================================================

def solve_mpc(
    state: VehicleState,
    desired_heading: float,
    delta_prev: float,
    cfg: MpcConfig,
    vehicle: VehicleParams,
    v_r: float,
) -> MpcSolution:
    """Reference, linearization, condensing and solve for one control cycle."""
    reference = build_reference(state, desired_heading, v_r, cfg)
    model = linearize(desired_heading, 0.0, v_r, cfg.sample_time, vehicle)
    problem = assemble_qp(state, reference, model, cfg, delta_prev, vehicle)
    return solve_qp(problem)


def first_command(solution: MpcSolution, delta_prev: float, cfg: MpcConfig, vehicle: VehicleParams) -> float:
    """delta_prev + dU_1, clamped to the rate and angle limits."""
    rate_limit = vehicle.max_steer_rate * cfg.sample_time
    step = min(max(float(solution.delta_u[0]), -rate_limit), rate_limit)
    return min(max(delta_prev + step, -vehicle.max_steer), vehicle.max_steer)


def mpc_step(
    state: VehicleState,
    desired_heading: float,
    delta_prev: float,
    cfg: MpcConfig,
    vehicle: VehicleParams,
    v_r: float,
) -> float:
    """
    Steering command for this cycle (receding horizon, first move only).

    Args:
        state: Current vehicle state
        desired_heading: Planned heading (rad)
        delta_prev: Previously applied steering angle (rad)
        cfg: MPC configuration
        vehicle: Vehicle limits
        v_r: Reference speed (m/s)

    Returns:
        Steering command (rad) within +/-max_steer and within rate*T of delta_prev
    """
    solution = solve_mpc(state, desired_heading, delta_prev, cfg, vehicle, v_r)
    if not solution.exact:
        logger.warning(f"[MPC] Applying clamped command from an inexact solve ({solution.status.value})")
    return first_command(solution, delta_prev, cfg, vehicle)
