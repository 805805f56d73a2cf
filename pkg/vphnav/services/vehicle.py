"""
Kinematic bicycle model: continuous dynamics, the ground-truth RK4 plant,
and the discrete linear error model used for prediction.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from vphnav.models import VehicleParams
from vphnav.utils import wrap_angle


@dataclass(frozen=True)
class VehicleState:
    """Rear-axle pose and current front-wheel angle."""
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    delta: float = 0.0

    @property
    def pose(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class LinearModel:
    """
    chi(k+1) = A chi(k) + B u(k) around a reference (theta_r, delta_r, v_r).
    B has shape (3, 1).
    """
    A: np.ndarray
    B: np.ndarray
    theta_r: float
    delta_r: float
    v_r: float
    T: float


def _pose_rate(pose: np.ndarray, delta: float, v: float, wheelbase: float) -> np.ndarray:
    return np.array([
        v * math.cos(pose[2]),
        v * math.sin(pose[2]),
        v * math.tan(delta) / wheelbase,
    ])


def derivative(state: VehicleState, v: float, params: VehicleParams) -> np.ndarray:
    """
    Pose rate (x_dot, y_dot, theta_dot) of the bicycle model.

    Args:
        state: Current state; state.delta is the front-wheel angle
        v: Longitudinal speed (m/s)
        params: Vehicle geometry

    Returns:
        Array of shape (3,)
    """
    return _pose_rate(state.pose, state.delta, v, params.wheelbase)


def rk4(pose: np.ndarray, f: Callable[[np.ndarray], np.ndarray], h: float) -> np.ndarray:
    """Classic fourth-order Runge-Kutta step for an autonomous rate function."""
    k1 = f(pose)
    k2 = f(pose + 0.5 * h * k1)
    k3 = f(pose + 0.5 * h * k2)
    k4 = f(pose + h * k3)
    return pose + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def slew_steering(delta: float, delta_cmd: float, dt: float, params: VehicleParams) -> float:
    """Move delta toward delta_cmd by at most max_steer_rate*dt, inside +/-max_steer."""
    max_change = params.max_steer_rate * dt
    slewed = delta + min(max(delta_cmd - delta, -max_change), max_change)
    return min(max(slewed, -params.max_steer), params.max_steer)


def step_nonlinear(
    state: VehicleState,
    delta_cmd: float,
    v: float,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """
    Advance the plant by dt.

    The steering actuator slews first; the pose is then integrated with RK4
    holding the slewed angle constant.

    Args:
        state: Current state
        delta_cmd: Commanded front-wheel angle (rad)
        v: Speed (m/s)
        dt: Step length (s)
        params: Vehicle geometry and actuator limits

    Returns:
        Next state with heading wrapped to (-pi, pi]

    Raises:
        ValueError: If dt is not positive
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    delta = slew_steering(state.delta, delta_cmd, dt, params)
    pose = rk4(state.pose, lambda p: _pose_rate(p, delta, v, params.wheelbase), dt)
    return VehicleState(x=float(pose[0]), y=float(pose[1]), theta=wrap_angle(pose[2]), delta=delta)


def euler_step(state: VehicleState, v: float, dt: float, params: VehicleParams) -> VehicleState:
    """Forward-Euler step with state.delta applied as is (no actuator limits)."""
    pose = state.pose + dt * derivative(state, v, params)
    return VehicleState(x=float(pose[0]), y=float(pose[1]), theta=float(pose[2]), delta=state.delta)


def linearize(theta_r: float, delta_r: float, v_r: float, T: float, params: VehicleParams) -> LinearModel:
    """
    Forward-Euler error model about a reference motion.

    Args:
        theta_r: Reference heading (rad)
        delta_r: Reference front-wheel angle (rad)
        v_r: Reference speed (m/s)
        T: Sampling time (s)
        params: Vehicle geometry

    Returns:
        LinearModel with A = I + T*df/dchi and B = T*df/ddelta

    Raises:
        ValueError: If T is not positive or |delta_r| reaches 90 degrees
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if abs(delta_r) >= math.pi / 2:
        raise ValueError(f"reference steering angle must be below 90 degrees, got {math.degrees(delta_r):.1f}")

    A = np.eye(3)
    A[0, 2] = -v_r * math.sin(theta_r) * T
    A[1, 2] = v_r * math.cos(theta_r) * T

    B = np.zeros((3, 1))
    B[2, 0] = v_r * T / (params.wheelbase * math.cos(delta_r) ** 2)
    return LinearModel(A=A, B=B, theta_r=theta_r, delta_r=delta_r, v_r=v_r, T=T)


def predict_linear(model: LinearModel, error_state: np.ndarray, error_input: float) -> np.ndarray:
    """A * chi + B * u."""
    return model.A @ np.asarray(error_state, dtype=float) + model.B[:, 0] * float(error_input)
