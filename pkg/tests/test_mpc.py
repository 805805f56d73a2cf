import itertools
import math

import numpy as np
import pytest

from vphnav.exceptions import HorizonMismatchError
from vphnav.models import MpcConfig, VehicleParams
from vphnav.services.mpc import (
    KKT_TOLERANCE,
    QpProblem,
    SolverStatus,
    assemble_qp,
    build_reference,
    cumulative_map,
    first_command,
    kkt_residual,
    mpc_step,
    solve_mpc,
    solve_qp,
)
from vphnav.services.vehicle import VehicleState, linearize
from vphnav.utils import wrap_angle

VEHICLE = VehicleParams()
SPEED = 2.0


def problem_for(state, heading, delta_prev=0.0, cfg=None):
    cfg = cfg or MpcConfig()
    reference = build_reference(state, heading, SPEED, cfg)
    model = linearize(heading, 0.0, SPEED, cfg.sample_time, VEHICLE)
    return assemble_qp(state, reference, model, cfg, delta_prev, VEHICLE)


def rollout_cost(state, heading, delta_prev, cfg, delta_u):
    """Tracking cost J by stepping the linear error model one sample at a time."""
    model = linearize(heading, 0.0, SPEED, cfg.sample_time, VEHICLE)
    Q = np.diag(cfg.state_weights)
    chi = np.array([0.0, 0.0, wrap_angle(state.theta - heading)])
    cost = cfg.input_rate_weight * float(np.sum(np.square(delta_u)))
    for k in range(cfg.prediction_horizon):
        u = delta_prev + float(np.sum(delta_u[:min(k, cfg.control_horizon - 1) + 1]))
        chi = model.A @ chi + model.B[:, 0] * u
        cost += float(chi @ Q @ chi) + cfg.input_weight * u * u
    return cost


def random_spd(rng, n, low=0.5, high=5.0):
    basis, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return basis @ np.diag(rng.uniform(low, high, n)) @ basis.T


class TestReference:
    def test_waypoints_along_heading(self):
        cfg = MpcConfig()
        reference = build_reference(VehicleState(x=1.0, y=2.0, theta=0.3), 0.0, SPEED, cfg)
        assert reference.poses.shape == (15, 3)
        np.testing.assert_allclose(reference.poses[0], [1.2, 2.0, 0.0])
        np.testing.assert_allclose(reference.poses[-1], [4.0, 2.0, 0.0])
        np.testing.assert_array_equal(reference.inputs, np.zeros(15))
        assert reference.anchor == (1.0, 2.0, 0.3)

    def test_diagonal_heading(self):
        reference = build_reference(VehicleState(), math.pi / 4, SPEED, MpcConfig(N_p=4, N_c=2))
        step = SPEED * 0.1 / math.sqrt(2.0)
        np.testing.assert_allclose(reference.poses[:, 0], step * np.arange(1, 5))
        np.testing.assert_allclose(reference.poses[:, 1], step * np.arange(1, 5))

    def test_non_finite_heading(self):
        with pytest.raises(ValueError):
            build_reference(VehicleState(), float("nan"), SPEED, MpcConfig())


class TestAssembleQp:
    def test_zero_error_gives_zero_move(self):
        problem = problem_for(VehicleState(), 0.0)
        np.testing.assert_allclose(problem.gradient, 0.0, atol=1e-15)
        solution = solve_qp(problem)
        np.testing.assert_allclose(solution.delta_u, 0.0, atol=1e-10)
        assert solution.objective == pytest.approx(0.0, abs=1e-12)
        assert solution.status == SolverStatus.OPTIMAL

    def test_hessian_is_positive_definite(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            cfg = MpcConfig(R_w=float(rng.uniform(0.1, 20.0)))
            state = VehicleState(theta=float(rng.uniform(-1, 1)), delta=0.0)
            problem = problem_for(state, float(rng.uniform(-1, 1)), cfg=cfg)
            np.testing.assert_allclose(problem.hessian, problem.hessian.T)
            assert np.linalg.eigvalsh(problem.hessian).min() >= cfg.input_rate_weight - 1e-9

    def test_objective_matches_step_by_step_rollout(self):
        rng = np.random.default_rng(8)
        cfg = MpcConfig(N_p=6, N_c=3, S_w=0.5)
        for _ in range(10):
            state = VehicleState(x=1.0, y=-1.0, theta=float(rng.uniform(-2, 2)))
            heading = float(rng.uniform(-2, 2))
            delta_prev = float(rng.uniform(-0.3, 0.3))
            problem = problem_for(state, heading, delta_prev, cfg)
            x = rng.uniform(-0.1, 0.1, 3)
            assert problem.objective(x) == pytest.approx(0.5 * rollout_cost(state, heading, delta_prev, cfg, x))

    def test_single_move_closed_form(self):
        cfg = MpcConfig(N_p=10, N_c=1)
        problem = problem_for(VehicleState(theta=0.02), 0.0, cfg=cfg)
        expected = float(np.clip(-problem.gradient[0] / problem.hessian[0, 0], problem.lower[0], problem.upper[0]))
        assert solve_qp(problem).delta_u[0] == pytest.approx(expected, abs=1e-8)

    def test_reference_length_must_match_horizon(self):
        cfg = MpcConfig()
        reference = build_reference(VehicleState(), 0.0, SPEED, MpcConfig(N_p=10, N_c=2))
        model = linearize(0.0, 0.0, SPEED, cfg.sample_time, VEHICLE)
        with pytest.raises(HorizonMismatchError):
            assemble_qp(VehicleState(), reference, model, cfg, 0.0, VEHICLE)

    def test_cumulative_map_holds_last_move(self):
        np.testing.assert_array_equal(cumulative_map(4, 2), [[1, 0], [1, 1], [1, 1], [1, 1]])


class TestSolveQp:
    def test_unconstrained_identity(self):
        g = np.array([0.1, -0.2, 0.05])
        problem = QpProblem(hessian=np.eye(3), gradient=g, lower=np.full(3, -np.inf), upper=np.full(3, np.inf))
        solution = solve_qp(problem)
        np.testing.assert_allclose(solution.delta_u, -g, atol=1e-9)
        assert solution.active_constraints == 0

    def test_single_active_bound(self):
        problem = QpProblem(
            hessian=np.array([[1.0]]),
            gradient=np.array([-3.0]),
            lower=np.array([-np.inf]),
            upper=np.array([1.0]),
        )
        solution = solve_qp(problem)
        assert solution.delta_u[0] == pytest.approx(1.0, abs=1e-9)
        assert solution.active_constraints == 1
        assert solution.kkt_residual <= KKT_TOLERANCE

    def test_box_qp_matches_active_set_enumeration(self):
        rng = np.random.default_rng(5)
        n = 5
        for _ in range(5):
            H = random_spd(rng, n)
            g = rng.uniform(-2.0, 2.0, n)
            bound = 0.3
            problem = QpProblem(hessian=H, gradient=g, lower=np.full(n, -bound), upper=np.full(n, bound))

            best_x, best_value = None, np.inf
            for pattern in itertools.product((-1, 0, 1), repeat=n):
                pattern = np.array(pattern)
                fixed = pattern != 0
                x = np.where(fixed, pattern * bound, 0.0)
                free = ~fixed
                if free.any():
                    rhs = -g[free] - H[np.ix_(free, fixed)] @ x[fixed]
                    x[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
                if np.all(np.abs(x) <= bound + 1e-12) and problem.objective(x) < best_value:
                    best_x, best_value = x, problem.objective(x)

            solution = solve_qp(problem)
            np.testing.assert_allclose(solution.delta_u, best_x, atol=1e-6)
            assert solution.status == SolverStatus.OPTIMAL

    def test_small_problems_match_grid_search(self):
        rng = np.random.default_rng(9)
        rate = math.radians(7.0)
        grid = np.radians(np.arange(-7.0, 7.0 + 1e-9, 0.1))
        for trial in range(100):
            n = 1 + trial % 2
            H = random_spd(rng, n)
            g = rng.uniform(-0.5, 0.5, n)
            cum = float(rng.uniform(0.05, 0.3))
            problem = QpProblem(
                hessian=H,
                gradient=g,
                lower=np.full(n, -rate),
                upper=np.full(n, rate),
                constraint_matrix=np.tril(np.ones((n, n))),
                constraint_lower=np.full(n, -cum),
                constraint_upper=np.full(n, cum),
            )
            points = np.array(list(itertools.product(grid, repeat=n)))
            feasible = np.all(np.abs(np.cumsum(points, axis=1)) <= cum, axis=1)
            points = points[feasible]
            values = 0.5 * np.einsum("ij,jk,ik->i", points, H, points) + points @ g

            solution = solve_qp(problem)
            C, c = problem.inequalities()
            assert np.all(C @ solution.delta_u <= c + 1e-9)
            assert solution.objective <= values.min() + 1e-9
            assert kkt_residual(problem, solution.delta_u)[0] <= KKT_TOLERANCE

    def test_deterministic(self):
        problem = problem_for(VehicleState(theta=0.4), -0.3, delta_prev=0.1)
        first, second = solve_qp(problem), solve_qp(problem)
        np.testing.assert_array_equal(first.delta_u, second.delta_u)
        assert first.objective == second.objective


class TestController:
    def test_sharp_left_turn_saturates_rate(self):
        command = mpc_step(VehicleState(), math.pi / 2, 0.0, MpcConfig(), VEHICLE, SPEED)
        assert math.degrees(command) == pytest.approx(7.0, abs=1e-6)

    def test_sharp_right_turn_saturates_rate(self):
        command = mpc_step(VehicleState(), -math.pi / 2, 0.0, MpcConfig(), VEHICLE, SPEED)
        assert math.degrees(command) == pytest.approx(-7.0, abs=1e-6)

    def test_two_step_horizon_matches_brute_force(self):
        cfg = MpcConfig(N_p=2, N_c=2)
        state = VehicleState(theta=0.25)
        solution = solve_mpc(state, 0.0, 0.0, cfg, VEHICLE, SPEED)

        grid = np.radians(np.arange(-7.0, 7.0 + 1e-9, 0.1))
        best = min(rollout_cost(state, 0.0, 0.0, cfg, np.array(pair)) for pair in itertools.product(grid, grid))
        assert solution.objective <= 0.5 * best + 1e-9
        assert solution.delta_u[0] < 0.0

    def test_plans_respect_actuator_limits(self):
        rng = np.random.default_rng(13)
        cfg = MpcConfig()
        rate = VEHICLE.max_steer_rate * cfg.sample_time
        for _ in range(20):
            delta_prev = float(rng.uniform(-VEHICLE.max_steer, VEHICLE.max_steer))
            state = VehicleState(theta=float(rng.uniform(-math.pi, math.pi)), delta=delta_prev)
            solution = solve_mpc(state, float(rng.uniform(-math.pi, math.pi)), delta_prev, cfg, VEHICLE, SPEED)
            assert np.all(np.abs(solution.delta_u) <= rate + 1e-9)
            assert np.all(np.abs(solution.u) <= VEHICLE.max_steer + 1e-9)

            command = first_command(solution, delta_prev, cfg, VEHICLE)
            assert abs(command - delta_prev) <= rate + 1e-12
            assert abs(command) <= VEHICLE.max_steer + 1e-12

    def test_steering_at_the_limit_cannot_grow(self):
        cfg = MpcConfig()
        limit = VEHICLE.max_steer
        solution = solve_mpc(VehicleState(delta=limit), math.pi / 2, limit, cfg, VEHICLE, SPEED)
        assert np.all(solution.u <= limit + 1e-9)

    def test_no_feasible_perturbation_improves_interior_solutions(self):
        rng = np.random.default_rng(17)
        cfg = MpcConfig(N_p=8, N_c=3)
        for _ in range(10):
            problem = problem_for(VehicleState(theta=float(rng.uniform(-0.02, 0.02))), 0.0, cfg=cfg)
            solution = solve_qp(problem)
            C, c = problem.inequalities()
            for i in range(problem.size):
                for sign in (-1.0, 1.0):
                    moved = solution.delta_u.copy()
                    moved[i] += sign * 1e-4
                    if np.all(C @ moved <= c):
                        assert problem.objective(moved) >= solution.objective - 1e-12

    def test_heavier_rate_weight_shrinks_moves(self):
        state = VehicleState(theta=0.01)
        norms = []
        for weight in (1.0, 10.0, 100.0):
            cfg = MpcConfig(N_p=10, N_c=3, R_w=weight)
            solution = solve_qp(problem_for(state, 0.0, cfg=cfg))
            assert solution.active_constraints == 0
            norms.append(float(np.linalg.norm(solution.delta_u)))
        assert norms[0] >= norms[1] >= norms[2] > 0.0

    def test_iteration_cap_still_yields_a_valid_command(self):
        cfg = MpcConfig(max_iterations=1)
        command = mpc_step(VehicleState(), math.pi / 2, 0.0, cfg, VEHICLE, SPEED)
        assert abs(command) <= VEHICLE.max_steer_rate * cfg.sample_time + 1e-12

    @pytest.mark.parametrize("cap", [1, 2, 3])
    def test_capped_solves_stay_within_budget_and_limits(self, cap):
        rng = np.random.default_rng(cap)
        cfg = MpcConfig(max_iterations=cap)
        rate = VEHICLE.max_steer_rate * cfg.sample_time
        for _ in range(50):
            delta_prev = float(rng.uniform(-VEHICLE.max_steer, VEHICLE.max_steer))
            state = VehicleState(theta=float(rng.uniform(-math.pi, math.pi)), delta=delta_prev)
            solution = solve_mpc(state, float(rng.uniform(-math.pi, math.pi)), delta_prev, cfg, VEHICLE, SPEED)
            assert solution.iterations <= cap
            assert np.all(np.abs(solution.delta_u) <= rate + 1e-9)
            assert np.all(np.abs(solution.u) <= VEHICLE.max_steer + 1e-9)
            if solution.status != SolverStatus.OPTIMAL:
                assert not solution.exact
