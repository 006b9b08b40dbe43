import itertools
import math

import numpy as np
import pytest

from app.core.errors import ConvergenceError, InfeasibleError
from app.models.allocation import Allocation, Expansion, Schedule
from app.models.program import ConvexProgram, FunctionBlock
from app.models.report import Algorithm, RunStatus
from app.services import channel_service, energy_service, optimizer_service, scenario_service, subproblem_service

from tests.conftest import make_small_scenario


def _ratio_builder(numerator_coeff, lower=1.0, upper=2.0):
    """max (a·x + 1)/x на [lower, upper] через параметрическую задачу (a - λ)x + 1"""

    def builder(lam):
        return ConvexProgram(
            n=1,
            blocks={"x": slice(0, 1)},
            objective=(FunctionBlock.linear("ratio", [[0]], [[numerator_coeff - lam]], [1.0]),),
            constraints=(),
            lower=[lower],
            upper=[upper],
            numerator=lambda x: numerator_coeff * float(x[0]) + 1.0,
            denominator=lambda x: float(x[0]),
        )

    return builder


def _concave_over_affine(lam):
    """max (4 - (x-1)² - (y-0.5)²) / (1 + x + y) на [0, 2]²"""

    def fn(X):
        dx, dy = X[:, 0] - 1.0, X[:, 1] - 0.5
        vals = 4.0 - dx * dx - dy * dy - lam * (1.0 + X[:, 0] + X[:, 1])
        grads = np.column_stack([-2.0 * dx - lam, -2.0 * dy - lam])
        return vals, grads, np.broadcast_to(-2.0 * np.eye(2), (X.shape[0], 2, 2))

    return ConvexProgram(
        n=2,
        blocks={"x": slice(0, 2)},
        objective=(FunctionBlock("parametric", [[0, 1]], fn),),
        constraints=(),
        lower=[0.0, 0.0],
        upper=[2.0, 2.0],
        numerator=lambda x: 4.0 - (x[0] - 1.0) ** 2 - (x[1] - 0.5) ** 2,
        denominator=lambda x: 1.0 + x[0] + x[1],
    )


def _grid_oracle(cfg, steps=40):
    """Лучшая EE перебором расписаний, сдвигов путевых точек и сетки l_o при минимальной частоте"""
    T, chi = np.asarray(cfg.T_k), np.asarray(cfg.chi_k)
    l_l_max = T * np.asarray(cfg.f_l_k) / chi
    line = optimizer_service.initial_trajectory(cfg)
    offsets = [(0.0, 0.0), (10.0, 0.0), (-10.0, 0.0), (0.0, 10.0), (0.0, -10.0)]
    schedules = [
        Schedule.from_assignment(users, cfg.K)
        for users in itertools.product(range(cfg.K), repeat=cfg.N)
        if len(set(users)) == cfg.K
    ]
    best = 0.0
    for shift in itertools.product(offsets, repeat=cfg.N - 1):
        q = line.q.copy()
        q[1:-1] += np.asarray(shift)
        traj = channel_service.trajectory_from_points(q, cfg)
        if not channel_service.trajectory_is_feasible(traj, cfg):
            continue
        breakdown = energy_service.energy_breakdown(
            Allocation(l_o=cfg.I_k, l_l=[0.0] * cfg.K, f_o=[1.0] * cfg.K), traj, cfg
        )
        flight = cfg.alpha_w * breakdown.flight
        for schedule in schedules:
            rates = channel_service.average_rates(traj, schedule, cfg)
            grids = []
            for k in range(cfg.K):
                cap = T[k] / (1.0 / rates[k] + chi[k] / cfg.C_o)
                if cap <= cfg.I_k[k]:
                    break
                l_o = np.linspace(cfg.I_k[k], cap * (1 - 1e-9), steps)
                f_o = chi[k] * l_o / (T[k] - l_o / rates[k])
                grids.append((l_o, f_o, energy_service.server_energy(k, l_o, f_o, cfg)))
            else:
                l_o = grids[0][0][:, None] + grids[1][0][None, :]
                f_sum = grids[0][1][:, None] + grids[1][1][None, :]
                e_s = grids[0][2][:, None] + grids[1][2][None, :]
                for local in itertools.product(*[(0.0, m) for m in l_l_max]):
                    e_u = sum(energy_service.user_energy(k, local[k], cfg) for k in range(cfg.K))
                    ee = (l_o + sum(local)) / (flight + e_u + e_s)
                    ee = np.where(f_sum <= cfg.C_o, ee, 0.0)
                    best = max(best, float(np.max(ee)))
    return best


class TestDinkelbach:
    def test_analytic_ratio(self):
        solution, trace = optimizer_service.dinkelbach(_ratio_builder(1.0), np.array([1.5]), 0.0)
        assert len(trace) == 3
        np.testing.assert_allclose(trace, [0.0, 1.5, 2.0], rtol=1e-4, atol=1e-12)
        assert solution.x[0] == pytest.approx(1.0, abs=1e-4)

    def test_trace_is_nondecreasing(self):
        _, trace = optimizer_service.dinkelbach(_ratio_builder(1.0), np.array([1.5]), 0.0)
        assert all(b >= a for a, b in zip(trace[:-1], trace[1:]))

    def test_constant_ratio_fixed_point(self):
        def builder(lam):
            return ConvexProgram(
                n=1,
                blocks={"x": slice(0, 1)},
                objective=(FunctionBlock.linear("ratio", [[0]], [[2.0 - lam]], [0.0]),),
                constraints=(),
                lower=[1.0],
                upper=[2.0],
                numerator=lambda x: 2.0 * float(x[0]),
                denominator=lambda x: float(x[0]),
            )

        _, trace = optimizer_service.dinkelbach(builder, np.array([1.5]), 0.0)
        assert trace == [0.0, pytest.approx(2.0)]

    def test_grid_oracle(self):
        solution, trace = optimizer_service.dinkelbach(_concave_over_affine, np.array([1.0, 1.0]), 0.0)
        grid = np.linspace(0.0, 2.0, 201)
        X, Y = np.meshgrid(grid, grid)
        best = float(np.max((4.0 - (X - 1.0) ** 2 - (Y - 0.5) ** 2) / (1.0 + X + Y)))
        program = _concave_over_affine(trace[-1])
        ratio = program.numerator(solution.x) / program.denominator(solution.x)
        assert ratio == pytest.approx(best, rel=1e-3)
        assert ratio >= best * (1 - 1e-3)

    def test_tiny_ratio_keeps_updating(self):
        # λ порядка 1e-13 при знаменателе порядка 1e13, как у EE в бит/Дж при больших энергиях
        scale = 1e13

        def builder(lam):
            return ConvexProgram(
                n=1,
                blocks={"x": slice(0, 1)},
                objective=(FunctionBlock.linear("ratio", [[0]], [[1.0 - lam * scale]], [1.0]),),
                constraints=(),
                lower=[1.0],
                upper=[2.0],
                numerator=lambda x: float(x[0]) + 1.0,
                denominator=lambda x: scale * float(x[0]),
            )

        _, trace = optimizer_service.dinkelbach(builder, np.array([1.5]), 0.0)
        assert len(trace) == 3
        assert trace[-1] == pytest.approx(2.0 / scale, rel=1e-4)

    def test_update_cap(self):
        with pytest.raises(ConvergenceError) as exc:
            optimizer_service.dinkelbach(_ratio_builder(1.0), np.array([1.5]), 0.0, max_updates=0)
        assert exc.value.trace == [0.0]


class TestInitialPoint:
    def test_straight_line_speed(self, default_cfg):
        traj = optimizer_service.initial_trajectory(default_cfg)
        speeds = np.linalg.norm(traj.v, axis=1)
        np.testing.assert_allclose(speeds, 1200.0 / 70.0, rtol=1e-12)
        assert channel_service.trajectory_is_feasible(traj, default_cfg)

    def test_hover_when_endpoints_coincide(self, small_cfg):
        cfg = small_cfg.model_copy(update={"qF": small_cfg.q0})
        traj = optimizer_service.initial_trajectory(cfg)
        np.testing.assert_allclose(traj.q, np.tile(cfg.q0, (cfg.N + 1, 1)))
        np.testing.assert_allclose(traj.v, 0.0)

    def test_unreachable_endpoints(self, small_cfg):
        cfg = small_cfg.model_copy(update={"N": 2})
        with pytest.raises(InfeasibleError):
            optimizer_service.initial_trajectory(cfg)

    def test_initial_allocation_is_feasible(self, small_cfg):
        alloc = optimizer_service.initial_allocation(small_cfg)
        np.testing.assert_array_equal(alloc.l_o, small_cfg.I_k)
        assert float(np.sum(alloc.f_o)) == pytest.approx(small_cfg.C_o)


class TestHeuristicRoute:
    def _collinear(self, default_cfg):
        return default_cfg.model_copy(update={"w_k": [(300.0, 50.0), (-300.0, 50.0), (0.0, 50.0), (150.0, 50.0)]})

    def test_collinear_route_is_straight(self, default_cfg):
        cfg = self._collinear(default_cfg)
        order = optimizer_service.shortest_route(cfg)
        assert order == (1, 2, 3, 0)
        traj = optimizer_service.route_trajectory(cfg, order)
        np.testing.assert_allclose(traj.q[:, 1], 50.0, atol=1e-9)
        np.testing.assert_allclose(np.linalg.norm(traj.v, axis=1), 1200.0 / cfg.mission_time, rtol=1e-9)

    def test_collinear_route_used_unchanged(self, default_cfg):
        cfg = self._collinear(default_cfg)
        route = optimizer_service.route_trajectory(cfg, optimizer_service.shortest_route(cfg))
        assert optimizer_service.heuristic_trajectory(cfg) == route

    def test_triangle_matches_brute_force(self):
        cfg = make_small_scenario(
            K=3,
            w_k=[(0.0, 200.0), (-150.0, -150.0), (150.0, -100.0)],
            P_k=[0.1] * 3,
            chi_k=[1e3] * 3,
            f_l_k=[1e8] * 3,
            T_k=[10.0] * 3,
            I_k=[1e6] * 3,
            N=40,
        )
        q0, qF = np.asarray(cfg.q0), np.asarray(cfg.qF)
        users = [np.asarray(w) for w in cfg.w_k]

        def length(order):
            points = [q0] + [users[k] for k in order] + [qF]
            return sum(np.linalg.norm(b - a) for a, b in zip(points[:-1], points[1:]))

        best = min(itertools.permutations(range(3)), key=length)
        assert length(optimizer_service.shortest_route(cfg)) == pytest.approx(length(best), rel=1e-12)

    def test_route_too_long(self, small_cfg):
        cfg = small_cfg.model_copy(update={"w_k": [(0.0, 450.0), (0.0, -450.0)]})
        with pytest.raises(InfeasibleError, match="v_max"):
            optimizer_service.route_trajectory(cfg, optimizer_service.shortest_route(cfg))

    def test_projection_restores_flight_limits(self, small_cfg):
        cfg = small_cfg.model_copy(update={"N": 30, "a_max": 5.0})
        route = optimizer_service.route_trajectory(cfg, optimizer_service.shortest_route(cfg))
        assert not channel_service.trajectory_is_feasible(route, cfg)
        projected = optimizer_service.heuristic_trajectory(cfg)
        assert channel_service.trajectory_is_feasible(projected, cfg, tol=1e-6)
        np.testing.assert_allclose(projected.q[0], cfg.q0, atol=1e-6)
        np.testing.assert_allclose(projected.q[-1], cfg.qF, atol=1e-6)

    def test_failed_projection_falls_back_to_line(self, small_cfg, monkeypatch):
        cfg = small_cfg.model_copy(update={"N": 30, "a_max": 5.0})

        def no_interior(*args, **kwargs):
            raise InfeasibleError("no strictly feasible point (max violation 1.000e-03)")

        monkeypatch.setattr(optimizer_service, "project_trajectory", no_interior)
        assert optimizer_service.heuristic_trajectory(cfg) == optimizer_service.initial_trajectory(cfg)


class TestScaStep:
    def test_improves_straight_line(self, small_cfg):
        traj = optimizer_service.initial_trajectory(small_cfg)
        alloc = optimizer_service.initial_allocation(small_cfg)
        lp = subproblem_service.build_scheduling_lp(traj, alloc, small_cfg)
        schedule = subproblem_service.round_schedule(subproblem_service.solve_scheduling_lp(lp), lp)
        slack = subproblem_service.init_slacks(traj, alloc, small_cfg, schedule)
        before = energy_service.energy_efficiency(alloc, traj, small_cfg)

        new_traj, new_alloc, _, ee, trace = optimizer_service.optimize_q_l_f(
            schedule, Expansion(traj=traj, alloc=alloc, slack=slack), small_cfg
        )
        assert ee > before
        assert ee == pytest.approx(energy_service.energy_efficiency(new_alloc, new_traj, small_cfg), rel=1e-12)
        assert all(b >= a for a, b in zip(trace[:-1], trace[1:]))
        assert channel_service.trajectory_is_feasible(new_traj, small_cfg, tol=1e-6)

    def test_retries_with_wider_margin(self, small_cfg, monkeypatch):
        traj = optimizer_service.initial_trajectory(small_cfg)
        alloc = optimizer_service.initial_allocation(small_cfg)
        lp = subproblem_service.build_scheduling_lp(traj, alloc, small_cfg)
        schedule = subproblem_service.round_schedule(subproblem_service.solve_scheduling_lp(lp), lp)
        slack = subproblem_service.init_slacks(traj, alloc, small_cfg, schedule)

        original = subproblem_service.inner_start
        calls = []

        def flaky(program, expansion, solver=None):
            calls.append(expansion)
            if len(calls) == 1:
                raise InfeasibleError("no strictly feasible point (max violation 1.026e-09)")
            return original(program, expansion, solver)

        monkeypatch.setattr(subproblem_service, "inner_start", flaky)
        new_traj, _, _, ee, _ = optimizer_service.optimize_q_l_f(
            schedule, Expansion(traj=traj, alloc=alloc, slack=slack), small_cfg
        )
        assert len(calls) == 2
        # Вторая попытка: запас в 10 раз больше
        assert float(np.min(calls[1].alloc.l_o / calls[0].alloc.l_o)) > 1.0
        assert ee > energy_service.energy_efficiency(alloc, traj, small_cfg)
        assert channel_service.trajectory_is_feasible(new_traj, small_cfg, tol=1e-6)


class TestAlternatingOptimization:
    def test_small_scenario(self, small_cfg):
        report = optimizer_service.algorithm1(small_cfg, tol=1e-4, max_outer=20)
        assert report.algorithm == Algorithm.MAX_TOTAL_EE
        assert report.status in (RunStatus.CONVERGED, RunStatus.MAX_OUTER)
        trace = np.array(report.ee_trace)
        assert np.all(np.diff(trace) >= 0)
        assert report.ee == pytest.approx(
            energy_service.energy_efficiency(report.allocation, report.trajectory, small_cfg), rel=1e-12
        )
        assert report.schedule.is_binary
        assert report.phases.theta.shape == (small_cfg.N, small_cfg.M)
        assert optimizer_service.check_feasibility(report, small_cfg).ok

    def test_single_user_takes_every_slot(self, single_user_cfg):
        report = optimizer_service.algorithm1(single_user_cfg, tol=1e-3, max_outer=10)
        np.testing.assert_array_equal(report.schedule.c, 1.0)
        assert report.feasibility.ok

    def test_single_user_objectives_coincide(self, single_user_cfg):
        total = optimizer_service.algorithm1(single_user_cfg, tol=1e-4, max_outer=10)
        max_min = optimizer_service.max_min_ee(single_user_cfg, tol=1e-4, max_outer=10)
        assert max_min.ee == pytest.approx(total.ee, rel=1e-2)

    def test_heuristic_keeps_route(self, small_cfg):
        report = optimizer_service.heuristic_traj(small_cfg, tol=1e-4, max_outer=10)
        route = optimizer_service.heuristic_trajectory(small_cfg)
        np.testing.assert_allclose(report.trajectory.q, route.q, atol=1e-6)
        assert report.feasibility.ok

    def test_uav_server_uses_direct_link(self, small_cfg):
        report = optimizer_service.uav_server(small_cfg, tol=1e-4, max_outer=10)
        assert report.phases is None
        variant = optimizer_service.scenario_for(Algorithm.UAV_SERVER, small_cfg)
        assert float(np.sum(report.allocation.f_o)) <= variant.C_o * (1 + 1e-9)
        assert report.ee == pytest.approx(
            energy_service.energy_efficiency(report.allocation, report.trajectory, variant), rel=1e-12
        )

    def test_run_algorithm_dispatch(self, small_cfg):
        report = optimizer_service.run_algorithm("heuristic-traj", small_cfg, 1e-3, 5)
        assert report.algorithm == Algorithm.HEURISTIC_TRAJ

    def test_heuristic_falls_back_to_line(self, small_cfg, monkeypatch):
        line = optimizer_service.initial_trajectory(small_cfg)
        original = optimizer_service.OptimizerService.alternate

        def alternate(self, algorithm, trajectory=None, **kwargs):
            if trajectory is None or not np.array_equal(trajectory.q, line.q):
                raise InfeasibleError("no strictly feasible point (max violation 1.093e-03)")
            return original(self, algorithm, trajectory=trajectory, **kwargs)

        monkeypatch.setattr(optimizer_service.OptimizerService, "alternate", alternate)
        report = optimizer_service.heuristic_traj(small_cfg, tol=1e-3, max_outer=5)
        assert report.algorithm == Algorithm.HEURISTIC_TRAJ
        np.testing.assert_allclose(report.trajectory.q, line.q)
        assert report.feasibility.ok

    def test_later_infeasible_step_keeps_incumbent(self, small_cfg, monkeypatch):
        original = optimizer_service.optimize_q_l_f
        calls = []

        def second_step_fails(*args, **kwargs):
            calls.append(1)
            if len(calls) == 2:
                raise InfeasibleError("no strictly feasible point (max violation 1.026e-09)")
            return original(*args, **kwargs)

        monkeypatch.setattr(optimizer_service, "optimize_q_l_f", second_step_fails)
        report = optimizer_service.algorithm1(small_cfg, tol=1e-12, max_outer=10)
        assert len(calls) == 2
        assert report.status == RunStatus.CONVERGED
        assert len(report.ee_trace) == 2
        assert report.ee == pytest.approx(report.ee_trace[-1], rel=1e-12)
        assert report.feasibility.ok

    def test_first_infeasible_step_raises(self, small_cfg, monkeypatch):
        def no_interior(*args, **kwargs):
            raise InfeasibleError("no strictly feasible point (max violation 1.000e+00)")

        monkeypatch.setattr(optimizer_service, "optimize_q_l_f", no_interior)
        with pytest.raises(InfeasibleError):
            optimizer_service.algorithm1(small_cfg, max_outer=3)

    def test_reports_best_iterate_after_stall(self, small_cfg, monkeypatch):
        original = optimizer_service.optimize_q_l_f
        results = []

        def worse_after_first(*args, **kwargs):
            traj, alloc, slack, ee, trace = original(*args, **kwargs)
            results.append(ee)
            if len(results) > 1:
                # Шаг хуже лучшей точки: внешний цикл обязан оставить в отчете ее
                return traj, alloc, slack, results[0] * 0.5, trace
            return traj, alloc, slack, ee, trace

        monkeypatch.setattr(optimizer_service, "optimize_q_l_f", worse_after_first)
        report = optimizer_service.algorithm1(small_cfg, tol=1e-12, max_outer=10)
        assert len(results) == 1 + optimizer_service.settings.OUTER_PATIENCE
        assert report.status == RunStatus.CONVERGED
        assert report.objective == pytest.approx(results[0], rel=1e-12)
        assert np.all(np.diff(report.ee_trace) >= 0)

    def test_symmetric_users_get_equal_bits(self, small_cfg):
        # Пользователи и концевые точки зеркальны относительно оси y
        assert small_cfg.w_k[0] == (-small_cfg.w_k[1][0], small_cfg.w_k[1][1])
        report = optimizer_service.max_min_ee(small_cfg, tol=1e-4, max_outer=10)
        bits = report.per_user_bits
        assert bits[0] == pytest.approx(bits[1], rel=1e-2)
        assert np.all(bits >= np.array(small_cfg.I_k) * (1 - 1e-6))
        assert report.feasibility.ok


@pytest.mark.slow
class TestDefaultScenario:
    def test_total_ee_converges(self, default_cfg):
        report = optimizer_service.algorithm1(default_cfg)
        assert report.status == RunStatus.CONVERGED
        assert report.outer_iterations <= 50
        assert np.all(np.diff(report.ee_trace) >= 0)
        assert report.feasibility.ok

    def test_baselines_are_dominated(self, default_cfg):
        proposed = optimizer_service.algorithm1(default_cfg)
        heuristic = optimizer_service.heuristic_traj(default_cfg)
        server = optimizer_service.uav_server(default_cfg)
        assert heuristic.ee <= proposed.ee
        assert server.ee <= proposed.ee

    def test_max_min_raises_weakest_user(self, default_cfg):
        proposed = optimizer_service.algorithm1(default_cfg)
        max_min = optimizer_service.max_min_ee(default_cfg)
        assert max_min.min_user_bits >= proposed.min_user_bits * (1 - 1e-6)

    def test_first_step_improves(self, default_cfg):
        report = optimizer_service.algorithm1(default_cfg, max_outer=1)
        assert report.ee_trace[1] > report.ee_trace[0]
        assert math.isfinite(report.ee)

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_every_algorithm_is_feasible(self, default_cfg, algorithm):
        report = optimizer_service.run_algorithm(algorithm, default_cfg)
        assert report.algorithm == algorithm
        assert report.feasibility.ok, report.feasibility.violations
        assert math.isfinite(report.ee) and report.ee > 0

    @pytest.mark.parametrize("T", [50.0, 60.0, 70.0, 80.0])
    def test_mission_time_sweep_converges(self, default_cfg, T):
        cfg = scenario_service.with_mission_time(default_cfg, T)
        report = optimizer_service.algorithm1(cfg)
        assert report.status == RunStatus.CONVERGED
        assert report.outer_iterations <= 50
        assert np.all(np.diff(report.ee_trace) >= 0)
        assert report.feasibility.ok


@pytest.mark.slow
class TestGridOracle:
    def test_total_ee_close_to_exhaustive_search(self):
        # Короткий пролет K=2, N=4: 14 расписаний, сдвиги трех путевых точек на 10 м
        half = 0.4 * 4 * 50.0 / 2
        cfg = make_small_scenario(
            N=4, q0=(-half, 0.0), qF=(half, 0.0), w_k=[(-40.0, -30.0), (40.0, -30.0)]
        )
        oracle = _grid_oracle(cfg)
        report = optimizer_service.algorithm1(cfg)
        assert oracle > 0
        assert report.feasibility.ok
        assert report.ee >= 0.9 * oracle
