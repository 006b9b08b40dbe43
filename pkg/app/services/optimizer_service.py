"""
Чередующаяся оптимизация энергоэффективности и базовые схемы сравнения.

Внешний цикл: LP расписания с округлением, затем SCA-шаг по (q, l, f) через Динкельбаха.
После сходимости фазы RIS выставляются выравниванием вдоль итоговой траектории.
"""

import itertools
import math
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ConvergenceError, InfeasibleError, RoundingError
from app.core.logging import setup_logger
from app.models.allocation import Allocation, Expansion, Schedule, SlackState
from app.models.program import ConvexProgram, FunctionBlock, Solution
from app.models.report import Algorithm, FeasibilityReport, RunStatus, SolveReport
from app.models.scenario import ScenarioConfig
from app.models.trajectory import Trajectory
from app.services import channel_service, energy_service, scenario_service, subproblem_service
from app.services.channel_service import LinkModel
from app.services.solver_service import BarrierSolver
from app.services.subproblem_service import KM, OBJECTIVE_MAX_MIN, OBJECTIVE_TOTAL

logger = setup_logger("app.services.optimizer")

Builder = Callable[[float], ConvexProgram]

_EXACT_ROUTE_LIMIT = 8
_INTERIOR_ATTEMPTS = 3


def dinkelbach(
    builder: Builder,
    start: np.ndarray,
    lambda0: float,
    tol: Optional[float] = None,
    max_updates: Optional[int] = None,
    solver: Optional[BarrierSolver] = None,
) -> Tuple[Solution, List[float]]:
    """
    Метод Динкельбаха для max N(x)/D(x)

    Каждая параметрическая задача max N - λD решается с теплого старта из предыдущего
    решения; λ обновляется до N/D в найденной точке.

    Args:
        builder: λ -> выпуклая задача с numerator/denominator
        start: Строго допустимая стартовая точка
        lambda0: Начальное λ >= 0
        tol: Остановка при |F(λ)| <= tol·λ·D, то есть относительно текущего числителя
        max_updates: Лимит обновлений λ

    Returns:
        (решение последней параметрической задачи, неубывающая траектория λ)

    Raises:
        ConvergenceError: Лимит обновлений λ исчерпан
    """
    tol = settings.DINKELBACH_TOL if tol is None else tol
    max_updates = settings.DINKELBACH_MAX_UPDATES if max_updates is None else max_updates
    solver = solver or BarrierSolver()

    lam = float(lambda0)
    trace = [lam]
    x = np.asarray(start, dtype=float)
    for update in range(max_updates + 1):
        program = builder(lam)
        solution = solver.solve(program, x)
        if not solution.ok:
            logger.warning(f"Parametric problem at lambda={lam:.6e} ended with status {solution.status.value}")
        numerator = program.numerator(solution.x)
        denominator = program.denominator(solution.x)
        F = numerator - lam * denominator
        logger.debug(f"Dinkelbach update {update}: lambda={lam:.10e}, F={F:.3e}")
        if abs(F) <= tol * lam * denominator:
            return solution, trace
        new_lam = numerator / denominator
        if new_lam <= lam:
            return solution, trace
        if update == max_updates:
            break
        lam = new_lam
        trace.append(lam)
        x = solution.x

    logger.error(f"Dinkelbach did not converge within {max_updates} updates")
    raise ConvergenceError(f"Dinkelbach did not converge within {max_updates} lambda updates", trace=trace)


def initial_trajectory(cfg: ScenarioConfig) -> Trajectory:
    """
    Прямая q0 -> qF с постоянной скоростью

    Raises:
        InfeasibleError: Концевые точки недостижимы за N слотов
    """
    q0, qF = np.asarray(cfg.q0, dtype=float), np.asarray(cfg.qF, dtype=float)
    distance = float(np.linalg.norm(qF - q0))
    if distance > cfg.N * cfg.delta_t * cfg.v_max:
        raise InfeasibleError(f"endpoints unreachable: {distance:.1f} m in {cfg.N} slots at v_max={cfg.v_max:g}")
    s = np.linspace(0.0, 1.0, cfg.N + 1)[:, None]
    return Trajectory(q0 + s * (qF - q0), cfg.delta_t)


def initial_allocation(cfg: ScenarioConfig) -> Allocation:
    """Минимальное допустимое распределение: l_o = I_k, l_l = 0, CPU поровну"""
    return Allocation(
        l_o=np.asarray(cfg.I_k, dtype=float),
        l_l=np.zeros(cfg.K),
        f_o=np.full(cfg.K, cfg.C_o / cfg.K),
    )


def objective_value(alloc: Allocation, traj: Trajectory, cfg: ScenarioConfig, objective: str = OBJECTIVE_TOTAL) -> float:
    if objective == OBJECTIVE_MAX_MIN:
        return energy_service.min_user_energy_efficiency(alloc, traj, cfg)
    return energy_service.energy_efficiency(alloc, traj, cfg)


def optimize_q_l_f(
    schedule: Schedule,
    expansion: Expansion,
    cfg: ScenarioConfig,
    tol: Optional[float] = None,
    objective: str = OBJECTIVE_TOTAL,
    freeze_trajectory: bool = False,
    link: LinkModel = LinkModel.CASCADED,
    solver: Optional[BarrierSolver] = None,
) -> Tuple[Trajectory, Allocation, SlackState, float, List[float]]:
    """
    Один SCA-шаг: строит выпуклую задачу вокруг точки разложения и решает ее Динкельбахом

    Returns:
        (траектория, распределение, вспомогательные переменные, истинная EE, траектория λ)
    """
    solver = solver or BarrierSolver()
    rates = channel_service.average_rates(expansion.traj, schedule, cfg, link) if freeze_trajectory else None
    eps = settings.SLACK_INFLATION
    for attempt in range(_INTERIOR_ATTEMPTS):
        if attempt and not freeze_trajectory:
            # Выпуклая комбинация с прямой строго внутри ограничений полета
            line = initial_trajectory(cfg)
            traj = Trajectory((1.0 - eps) * expansion.traj.q + eps * line.q, cfg.delta_t)
            expansion = Expansion(traj=traj, alloc=expansion.alloc, slack=expansion.slack)
        interior = subproblem_service.interiorize_expansion(expansion, schedule, cfg, link, inflation=eps, rates=rates)

        def builder(lam: float, interior: Expansion = interior) -> ConvexProgram:
            return subproblem_service.build_inner_program(
                lam, schedule, interior, cfg, objective=objective, freeze_trajectory=freeze_trajectory, link=link
            )

        program = builder(0.0)
        try:
            x0 = subproblem_service.inner_start(program, interior, solver)
            break
        except InfeasibleError as e:
            if attempt == _INTERIOR_ATTEMPTS - 1:
                raise
            eps *= 10.0
            logger.warning(f"No interior start ({e}), retrying with inflation {eps:g}")

    lambda0 = program.numerator(x0) / program.denominator(x0)
    solution, trace = dinkelbach(builder, x0, lambda0, tol=tol, solver=solver)

    point = subproblem_service.unpack_point(program, solution.x, cfg)
    ee = objective_value(point.alloc, point.traj, cfg, objective)
    return point.traj, point.alloc, point.slack, ee, trace


def check_feasibility(report: SolveReport, cfg: ScenarioConfig, tol: float = 1e-6) -> FeasibilityReport:
    """Максимальные относительные нарушения ограничений исходной задачи по семействам"""
    link = LinkModel.SINGLE_HOP if report.algorithm == Algorithm.UAV_SERVER else LinkModel.CASCADED
    return _feasibility(report.trajectory, report.schedule, report.allocation, report.phases, cfg, link, tol)


def _feasibility(
    traj: Trajectory,
    schedule: Schedule,
    alloc: Allocation,
    phases,
    cfg: ScenarioConfig,
    link: LinkModel,
    tol: float,
) -> FeasibilityReport:
    c = schedule.c
    violations = {
        "schedule_sum": float(np.max(np.abs(schedule.slot_sums() - 1.0))),
        "schedule_binary": float(np.max(np.minimum(np.abs(c), np.abs(1.0 - c)))),
    }
    violations.update(channel_service.validate_trajectory(traj, cfg))

    I_k = np.asarray(cfg.I_k)
    violations["offload_min"] = float(np.max(np.maximum(0.0, (I_k - alloc.l_o) / I_k)))
    violations["local_nonneg"] = float(np.max(np.maximum(0.0, -alloc.l_l / np.maximum(alloc.total_bits, 1.0))))
    violations["cpu_budget"] = max(0.0, (float(np.sum(alloc.f_o)) - cfg.C_o) / cfg.C_o)

    rates = channel_service.average_rates(traj, schedule, cfg, link)
    latency = 0.0
    for k in range(cfg.K):
        _, margin = subproblem_service.latency_satisfied(k, alloc, float(rates[k]), cfg)
        latency = max(latency, -margin / cfg.T_k[k])
    violations["latency"] = latency

    if phases is not None:
        theta = phases.theta
        outside = np.maximum(0.0, -theta) + np.maximum(0.0, theta - 2.0 * math.pi)
        violations["phase_range"] = float(np.max(outside, initial=0.0))
    return FeasibilityReport(violations=violations, tol=tol)


class OptimizerService:
    """Внешний цикл чередующейся оптимизации для одного сценария"""

    def __init__(
        self,
        cfg: ScenarioConfig,
        tol: Optional[float] = None,
        max_outer: Optional[int] = None,
        solver: Optional[BarrierSolver] = None,
    ):
        self.cfg = cfg
        self.tol = settings.OUTER_TOL if tol is None else tol
        self.max_outer = settings.MAX_OUTER if max_outer is None else max_outer
        self.patience = settings.OUTER_PATIENCE
        self.solver = solver or BarrierSolver()
        self.logger = setup_logger("app.services.optimizer")

    def alternate(
        self,
        algorithm: Algorithm,
        objective: str = OBJECTIVE_TOTAL,
        link: LinkModel = LinkModel.CASCADED,
        trajectory: Optional[Trajectory] = None,
        freeze_trajectory: bool = False,
    ) -> SolveReport:
        """
        Чередует расписание и SCA-шаг до относительного изменения цели < tol
        или OUTER_PATIENCE шагов подряд без улучшения

        Args:
            algorithm: Имя алгоритма для отчета
            objective: Суммарная или минимальная по пользователям EE
            link: Модель канала
            trajectory: Начальная траектория (по умолчанию прямая)
            freeze_trajectory: Не оптимизировать траекторию
        """
        cfg = self.cfg
        started = time.perf_counter()
        traj = trajectory or initial_trajectory(cfg)
        alloc = initial_allocation(cfg)
        schedule: Optional[Schedule] = None

        current = objective_value(alloc, traj, cfg, objective)
        best_traj, best_alloc, best_schedule = traj, alloc, None
        ee_trace = [current]
        lambda_traces: List[Tuple[float, ...]] = []
        status = RunStatus.MAX_OUTER
        stalls = 0
        self.logger.info(f"Start {algorithm.value}: K={cfg.K}, N={cfg.N}, initial objective {current:.10e}")

        for outer in range(1, self.max_outer + 1):
            try:
                lp = subproblem_service.build_scheduling_lp(traj, alloc, cfg, link)
                fractional = subproblem_service.solve_scheduling_lp(lp, self.solver)
                schedule = subproblem_service.round_schedule(fractional, lp)
            except RoundingError as e:
                if schedule is None:
                    self.logger.error(f"Rounding failed on the first iteration: {e.detail}")
                    raise
                self.logger.warning(f"Outer {outer}: {e.detail}; keeping previous schedule")
            if best_schedule is None:
                best_schedule = schedule

            slack = subproblem_service.init_slacks(traj, alloc, cfg, schedule, link)
            try:
                new_traj, new_alloc, _, candidate, trace = optimize_q_l_f(
                    schedule,
                    Expansion(traj=traj, alloc=alloc, slack=slack),
                    cfg,
                    objective=objective,
                    freeze_trajectory=freeze_trajectory,
                    link=link,
                    solver=self.solver,
                )
            except InfeasibleError as e:
                if outer == 1:
                    raise
                self.logger.warning(f"Outer {outer}: {e}; keeping objective {current:.10e}")
                status = RunStatus.CONVERGED
                break
            lambda_traces.append(tuple(trace))

            change = (candidate - current) / max(abs(current), np.finfo(float).tiny)
            # Следующая точка разложения - всегда результат шага, в отчет идет лучшая
            traj, alloc = new_traj, new_alloc
            if candidate > current:
                best_traj, best_alloc, best_schedule = new_traj, new_alloc, schedule
                current = candidate
                stalls = 0
                self.logger.info(f"Outer {outer}: objective {current:.10e}, relative change {change:.3e}")
            else:
                stalls += 1
                self.logger.info(
                    f"Outer {outer}: step gives {candidate:.10e}, not above {current:.10e} ({stalls}/{self.patience})"
                )
            ee_trace.append(current)
            if abs(change) < self.tol or stalls >= self.patience:
                status = RunStatus.CONVERGED
                break

        traj, alloc, schedule = best_traj, best_alloc, best_schedule
        phases = None
        if link == LinkModel.CASCADED:
            phases = channel_service.phase_plan(traj, schedule, cfg)

        energy = energy_service.energy_breakdown(alloc, traj, cfg)
        feasibility = _feasibility(traj, schedule, alloc, phases, cfg, link, 1e-6)
        if not feasibility.ok:
            self.logger.warning(f"Final point violates constraints: {feasibility.violations}")

        report = SolveReport(
            algorithm=algorithm,
            ee_trace=tuple(ee_trace),
            lambda_traces=tuple(lambda_traces),
            trajectory=traj,
            schedule=schedule,
            phases=phases,
            allocation=alloc,
            energy=energy,
            status=status,
            ee=energy_service.energy_efficiency(alloc, traj, cfg),
            objective=current,
            per_user_bits=np.array(alloc.total_bits),
            feasibility=feasibility,
            wall_time=time.perf_counter() - started,
        )
        self.logger.info(
            f"Finished {algorithm.value}: status={status.value}, EE={report.ee:.10e} bit/J, "
            f"outer={report.outer_iterations}"
        )
        return report


def algorithm1(cfg: ScenarioConfig, tol: Optional[float] = None, max_outer: Optional[int] = None) -> SolveReport:
    """Максимизация суммарной EE по расписанию, траектории, фазам и распределению"""
    return OptimizerService(cfg, tol, max_outer).alternate(Algorithm.MAX_TOTAL_EE)


def max_min_ee(cfg: ScenarioConfig, tol: Optional[float] = None, max_outer: Optional[int] = None) -> SolveReport:
    """Максимизация минимальной по пользователям EE"""
    return OptimizerService(cfg, tol, max_outer).alternate(Algorithm.MAX_MIN_EE, objective=OBJECTIVE_MAX_MIN)


def _route_length(points: Sequence[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(b - a) for a, b in zip(points[:-1], points[1:])))


def shortest_route(cfg: ScenarioConfig) -> Tuple[int, ...]:
    """
    Порядок обхода пользователей кратчайшим путем q0 -> пользователи -> qF

    Полный перебор при K <= 8, иначе жадный ближайший сосед.
    """
    q0, qF = np.asarray(cfg.q0, dtype=float), np.asarray(cfg.qF, dtype=float)
    users = [np.asarray(w, dtype=float) for w in cfg.w_k]

    if cfg.K <= _EXACT_ROUTE_LIMIT:
        best_order, best_length = None, np.inf
        for order in itertools.permutations(range(cfg.K)):
            length = _route_length([q0] + [users[k] for k in order] + [qF])
            if length < best_length - 1e-12:
                best_order, best_length = order, length
        return tuple(best_order)

    logger.warning(f"K={cfg.K} > {_EXACT_ROUTE_LIMIT}, using nearest-neighbour route")
    remaining = list(range(cfg.K))
    order = []
    position = q0
    while remaining:
        k = min(remaining, key=lambda j: float(np.linalg.norm(users[j] - position)))
        order.append(k)
        remaining.remove(k)
        position = users[k]
    return tuple(order)


def route_trajectory(cfg: ScenarioConfig, order: Sequence[int]) -> Trajectory:
    """
    Дискретизация маршрута с постоянной скоростью (длина / (N·δt))

    Raises:
        InfeasibleError: Требуемая скорость выше v_max
    """
    points = np.array([cfg.q0] + [cfg.w_k[k] for k in order] + [cfg.qF], dtype=float)
    segments = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(segments)])
    length = float(cumulative[-1])
    speed = length / (cfg.N * cfg.delta_t)
    if speed > cfg.v_max * (1.0 + 1e-12):
        raise InfeasibleError(f"route requires speed {speed:.3f} m/s > v_max={cfg.v_max:g} m/s")

    s = np.linspace(0.0, length, cfg.N + 1)
    q = np.column_stack([np.interp(s, cumulative, points[:, 0]), np.interp(s, cumulative, points[:, 1])])
    q[0], q[-1] = points[0], points[-1]
    logger.debug(f"Route {list(order)}: length {length:.1f} m, speed {speed:.3f} m/s")
    return channel_service.trajectory_from_points(q, cfg)


def project_trajectory(target: Trajectory, cfg: ScenarioConfig, solver: Optional[BarrierSolver] = None) -> Trajectory:
    """Ближайшая в смысле наименьших квадратов траектория, удовлетворяющая ограничениям полета"""
    solver = solver or BarrierSolver()
    N = target.N
    n = 2 * (N + 1)
    q_idx = np.arange(n).reshape(N + 1, 2)
    goal = target.q / KM

    def fn(X):
        d = X - goal
        return -np.sum(d * d, axis=1), -2.0 * d, np.broadcast_to(-2.0 * np.eye(2), (X.shape[0], 2, 2))

    constraints = [subproblem_service.speed_block(q_idx, cfg.v_max * cfg.delta_t / KM)]
    if N >= 2:
        constraints.append(subproblem_service.accel_block(q_idx, cfg.a_max * cfg.delta_t ** 2 / KM))
        constraints.append(subproblem_service.radius_block(q_idx[1:N], cfg.r_d / KM))

    eq_matrix = np.zeros((4, n))
    eq_matrix[0, 0] = eq_matrix[1, 1] = 1.0
    eq_matrix[2, n - 2] = eq_matrix[3, n - 1] = 1.0
    program = ConvexProgram(
        n=n,
        blocks={"q": slice(0, n)},
        objective=(FunctionBlock("distance_to_route", q_idx, fn),),
        constraints=tuple(constraints),
        lower=np.full(n, -np.inf),
        upper=np.full(n, np.inf),
        eq_matrix=eq_matrix,
        eq_rhs=np.concatenate([np.asarray(cfg.q0), np.asarray(cfg.qF)]) / KM,
    )
    start = initial_trajectory(cfg).q.reshape(-1) / KM
    if not subproblem_service.is_strictly_feasible(program, start):
        start = solver.phase_one(program, start)
    solution = solver.solve(program, start)
    return Trajectory(solution.x.reshape(N + 1, 2) * KM, cfg.delta_t)


def heuristic_trajectory(cfg: ScenarioConfig, solver: Optional[BarrierSolver] = None) -> Trajectory:
    """
    Кратчайший маршрут с постоянной скоростью; при нарушении ограничений полета - его проекция

    Если проекция не находит допустимой точки, используется прямая q0 -> qF.
    """
    route = route_trajectory(cfg, shortest_route(cfg))
    if channel_service.trajectory_is_feasible(route, cfg):
        return route
    logger.info(f"Constant-speed route violates flight limits {channel_service.validate_trajectory(route, cfg)}, projecting")
    try:
        return project_trajectory(route, cfg, solver)
    except InfeasibleError as e:
        logger.warning(f"Route projection failed ({e}), falling back to the straight line")
        return initial_trajectory(cfg)


def heuristic_traj(cfg: ScenarioConfig, tol: Optional[float] = None, max_outer: Optional[int] = None) -> SolveReport:
    """Базовая схема: фиксированный маршрут, оптимизируются расписание, фазы и распределение"""
    service = OptimizerService(cfg, tol, max_outer)
    trajectory = heuristic_trajectory(cfg, service.solver)
    try:
        return service.alternate(Algorithm.HEURISTIC_TRAJ, trajectory=trajectory, freeze_trajectory=True)
    except (InfeasibleError, RoundingError) as e:
        line = initial_trajectory(cfg)
        if np.array_equal(trajectory.q, line.q):
            raise
        logger.warning(f"Heuristic route has no feasible allocation ({e}), falling back to the straight line")
        return service.alternate(Algorithm.HEURISTIC_TRAJ, trajectory=line, freeze_trajectory=True)


def uav_server(cfg: ScenarioConfig, tol: Optional[float] = None, max_outer: Optional[int] = None) -> SolveReport:
    """Базовая схема с сервером на борту БПЛА: прямой канал, тяжелее аппарат, слабее CPU"""
    variant = scenario_service.uav_server_scenario(cfg)
    return OptimizerService(variant, tol, max_outer).alternate(Algorithm.UAV_SERVER, link=LinkModel.SINGLE_HOP)


ALGORITHMS = {
    Algorithm.MAX_TOTAL_EE: algorithm1,
    Algorithm.MAX_MIN_EE: max_min_ee,
    Algorithm.HEURISTIC_TRAJ: heuristic_traj,
    Algorithm.UAV_SERVER: uav_server,
}


def run_algorithm(
    algorithm: Algorithm, cfg: ScenarioConfig, tol: Optional[float] = None, max_outer: Optional[int] = None
) -> SolveReport:
    return ALGORITHMS[Algorithm(algorithm)](cfg, tol, max_outer)


def scenario_for(algorithm: Algorithm, cfg: ScenarioConfig) -> ScenarioConfig:
    """Сценарий, на котором фактически считается алгоритм (для пересчета энергии по файлам)"""
    if Algorithm(algorithm) == Algorithm.UAV_SERVER:
        return scenario_service.uav_server_scenario(cfg)
    return cfg
