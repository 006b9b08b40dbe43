"""
Подзадачи чередующейся оптимизации.

1. LP-релаксация расписания TDMA с округлением и ремонтом.
2. Выпуклая SCA-задача по (q, y, p, u, l_o, l_l, f_o, d_r) с параметром Динкельбаха λ.

Внутри программ используются масштабированные единицы: км, км², Мбит, ГГц, Мбит/с.
Наружу (Trajectory, Allocation, SlackState, числитель и знаменатель) отдаются величины в СИ.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import InfeasibleError, RoundingError
from app.core.logging import setup_logger
from app.models.allocation import Allocation, Expansion, Schedule, SlackState, TaylorCoeffs
from app.models.program import ConvexProgram, FunctionBlock
from app.models.scenario import ScenarioConfig
from app.models.trajectory import Trajectory
from app.services import channel_service, energy_service
from app.services.channel_service import LinkModel
from app.services.solver_service import BarrierSolver, inequality_values

logger = setup_logger("app.services.subproblem")

KM = 1e3
KM2 = KM * KM
MBIT = 1e6
GHZ = 1e9
U_UNIT = MBIT * GHZ * GHZ
LOG2E = 1.0 / np.log(2.0)

# Стартовое l_min ниже минимума бит по пользователям на эту долю
EPIGRAPH_MARGIN = 1e-2

OBJECTIVE_TOTAL = "total"
OBJECTIVE_MAX_MIN = "max-min"


# ---------------------------------------------------------------------------
# Задержка и LP расписания
# ---------------------------------------------------------------------------

def latency_satisfied(k: int, alloc: Allocation, avg_rate: float, cfg: ScenarioConfig) -> Tuple[bool, float]:
    """
    Проверка ограничения задержки пользователя k

    Returns:
        (выполнено, запас T_k - max(локальное время, время выгрузки и счета)), запас в секундах
    """
    chi = cfg.chi_k[k]
    local = alloc.l_l[k] * chi / cfg.f_l_k[k]
    l_o = alloc.l_o[k]
    offload = 0.0
    if l_o > 0:
        offload = l_o * chi / alloc.f_o[k] + (l_o / avg_rate if avg_rate > 0 else np.inf)
    margin = float(cfg.T_k[k] - max(local, offload))
    return margin >= -1e-9 * cfg.T_k[k], margin


def rate_floors(alloc: Allocation, cfg: ScenarioConfig) -> np.ndarray:
    """
    Минимальная средняя скорость каждого пользователя f·l / (f·T - l·χ), бит/с

    Raises:
        InfeasibleError: Знаменатель неположителен (выгрузка не успевает даже при бесконечной скорости)
    """
    floors = np.empty(cfg.K)
    for k in range(cfg.K):
        f, l = alloc.f_o[k], alloc.l_o[k]
        denom = f * cfg.T_k[k] - l * cfg.chi_k[k]
        if denom <= 0:
            raise InfeasibleError(f"user {k}: f_o·T_k - l_o·chi_k = {denom:.3e} <= 0, rate floor undefined")
        floors[k] = f * l / denom
    return floors


def build_scheduling_lp(
    traj: Trajectory, alloc: Allocation, cfg: ScenarioConfig, link: LinkModel = LinkModel.CASCADED
) -> ConvexProgram:
    """
    LP-релаксация выбора пользователей по слотам

    Переменная c[k][n] хранится построчно (индекс k·N + n). Цель - средняя суммарная
    выровненная скорость, ограничения - пороги скорости и Σ_k c[k][n] = 1.
    """
    K, N = cfg.K, traj.N
    rates = channel_service.rate_table(traj, cfg, link)
    floors = rate_floors(alloc, cfg)
    n_vars = K * N
    idx = np.arange(n_vars).reshape(K, N)

    objective = FunctionBlock.linear(
        "sum_rate", idx.reshape(1, -1), (rates / (N * MBIT)).reshape(1, -1), [0.0]
    )
    # 1 - Σ_n c Ř / (N·floor) <= 0
    floor_block = FunctionBlock.linear(
        "rate_floor", idx, -rates / (N * floors[:, None]), np.ones(K)
    )

    eq_matrix = np.zeros((N, n_vars))
    for k in range(K):
        eq_matrix[np.arange(N), idx[k]] = 1.0

    return ConvexProgram(
        n=n_vars,
        blocks={"c": slice(0, n_vars)},
        objective=(objective,),
        constraints=(floor_block,),
        # c <= 1 следует из c >= 0 и Σ_k c = 1
        lower=np.zeros(n_vars),
        upper=np.full(n_vars, np.inf),
        eq_matrix=eq_matrix,
        eq_rhs=np.ones(N),
        meta={"rates": rates, "floors": floors, "K": K, "N": N},
    )


def solve_scheduling_lp(lp: ConvexProgram, solver: Optional[BarrierSolver] = None) -> Schedule:
    """Решает LP барьерным методом из равномерного расписания"""
    solver = solver or BarrierSolver()
    K, N = lp.meta["K"], lp.meta["N"]
    start = np.full(lp.n, 1.0 / K)
    h = inequality_values(lp, start)
    if h.size and np.max(h) >= 0:
        start = solver.phase_one(lp, start)
    solution = solver.solve(lp, start)
    c = np.clip(solution.x.reshape(K, N), 0.0, 1.0)
    return Schedule(c / c.sum(axis=0, keepdims=True))


def _schedule_rates(users: np.ndarray, rates: np.ndarray) -> np.ndarray:
    K, N = rates.shape
    mask = np.zeros((K, N))
    mask[users, np.arange(N)] = 1.0
    return np.sum(mask * rates, axis=1) / N


def round_schedule(fractional: Schedule, lp: ConvexProgram) -> Schedule:
    """
    Округляет расписание (argmax по слоту) и восстанавливает пороги скорости

    Слоты переназначаются голодающему пользователю в порядке убывания его Ř, если донор
    после этого сохраняет свой порог.

    Raises:
        RoundingError: Пороги не удалось восстановить
    """
    rates = lp.meta["rates"]
    floors = lp.meta["floors"]
    K, N = rates.shape
    users = fractional.slot_users().copy()
    slack_tol = 1e-12

    def deficits():
        return floors - _schedule_rates(users, rates)

    for _ in range(K * N):
        deficit = deficits()
        starving = np.flatnonzero(deficit > slack_tol * floors)
        if starving.size == 0:
            break
        k = int(starving[np.argmax(deficit[starving])])
        moved = False
        for n in np.argsort(-rates[k], kind="stable"):
            donor = int(users[n])
            if donor == k:
                continue
            donor_rate = _schedule_rates(users, rates)[donor] - rates[donor, n] / N
            if donor_rate < floors[donor] * (1.0 - slack_tol):
                continue
            users[n] = k
            moved = True
            logger.debug(f"Rounding repair: slot {int(n)} moved from user {donor} to user {k}")
            break
        if not moved:
            break

    starving = np.flatnonzero(deficits() > slack_tol * floors)
    if starving.size:
        logger.warning(f"Rounding repair failed for users {starving.tolist()}")
        raise RoundingError(
            f"no binary schedule found meeting rate floors of users {starving.tolist()}",
            starved_users=starving.tolist(),
        )
    return Schedule.from_assignment(users, K)


# ---------------------------------------------------------------------------
# Скорость и ее касательная оценка
# ---------------------------------------------------------------------------

def gamma0(p, y, xi: float, alpha: float):
    """log2(1 + ξ / (p^{α/2} y^{α/2})), бит/с/Гц"""
    return np.log2(1.0 + xi / (np.power(p, alpha / 2.0) * np.power(y, alpha / 2.0)))


def gamma0_single_hop(y, xi: float, alpha: float):
    return np.log2(1.0 + xi / np.power(y, alpha / 2.0))


def taylor_rate_coeffs(
    k: int, p_t, y_t, cfg: ScenarioConfig, link: LinkModel = LinkModel.CASCADED
) -> TaylorCoeffs:
    """
    Коэффициенты касательной γ0 в точке (p_t, y_t), м²; работает поэлементно по слотам

    Для однопролетного канала p отсутствует и A = 0.
    """
    y_t = np.asarray(y_t, dtype=float)
    half = cfg.alpha_L / 2.0
    if link == LinkModel.SINGLE_HOP:
        xi = channel_service.single_hop_xi(k, cfg)
        C = gamma0_single_hop(y_t, xi, cfg.alpha_L)
        B = -LOG2E * half * xi / (np.power(y_t, half + 1.0) + xi * y_t)
        return TaylorCoeffs(A=np.zeros_like(y_t), B=B, C=C, p_t=np.zeros_like(y_t), y_t=y_t)

    p_t = np.asarray(p_t, dtype=float)
    xi = channel_service.cascade_xi(k, cfg)
    C = gamma0(p_t, y_t, xi, cfg.alpha_L)
    A = -LOG2E * half * xi / (np.power(p_t, half + 1.0) * np.power(y_t, half) + xi * p_t)
    B = -LOG2E * half * xi / (np.power(p_t, half) * np.power(y_t, half + 1.0) + xi * y_t)
    return TaylorCoeffs(A=A, B=B, C=C, p_t=p_t, y_t=y_t)


def rate_lower_bound(p, y, coeffs: TaylorCoeffs):
    """R̂ = C + A(p - p_t) + B(y - y_t)"""
    return coeffs.C + coeffs.A * (np.asarray(p) - coeffs.p_t) + coeffs.B * (np.asarray(y) - coeffs.y_t)


# ---------------------------------------------------------------------------
# Вспомогательные переменные и точка разложения
# ---------------------------------------------------------------------------

def _squared_distances(traj: Trajectory, cfg: ScenarioConfig) -> Tuple[np.ndarray, np.ndarray]:
    positions = traj.slot_positions
    y = np.stack([np.sum((positions - np.asarray(w)) ** 2, axis=1) + cfg.H ** 2 for w in cfg.w_k])
    p = np.sum((positions - np.asarray(cfg.w_s)) ** 2, axis=1) + cfg.H ** 2
    return y, p


def _uniform_schedule(cfg: ScenarioConfig, N: int) -> Schedule:
    return Schedule(np.full((cfg.K, N), 1.0 / cfg.K))


def init_slacks(
    traj: Trajectory,
    alloc: Allocation,
    cfg: ScenarioConfig,
    schedule: Optional[Schedule] = None,
    link: LinkModel = LinkModel.CASCADED,
) -> SlackState:
    """Вспомогательные переменные, на которых ограничения выполняются с равенством"""
    y, p = _squared_distances(traj, cfg)
    schedule = schedule or _uniform_schedule(cfg, traj.N)
    return SlackState(
        y=y,
        p=p,
        u=alloc.l_o * alloc.f_o ** 2,
        d_r=channel_service.average_rates(traj, schedule, cfg, link),
    )


def _surrogate_rates(slack: SlackState, schedule: Schedule, cfg: ScenarioConfig, link: LinkModel) -> np.ndarray:
    """Средние скорости по γ0 на значениях вспомогательных переменных, бит/с"""
    rates = np.empty(cfg.K)
    for k in range(cfg.K):
        if link == LinkModel.SINGLE_HOP:
            g = gamma0_single_hop(slack.y[k], channel_service.single_hop_xi(k, cfg), cfg.alpha_L)
        else:
            g = gamma0(slack.p, slack.y[k], channel_service.cascade_xi(k, cfg), cfg.alpha_L)
        rates[k] = cfg.B * np.sum(schedule.c[k] * g) / schedule.N
    return rates


def interiorize_expansion(
    expansion: Expansion,
    schedule: Schedule,
    cfg: ScenarioConfig,
    link: LinkModel = LinkModel.CASCADED,
    inflation: Optional[float] = None,
    rates: Optional[np.ndarray] = None,
) -> Expansion:
    """
    Сдвигает точку разложения строго внутрь допустимого множества

    y, p и u увеличиваются в (1 + ε), d_r уменьшается до (1 - ε) от скорости на новых
    y, p; l_o, l_l и f_o отодвигаются от своих границ. Если l_o = I_k не проходит по
    задержке, f_o поднимается до строгого выполнения (в пределах бюджета CPU).

    Args:
        rates: Средние скорости фиксированной траектории, бит/с; заменяют оценку по y, p
    """
    eps = settings.SLACK_INFLATION if inflation is None else inflation
    traj, alloc = expansion.traj, expansion.alloc
    y_true, p_true = _squared_distances(traj, cfg)
    y = np.maximum(expansion.slack.y, y_true) * (1.0 + eps)
    p = np.maximum(expansion.slack.p, p_true) * (1.0 + eps)

    if rates is None:
        rates = _surrogate_rates(SlackState(y=y, p=p, u=np.ones(cfg.K), d_r=np.ones(cfg.K)), schedule, cfg, link)
    d_r = np.asarray(rates, dtype=float) * (1.0 - eps)

    I_k = np.asarray(cfg.I_k)
    chi = np.asarray(cfg.chi_k)
    T = np.asarray(cfg.T_k)
    budget = cfg.C_o * (1.0 - eps)
    f_o = np.array(alloc.f_o, dtype=float)
    l_floor = I_k * (1.0 + eps)
    l_o = np.maximum(alloc.l_o, l_floor)

    # Минимальная частота, при которой I_k проходит по задержке с запасом ε
    room = T * (1.0 - eps) - l_floor / d_r
    needed = np.where(room > 0, chi * l_floor / np.where(room > 0, room, 1.0), np.inf)
    f_o = np.where((f_o < needed) & np.isfinite(needed), needed, f_o)
    total = float(np.sum(f_o))
    if total >= budget:
        f_o *= budget / total

    # Задержка строго: l_o (1/d_r + χ/f_o) < T
    cap = T / (1.0 / d_r + chi / f_o) * (1.0 - eps)
    l_o = np.where(l_o > cap, np.maximum(cap, l_floor), l_o)

    l_l_max = T * np.asarray(cfg.f_l_k) / chi
    l_l = np.clip(alloc.l_l, eps * l_l_max, (1.0 - eps) * l_l_max)

    u = l_o * f_o ** 2 * (1.0 + eps)
    return Expansion(
        traj=traj,
        alloc=Allocation(l_o=l_o, l_l=l_l, f_o=f_o),
        slack=SlackState(y=y, p=p, u=u, d_r=d_r),
    )


# ---------------------------------------------------------------------------
# Энергия полета в масштабированных координатах
# ---------------------------------------------------------------------------

def _flight_energy_terms(V: np.ndarray, Acc: np.ndarray, cfg: ScenarioConfig, eps: float):
    """E_up,ε по (v, a) в СИ: значения (m,), градиенты (m,4), гессианы (m,4,4)"""
    rotor = cfg.rotor
    dt = cfg.delta_t
    m, rho, S = rotor.m, rotor.rho, rotor.S_FP
    c3 = 0.5 * rotor.d0 * rotor.rho * rotor.s_sol * rotor.A_disc
    ck = rotor.P_i / (2.0 * m * rotor.g) ** 2
    c0 = 6.0 * rotor.P0 / rotor.U_tip ** 2

    s = np.sum(V * V, axis=1)
    speed = np.sqrt(s)
    r = np.sqrt(np.sum(Acc * Acc, axis=1) + eps * eps)
    G = 2.0 * m * r + rho * S * s

    values = dt * (rotor.P0 * (1.0 + 3.0 * s / rotor.U_tip ** 2) + c3 * s * speed + rotor.P_i + ck * G * G)

    dG_v = 2.0 * rho * S * V
    dG_a = 2.0 * m * Acc / r[:, None]
    g_v = c0 * V + 3.0 * c3 * speed[:, None] * V + 2.0 * ck * G[:, None] * dG_v
    g_a = 2.0 * ck * G[:, None] * dG_a
    grads = dt * np.hstack([g_v, g_a])

    eye = np.eye(2)
    vv = V[:, :, None] * V[:, None, :]
    safe_speed = np.where(speed > 0.0, speed, 1.0)
    vv_over_speed = np.where((speed > 0.0)[:, None, None], vv / safe_speed[:, None, None], 0.0)
    aa = Acc[:, :, None] * Acc[:, None, :]

    H_vv = (
        c0 * eye
        + 3.0 * c3 * (speed[:, None, None] * eye + vv_over_speed)
        + 2.0 * ck * (dG_v[:, :, None] * dG_v[:, None, :] + G[:, None, None] * 2.0 * rho * S * eye)
    )
    H_va = 2.0 * ck * dG_v[:, :, None] * dG_a[:, None, :]
    H_aa = 2.0 * ck * (
        dG_a[:, :, None] * dG_a[:, None, :]
        + G[:, None, None] * 2.0 * m * (eye / r[:, None, None] - aa / (r ** 3)[:, None, None])
    )
    hess = dt * np.concatenate(
        [np.concatenate([H_vv, H_va], axis=2), np.concatenate([np.transpose(H_va, (0, 2, 1)), H_aa], axis=2)],
        axis=1,
    )
    return values, grads, hess


def _flight_blocks(q_idx: np.ndarray, weight: float, cfg: ScenarioConfig, eps: float) -> List[FunctionBlock]:
    """
    Блоки -weight·E_up,ε по слотам; q_idx[n] = (ix, iy) для точки n

    Слоты 0..N-2 зависят от трех точек, последний слот - от двух (a[N] = 0).
    """
    N = q_idx.shape[0] - 1
    dt = cfg.delta_t
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))
    Jv3 = (KM / dt) * np.hstack([-I2, I2, Z2])
    Ja3 = (KM / dt ** 2) * np.hstack([I2, -2.0 * I2, I2])
    J3 = np.vstack([Jv3, Ja3])
    Jv2 = (KM / dt) * np.hstack([-I2, I2])

    def interior(X):
        V = X @ Jv3.T
        Acc = X @ Ja3.T
        vals, grads, hess = _flight_energy_terms(V, Acc, cfg, eps)
        return -weight * vals, -weight * (grads @ J3), -weight * np.einsum("ia,mab,bj->mij", J3.T, hess, J3)

    def last(X):
        V = X @ Jv2.T
        vals, grads, hess = _flight_energy_terms(V, np.zeros_like(V), cfg, eps)
        return (
            -weight * vals,
            -weight * (grads[:, :2] @ Jv2),
            -weight * np.einsum("ia,mab,bj->mij", Jv2.T, hess[:, :2, :2], Jv2),
        )

    blocks = []
    if N >= 2:
        index3 = np.hstack([q_idx[:-2], q_idx[1:-1], q_idx[2:]])
        blocks.append(FunctionBlock("flight_energy", index3, interior))
    blocks.append(FunctionBlock("flight_energy_last", np.hstack([q_idx[N - 1], q_idx[N]])[None, :], last))
    return blocks


def surrogate_flight_energy(traj: Trajectory, cfg: ScenarioConfig, eps: Optional[float] = None) -> np.ndarray:
    """E_up,ε по слотам траектории, Дж"""
    eps = settings.ACCEL_SMOOTHING if eps is None else eps
    return energy_service.propulsion_energy_upper(traj.v, traj.a, cfg.rotor, cfg.delta_t, smoothing=eps)


# ---------------------------------------------------------------------------
# Блоки ограничений
# ---------------------------------------------------------------------------

def speed_block(q_idx: np.ndarray, limit: float) -> FunctionBlock:
    w = 1.0 / limit ** 2
    I2 = np.eye(2)
    hess = 2.0 * w * np.block([[I2, -I2], [-I2, I2]])
    index = np.hstack([q_idx[:-1], q_idx[1:]])

    def fn(X):
        d = X[:, 2:4] - X[:, 0:2]
        vals = w * np.sum(d * d, axis=1) - 1.0
        grads = 2.0 * w * np.hstack([-d, d])
        return vals, grads, np.broadcast_to(hess, (X.shape[0], 4, 4))

    return FunctionBlock("speed", index, fn)


def accel_block(q_idx: np.ndarray, limit: float) -> FunctionBlock:
    w = 1.0 / limit ** 2
    I2 = np.eye(2)
    D = np.hstack([I2, -2.0 * I2, I2])
    hess = 2.0 * w * D.T @ D
    index = np.hstack([q_idx[:-2], q_idx[1:-1], q_idx[2:]])

    def fn(X):
        d = X[:, 0:2] - 2.0 * X[:, 2:4] + X[:, 4:6]
        vals = w * np.sum(d * d, axis=1) - 1.0
        grads = 2.0 * w * np.hstack([d, -2.0 * d, d])
        return vals, grads, np.broadcast_to(hess, (X.shape[0], 6, 6))

    return FunctionBlock("acceleration", index, fn)


def radius_block(q_idx: np.ndarray, radius: float) -> FunctionBlock:
    w = 1.0 / radius ** 2
    hess = 2.0 * w * np.eye(2)

    def fn(X):
        return w * np.sum(X * X, axis=1) - 1.0, 2.0 * w * X, np.broadcast_to(hess, (X.shape[0], 2, 2))

    return FunctionBlock("radius", q_idx, fn)


def _distance_slack_block(name: str, q_idx: np.ndarray, slack_idx: np.ndarray, centers: np.ndarray, H2: float):
    """‖q - w‖² + H² - slack <= 0"""
    index = np.hstack([q_idx, slack_idx[:, None]])
    hess = np.diag([2.0, 2.0, 0.0])

    def fn(X):
        d = X[:, 0:2] - centers
        vals = np.sum(d * d, axis=1) + H2 - X[:, 2]
        grads = np.hstack([2.0 * d, -np.ones((X.shape[0], 1))])
        return vals, grads, np.broadcast_to(hess, (X.shape[0], 3, 3))

    return FunctionBlock(name, index, fn)


def _quad_over_lin_hessian(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Гессиан a²/b по (a, b), форма (m, 2, 2)"""
    return np.stack(
        [
            np.stack([2.0 / b, -2.0 * a / b ** 2], axis=1),
            np.stack([-2.0 * a / b ** 2, 2.0 * a ** 2 / b ** 3], axis=1),
        ],
        axis=1,
    )


def _latency_block(index: np.ndarray, T: np.ndarray, chi_scaled: np.ndarray) -> FunctionBlock:
    """(l²/d + χ l²/f) / T - l <= 0 по (l_o, d_r, f_o)"""

    def fn(X):
        l, d, f = X[:, 0], X[:, 1], X[:, 2]
        vals = (l * l / d + chi_scaled * l * l / f) / T - l
        grads = np.stack(
            [
                (2.0 * l / d + 2.0 * chi_scaled * l / f) / T - 1.0,
                -l * l / (d * d * T),
                -chi_scaled * l * l / (f * f * T),
            ],
            axis=1,
        )
        hess = np.zeros((X.shape[0], 3, 3))
        h_ld = _quad_over_lin_hessian(l, d) / T[:, None, None]
        h_lf = _quad_over_lin_hessian(l, f) * (chi_scaled / T)[:, None, None]
        hess[:, 0, 0] = h_ld[:, 0, 0] + h_lf[:, 0, 0]
        hess[:, 0, 1] = hess[:, 1, 0] = h_ld[:, 0, 1]
        hess[:, 1, 1] = h_ld[:, 1, 1]
        hess[:, 0, 2] = hess[:, 2, 0] = h_lf[:, 0, 1]
        hess[:, 2, 2] = h_lf[:, 1, 1]
        return vals, grads, hess

    return FunctionBlock("latency", index, fn)


def _server_energy_block(index: np.ndarray, l_t: np.ndarray) -> FunctionBlock:
    """f²/u - 2/l_t + l/l_t² <= 0 по (f_o, u, l_o)"""

    def fn(X):
        f, u, l = X[:, 0], X[:, 1], X[:, 2]
        vals = f * f / u - 2.0 / l_t + l / l_t ** 2
        grads = np.stack([2.0 * f / u, -f * f / (u * u), 1.0 / l_t ** 2], axis=1)
        hess = np.zeros((X.shape[0], 3, 3))
        hess[:, :2, :2] = _quad_over_lin_hessian(f, u)
        return vals, grads, hess

    return FunctionBlock("server_energy", index, fn)


# ---------------------------------------------------------------------------
# Внутренняя SCA-задача
# ---------------------------------------------------------------------------

def _layout(K: int, N: int, frozen: bool, link: LinkModel, max_min: bool) -> Tuple[Dict[str, slice], int]:
    sizes = []
    if not frozen:
        sizes.append(("q", 2 * (N + 1)))
        sizes.append(("y", N))
        if link == LinkModel.CASCADED:
            sizes.append(("p", N))
    sizes += [("u", K), ("l_o", K), ("l_l", K), ("f_o", K), ("d_r", K)]
    if max_min:
        sizes.append(("l_min", 1))
    blocks = {}
    offset = 0
    for name, size in sizes:
        blocks[name] = slice(offset, offset + size)
        offset += size
    return blocks, offset


def _indices(blocks: Dict[str, slice], name: str) -> np.ndarray:
    s = blocks[name]
    return np.arange(s.start, s.stop)


def build_inner_program(
    lam: float,
    schedule: Schedule,
    expansion: Expansion,
    cfg: ScenarioConfig,
    objective: str = OBJECTIVE_TOTAL,
    freeze_trajectory: bool = False,
    link: LinkModel = LinkModel.CASCADED,
    smoothing: Optional[float] = None,
) -> ConvexProgram:
    """
    Выпуклая SCA-задача max N(x) - λ·D(x) вокруг точки разложения

    Args:
        lam: Параметр Динкельбаха, бит/Дж
        schedule: Бинарное расписание
        expansion: Точка разложения (СИ)
        cfg: Сценарий
        objective: "total" - сумма бит, "max-min" - эпиграф минимума по пользователям
        freeze_trajectory: Траектория фиксирована (q, y, p не оптимизируются)
        link: Каскад через RIS или прямой канал до БПЛА с сервером
        smoothing: ε сглаживания ‖a‖ в оценке энергии полета, м/с²

    Returns:
        ConvexProgram: числитель (бит) и знаменатель (Дж) доступны как program.numerator/denominator

    Raises:
        InfeasibleError: λ < 0 или пользователю не выделено ни одного слота
    """
    if lam < 0:
        raise InfeasibleError(f"lambda must be non-negative, got {lam}")
    if objective not in (OBJECTIVE_TOTAL, OBJECTIVE_MAX_MIN):
        raise ValueError(f"unknown objective {objective!r}")
    if not schedule.is_binary:
        raise ValueError("inner program requires a binary schedule")

    eps = settings.ACCEL_SMOOTHING if smoothing is None else smoothing
    K, N = cfg.K, schedule.N
    users = schedule.slot_users()
    for k in range(K):
        if not np.any(users == k):
            raise InfeasibleError(f"user {k} has no scheduled slots")

    max_min = objective == OBJECTIVE_MAX_MIN
    blocks, n = _layout(K, N, freeze_trajectory, link, max_min)
    lam_scaled = lam / MBIT

    u_idx, lo_idx, ll_idx = _indices(blocks, "u"), _indices(blocks, "l_o"), _indices(blocks, "l_l")
    f_idx, d_idx = _indices(blocks, "f_o"), _indices(blocks, "d_r")

    T = np.asarray(cfg.T_k, dtype=float)
    P = np.asarray(cfg.P_k, dtype=float)
    chi = np.asarray(cfg.chi_k, dtype=float)
    f_l = np.asarray(cfg.f_l_k, dtype=float)
    I_k = np.asarray(cfg.I_k, dtype=float)
    user_coeff = cfg.user_capacitance * chi * f_l ** 2 * MBIT
    server_coeff = cfg.server_capacitance * chi * U_UNIT
    fixed_energy = float(np.sum(T * P))

    constraints: List[FunctionBlock] = []
    objective_blocks: List[FunctionBlock] = []
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    eq_matrix = eq_rhs = None
    meta: Dict = {"users": users, "link": link, "objective": objective, "frozen": freeze_trajectory, "lam": lam}

    # Траектория
    if freeze_trajectory:
        flight_constant = cfg.alpha_w * float(np.sum(surrogate_flight_energy(expansion.traj, cfg, eps)))
        meta["trajectory"] = expansion.traj
        rates = channel_service.average_rates(expansion.traj, schedule, cfg, link)
        meta["rates"] = rates
        constraints.append(
            FunctionBlock.linear("rate", d_idx[:, None], np.ones((K, 1)), -rates / MBIT)
        )
    else:
        flight_constant = 0.0
        q_idx = _indices(blocks, "q").reshape(N + 1, 2)
        y_idx = _indices(blocks, "y")
        step = cfg.v_max * cfg.delta_t / KM
        constraints.append(speed_block(q_idx, step))
        if N >= 2:
            constraints.append(accel_block(q_idx, cfg.a_max * cfg.delta_t ** 2 / KM))
        if N >= 2:
            constraints.append(radius_block(q_idx[1:N], cfg.r_d / KM))
        H2 = (cfg.H / KM) ** 2
        w_k = np.asarray(cfg.w_k, dtype=float) / KM
        constraints.append(_distance_slack_block("user_distance", q_idx[:N], y_idx, w_k[users], H2))

        slack = expansion.slack
        y_t = slack.y[users, np.arange(N)]
        if link == LinkModel.CASCADED:
            p_idx = _indices(blocks, "p")
            w_s = np.broadcast_to(np.asarray(cfg.w_s, dtype=float) / KM, (N, 2))
            constraints.append(_distance_slack_block("server_distance", q_idx[:N], p_idx, w_s, H2))

        taylor = []
        B_scaled = cfg.B / MBIT
        for k in range(K):
            slots = np.flatnonzero(users == k)
            p_t = slack.p[slots] if link == LinkModel.CASCADED else None
            coeffs = taylor_rate_coeffs(k, p_t, y_t[slots], cfg, link)
            taylor.append(coeffs)
            w = B_scaled / N
            index = [d_idx[k]] + list(y_idx[slots])
            c = [1.0] + list(-w * coeffs.B * KM2)
            const = coeffs.C - coeffs.B * coeffs.y_t
            if link == LinkModel.CASCADED:
                index += list(p_idx[slots])
                c += list(-w * coeffs.A * KM2)
                const = const - coeffs.A * coeffs.p_t
            constraints.append(
                FunctionBlock.linear(f"rate[{k}]", [index], [c], [-w * float(np.sum(const))])
            )
        meta["taylor"] = taylor

        eq_matrix = np.zeros((4, n))
        eq_matrix[0, q_idx[0, 0]] = eq_matrix[1, q_idx[0, 1]] = 1.0
        eq_matrix[2, q_idx[N, 0]] = eq_matrix[3, q_idx[N, 1]] = 1.0
        eq_rhs = np.concatenate([np.asarray(cfg.q0), np.asarray(cfg.qF)]) / KM

        if lam > 0 and cfg.alpha_w > 0:
            objective_blocks.extend(_flight_blocks(q_idx, lam_scaled * cfg.alpha_w, cfg, eps))

    # Задержка, выгрузка, ресурс сервера
    chi_scaled = chi * MBIT / GHZ
    constraints.append(_latency_block(np.column_stack([lo_idx, d_idx, f_idx]), T, chi_scaled))
    constraints.append(
        FunctionBlock.linear("cpu_budget", f_idx[None, :], np.full((1, K), GHZ / cfg.C_o), [-1.0])
    )
    l_t = np.maximum(expansion.alloc.l_o, np.maximum(I_k, 1.0)) / MBIT
    meta["l_t"] = l_t
    constraints.append(_server_energy_block(np.column_stack([f_idx, u_idx, lo_idx]), l_t))

    if max_min:
        lmin = blocks["l_min"].start
        constraints.append(
            FunctionBlock.linear(
                "min_bits",
                np.column_stack([np.full(K, lmin), lo_idx, ll_idx]),
                np.tile([1.0, -1.0, -1.0], (K, 1)),
                np.zeros(K),
            )
        )

    lower[lo_idx] = I_k / MBIT
    lower[ll_idx] = 0.0
    upper[ll_idx] = T * f_l / chi / MBIT
    lower[f_idx] = 0.0
    lower[d_idx] = 0.0
    lower[u_idx] = 0.0
    upper[u_idx] = 2.0 * (T * cfg.C_o / chi) * cfg.C_o ** 2 / U_UNIT

    # Линейная часть цели: биты минус λ·(энергия пользователей и сервера)
    if max_min:
        lin_index = np.concatenate([[blocks["l_min"].start], ll_idx, u_idx])
        lin_coeff = np.concatenate([[1.0], -lam_scaled * user_coeff, -lam_scaled * server_coeff])
    else:
        lin_index = np.concatenate([lo_idx, ll_idx, u_idx])
        lin_coeff = np.concatenate([np.ones(K), 1.0 - lam_scaled * user_coeff, -lam_scaled * server_coeff])
    objective_blocks.insert(
        0,
        FunctionBlock.linear(
            "bits_minus_energy",
            lin_index[None, :],
            lin_coeff[None, :],
            [-lam_scaled * (fixed_energy + flight_constant)],
        ),
    )

    def numerator(x):
        if max_min:
            return float(x[blocks["l_min"].start]) * MBIT
        return float(np.sum(x[lo_idx]) + np.sum(x[ll_idx])) * MBIT

    def denominator(x):
        energy = fixed_energy + flight_constant
        energy += float(np.sum(user_coeff * x[ll_idx]) + np.sum(server_coeff * x[u_idx]))
        if not freeze_trajectory:
            q = x[blocks["q"]].reshape(N + 1, 2) * KM
            traj = Trajectory(q, cfg.delta_t)
            energy += cfg.alpha_w * float(np.sum(surrogate_flight_energy(traj, cfg, eps)))
        return energy

    return ConvexProgram(
        n=n,
        blocks=blocks,
        objective=tuple(objective_blocks),
        constraints=tuple(constraints),
        lower=lower,
        upper=upper,
        eq_matrix=eq_matrix,
        eq_rhs=eq_rhs,
        numerator=numerator,
        denominator=denominator,
        meta=meta,
    )


def pack_point(program: ConvexProgram, expansion: Expansion) -> np.ndarray:
    """Вектор переменных программы, соответствующий точке (в масштабированных единицах)"""
    x = np.zeros(program.n)
    blocks = program.blocks
    users = program.meta["users"]
    N = users.size
    slack, alloc = expansion.slack, expansion.alloc
    if "q" in blocks:
        x[blocks["q"]] = expansion.traj.q.reshape(-1) / KM
        x[blocks["y"]] = slack.y[users, np.arange(N)] / KM2
    if "p" in blocks:
        x[blocks["p"]] = slack.p / KM2
    x[blocks["u"]] = slack.u / U_UNIT
    x[blocks["l_o"]] = alloc.l_o / MBIT
    x[blocks["l_l"]] = alloc.l_l / MBIT
    x[blocks["f_o"]] = alloc.f_o / GHZ
    x[blocks["d_r"]] = slack.d_r / MBIT
    if "l_min" in blocks:
        totals = (alloc.l_o + alloc.l_l) / MBIT
        x[blocks["l_min"]] = float(np.min(totals)) * (1.0 - EPIGRAPH_MARGIN)
    return x


def unpack_point(program: ConvexProgram, x: np.ndarray, cfg: ScenarioConfig) -> Expansion:
    """Обратное к pack_point: траектория, распределение и вспомогательные переменные в СИ"""
    blocks = program.blocks
    users = program.meta["users"]
    N = users.size
    if "q" in blocks:
        traj = Trajectory(x[blocks["q"]].reshape(N + 1, 2) * KM, cfg.delta_t)
    else:
        traj = program.meta["trajectory"]
    y, p = _squared_distances(traj, cfg)
    if "y" in blocks:
        y[users, np.arange(N)] = x[blocks["y"]] * KM2
    if "p" in blocks:
        p = x[blocks["p"]] * KM2
    alloc = Allocation(
        l_o=x[blocks["l_o"]] * MBIT,
        l_l=x[blocks["l_l"]] * MBIT,
        f_o=x[blocks["f_o"]] * GHZ,
    )
    slack = SlackState(y=y, p=p, u=x[blocks["u"]] * U_UNIT, d_r=x[blocks["d_r"]] * MBIT)
    return Expansion(traj=traj, alloc=alloc, slack=slack)


def is_strictly_feasible(program: ConvexProgram, x: np.ndarray) -> bool:
    h = inequality_values(program, x)
    return bool(h.size == 0 or np.max(h) < 0.0)


def inner_start(program: ConvexProgram, expansion: Expansion, solver: Optional[BarrierSolver] = None) -> np.ndarray:
    """
    Строго допустимая стартовая точка программы

    Raises:
        InfeasibleError: Фаза I не нашла внутренней точки
    """
    x = pack_point(program, expansion)
    if is_strictly_feasible(program, x):
        return x
    logger.debug("Expansion point is not strictly interior, running phase I")
    return (solver or BarrierSolver()).phase_one(program, x)
