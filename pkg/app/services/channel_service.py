"""
Геометрия и LoS-канал пользователь → RIS на БПЛА → сервер.

Элементы URA нумеруются построчно по (m_x, m_y): i = m_x·My + m_y, что совпадает
с порядком кронекерова произведения a_x ⊗ a_y.
"""

from enum import Enum
from typing import Dict, Sequence, Union

import numpy as np

from app.core.logging import setup_logger
from app.models.allocation import Schedule
from app.models.scenario import ScenarioConfig
from app.models.trajectory import PhaseConfig, Trajectory, wrap_phase

logger = setup_logger("app.services.channel")

ArrayLike = Union[Sequence[float], np.ndarray]


class LinkModel(str, Enum):
    CASCADED = "cascaded"
    SINGLE_HOP = "single-hop"


def link_distance(q: ArrayLike, w: ArrayLike, H: float):
    """√(‖q − w‖² + H²); работает и для массивов точек формы (..., 2)"""
    diff = np.asarray(q, dtype=float) - np.asarray(w, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1) + H * H)


def direction_cosines(q: ArrayLike, w: ArrayLike, H: float):
    """(cosφ·sinφ_e, sinφ·sinφ_e) = ((x − x_w)/d, (y − y_w)/d)"""
    diff = np.asarray(q, dtype=float) - np.asarray(w, dtype=float)
    d = link_distance(q, w, H)
    return diff[..., 0] / d, diff[..., 1] / d


def _element_grid(cfg: ScenarioConfig):
    mx = np.repeat(np.arange(cfg.Mx), cfg.My).astype(float)
    my = np.tile(np.arange(cfg.My), cfg.Mx).astype(float)
    return mx, my


def steering_phases(q: ArrayLike, w: ArrayLike, cfg: ScenarioConfig) -> np.ndarray:
    """Фазы элементов a_x ⊗ a_y для узла в w; фаза элемента (1,1) равна нулю"""
    cx, cy = direction_cosines(q, w, cfg.H)
    mx, my = _element_grid(cfg)
    return -(2.0 * np.pi / cfg.lambda_c) * cfg.d_sep * (mx * cx + my * cy)


def path_amplitude(q: ArrayLike, w: ArrayLike, cfg: ScenarioConfig):
    """τ = √(β0 · d^{−α_L})"""
    d = link_distance(q, w, cfg.H)
    return np.sqrt(cfg.beta0 * d ** (-cfg.alpha_L))


def alignment_offsets(q: ArrayLike, w_k: ArrayLike, w_s: ArrayLike, cfg: ScenarioConfig) -> np.ndarray:
    """ψ_i: разность фаз, при компенсации которой лучи складываются когерентно"""
    cxs, cys = direction_cosines(q, w_s, cfg.H)
    cxk, cyk = direction_cosines(q, w_k, cfg.H)
    mx, my = _element_grid(cfg)
    scale = 2.0 * np.pi * cfg.d_sep / cfg.lambda_c
    return mx * scale * (cxs - cxk) + my * scale * (cys - cyk)


def cascaded_gain(q: ArrayLike, theta_slot: ArrayLike, w_k: ArrayLike, cfg: ScenarioConfig) -> complex:
    """
    (h_s)^H Θ h_k для одного слота

    Args:
        q: Положение RIS
        theta_slot: M фаз элементов
        w_k: Положение пользователя
        cfg: Сценарий (w_s берется из него)
    """
    theta = np.asarray(theta_slot, dtype=float).reshape(-1)
    h_k = path_amplitude(q, w_k, cfg) * np.exp(1j * steering_phases(q, w_k, cfg))
    h_s = path_amplitude(q, cfg.w_s, cfg) * np.exp(1j * steering_phases(q, cfg.w_s, cfg))
    return complex(np.sum(np.conj(h_s) * np.exp(1j * theta) * h_k))


def aligned_phases(psi: ArrayLike, omega: float = 0.0) -> PhaseConfig:
    """θ_i = wrap(−ψ_i + ω) для одного слота"""
    return PhaseConfig(np.atleast_2d(-np.asarray(psi, dtype=float) + omega))


def cascade_xi(k: int, cfg: ScenarioConfig) -> float:
    """ξ_k = P_k β0² M² / σ²"""
    return cfg.P_k[k] * cfg.beta0 ** 2 * cfg.M ** 2 / cfg.sigma2


def single_hop_xi(k: int, cfg: ScenarioConfig) -> float:
    return cfg.P_k[k] * cfg.beta0 / cfg.sigma2


def aligned_rate(q: ArrayLike, w_k: ArrayLike, w_s: ArrayLike, cfg: ScenarioConfig, k: int = 0):
    """Максимальная скорость при выравнивании фаз, бит/с"""
    d_s = link_distance(q, w_s, cfg.H)
    d_k = link_distance(q, w_k, cfg.H)
    snr = cascade_xi(k, cfg) / (d_s ** cfg.alpha_L * d_k ** cfg.alpha_L)
    return cfg.B * np.log2(1.0 + snr)


def single_hop_rate(q: ArrayLike, w_k: ArrayLike, cfg: ScenarioConfig, k: int = 0):
    """Прямой канал пользователь → БПЛА с сервером, бит/с"""
    d_k = link_distance(q, w_k, cfg.H)
    return cfg.B * np.log2(1.0 + single_hop_xi(k, cfg) / d_k ** cfg.alpha_L)


def instantaneous_rate(c_kn: float, q: ArrayLike, theta_slot: ArrayLike, k: int, cfg: ScenarioConfig) -> float:
    if c_kn == 0:
        return 0.0
    gain = cascaded_gain(q, theta_slot, cfg.w_k[k], cfg)
    return float(c_kn * cfg.B * np.log2(1.0 + cfg.P_k[k] * abs(gain) ** 2 / cfg.sigma2))


def rate_table(traj: Trajectory, cfg: ScenarioConfig, link: LinkModel = LinkModel.CASCADED) -> np.ndarray:
    """Ř_k[n] вдоль траектории, форма (K, N), бит/с"""
    positions = traj.slot_positions
    table = np.empty((cfg.K, traj.N))
    for k, w_k in enumerate(cfg.w_k):
        if link == LinkModel.SINGLE_HOP:
            table[k] = single_hop_rate(positions, w_k, cfg, k)
        else:
            table[k] = aligned_rate(positions, w_k, cfg.w_s, cfg, k)
    return table


def average_rates(
    traj: Trajectory, schedule: Schedule, cfg: ScenarioConfig, link: LinkModel = LinkModel.CASCADED
) -> np.ndarray:
    """R_k = (1/N) Σ_n c_k[n] Ř_k[n]"""
    return np.sum(schedule.c * rate_table(traj, cfg, link), axis=1) / traj.N


def phase_plan(traj: Trajectory, schedule: Schedule, cfg: ScenarioConfig, omega: float = 0.0) -> PhaseConfig:
    """Выравнивание фаз в каждом слоте под обслуживаемого пользователя"""
    users = schedule.slot_users()
    theta = np.empty((traj.N, cfg.M))
    for n, q in enumerate(traj.slot_positions):
        psi = alignment_offsets(q, cfg.w_k[users[n]], cfg.w_s, cfg)
        theta[n] = wrap_phase(-psi + omega)
    return PhaseConfig(theta)


def trajectory_from_points(points: ArrayLike, cfg: ScenarioConfig) -> Trajectory:
    """Траектория из точек (N+1, 2), например прочитанных из trajectory.csv"""
    return Trajectory(np.asarray(points, dtype=float), cfg.delta_t)


def validate_trajectory(traj: Trajectory, cfg: ScenarioConfig) -> Dict[str, float]:
    """
    Относительные нарушения ограничений полета: скорость, ускорение, радиус троса, концевые точки

    Returns:
        Словарь семейство → максимальное нарушение (0 - ограничение выполнено)
    """
    speed = np.linalg.norm(traj.v, axis=1)
    accel = np.linalg.norm(traj.a, axis=1)
    radius = np.linalg.norm(traj.q, axis=1)
    endpoint_error = max(
        float(np.linalg.norm(traj.q[0] - np.asarray(cfg.q0))),
        float(np.linalg.norm(traj.q[-1] - np.asarray(cfg.qF))),
    )
    return {
        "speed": max(0.0, float(np.max(speed)) - cfg.v_max) / cfg.v_max,
        "acceleration": max(0.0, float(np.max(accel)) - cfg.a_max) / cfg.a_max,
        "radius": max(0.0, float(np.max(radius)) - cfg.r_d) / cfg.r_d,
        "endpoints": endpoint_error / cfg.r_d,
    }


def trajectory_is_feasible(traj: Trajectory, cfg: ScenarioConfig, tol: float = 1e-9) -> bool:
    return all(value <= tol for value in validate_trajectory(traj, cfg).values())
