"""
Модели энергопотребления: полет U-RIS, вычисления пользователей и сервера.

Скорости и ускорения принимаются как массивы формы (..., 2); все функции векторизованы
по ведущим осям.
"""

from typing import Tuple

import numpy as np

from app.core.logging import setup_logger
from app.models.allocation import Allocation
from app.models.energy import EnergyBreakdown
from app.models.scenario import RotorParams, ScenarioConfig
from app.models.trajectory import Trajectory

logger = setup_logger("app.services.energy")


def _norms(v, a) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    speed = np.linalg.norm(v, axis=-1)
    accel = np.linalg.norm(a, axis=-1)
    dot = np.sum(a * v, axis=-1)
    return speed, accel, dot


def _kappa_radicand(v, a, rotor: RotorParams) -> np.ndarray:
    speed, accel, dot = _norms(v, a)
    m, rho, S, g = rotor.m, rotor.rho, rotor.S_FP, rotor.g
    F = speed * dot
    numerator = 4.0 * m * m * accel ** 2 + rho ** 2 * S ** 2 * speed ** 4 + 4.0 * m * rho * S * F
    return 1.0 + numerator / (4.0 * m * m * g * g)


def kappa_with_mask(v, a, rotor: RotorParams) -> Tuple[np.ndarray, np.ndarray]:
    """κ и маска точек, где подкоренное выражение отрицательно и κ обнулено"""
    radicand = _kappa_radicand(v, a, rotor)
    clamped = radicand < 0.0
    if np.any(clamped):
        logger.warning(f"Thrust ratio radicand negative at {int(np.sum(clamped))} point(s), clamped to 0")
    return np.sqrt(np.where(clamped, 0.0, radicand)), clamped


def thrust_ratio_kappa(v, a, rotor: RotorParams):
    """Отношение тяги к весу κ; равно 1 в висении"""
    kappa, _ = kappa_with_mask(v, a, rotor)
    return kappa if kappa.ndim else float(kappa)


def _profile_and_parasite(speed: np.ndarray, rotor: RotorParams) -> np.ndarray:
    blade = rotor.P0 * (1.0 + 3.0 * speed ** 2 / rotor.U_tip ** 2)
    parasite = 0.5 * rotor.d0 * rotor.rho * rotor.s_sol * rotor.A_disc * speed ** 3
    return blade + parasite


def propulsion_energy(v, a, rotor: RotorParams, delta_t: float):
    """
    Точная энергия полета за слот: мощность модели тяги, умноженная на δt

    Args:
        v: Скорость, м/с
        a: Ускорение, м/с²
        rotor: Коэффициенты винтов
        delta_t: Длительность слота, с
    """
    speed, _, _ = _norms(v, a)
    kappa, _ = kappa_with_mask(v, a, rotor)
    b = speed ** 2 / (2.0 * rotor.v0 ** 2)
    bracket = np.sqrt(np.maximum(np.sqrt(kappa ** 2 + b ** 2) - b, 0.0))
    energy = delta_t * (_profile_and_parasite(speed, rotor) + rotor.P_i * kappa * bracket)
    return energy if energy.ndim else float(energy)


def kappa_hat_squared(v, a, rotor: RotorParams, smoothing: float = 0.0):
    """κ̂² = 1 + (2m‖a‖ + ρS_FP‖v‖²)² / (2mg)²; при smoothing > 0 ‖a‖ заменяется на √(‖a‖² + ε²)"""
    speed, accel, _ = _norms(v, a)
    if smoothing > 0.0:
        accel = np.sqrt(accel ** 2 + smoothing ** 2)
    m = rotor.m
    return 1.0 + (2.0 * m * accel + rotor.rho * rotor.S_FP * speed ** 2) ** 2 / (2.0 * m * rotor.g) ** 2


def kappa_hat(v, a, rotor: RotorParams):
    result = np.sqrt(kappa_hat_squared(v, a, rotor))
    return result if result.ndim else float(result)


def propulsion_energy_upper(v, a, rotor: RotorParams, delta_t: float, smoothing: float = 0.0):
    """Выпуклая верхняя оценка энергии полета за слот"""
    speed, _, _ = _norms(v, a)
    energy = delta_t * (_profile_and_parasite(speed, rotor) + rotor.P_i * kappa_hat_squared(v, a, rotor, smoothing))
    return energy if energy.ndim else float(energy)


def user_energy(k: int, l_l, cfg: ScenarioConfig):
    """T_k·P_k + φ_u·χ_k·l_l·(f^l_k)², частота в единицах phi_frequency_unit"""
    return cfg.T_k[k] * cfg.P_k[k] + cfg.user_capacitance * cfg.chi_k[k] * l_l * cfg.f_l_k[k] ** 2


def server_energy(k: int, l_o, f_o, cfg: ScenarioConfig):
    return cfg.server_capacitance * cfg.chi_k[k] * l_o * f_o ** 2


def energy_breakdown(alloc: Allocation, traj: Trajectory, cfg: ScenarioConfig) -> EnergyBreakdown:
    """
    Все составляющие взвешенной энергии для точки (траектория, распределение)

    Returns:
        EnergyBreakdown: с точной энергией полета и списком слотов с обнуленным κ
    """
    rotor = cfg.rotor
    speed, _, _ = _norms(traj.v, traj.a)
    kappa, clamped = kappa_with_mask(traj.v, traj.a, rotor)
    b = speed ** 2 / (2.0 * rotor.v0 ** 2)
    bracket = np.sqrt(np.maximum(np.sqrt(kappa ** 2 + b ** 2) - b, 0.0))
    E_p = traj.delta_t * (_profile_and_parasite(speed, rotor) + rotor.P_i * kappa * bracket)

    E_u = np.array([user_energy(k, alloc.l_l[k], cfg) for k in range(cfg.K)])
    E_s = np.array([server_energy(k, alloc.l_o[k], alloc.f_o[k], cfg) for k in range(cfg.K)])
    return EnergyBreakdown(
        E_p=E_p,
        E_u=E_u,
        E_s=E_s,
        alpha_w=cfg.alpha_w,
        clamped_slots=tuple(int(n) for n in np.flatnonzero(clamped)),
    )


def energy_efficiency(alloc: Allocation, traj: Trajectory, cfg: ScenarioConfig) -> float:
    """Σ(l_o + l_l) / (α ΣE_p + Σ(E_u + E_s)), бит/Дж, с точной энергией полета"""
    breakdown = energy_breakdown(alloc, traj, cfg)
    return float(np.sum(alloc.total_bits)) / breakdown.total_weighted


def min_user_energy_efficiency(alloc: Allocation, traj: Trajectory, cfg: ScenarioConfig) -> float:
    """min_k(l_o + l_l) / E_total, целевая функция max-min варианта"""
    breakdown = energy_breakdown(alloc, traj, cfg)
    return float(np.min(alloc.total_bits)) / breakdown.total_weighted
