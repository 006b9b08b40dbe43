import hashlib
import json
import math
from typing import Any, Dict, Union

from pydantic import ValidationError

from app.core.errors import ScenarioError
from app.core.logging import setup_logger
from app.models.error import FieldError, ScenarioValidationReport
from app.models.scenario import BaselineParams, RotorParams, ScenarioConfig

logger = setup_logger("app.services.scenario")

_PER_USER_FIELDS = ("w_k", "P_k", "chi_k", "f_l_k", "T_k", "I_k")

# Скорость индукции и площадь фюзеляжа заданы для массы 2 кг
_REFERENCE_MASS = 2.0


def default_rotor(mass: float) -> RotorParams:
    """Типовые коэффициенты винтокрылого БПЛА; S_FP и v0 пересчитаны под массу"""
    return RotorParams(
        m=mass,
        P0=79.86,
        P_i=88.63,
        U_tip=120.0,
        d0=0.6,
        rho=1.225,
        s_sol=0.05,
        A_disc=0.503,
        S_FP=0.0151 * (mass / _REFERENCE_MASS),
        v0=4.03 * math.sqrt(mass / _REFERENCE_MASS),
        g=9.8,
    )


def default_scenario() -> ScenarioConfig:
    """
    Сценарий моделирования по умолчанию

    Положения пользователей не заданы численно в исходной постановке, поэтому четыре
    пользователя разнесены по диску на стороне, противоположной серверу.
    """
    baseline = BaselineParams()
    K = 4
    cfg = ScenarioConfig(
        K=K,
        N=70,
        delta_t=1.0,
        H=100.0,
        q0=(-600.0, 50.0),
        qF=(600.0, 50.0),
        r_d=700.0,
        v_max=50.0,
        a_max=30.0,
        w_s=(0.0, 800.0),
        w_k=[(-450.0, -100.0), (-150.0, -350.0), (150.0, -100.0), (450.0, -350.0)],
        B=1e6,
        sigma2=1e-19,
        beta0=1e-4,
        alpha_L=2.0,
        Mx=40,
        My=25,
        lambda_c=0.1,
        d_sep=0.05,
        P_k=[0.1] * K,
        chi_k=[1e3] * K,
        f_l_k=[1e8] * K,
        T_k=[30.0] * K,
        I_k=[1e6] * K,
        C_o=3e9,
        phi_u=1e-8,
        phi_s=1e-5,
        phi_frequency_unit=1e9,
        alpha_w=0.02,
        rotor=default_rotor(baseline.uav_mass + baseline.ris_mass),
        baseline=baseline,
    )
    return validate_scenario(cfg)


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """
    Проверяет межполевые инварианты сценария

    Raises:
        ScenarioError: С именем поля, нарушившего инвариант
    """
    for name in _PER_USER_FIELDS:
        size = len(getattr(cfg, name))
        if size != cfg.K:
            raise ScenarioError(name, f"expected K={cfg.K} entries, got {size}")

    if math.hypot(*cfg.q0) > cfg.r_d:
        raise ScenarioError("q0", "q0 outside tether radius")
    if math.hypot(*cfg.qF) > cfg.r_d:
        raise ScenarioError("qF", "qF outside tether radius")

    distance = math.dist(cfg.q0, cfg.qF)
    reach = cfg.N * cfg.delta_t * cfg.v_max
    if distance > reach:
        raise ScenarioError(
            "N", f"endpoints unreachable ({distance:.1f} m > {cfg.N}·{cfg.delta_t:g}·{cfg.v_max:g} m)"
        )

    for k in range(cfg.K):
        # Знаменатель ограничения задержки положителен хотя бы при f_o = C_o
        if cfg.C_o * cfg.T_k[k] - cfg.I_k[k] * cfg.chi_k[k] <= 0:
            raise ScenarioError(
                f"I_k[{k}]", f"user {k}: C_o·T_k <= I_k·chi_k, latency unattainable"
            )

    return cfg


def load_scenario(document: Union[str, bytes, Dict[str, Any]]) -> ScenarioConfig:
    """
    Разбирает и валидирует JSON-документ сценария

    Args:
        document: Текст JSON или уже разобранный словарь

    Returns:
        ScenarioConfig: Проверенная конфигурация

    Raises:
        ScenarioError: Ошибка разбора, отсутствующее поле или нарушение инварианта
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            logger.warning(f"Scenario parse failure: {e}")
            raise ScenarioError("document", f"parse failure: {e.msg} at line {e.lineno}")

    if not isinstance(document, dict):
        raise ScenarioError("document", "top-level JSON value must be an object")

    try:
        cfg = ScenarioConfig.model_validate(document)
    except ValidationError as e:
        report = ScenarioValidationReport(
            detail=[
                FieldError(loc=list(err["loc"]), msg=err["msg"], type=err["type"])
                for err in e.errors()
            ]
        )
        first = report.detail[0]
        message = "missing field" if first.type == "missing" else first.msg
        logger.warning(f"Scenario validation failed: {len(report.detail)} error(s), first at {report.first_field()}")
        raise ScenarioError(report.first_field(), message, errors=report.detail)

    cfg = validate_scenario(cfg)
    logger.debug(f"Scenario loaded: K={cfg.K}, N={cfg.N}, M={cfg.M}")
    return cfg


def dump_scenario(cfg: ScenarioConfig) -> str:
    return cfg.model_dump_json(indent=2) + "\n"


def scenario_digest(data: Union[str, bytes]) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def with_mission_time(cfg: ScenarioConfig, T: float) -> ScenarioConfig:
    """
    Копия сценария с длительностью миссии T (N = T / δt)

    Raises:
        ScenarioError: T не кратно δt или концевые точки недостижимы
    """
    slots = T / cfg.delta_t
    N = int(round(slots))
    if N < 2 or abs(slots - N) > 1e-9 * max(1.0, slots):
        raise ScenarioError("N", f"mission time {T:g} s is not a multiple of delta_t={cfg.delta_t:g} s")
    return validate_scenario(cfg.model_copy(update={"N": N}))


def uav_server_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """
    Вариант со вычислительным сервером на борту БПЛА

    Масса полета - БПЛА плюс сервер, роторные коэффициенты пересчитаны под нее,
    вычислительный ресурс ограничен бортовым CPU.
    """
    baseline = cfg.baseline
    mass = baseline.uav_mass + baseline.server_mass
    rotor = cfg.rotor.scaled_to(mass)
    variant = cfg.model_copy(
        update={"rotor": rotor, "C_o": min(cfg.C_o, baseline.uav_server_cpu_cap)}
    )
    logger.debug(f"UAV-server variant: m={mass:g} kg, C_o={variant.C_o:g} Hz")
    return validate_scenario(variant)
