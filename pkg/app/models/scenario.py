import math
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

Point2D = Tuple[float, float]


class RotorParams(BaseModel):
    """Коэффициенты модели тяги винтокрылого БПЛА (все в СИ)"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    m: float = Field(gt=0)
    P0: float = Field(gt=0)
    P_i: float = Field(gt=0)
    U_tip: float = Field(gt=0)
    d0: float = Field(gt=0)
    rho: float = Field(gt=0)
    s_sol: float = Field(gt=0)
    A_disc: float = Field(gt=0)
    S_FP: float = Field(gt=0)
    v0: float = Field(gt=0)
    g: float = Field(gt=0)

    def scaled_to(self, mass: float) -> "RotorParams":
        """
        Пересчитывает массозависимые коэффициенты под новую массу

        Индуктивная мощность растет как m^{3/2}, скорость индукции в висении как m^{1/2},
        эквивалентная площадь фюзеляжа линейно. Профильные коэффициенты не меняются.
        """
        ratio = mass / self.m
        return self.model_copy(
            update={
                "m": mass,
                "P_i": self.P_i * ratio ** 1.5,
                "v0": self.v0 * math.sqrt(ratio),
                "S_FP": self.S_FP * ratio,
            }
        )


class BaselineParams(BaseModel):
    """Параметры базовой схемы с сервером на борту БПЛА"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    uav_mass: float = Field(default=2.0, gt=0)
    ris_mass: float = Field(default=2.0, gt=0)
    server_mass: float = Field(default=20.0, gt=0)
    uav_server_cpu_cap: float = Field(default=1e9, gt=0)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Миссия
    K: int = Field(ge=1)
    N: int = Field(ge=2)
    delta_t: float = Field(gt=0)
    H: float = Field(gt=0)
    q0: Point2D
    qF: Point2D
    r_d: float = Field(gt=0)
    v_max: float = Field(gt=0)
    a_max: float = Field(gt=0)
    w_s: Point2D
    w_k: List[Point2D]

    # Канал
    B: float = Field(gt=0)
    sigma2: float = Field(gt=0)
    beta0: float = Field(gt=0)
    alpha_L: float = Field(gt=0)
    Mx: int = Field(ge=1)
    My: int = Field(ge=1)
    lambda_c: float = Field(gt=0)
    d_sep: float = Field(gt=0)

    # Вычисления
    P_k: List[PositiveFloat]
    chi_k: List[PositiveFloat]
    f_l_k: List[PositiveFloat]
    T_k: List[PositiveFloat]
    I_k: List[PositiveFloat]
    C_o: float = Field(gt=0)
    phi_u: float = Field(gt=0)
    phi_s: float = Field(gt=0)
    # Единица частоты (Гц), в которой заданы phi_u и phi_s
    phi_frequency_unit: float = Field(default=1.0, gt=0)
    alpha_w: float = Field(ge=0)

    rotor: RotorParams
    baseline: BaselineParams = BaselineParams()

    @property
    def M(self) -> int:
        return self.Mx * self.My

    @property
    def mission_time(self) -> float:
        return self.N * self.delta_t

    @property
    def user_capacitance(self) -> float:
        """phi_u, пересчитанный к частоте в Гц"""
        return self.phi_u / self.phi_frequency_unit ** 2

    @property
    def server_capacitance(self) -> float:
        return self.phi_s / self.phi_frequency_unit ** 2
