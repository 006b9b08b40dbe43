from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from app.models.trajectory import Trajectory

ArrayLike = Union[float, np.ndarray]


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Schedule:
    """Веса выбора пользователя c[k][n]: дробные после LP, бинарные после округления"""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen(self.c, 2))

    @classmethod
    def from_assignment(cls, users: Sequence[int], K: int) -> "Schedule":
        """Строит бинарное расписание из номеров пользователей по слотам (с нуля)"""
        users = np.asarray(users, dtype=int)
        c = np.zeros((K, users.size))
        c[users, np.arange(users.size)] = 1.0
        return cls(c)

    @property
    def K(self) -> int:
        return self.c.shape[0]

    @property
    def N(self) -> int:
        return self.c.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.c == 0.0) | (self.c == 1.0)))

    def slot_users(self) -> np.ndarray:
        """Номер обслуживаемого пользователя в каждом слоте (argmax, ничьи - меньший номер)"""
        return np.argmax(self.c, axis=0)

    def slot_sums(self) -> np.ndarray:
        return self.c.sum(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return np.array_equal(self.c, other.c)


@dataclass(frozen=True, eq=False)
class Allocation:
    """Биты на сервер l_o, локальные биты l_l и доля CPU сервера f_o, по пользователям"""

    l_o: np.ndarray
    l_l: np.ndarray
    f_o: np.ndarray

    def __post_init__(self):
        for name in ("l_o", "l_l", "f_o"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1))
        if not (self.l_o.size == self.l_l.size == self.f_o.size):
            raise ValueError("allocation arrays must have one entry per user")

    @property
    def K(self) -> int:
        return self.l_o.size

    @property
    def total_bits(self) -> np.ndarray:
        return self.l_o + self.l_l

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("l_o", "l_l", "f_o")
        )


@dataclass(frozen=True, eq=False)
class SlackState:
    """
    Вспомогательные переменные SCA

    y[k][n] - квадрат расстояния пользователь-RIS, м²; p[n] - квадрат расстояния RIS-сервер, м²;
    u[k] - оценка l_o·f_o², бит·Гц²; d_r[k] - средняя скорость, бит/с.
    """

    y: np.ndarray
    p: np.ndarray
    u: np.ndarray
    d_r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y, 2))
        object.__setattr__(self, "p", _frozen(self.p, 1))
        object.__setattr__(self, "u", _frozen(self.u, 1))
        object.__setattr__(self, "d_r", _frozen(self.d_r, 1))


@dataclass(frozen=True)
class TaylorCoeffs:
    """
    Линеаризация γ0(p, y) в точке (p_t, y_t)

    A, B - частные производные по p и y (≤ 0), C - значение γ0 в точке разложения, бит/с/Гц.
    """

    A: ArrayLike
    B: ArrayLike
    C: ArrayLike
    p_t: ArrayLike
    y_t: ArrayLike


@dataclass(frozen=True, eq=False)
class Expansion:
    """Точка разложения SCA: траектория, распределение и вспомогательные переменные (СИ)"""

    traj: Trajectory
    alloc: Allocation
    slack: SlackState
