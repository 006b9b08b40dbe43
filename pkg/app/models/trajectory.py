import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Приводит фазы к [0, 2π)"""
    wrapped = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod может вернуть ровно 2π для отрицательных значений около нуля
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Горизонтальная траектория q[1..N+1] с производными v[1..N] и a[1..N]

    v[n] = (q[n+1] - q[n]) / δt; a[n] = (v[n+1] - v[n]) / δt для n < N, a[N] = 0.
    """

    q: np.ndarray
    delta_t: float
    v: np.ndarray = field(init=False, repr=False, compare=False)
    a: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[1] != 2 or q.shape[0] < 3:
            raise ValueError(f"trajectory needs shape (N+1, 2) with N >= 2, got {q.shape}")
        q.setflags(write=False)
        v = np.diff(q, axis=0) / self.delta_t
        a = np.zeros_like(v)
        a[:-1] = np.diff(v, axis=0) / self.delta_t
        v.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @property
    def N(self) -> int:
        return self.q.shape[0] - 1

    @property
    def slot_positions(self) -> np.ndarray:
        """Позиции q[1..N], в которых БПЛА зависает на время слота"""
        return self.q[:-1]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.delta_t == other.delta_t and np.array_equal(self.q, other.q)


@dataclass(frozen=True, eq=False)
class PhaseConfig:
    """Фазы элементов RIS theta[n][i] в [0, 2π)"""

    theta: np.ndarray

    def __post_init__(self):
        theta = wrap_phase(np.atleast_2d(self.theta))
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def N(self) -> int:
        return self.theta.shape[0]

    @property
    def M(self) -> int:
        return self.theta.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PhaseConfig):
            return NotImplemented
        return np.array_equal(self.theta, other.theta)
