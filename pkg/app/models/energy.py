from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class EnergyBreakdown:
    """
    Составляющие взвешенной энергии, Дж

    E_p[n] - полет в слоте n, E_u[k] - пользователь k, E_s[k] - сервер для пользователя k.
    """

    E_p: np.ndarray
    E_u: np.ndarray
    E_s: np.ndarray
    alpha_w: float
    clamped_slots: Tuple[int, ...] = ()

    @property
    def flight(self) -> float:
        return float(np.sum(self.E_p))

    @property
    def total_weighted(self) -> float:
        return self.alpha_w * self.flight + float(np.sum(self.E_u) + np.sum(self.E_s))

    def as_dict(self) -> dict:
        return {
            "E_p": [float(x) for x in self.E_p],
            "E_u": [float(x) for x in self.E_u],
            "E_s": [float(x) for x in self.E_s],
            "alpha_w": float(self.alpha_w),
            "total_weighted": self.total_weighted,
            "clamped_slots": list(self.clamped_slots),
        }
