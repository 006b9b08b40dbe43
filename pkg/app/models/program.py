from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

BlockFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]]


@dataclass(frozen=True, eq=False)
class FunctionBlock:
    """
    Семейство однотипных гладких функций, каждая от нескольких переменных

    index[r] - индексы переменных r-й функции; fn(X) для X = x[index] формы (m, b)
    возвращает значения (m,), градиенты (m, b) и гессианы (m, b, b) либо None для линейных.
    """

    name: str
    index: np.ndarray
    fn: BlockFn

    def __post_init__(self):
        index = np.atleast_2d(np.asarray(self.index, dtype=int))
        index.setflags(write=False)
        object.__setattr__(self, "index", index)

    @classmethod
    def linear(cls, name: str, index, coeffs, offset) -> "FunctionBlock":
        """Семейство аффинных функций coeffs[r]·x[index[r]] + offset[r]"""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        offset = np.atleast_1d(np.asarray(offset, dtype=float))

        def fn(X):
            return np.einsum("rb,rb->r", coeffs, X) + offset, coeffs, None

        return cls(name=name, index=index, fn=fn)

    @property
    def size(self) -> int:
        return self.index.shape[0]

    def evaluate(self, x: np.ndarray):
        vals, grads, hess = self.fn(x[self.index])
        return np.asarray(vals, dtype=float), np.asarray(grads, dtype=float), hess


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    """
    Гладкая выпуклая задача: max Σ objective при g(x) <= 0, lower <= x <= upper, A x = b

    Целевые блоки вогнуты, блоки ограничений выпуклы. numerator/denominator задают дробь
    для Dinkelbach, meta хранит данные построителя (таблицы скоростей, единицы и т.п.).
    """

    n: int
    blocks: Dict[str, slice]
    objective: Tuple[FunctionBlock, ...]
    constraints: Tuple[FunctionBlock, ...]
    lower: np.ndarray
    upper: np.ndarray
    eq_matrix: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    numerator: Optional[Callable[[np.ndarray], float]] = None
    denominator: Optional[Callable[[np.ndarray], float]] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.n,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.n,)).copy()
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.eq_matrix is not None:
            object.__setattr__(self, "eq_matrix", np.atleast_2d(np.asarray(self.eq_matrix, dtype=float)))
            object.__setattr__(self, "eq_rhs", np.atleast_1d(np.asarray(self.eq_rhs, dtype=float)))

    @property
    def n_constraints(self) -> int:
        return sum(block.size for block in self.constraints)

    @property
    def n_equalities(self) -> int:
        return 0 if self.eq_matrix is None else self.eq_matrix.shape[0]

    def unpack(self, x: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(x)[self.blocks[name]]

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(np.sum(block.evaluate(x)[0]) for block in self.objective))

    def objective_gradient(self, x: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.n)
        for block in self.objective:
            _, grads, _ = block.evaluate(x)
            np.add.at(grad, block.index, grads)
        return grad

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros(0)
        return np.concatenate([block.evaluate(x)[0] for block in self.constraints])

    def constraint_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Плотный якобиан ограничений (строки в порядке constraint_values)"""
        jac = np.zeros((self.n_constraints, self.n))
        row = 0
        for block in self.constraints:
            _, grads, _ = block.evaluate(x)
            rows = np.arange(row, row + block.size)[:, None]
            np.add.at(jac, (np.broadcast_to(rows, block.index.shape), block.index), grads)
            row += block.size
        return jac


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max-iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal_feasibility: float
    complementarity: float

    def worst(self) -> float:
        return max(self.stationarity, self.primal_feasibility, self.complementarity)


@dataclass(frozen=True, eq=False)
class Solution:
    x: np.ndarray
    objective: float
    residuals: KktResiduals
    iterations: int
    status: SolveStatus
    history: Tuple[float, ...] = ()
    multipliers: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == SolveStatus.OPTIMAL
