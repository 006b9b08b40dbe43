from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from app.models.allocation import Allocation, Schedule
from app.models.energy import EnergyBreakdown
from app.models.trajectory import PhaseConfig, Trajectory


class Algorithm(str, Enum):
    MAX_TOTAL_EE = "max-total-ee"
    MAX_MIN_EE = "max-min-ee"
    HEURISTIC_TRAJ = "heuristic-traj"
    UAV_SERVER = "uav-server"


class RunStatus(str, Enum):
    CONVERGED = "converged"
    MAX_OUTER = "max-outer"
    FAILED = "failed"


@dataclass(frozen=True)
class FeasibilityReport:
    """Максимальное нарушение каждого семейства ограничений исходной задачи, в относительных единицах"""

    violations: Dict[str, float]
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.violations.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


@dataclass(frozen=True, eq=False)
class SolveReport:
    algorithm: Algorithm
    ee_trace: Tuple[float, ...]
    lambda_traces: Tuple[Tuple[float, ...], ...]
    trajectory: Trajectory
    schedule: Schedule
    phases: Optional[PhaseConfig]
    allocation: Allocation
    energy: EnergyBreakdown
    status: RunStatus
    ee: float
    objective: float
    per_user_bits: np.ndarray
    feasibility: FeasibilityReport
    wall_time: float = field(default=0.0, compare=False)

    @property
    def outer_iterations(self) -> int:
        return max(len(self.ee_trace) - 1, 0)

    @property
    def total_bits(self) -> float:
        return float(np.sum(self.per_user_bits))

    @property
    def min_user_bits(self) -> float:
        return float(np.min(self.per_user_bits))


class RunManifest(BaseModel):
    scenario_digest: str
    algorithm: str
    tol: float
    max_outer: int
    seed: int
    tool_version: str
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    wall_time: Optional[float] = None


class RunSummary(BaseModel):
    algorithm: str
    ee: float
    objective: float
    total_bits: float
    total_energy: float
    per_user_bits: List[float]
    min_user_bits: float
    status: str
    outer_iterations: int
    feasible: bool
    max_violation: float


class SweepRow(BaseModel):
    algorithm: str
    T: float
    ee: Optional[float] = None
    total_bits: Optional[float] = None
    total_energy: Optional[float] = None
    iters: Optional[int] = None
    status: str
