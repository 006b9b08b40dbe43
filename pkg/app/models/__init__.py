from .scenario import RotorParams, BaselineParams, ScenarioConfig
from .trajectory import Trajectory, PhaseConfig, wrap_phase
from .allocation import Schedule, Allocation, SlackState, TaylorCoeffs, Expansion
from .energy import EnergyBreakdown
from .program import FunctionBlock, ConvexProgram, KktResiduals, Solution, SolveStatus
from .report import (
    Algorithm,
    RunStatus,
    FeasibilityReport,
    SolveReport,
    RunManifest,
    RunSummary,
    SweepRow,
)
from .error import FieldError, ScenarioValidationReport

__all__ = [
    "RotorParams",
    "BaselineParams",
    "ScenarioConfig",
    "Trajectory",
    "PhaseConfig",
    "wrap_phase",
    "Schedule",
    "Allocation",
    "SlackState",
    "TaylorCoeffs",
    "Expansion",
    "EnergyBreakdown",
    "FunctionBlock",
    "ConvexProgram",
    "KktResiduals",
    "Solution",
    "SolveStatus",
    "Algorithm",
    "RunStatus",
    "FeasibilityReport",
    "SolveReport",
    "RunManifest",
    "RunSummary",
    "SweepRow",
    "FieldError",
    "ScenarioValidationReport",
]
