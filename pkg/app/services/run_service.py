import datetime
import time
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.logging import run_context, setup_logger
from app.core.version import __version__
from app.models.allocation import Allocation
from app.models.report import Algorithm, RunManifest, RunSummary, SolveReport, SweepRow
from app.models.scenario import ScenarioConfig
from app.repositories.bundle_repository import BundleRepository
from app.services import channel_service, energy_service, optimizer_service

logger = setup_logger("app.services.run")


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def summarize(report: SolveReport) -> RunSummary:
    return RunSummary(
        algorithm=report.algorithm.value,
        ee=report.ee,
        objective=report.objective,
        total_bits=report.total_bits,
        total_energy=report.energy.total_weighted,
        per_user_bits=[float(x) for x in report.per_user_bits],
        min_user_bits=report.min_user_bits,
        status=report.status.value,
        outer_iterations=report.outer_iterations,
        feasible=report.feasibility.ok,
        max_violation=report.feasibility.max_violation,
    )


def build_manifest(
    digest: str,
    algorithm: Algorithm,
    tol: float,
    max_outer: int,
    seed: int,
    started_at: Optional[str] = None,
    finished_at: Optional[str] = None,
    wall_time: Optional[float] = None,
) -> RunManifest:
    return RunManifest(
        scenario_digest=digest,
        algorithm=Algorithm(algorithm).value,
        tol=tol,
        max_outer=max_outer,
        seed=seed,
        tool_version=__version__,
        started_at=started_at,
        finished_at=finished_at,
        wall_time=wall_time,
    )


def execute_run(
    cfg: ScenarioConfig,
    digest: str,
    algorithm: Algorithm,
    out_dir: Union[str, Path],
    tol: Optional[float] = None,
    max_outer: Optional[int] = None,
    seed: int = 0,
    record_time: Optional[bool] = None,
) -> Tuple[SolveReport, RunSummary]:
    """
    Запускает алгоритм и записывает полный комплект файлов прогона

    Args:
        cfg: Сценарий
        digest: SHA-256 дайджест файла сценария
        algorithm: Имя алгоритма
        out_dir: Каталог результатов
        tol: Относительный допуск внешнего цикла
        max_outer: Предел внешних итераций
        seed: Зерно генератора (в manifest.json)
        record_time: Писать ли временные метки в manifest.json

    Returns:
        Отчет решателя и сводка из summary.json

    Raises:
        UrisMecError: Любая ошибка валидации или решения
    """
    algorithm = Algorithm(algorithm)
    tol = settings.OUTER_TOL if tol is None else tol
    max_outer = settings.MAX_OUTER if max_outer is None else max_outer
    record_time = settings.RECORD_TIMESTAMPS if record_time is None else record_time

    with run_context(algorithm.value, digest):
        started_at = _utc_now()
        started = time.perf_counter()
        report = optimizer_service.run_algorithm(algorithm, cfg, tol, max_outer)
        wall_time = time.perf_counter() - started

        summary = summarize(report)
        if record_time:
            manifest = build_manifest(digest, algorithm, tol, max_outer, seed, started_at, _utc_now(), wall_time)
        else:
            manifest = build_manifest(digest, algorithm, tol, max_outer, seed)

        BundleRepository(out_dir).write_run(report, summary, manifest)
        logger.info(f"Run finished in {wall_time:.2f}s: EE={summary.ee:.10e} bit/J, status={summary.status}")
    return report, summary


def sweep_row(algorithm: Algorithm, T: float, summary: Optional[RunSummary], status: Optional[str] = None) -> SweepRow:
    if summary is None:
        return SweepRow(algorithm=Algorithm(algorithm).value, T=T, status=status or "failed")
    return SweepRow(
        algorithm=summary.algorithm,
        T=T,
        ee=summary.ee,
        total_bits=summary.total_bits,
        total_energy=summary.total_energy,
        iters=summary.outer_iterations,
        status=status or summary.status,
    )


def recompute_ee(cfg: ScenarioConfig, algorithm: Algorithm, bundle: BundleRepository) -> float:
    """Пересчитывает EE по trajectory.csv и allocation.json без состояния решателя"""
    variant = optimizer_service.scenario_for(algorithm, cfg)
    rows = bundle.read_csv("trajectory.csv")
    q = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    alloc_doc = bundle.read_json("allocation.json")
    alloc = Allocation(l_o=alloc_doc["l_o"], l_l=alloc_doc["l_l"], f_o=alloc_doc["f_o"])
    return energy_service.energy_efficiency(alloc, channel_service.trajectory_from_points(q, variant), variant)
