import argparse
from typing import List, Sequence

from app.core.config import settings
from app.core.errors import UsageError
from app.core.logging import setup_logger
from app.models.report import Algorithm, SweepRow
from app.repositories.bundle_repository import BundleRepository
from app.repositories.scenario_repository import ScenarioRepository
from app.services import scenario_service
from app.tasks.celery_app import is_eager
from app.tasks.sweep_tasks import solve_sweep_point

logger = setup_logger("app.commands.sweep")


def parse_values(text: str) -> List[float]:
    """
    Разбирает список длительностей миссии "50,60,70"

    Raises:
        UsageError: Пустой список или нечисловое значение
    """
    items = [item.strip() for item in (text or "").split(",") if item.strip()]
    if not items:
        raise UsageError("--values: empty value list")
    try:
        values = [float(item) for item in items]
    except ValueError:
        raise UsageError(f"--values: not a number list: {text!r}")
    if any(v <= 0 for v in values):
        raise UsageError("--values: mission times must be positive")
    return values


def parse_algorithms(text: str) -> List[Algorithm]:
    items = [item.strip() for item in (text or "").split(",") if item.strip()]
    if not items:
        raise UsageError("--algorithms: empty algorithm list")
    try:
        return [Algorithm(item) for item in items]
    except ValueError:
        known = ", ".join(a.value for a in Algorithm)
        raise UsageError(f"--algorithms: unknown algorithm in {text!r} (known: {known})")


def run_sweep(
    scenario_path: str,
    values: Sequence[float],
    algorithms: Sequence[Algorithm],
    out_dir: str,
    tol: float,
    max_outer: int,
    seed: int = 0,
    record_time: bool = False,
) -> List[SweepRow]:
    """
    Перебор длительности миссии T для набора алгоритмов

    Каждая точка пишет свой комплект файлов в подкаталог <algorithm>_T<T>;
    сбой точки записывается строкой со статусом, перебор продолжается.

    Returns:
        Строки sweep.csv в порядке (алгоритм, T)
    """
    if not values:
        raise UsageError("--values: empty value list")
    if not algorithms:
        raise UsageError("--algorithms: empty algorithm list")

    cfg, digest = ScenarioRepository().load(scenario_path)
    scenario_json = scenario_service.dump_scenario(cfg)
    bundle = BundleRepository(out_dir)

    mode = "eager" if is_eager() else "distributed"
    logger.info(f"Sweep over T={list(values)} for {[a.value for a in algorithms]} ({mode})")

    pending = []
    for algorithm in algorithms:
        for T in values:
            point_dir = str(bundle.point_dir(algorithm.value, T))
            pending.append(
                solve_sweep_point.apply_async(
                    args=(scenario_json, digest, algorithm.value, T, point_dir, tol, max_outer, seed, record_time)
                )
            )

    rows = [SweepRow(**result.get()) for result in pending]
    bundle.write_sweep(rows)
    failed = sum(1 for row in rows if row.status.startswith("failed"))
    if failed:
        logger.warning(f"Sweep finished with {failed} failed point(s) of {len(rows)}")
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    values = parse_values(args.values)
    algorithms = parse_algorithms(args.algorithms)
    if args.workers and args.workers > 1 and is_eager():
        logger.info(f"--workers={args.workers} ignored: no broker configured, points run in-process")

    rows = run_sweep(
        args.scenario,
        values,
        algorithms,
        args.out,
        tol=args.tol,
        max_outer=args.max_outer,
        seed=args.seed,
        record_time=args.record_time or settings.RECORD_TIMESTAMPS,
    )
    for row in rows:
        ee = "-" if row.ee is None else f"{row.ee:.6e}"
        print(f"{row.algorithm} T={row.T:g}: EE={ee} status={row.status}")
    return 0
