import argparse

from app.core.logging import setup_logger
from app.models.report import Algorithm
from app.repositories.scenario_repository import ScenarioRepository
from app.services import run_service

logger = setup_logger("app.commands.run")


def cmd_run(args: argparse.Namespace) -> int:
    """
    Запуск одного алгоритма на сценарии

    Args:
        args: scenario, algorithm, out, tol, max_outer, seed, record_time

    Returns:
        Код выхода 0; ошибки решения поднимаются как UrisMecError
    """
    cfg, digest = ScenarioRepository().load(args.scenario)
    algorithm = Algorithm(args.algorithm)
    logger.info(f"Run {algorithm.value} on {args.scenario} -> {args.out}")

    _, summary = run_service.execute_run(
        cfg,
        digest,
        algorithm,
        args.out,
        tol=args.tol,
        max_outer=args.max_outer,
        seed=args.seed,
        record_time=args.record_time or None,
    )
    print(f"{algorithm.value}: EE={summary.ee:.10e} bit/J, status={summary.status}")
    return 0
