from app.core.errors import UrisMecError
from app.core.logging import setup_logger
from app.models.report import Algorithm
from app.services import run_service, scenario_service
from app.tasks.celery_app import celery_app

logger = setup_logger("app.tasks.sweep_tasks")


@celery_app.task(name="app.tasks.sweep_tasks.solve_sweep_point")
def solve_sweep_point(
    scenario_json: str,
    digest: str,
    algorithm: str,
    T: float,
    out_dir: str,
    tol: float,
    max_outer: int,
    seed: int = 0,
    record_time: bool = False,
) -> dict:
    """
    Считает одну точку sweep и пишет ее комплект файлов

    Args:
        scenario_json: Базовый сценарий (канонический JSON)
        digest: Дайджест исходного файла сценария
        algorithm: Имя алгоритма
        T: Длительность миссии, с
        out_dir: Каталог точки
        tol: Допуск внешнего цикла
        max_outer: Предел внешних итераций

    Returns:
        Строка sweep.csv в виде словаря; ошибка точки попадает в поле status
    """
    logger.info(f"Sweep point: algorithm={algorithm}, T={T:g}")
    try:
        cfg = scenario_service.with_mission_time(scenario_service.load_scenario(scenario_json), T)
        _, summary = run_service.execute_run(
            cfg, digest, Algorithm(algorithm), out_dir, tol, max_outer, seed, record_time
        )
    except UrisMecError as e:
        logger.error(f"Sweep point algorithm={algorithm}, T={T:g} failed: {type(e).__name__}: {e.detail}")
        return run_service.sweep_row(algorithm, T, None, f"failed: {type(e).__name__}").model_dump()
    except Exception as e:
        logger.exception(f"Sweep point algorithm={algorithm}, T={T:g} crashed")
        return run_service.sweep_row(algorithm, T, None, f"failed: {type(e).__name__}").model_dump()
    return run_service.sweep_row(algorithm, T, summary).model_dump()
