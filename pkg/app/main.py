import argparse
import datetime
import os
import platform
import sys
from typing import List, Optional

from app.commands.defaults import cmd_defaults
from app.commands.run import cmd_run
from app.commands.sweep import cmd_sweep
from app.core.config import settings
from app.core.errors import ScenarioError, UrisMecError, UsageError
from app.core.logging import LEVELS, configure_root_logger, set_level, setup_logger
from app.core.version import TOOL_NAME, __version__, get_version_info
from app.models.report import Algorithm

logger = setup_logger("app.main")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def get_system_info():
    """Собирает информацию о системе для логирования без использования psutil"""
    system_info = {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "processor": platform.processor() or "Неизвестно",
        "cpu_cores": os.cpu_count() or 0,
        "hostname": platform.node(),
        "time": datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        "broker": settings.SWEEP_BROKER_URL or "eager",
    }
    return system_info


def _add_solve_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="путь к JSON-сценарию")
    parser.add_argument("--out", required=True, help="каталог результатов")
    parser.add_argument("--tol", type=float, default=settings.OUTER_TOL, help="относительный допуск внешнего цикла")
    parser.add_argument("--max-outer", type=int, default=settings.MAX_OUTER, help="предел внешних итераций")
    parser.add_argument("--seed", type=int, default=0, help="зерно для проверок с выборкой")
    parser.add_argument(
        "--record-time", action="store_true", help="записывать временные метки в manifest.json"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description=get_version_info()["description"],
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    parser.add_argument(
        "--log-level", choices=list(LEVELS), help="уровень логирования (по умолчанию из URIS_LOG_LEVEL)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="запуск одного алгоритма")
    _add_solve_flags(run)
    run.add_argument(
        "--algorithm",
        required=True,
        choices=[a.value for a in Algorithm],
        help="алгоритм оптимизации",
    )
    run.set_defaults(handler=cmd_run)

    sweep = subparsers.add_parser("sweep", help="перебор длительности миссии T")
    _add_solve_flags(sweep)
    sweep.add_argument("--values", required=True, help="значения T через запятую, с")
    sweep.add_argument(
        "--algorithms",
        default=Algorithm.MAX_TOTAL_EE.value,
        help="алгоритмы через запятую",
    )
    sweep.add_argument("--workers", type=int, default=1, help="число воркеров (только с брокером)")
    sweep.set_defaults(handler=cmd_sweep)

    defaults = subparsers.add_parser("defaults", help="записать сценарий по умолчанию")
    defaults.add_argument("--out", required=True, help="путь к JSON-файлу")
    defaults.set_defaults(handler=cmd_defaults)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    configure_root_logger()
    if args.log_level:
        set_level(LEVELS[args.log_level])

    logger.info("=" * 50)
    logger.info(f"{TOOL_NAME} {__version__}: команда {args.command}")
    logger.info(f"Версия: {get_version_info()}")
    logger.info(f"Системная информация: {get_system_info()}")

    try:
        code = args.handler(args)
    except (ScenarioError, UsageError) as e:
        logger.error(f"Ошибка валидации: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        code = EXIT_USAGE
    except UrisMecError as e:
        logger.error(f"Ошибка решения: {type(e).__name__}: {e.detail}")
        print(f"error: {type(e).__name__}: {e.detail}", file=sys.stderr)
        code = EXIT_FAILURE
    except Exception as e:
        logger.error(f"Необработанное исключение: {str(e)}", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        code = EXIT_FAILURE

    logger.info(f"Команда {args.command} завершена с кодом {code}")
    logger.info("=" * 50)
    return code


if __name__ == "__main__":
    sys.exit(main())
