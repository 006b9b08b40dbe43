import argparse

from app.core.logging import setup_logger
from app.repositories.scenario_repository import ScenarioRepository
from app.services import scenario_service

logger = setup_logger("app.commands.defaults")


def cmd_defaults(args: argparse.Namespace) -> int:
    """Записывает сценарий по умолчанию в args.out"""
    path = ScenarioRepository().save(scenario_service.default_scenario(), args.out)
    logger.info(f"Default scenario written to {path}")
    return 0
