from pathlib import Path
from typing import Optional, Tuple, Union

from app.core.errors import ScenarioError
from app.core.logging import setup_logger
from app.models.scenario import ScenarioConfig
from app.services import scenario_service


class ScenarioRepository:
    """Чтение и запись JSON-документов сценария"""

    def __init__(self, base_dir: Optional[Union[str, Path]] = None):
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.logger = setup_logger("app.repositories.scenario")

    def _resolve(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if self.base_dir is not None and not path.is_absolute():
            path = self.base_dir / path
        return path

    def load(self, path: Union[str, Path]) -> Tuple[ScenarioConfig, str]:
        """
        Загружает сценарий и считает дайджест байтов файла

        Raises:
            ScenarioError: Файл не найден, не читается или не проходит валидацию
        """
        path = self._resolve(path)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            self.logger.error(f"Scenario file not found: {path}")
            raise ScenarioError("scenario", f"file not found: {path}")
        except OSError as e:
            self.logger.error(f"Scenario file unreadable: {path}: {e}")
            raise ScenarioError("scenario", f"cannot read {path}: {e.strerror}")

        cfg = scenario_service.load_scenario(data)
        digest = scenario_service.scenario_digest(data)
        self.logger.info(f"Scenario loaded from {path}, digest {digest[:8]}")
        return cfg, digest

    def save(self, cfg: ScenarioConfig, path: Union[str, Path]) -> Path:
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(scenario_service.dump_scenario(cfg))
        self.logger.debug(f"Scenario written to {path}")
        return path
