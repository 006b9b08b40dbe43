from pydantic_settings import BaseSettings
from functools import lru_cache
from typing import Optional


class Settings(BaseSettings):
    # Логирование
    LOG_LEVEL: str = "INFO"

    # Внешний цикл чередующейся оптимизации
    OUTER_TOL: float = 1e-4
    MAX_OUTER: int = 50
    # Сколько шагов подряд без улучшения допускается до остановки
    OUTER_PATIENCE: int = 2

    # Барьерный решатель
    SOLVER_TOL: float = 1e-6
    SOLVER_MAX_ITER: int = 500
    BARRIER_MU: float = 10.0

    # Дробное программирование
    DINKELBACH_TOL: float = 1e-6
    DINKELBACH_MAX_UPDATES: int = 50

    # Внутренняя точка для SCA
    SLACK_INFLATION: float = 1e-3
    ACCEL_SMOOTHING: float = 1e-3

    # Брокер для распределенного sweep (None - задачи выполняются на месте)
    SWEEP_BROKER_URL: Optional[str] = None

    # Временные метки в manifest.json ломают побайтовую воспроизводимость
    RECORD_TIMESTAMPS: bool = False

    class Config:
        extra = "ignore"
        env_prefix = "URIS_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache()
def get_settings():
    return Settings()


settings = get_settings()
