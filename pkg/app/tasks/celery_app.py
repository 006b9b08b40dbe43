from celery import Celery

from app.core.config import get_settings
from app.core.logging import setup_logger

settings = get_settings()
logger = setup_logger("app.tasks.celery_app")

broker_url = settings.SWEEP_BROKER_URL

# Проверка подключения к Redis, если sweep раздается внешним воркерам
if broker_url and broker_url.startswith("redis://"):
    import redis

    try:
        redis_client = redis.Redis.from_url(broker_url, socket_connect_timeout=5)
        redis_client.ping()
        logger.info(f"Успешное подключение к Redis по адресу {broker_url}")
    except Exception as e:
        logger.error(f"Ошибка подключения к Redis: {str(e)}")
        # Не выбрасываем исключение, продолжаем инициализацию

celery_app = Celery(
    "uris_mec_tasks",
    broker=broker_url or "memory://",
    backend=broker_url or "cache+memory://",
    include=["app.tasks.sweep_tasks"],
)

celery_app.conf.task_routes = {
    "app.tasks.sweep_tasks.*": {"queue": "sweep_queue"},
}

celery_app.conf.update(
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    timezone="UTC",
    enable_utc=True,
    broker_connection_retry_on_startup=True,
    # Без брокера точки sweep считаются на месте, в порядке отправки
    task_always_eager=broker_url is None,
    task_eager_propagates=True,
)


def is_eager() -> bool:
    return bool(celery_app.conf.task_always_eager)
