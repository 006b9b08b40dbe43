from app.core.version import __version__

__all__ = ["__version__", "commands", "core", "models", "repositories", "services", "tasks"]
