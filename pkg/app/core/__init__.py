from app.core.version import __version__